use crate::field::Frame;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("expected a field sample in the {expected} frame, got {found}")]
    Frame { expected: Frame, found: Frame },
    #[error("propagation failed: {0}")]
    Propagation(&'static str),
    #[error("magnetic field too weak to allocate a dipole moment (|B| = {0:e} T)")]
    DegenerateField(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),
    #[error("horizon rollout produced a non-finite state at step {0}")]
    Rollout(usize),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
}
