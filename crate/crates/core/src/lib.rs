//! Attitude dynamics, geomagnetic field models, continuation/GMRES nonlinear
//! model predictive control and seven-level PWM quantization for small
//! satellites actuated only by magnetorquers.
//!
//! The crate is `no_std` (it needs `alloc`) so the controller pieces can be
//! reused on flight hardware. File formats, the CLI and everything that
//! touches the filesystem live in the `magnmpc` companion crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod actuation;
pub mod cgmres;
pub mod dynamics;
mod error;
pub mod field;
pub mod gmres;
pub mod igrf;
pub mod nmpc;
pub mod orbit;
pub mod pwm;
pub mod sim;

pub use error::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;
