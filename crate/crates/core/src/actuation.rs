//! Magnetorquer allocation algebra and the averaged controllability audit.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};

use crate::field::{Frame, MagneticFieldSample};
use crate::{Error, Result};

/// Below this field strength the pseudoinverse allocation is refused.
pub const DEGENERATE_FIELD: f64 = 1e-7;

/// Magnetic dipole moment in A·m², body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DipoleMoment(pub Vector3<f64>);

impl DipoleMoment {
    pub fn new(mx: f64, my: f64, mz: f64) -> Self {
        Self(Vector3::new(mx, my, mz))
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }

    /// Clamps every component to `[-u_max, u_max]`.
    pub fn saturated(&self, u_max: f64) -> Self {
        Self(self.0.map(|m| m.clamp(-u_max, u_max)))
    }
}

/// The controller output for one sample: dipole moment plus the dummy inputs
/// that turn `|m_k| <= u_max` into `m_k² + v_k² = u_max²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    pub moment: DipoleMoment,
    pub dummy: Vector3<f64>,
}

impl ControlCommand {
    /// Largest `|m_k² + v_k² - u_max²|` over the three axes.
    pub fn constraint_violation(&self, u_max: f64) -> f64 {
        (0..3)
            .map(|k| (self.moment.0[k].powi(2) + self.dummy[k].powi(2) - u_max * u_max).abs())
            .fold(0.0, f64::max)
    }
}

/// `S(v)` with the sign layout `S(B) m = m × B`.
#[rustfmt::skip]
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0,   v.z, -v.y,
        -v.z,  0.0,  v.x,
        v.y,  -v.x,  0.0,
    )
}

pub fn torque_from_moment(m: &DipoleMoment, b: &MagneticFieldSample) -> Result<Vector3<f64>> {
    b.expect_frame(Frame::Body)?;
    let (m, b) = (&m.0, &b.b);
    Ok(Vector3::new(m.y * b.z - m.z * b.y, m.z * b.x - m.x * b.z, m.x * b.y - m.y * b.x))
}

/// Minimum-norm dipole moment for a desired torque `u`:
/// `m = S(B)ᵀ u / |B|²`. The realized torque is `ψ₃(b) u`.
pub fn moment_from_command(u: &Vector3<f64>, b: &MagneticFieldSample) -> Result<DipoleMoment> {
    b.expect_frame(Frame::Body)?;
    let n2 = b.b.norm_squared();
    let n = n2.sqrt();
    if !(n > DEGENERATE_FIELD) {
        return Err(Error::DegenerateField(n));
    }
    Ok(DipoleMoment(skew(&b.b).transpose() * u / n2))
}

/// `ψ₃(b) = S(b) S(b)ᵀ` for a unit vector `b`.
#[rustfmt::skip]
pub fn psi3(b: &Vector3<f64>) -> Result<Matrix3<f64>> {
    if (b.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("psi3 needs a unit field direction"));
    }
    let (x, y, z) = (b.x, b.y, b.z);
    Ok(Matrix3::new(
        y * y + z * z, -y * x,        -x * z,
        -y * x,        x * x + z * z, -y * z,
        -x * z,        -y * z,        y * y + x * x,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Psi3Average {
    pub matrix: Matrix3<f64>,
    /// Ascending.
    pub eigenvalues: Vector3<f64>,
    pub min_eigenvalue: f64,
    pub span: f64,
}

/// Minimum number of samples accepted by [`average_psi3`].
pub const MIN_AVERAGE_SAMPLES: usize = 100;

/// Time average of `ψ₃(b(t))` over the samples (trapezoidal rule on the
/// sample times). Any frame is accepted as long as all samples share it.
/// `required_span` is the shortest time span accepted, normally one orbital
/// period.
pub fn average_psi3(samples: &[MagneticFieldSample], required_span: f64) -> Result<Psi3Average> {
    if samples.len() < MIN_AVERAGE_SAMPLES {
        return Err(Error::InsufficientData("psi3 average needs at least 100 field samples"));
    }
    let frame = samples[0].frame;
    if let Some(s) = samples.iter().find(|s| s.frame != frame) {
        return Err(Error::Frame { expected: frame, found: s.frame });
    }
    let span = samples[samples.len() - 1].t - samples[0].t;
    if !(span > 0.0) || span < required_span * (1.0 - 1e-12) {
        return Err(Error::InsufficientData("field samples do not span the requested interval"));
    }
    let psis = samples
        .iter()
        .map(|s| {
            let n = s.b.norm();
            if n > 0.0 {
                psi3(&(s.b / n))
            } else {
                Err(Error::DegenerateField(n))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = Matrix3::zeros();
    for k in 1..samples.len() {
        let dt = samples[k].t - samples[k - 1].t;
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("field sample times must increase"));
        }
        acc += (psis[k] + psis[k - 1]) * (0.5 * dt);
    }
    let matrix = acc / span;
    let mut eigenvalues = matrix.symmetric_eigenvalues();
    eigenvalues.as_mut_slice().sort_by(f64::total_cmp);
    Ok(Psi3Average { matrix, min_eigenvalue: eigenvalues[0], eigenvalues, span })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    fn body(b: Vector3<f64>) -> MagneticFieldSample {
        MagneticFieldSample::body(b, 0.0)
    }

    #[test]
    fn skew_examples() {
        assert_eq!(skew(&Vector3::zeros()), Matrix3::zeros());
        let s = skew(&Vector3::z());
        assert_eq!(s, Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        let v = Vector3::new(0.3, -1.2, 2.5);
        assert_eq!(skew(&v) + skew(&v).transpose(), Matrix3::zeros());
    }

    #[test]
    fn skew_times_moment_is_moment_cross_field() {
        let b = Vector3::new(1.5e-5, -2.0e-5, 0.7e-5);
        let m = Vector3::new(0.05, 0.02, -0.08);
        assert_relative_eq!(skew(&b) * m, m.cross(&b), epsilon = 1e-20);
    }

    #[test]
    fn torque_examples() {
        let t = torque_from_moment(&DipoleMoment::new(1.0, 0.0, 0.0), &body(Vector3::new(0.0, 1e-5, 0.0))).unwrap();
        assert_eq!(t, Vector3::new(0.0, 0.0, 1e-5));
        let b = Vector3::new(1e-5, -2e-5, 3e-5);
        let t = torque_from_moment(&DipoleMoment(b * 1e4), &body(b)).unwrap();
        assert_eq!(t, Vector3::zeros());
        let orbital = MagneticFieldSample::orbital(b, 0.0);
        assert!(matches!(torque_from_moment(&DipoleMoment::zero(), &orbital), Err(Error::Frame { .. })));
    }

    #[test]
    fn allocation_along_field_is_unactuatable() {
        let b = body(Vector3::new(1e-5, 2e-5, -2e-5));
        let m = moment_from_command(&(b.b * 1e3), &b).unwrap();
        let t = torque_from_moment(&m, &b).unwrap();
        assert!(t.norm() < 1e-24);
    }

    #[test]
    fn allocation_perpendicular_to_field_is_exact() {
        let b = body(Vector3::new(0.0, 0.0, 3e-5));
        let u = Vector3::new(2e-6, 0.0, 0.0);
        let m = moment_from_command(&u, &b).unwrap();
        assert_relative_eq!(torque_from_moment(&m, &b).unwrap(), u, epsilon = 1e-20);
        assert_eq!(m.0.dot(&b.b), 0.0);
    }

    #[test]
    fn allocation_refuses_weak_field() {
        let b = body(Vector3::new(0.0, 5e-8, 0.0));
        assert!(matches!(moment_from_command(&Vector3::x(), &b), Err(Error::DegenerateField(_))));
    }

    #[test]
    fn psi3_examples() {
        assert_eq!(psi3(&Vector3::z()).unwrap(), Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0)));
        let b = Vector3::new(0.48, -0.6, 0.64);
        let p = psi3(&b).unwrap();
        assert_relative_eq!(p.trace(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(p * b, Vector3::zeros(), epsilon = 1e-15);
        assert_relative_eq!(p, skew(&b) * skew(&b).transpose(), epsilon = 1e-15);
        assert!(psi3(&Vector3::new(1.0, 1.0, 0.0)).is_err());
    }

    fn circle(n: usize, period: f64) -> Vec<MagneticFieldSample> {
        (0..=n)
            .map(|k| {
                let t = period * k as f64 / n as f64;
                let a = 2.0 * PI * t / period;
                MagneticFieldSample::orbital(Vector3::new(a.cos(), a.sin(), 0.0) * 3e-5, t)
            })
            .collect()
    }

    #[test]
    fn constant_direction_average_is_singular() {
        let samples: Vec<_> = (0..200).map(|k| MagneticFieldSample::orbital(Vector3::new(0.0, 2e-5, 2e-5), k as f64)).collect();
        let avg = average_psi3(&samples, 100.0).unwrap();
        assert!(avg.min_eigenvalue.abs() < 1e-12);
        assert_relative_eq!(avg.eigenvalues[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn great_circle_average_matches_closed_form() {
        // The integral of b bᵀ over a full circle in the x-y plane is diag(1/2, 1/2, 0).
        let avg = average_psi3(&circle(720, 5400.0), 5400.0).unwrap();
        assert_relative_eq!(avg.matrix, Matrix3::from_diagonal(&Vector3::new(0.5, 0.5, 1.0)), epsilon = 1e-12);
        assert_relative_eq!(avg.min_eigenvalue, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn average_rejects_short_inputs() {
        assert!(matches!(average_psi3(&circle(50, 100.0), 100.0), Err(Error::InsufficientData(_))));
        assert!(matches!(average_psi3(&circle(200, 100.0), 1000.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn constraint_violation_of_circle_point() {
        let c = ControlCommand { moment: DipoleMoment::new(0.06, 0.0, -0.1), dummy: Vector3::new(0.08, 0.1, 0.0) };
        assert!(c.constraint_violation(0.1) < 1e-15);
    }
}
