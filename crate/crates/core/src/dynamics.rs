//! Rigid-body rotational kinematics and dynamics.
//!
//! The attitude is a scalar-last unit quaternion `q = [q1, q2, q3, q4]`
//! describing the body frame relative to the orbital frame, and the angular
//! velocity is expressed in body axes. Principal axes are assumed aligned with
//! the body frame, so the inertia tensor is diagonal.

use nalgebra::{Matrix3, Matrix4x3, SVector, Vector3, Vector4};

use crate::actuation::DipoleMoment;
use crate::field::{Frame, MagneticFieldSample};
use crate::{Error, Result};

/// `x = [q1, q2, q3, q4, wx, wy, wz]`.
pub type StateVector = SVector<f64, 7>;

/// Norm tolerance accepted by operations that require a unit quaternion.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Plant sanity bound on the angular rate magnitude.
pub const MAX_ANGULAR_RATE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    /// Scalar part.
    pub q4: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { q1: 0.0, q2: 0.0, q3: 0.0, q4: 1.0 };

    /// Normalizes the components and fixes the sign so that `q4 >= 0`.
    pub fn new(q1: f64, q2: f64, q3: f64, q4: f64) -> Result<Self> {
        let v = Vector4::new(q1, q2, q3, q4);
        let n = v.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::InvalidState("quaternion has zero or non-finite norm"));
        }
        let sign = if q4 < 0.0 { -1.0 } else { 1.0 };
        Ok(Self::from_vector(v * (sign / n)))
    }

    /// Unit quaternion for a rotation of `angle` radians about `axis`.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Result<Self> {
        let n = axis.norm();
        if n < 1e-12 {
            return Err(Error::InvalidParameter("rotation axis has zero length"));
        }
        let (s, c) = (angle / 2.0).sin_cos();
        let a = axis * (s / n);
        Ok(Self { q1: a.x, q2: a.y, q3: a.z, q4: c })
    }

    pub fn from_vector(v: Vector4<f64>) -> Self {
        Self { q1: v[0], q2: v[1], q3: v[2], q4: v[3] }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.q1, self.q2, self.q3, self.q4)
    }

    pub fn vector_part(&self) -> Vector3<f64> {
        Vector3::new(self.q1, self.q2, self.q3)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    /// Rescales to unit norm without touching the sign.
    pub fn renormalized(&self) -> Self {
        Self::from_vector(self.to_vector().normalize())
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// Direction-cosine matrix taking orbital-frame components to body-frame
    /// components. Consistent with `q̇ = E(q)ω` from [`kinematics_matrix`].
    pub fn attitude_matrix(&self) -> Matrix3<f64> {
        let v = self.vector_part();
        let s = self.q4;
        Matrix3::identity() * (s * s - v.norm_squared()) + v * v.transpose() * 2.0
            - v.cross_matrix() * (2.0 * s)
    }

    /// Rotation angle in `[0, π]` separating this attitude from the identity.
    pub fn angle(&self) -> f64 {
        2.0 * self.vector_part().norm().atan2(self.q4.abs())
    }
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Body angular velocity in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AngularVelocity(pub Vector3<f64>);

impl AngularVelocity {
    pub fn new(wx: f64, wy: f64, wz: f64) -> Self {
        Self(Vector3::new(wx, wy, wz))
    }

    pub fn from_deg_per_s(wx: f64, wy: f64, wz: f64) -> Self {
        Self::new(wx.to_radians(), wy.to_radians(), wz.to_radians())
    }

    pub fn is_sane(&self) -> bool {
        self.0.iter().all(|w| w.is_finite()) && self.0.norm() < MAX_ANGULAR_RATE
    }
}

/// Principal moments of inertia in kg·m².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaTensor {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl InertiaTensor {
    pub fn new(jx: f64, jy: f64, jz: f64) -> Result<Self> {
        if !(jx > 0.0 && jy > 0.0 && jz > 0.0) || !(jx.is_finite() && jy.is_finite() && jz.is_finite()) {
            return Err(Error::InvalidParameter("principal moments of inertia must be positive"));
        }
        if jx + jy < jz || jy + jz < jx || jz + jx < jy {
            return Err(Error::InvalidParameter("principal moments violate the triangle inequality"));
        }
        Ok(Self { jx, jy, jz })
    }

    pub fn diagonal(&self) -> Vector3<f64> {
        Vector3::new(self.jx, self.jy, self.jz)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.diagonal())
    }

    /// Coefficients of the gyroscopic terms: `ω̇x = gx ωy ωz` and cyclic.
    pub fn gyroscopic_coefficients(&self) -> Vector3<f64> {
        Vector3::new(
            (self.jy - self.jz) / self.jx,
            (self.jz - self.jx) / self.jy,
            (self.jx - self.jy) / self.jz,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SatelliteState {
    pub q: Quaternion,
    pub w: AngularVelocity,
}

impl SatelliteState {
    pub fn new(q: Quaternion, w: AngularVelocity) -> Self {
        Self { q, w }
    }

    pub fn to_vector(&self) -> StateVector {
        StateVector::from_column_slice(&[self.q.q1, self.q.q2, self.q.q3, self.q.q4, self.w.0.x, self.w.0.y, self.w.0.z])
    }

    /// Reads the components verbatim; no normalization.
    pub fn from_vector(x: &StateVector) -> Self {
        Self {
            q: Quaternion { q1: x[0], q2: x[1], q3: x[2], q4: x[3] },
            w: AngularVelocity::new(x[4], x[5], x[6]),
        }
    }

    pub fn kinetic_energy(&self, j: &InertiaTensor) -> f64 {
        0.5 * self.w.0.dot(&j.diagonal().component_mul(&self.w.0))
    }

    /// Angular momentum expressed in the orbital frame.
    pub fn angular_momentum_orbital(&self, j: &InertiaTensor) -> Vector3<f64> {
        self.q.attitude_matrix().transpose() * j.diagonal().component_mul(&self.w.0)
    }
}

/// `E(q)` of the quaternion kinematics `q̇ = E(q) ω`.
pub fn kinematics_matrix(q: &Quaternion) -> Result<Matrix4x3<f64>> {
    if !q.is_unit(UNIT_TOLERANCE) {
        return Err(Error::InvalidState("kinematics matrix needs a unit quaternion"));
    }
    Ok(kinematics_matrix_unchecked(q.q1, q.q2, q.q3, q.q4))
}

#[rustfmt::skip]
pub(crate) fn kinematics_matrix_unchecked(q1: f64, q2: f64, q3: f64, q4: f64) -> Matrix4x3<f64> {
    Matrix4x3::new(
         q4, -q3,  q2,
         q3,  q4, -q1,
        -q2,  q1,  q4,
        -q1, -q2, -q3,
    ) * 0.5
}

/// Right-hand side `f(x, m)` for a body-frame field `b_body` in tesla. No
/// unit-norm check; used on the prediction horizon where the Euler rollout
/// does not preserve the norm.
pub fn dynamics(x: &StateVector, m: &Vector3<f64>, b_body: &Vector3<f64>, j: &InertiaTensor) -> StateVector {
    let w = Vector3::new(x[4], x[5], x[6]);
    let q_dot = kinematics_matrix_unchecked(x[0], x[1], x[2], x[3]) * w;
    let g = j.gyroscopic_coefficients();
    let torque = m.cross(b_body);
    let w_dot = Vector3::new(
        g.x * w.y * w.z + torque.x / j.jx,
        g.y * w.z * w.x + torque.y / j.jy,
        g.z * w.x * w.y + torque.z / j.jz,
    );
    let mut out = StateVector::zeros();
    out.fixed_rows_mut::<4>(0).copy_from(&q_dot);
    out.fixed_rows_mut::<3>(4).copy_from(&w_dot);
    out
}

/// Time derivative of the 7-state under the dipole moment `m` and the
/// body-frame field sample `b_body`.
pub fn state_derivative(
    x: &SatelliteState,
    m: &DipoleMoment,
    b_body: &MagneticFieldSample,
    j: &InertiaTensor,
) -> Result<StateVector> {
    b_body.expect_frame(Frame::Body)?;
    if !x.q.is_unit(UNIT_TOLERANCE) {
        return Err(Error::InvalidState("state quaternion is not unit norm"));
    }
    Ok(dynamics(&x.to_vector(), &m.0, &b_body.b, j))
}

/// One classical fourth-order Runge–Kutta step of length `dt` starting at
/// time `t`. `rhs(t, x)` supplies the derivative, typically closing over a
/// held dipole moment and a field model. The quaternion is renormalized after
/// the step.
pub fn rk4_step<F>(x: &SatelliteState, t: f64, dt: f64, mut rhs: F) -> Result<SatelliteState>
where
    F: FnMut(f64, &StateVector) -> Result<StateVector>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("integration step must be positive"));
    }
    let x0 = x.to_vector();
    let mut stage = |t: f64, x: &StateVector| -> Result<StateVector> {
        let d = rhs(t, x)?;
        if d.iter().all(|v| v.is_finite()) {
            Ok(d)
        } else {
            Err(Error::Propagation("non-finite state derivative"))
        }
    };
    let k1 = stage(t, &x0)?;
    let k2 = stage(t + dt / 2.0, &(x0 + k1 * (dt / 2.0)))?;
    let k3 = stage(t + dt / 2.0, &(x0 + k2 * (dt / 2.0)))?;
    let k4 = stage(t + dt, &(x0 + k3 * dt))?;
    let x1 = x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let mut next = SatelliteState::from_vector(&x1);
    next.q = next.q.renormalized();
    Ok(next)
}
