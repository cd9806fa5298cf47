//! Geomagnetic field samples, the onboard dipole model and frame bookkeeping.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::Vector3;

use crate::dynamics::{Quaternion, UNIT_TOLERANCE};
use crate::orbit::{propagate_orbit, KeplerianElements};
use crate::{Error, Result};

/// Earth dipole strength `M_e = 8.1e25 G·cm³` expressed in T·m³.
pub const EARTH_DIPOLE_T_M3: f64 = 8.1e15;

/// Plausible field magnitudes for low Earth orbit, tesla.
pub const LEO_FIELD_BAND: (f64, f64) = (1e-6, 1e-4);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Orbital,
    Body,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frame::Orbital => f.write_str("orbital"),
            Frame::Body => f.write_str("body"),
        }
    }
}

/// Field vector in tesla tagged with its frame and the time (s since the
/// scenario epoch) it refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticFieldSample {
    pub b: Vector3<f64>,
    pub frame: Frame,
    pub t: f64,
}

impl MagneticFieldSample {
    pub fn orbital(b: Vector3<f64>, t: f64) -> Self {
        Self { b, frame: Frame::Orbital, t }
    }

    pub fn body(b: Vector3<f64>, t: f64) -> Self {
        Self { b, frame: Frame::Body, t }
    }

    pub fn expect_frame(&self, expected: Frame) -> Result<()> {
        if self.frame == expected {
            Ok(())
        } else {
            Err(Error::Frame { expected, found: self.frame })
        }
    }

    pub fn in_leo_band(&self) -> bool {
        let n = self.b.norm();
        n.is_finite() && n >= LEO_FIELD_BAND.0 && n <= LEO_FIELD_BAND.1
    }
}

/// Anything that can report the geomagnetic field along the orbit, in the
/// orbital frame, at `t` seconds after the scenario epoch.
pub trait FieldModel {
    fn field(&self, t: f64) -> Result<MagneticFieldSample>;
}

impl<M: FieldModel + ?Sized> FieldModel for &M {
    fn field(&self, t: f64) -> Result<MagneticFieldSample> {
        (**self).field(t)
    }
}

/// Centered, non-tilted dipole evaluated along a Keplerian orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleFieldModel {
    pub elements: KeplerianElements,
}

impl DipoleFieldModel {
    pub fn new(elements: KeplerianElements) -> Self {
        Self { elements }
    }
}

impl FieldModel for DipoleFieldModel {
    fn field(&self, t: f64) -> Result<MagneticFieldSample> {
        dipole_field(&self.elements, t)
    }
}

/// Dipole field in the orbital frame:
/// `B₀ = D_m [3/2 sin i sin 2η, -3/2 sin i (cos 2η - 1/3), -cos i]` with
/// `D_m = -M_e / r³`.
pub fn dipole_field(el: &KeplerianElements, t: f64) -> Result<MagneticFieldSample> {
    let pos = propagate_orbit(el, t)?;
    let r_m = pos.radius_km * 1e3;
    let d_m = -EARTH_DIPOLE_T_M3 / (r_m * r_m * r_m);
    Ok(MagneticFieldSample::orbital(dipole_components(d_m, el.inclination_deg, pos.arg_latitude_deg), t))
}

pub(crate) fn dipole_components(d_m: f64, inclination_deg: f64, eta_deg: f64) -> Vector3<f64> {
    let (si, ci) = inclination_deg.to_radians().sin_cos();
    let (s2, c2) = (2.0 * eta_deg.to_radians()).sin_cos();
    Vector3::new(1.5 * si * s2, -1.5 * si * (c2 - 1.0 / 3.0), -ci) * d_m
}

/// Rotates an orbital-frame sample into the body frame described by `q`.
pub fn field_to_body(b: &MagneticFieldSample, q: &Quaternion) -> Result<MagneticFieldSample> {
    b.expect_frame(Frame::Orbital)?;
    if !q.is_unit(UNIT_TOLERANCE) {
        return Err(Error::InvalidState("attitude quaternion is not unit norm"));
    }
    Ok(MagneticFieldSample::body(q.attitude_matrix() * b.b, b.t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldComparison {
    pub t: f64,
    pub dipole: Vector3<f64>,
    pub truth: Vector3<f64>,
}

/// Samples both models at `0, step, 2 step, ...` strictly below `duration`.
pub fn compare_field_models(
    dipole: &dyn FieldModel,
    truth: &dyn FieldModel,
    duration: f64,
    step: f64,
) -> Result<Vec<FieldComparison>> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("comparison step must be positive"));
    }
    if !(duration > 0.0) {
        return Ok(Vec::new());
    }
    let count = (duration / step - 1e-9).ceil() as usize;
    (0..count)
        .map(|k| {
            let t = k as f64 * step;
            Ok(FieldComparison { t, dipole: dipole.field(t)?.b, truth: truth.field(t)?.b })
        })
        .collect()
}
