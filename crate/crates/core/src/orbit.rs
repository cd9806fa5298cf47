//! Two-body Keplerian propagation and the orbit-plane reference frame.
//!
//! The orbital frame used throughout the crate is fixed to the orbit plane:
//! `x` points at the ascending node, `z` along the orbit normal (angular
//! momentum) and `y = z × x` completes the triad inside the plane. The dipole
//! field model takes its familiar `sin 2η` / `cos 2η` form in this frame, with
//! `η` the argument of latitude.

use core::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::{Error, Result};

/// Earth gravitational parameter, km³/s².
pub const MU_EARTH: f64 = 398_600.4418;
/// Mean Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

const KEPLER_MAX_ITER: usize = 50;
const KEPLER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeplerianElements {
    pub semi_major_axis_km: f64,
    pub eccentricity: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub arg_perigee_deg: f64,
    /// Mean anomaly at `t = 0`.
    pub mean_anomaly_deg: f64,
}

fn wrap_deg(a: f64) -> f64 {
    let w = a.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

impl KeplerianElements {
    pub fn new(
        semi_major_axis_km: f64,
        eccentricity: f64,
        inclination_deg: f64,
        raan_deg: f64,
        arg_perigee_deg: f64,
        mean_anomaly_deg: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&eccentricity) {
            return Err(Error::InvalidParameter("eccentricity must lie in [0, 1)"));
        }
        if !(semi_major_axis_km > EARTH_RADIUS_KM) || !semi_major_axis_km.is_finite() {
            return Err(Error::InvalidParameter("semi-major axis must exceed the Earth radius"));
        }
        let angles = [inclination_deg, raan_deg, arg_perigee_deg, mean_anomaly_deg];
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("orbital angles must be finite"));
        }
        Ok(Self {
            semi_major_axis_km,
            eccentricity,
            inclination_deg: wrap_deg(inclination_deg),
            raan_deg: wrap_deg(raan_deg),
            arg_perigee_deg: wrap_deg(arg_perigee_deg),
            mean_anomaly_deg: wrap_deg(mean_anomaly_deg),
        })
    }

    /// The sun-synchronous orbit used by the shipped scenarios.
    pub fn sun_synchronous() -> Self {
        Self::new(6691.6, 0.046440, 96.700, 100.90, 119.70, 240.49).expect("valid elements")
    }

    /// rad/s
    pub fn mean_motion(&self) -> f64 {
        (MU_EARTH / self.semi_major_axis_km.powi(3)).sqrt()
    }

    /// s
    pub fn period(&self) -> f64 {
        2.0 * PI / self.mean_motion()
    }

    /// Rotation taking ECI components to orbital-frame components (rows are
    /// the orbital axes in ECI).
    pub fn eci_to_orbital(&self) -> Matrix3<f64> {
        let (so, co) = self.raan_deg.to_radians().sin_cos();
        let (si, ci) = self.inclination_deg.to_radians().sin_cos();
        let x = Vector3::new(co, so, 0.0);
        let z = Vector3::new(so * si, -co * si, ci);
        let y = z.cross(&x);
        Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitPosition {
    pub radius_km: f64,
    /// True anomaly in `[0, 360)`.
    pub true_anomaly_deg: f64,
    /// Argument of latitude `η = θ + ω_e` in `[0, 360)`.
    pub arg_latitude_deg: f64,
    pub eccentric_anomaly_rad: f64,
}

impl OrbitPosition {
    /// Position in the orbital frame, km.
    pub fn orbital_position(&self) -> Vector3<f64> {
        let (s, c) = self.arg_latitude_deg.to_radians().sin_cos();
        Vector3::new(c, s, 0.0) * self.radius_km
    }
}

/// Newton solve of `E - e sin E = M`, starting from `E = M`.
pub fn solve_kepler(mean_anomaly_rad: f64, e: f64) -> Result<f64> {
    let m = mean_anomaly_rad.rem_euclid(2.0 * PI);
    let mut ecc = m;
    for _ in 0..KEPLER_MAX_ITER {
        let f = ecc - e * ecc.sin() - m;
        let step = f / (1.0 - e * ecc.cos());
        ecc -= step;
        if step.abs() < KEPLER_TOL {
            return Ok(ecc);
        }
    }
    Err(Error::Propagation("Kepler iteration did not converge in 50 Newton steps"))
}

/// Two-body position `t` seconds after the element epoch.
pub fn propagate_orbit(el: &KeplerianElements, t: f64) -> Result<OrbitPosition> {
    if !t.is_finite() {
        return Err(Error::Propagation("non-finite propagation time"));
    }
    let e = el.eccentricity;
    let m = el.mean_anomaly_deg.to_radians() + el.mean_motion() * t;
    let ecc = solve_kepler(m, e)?;
    let (s, c) = (ecc / 2.0).sin_cos();
    let theta = 2.0 * ((1.0 + e).sqrt() * s).atan2((1.0 - e).sqrt() * c);
    let true_anomaly_deg = wrap_deg(theta.to_degrees());
    Ok(OrbitPosition {
        radius_km: el.semi_major_axis_km * (1.0 - e * ecc.cos()),
        true_anomaly_deg,
        arg_latitude_deg: wrap_deg(true_anomaly_deg + el.arg_perigee_deg),
        eccentric_anomaly_rad: ecc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Bisection on `E - e sin E - M`, which is monotone in `E`.
    fn kepler_bisection(m: f64, e: f64) -> f64 {
        let m = m.rem_euclid(2.0 * PI);
        let (mut lo, mut hi) = (0.0, 2.0 * PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - e * mid.sin() - m > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn circular_orbit_at_epoch() {
        let el = KeplerianElements::new(7000.0, 0.0, 45.0, 0.0, 0.0, 0.0).unwrap();
        let p = propagate_orbit(&el, 0.0).unwrap();
        assert_eq!(p.true_anomaly_deg, 0.0);
        assert_eq!(p.radius_km, 7000.0);
    }

    #[test]
    fn table_orbit_matches_bisection_oracle() {
        let el = KeplerianElements::sun_synchronous();
        let p = propagate_orbit(&el, 0.0).unwrap();
        let ecc = kepler_bisection(240.49f64.to_radians(), el.eccentricity);
        assert_relative_eq!(p.eccentric_anomaly_rad, ecc, epsilon = 1e-12);
        assert_relative_eq!(p.radius_km, 6691.6 * (1.0 - 0.046440 * ecc.cos()), epsilon = 1e-9);
        // Frozen from the bisection oracle.
        assert_relative_eq!(p.radius_km, 6855.227009, epsilon = 1e-6);
    }

    #[test]
    fn apoapsis_symmetry() {
        let el = KeplerianElements::new(6691.6, 0.046440, 96.7, 0.0, 0.0, 180.0).unwrap();
        let p = propagate_orbit(&el, 0.0).unwrap();
        assert_relative_eq!(p.true_anomaly_deg, 180.0, epsilon = 1e-10);
        assert_relative_eq!(p.radius_km, 6691.6 * (1.0 + 0.046440), epsilon = 1e-9);
    }

    #[test]
    fn true_anomaly_increases_and_radius_stays_bounded() {
        let el = KeplerianElements::sun_synchronous();
        let period = el.period();
        let a = el.semi_major_axis_km;
        let e = el.eccentricity;
        let mut unwrapped = 0.0;
        let mut last = propagate_orbit(&el, 0.0).unwrap().true_anomaly_deg;
        for k in 1..=600 {
            let p = propagate_orbit(&el, period * k as f64 / 600.0).unwrap();
            let mut d = p.true_anomaly_deg - last;
            if d < 0.0 {
                d += 360.0;
            }
            assert!(d > 0.0);
            unwrapped += d;
            last = p.true_anomaly_deg;
            assert!(p.radius_km >= a * (1.0 - e) - 1e-9 && p.radius_km <= a * (1.0 + e) + 1e-9);
        }
        assert_relative_eq!(unwrapped, 360.0, epsilon = 1e-6);
    }

    #[test]
    fn kepler_matches_bisection_across_anomalies() {
        for k in 0..100 {
            let m = k as f64 * 0.0631;
            for e in [0.0, 0.1, 0.5, 0.9] {
                assert_relative_eq!(solve_kepler(m, e).unwrap(), kepler_bisection(m, e), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn element_validation() {
        assert!(KeplerianElements::new(7000.0, 1.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(KeplerianElements::new(6000.0, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
        let el = KeplerianElements::new(7000.0, 0.0, 0.0, -30.0, 720.0, 0.0).unwrap();
        assert_eq!(el.raan_deg, 330.0);
        assert_eq!(el.arg_perigee_deg, 0.0);
    }

    #[test]
    fn orbital_frame_is_orthonormal_and_contains_the_orbit() {
        let el = KeplerianElements::sun_synchronous();
        let r = el.eci_to_orbital();
        assert_relative_eq!(r * r.transpose(), Matrix3::identity(), epsilon = 1e-15);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-15);
        // The orbit normal makes the inclination angle with the ECI pole.
        assert_relative_eq!(r[(2, 2)], el.inclination_deg.to_radians().cos(), epsilon = 1e-15);
    }
}
