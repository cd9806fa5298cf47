//! Spherical-harmonic synthesis of the International Geomagnetic Reference
//! Field and its evaluation along an orbit.
//!
//! Coefficients are Schmidt semi-normalized Gauss coefficients in nT. The
//! synthesis uses the geocentric spherical approximation (no geodetic
//! correction). Parsing the published coefficient tables lives in the
//! `magnmpc` crate; this module only holds the numbers.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};

use crate::field::{FieldModel, MagneticFieldSample};
use crate::orbit::{propagate_orbit, KeplerianElements};
use crate::{Error, Result};

/// IGRF reference radius, km.
pub const REFERENCE_RADIUS_KM: f64 = 6371.2;
/// Earth rotation rate, rad/s.
pub const EARTH_ROTATION_RATE: f64 = 7.292_115_146_706_979e-5;
const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;
const MIN_RADIUS_KM: f64 = 3000.0;

#[inline]
fn index(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

/// One epoch of Gauss coefficients plus their linear rate of change.
#[derive(Debug, Clone, PartialEq)]
pub struct IgrfCoefficientSet {
    pub epoch: f64,
    pub max_degree: usize,
    g: Vec<f64>,
    h: Vec<f64>,
    g_rate: Vec<f64>,
    h_rate: Vec<f64>,
    /// Evaluations after this decimal year are secular-variation
    /// extrapolations.
    pub valid_until: f64,
}

impl IgrfCoefficientSet {
    /// All-zero coefficients up to `max_degree`.
    pub fn zeros(epoch: f64, max_degree: usize) -> Self {
        let len = index(max_degree + 1, 0);
        Self {
            epoch,
            max_degree,
            g: vec![0.0; len],
            h: vec![0.0; len],
            g_rate: vec![0.0; len],
            h_rate: vec![0.0; len],
            valid_until: epoch + 5.0,
        }
    }

    fn check(&self, n: usize, m: usize) -> Result<usize> {
        if n == 0 || n > self.max_degree || m > n {
            return Err(Error::InvalidParameter("Gauss coefficient index out of range"));
        }
        Ok(index(n, m))
    }

    /// Sets `g(n, m)` and `h(n, m)` in nT; `h(n, 0)` must be zero.
    pub fn set(&mut self, n: usize, m: usize, g: f64, h: f64) -> Result<()> {
        let k = self.check(n, m)?;
        if m == 0 && h != 0.0 {
            return Err(Error::InvalidParameter("h(n, 0) must be zero"));
        }
        self.g[k] = g;
        self.h[k] = h;
        Ok(())
    }

    /// Sets the secular variation of `g(n, m)` and `h(n, m)` in nT/yr.
    pub fn set_rate(&mut self, n: usize, m: usize, g_rate: f64, h_rate: f64) -> Result<()> {
        let k = self.check(n, m)?;
        self.g_rate[k] = g_rate;
        self.h_rate[k] = h_rate;
        Ok(())
    }

    pub fn g(&self, n: usize, m: usize) -> f64 {
        self.g[index(n, m)]
    }

    pub fn h(&self, n: usize, m: usize) -> f64 {
        self.h[index(n, m)]
    }

    /// nT/yr
    pub fn g_rate(&self, n: usize, m: usize) -> f64 {
        self.g_rate[index(n, m)]
    }

    /// nT/yr
    pub fn h_rate(&self, n: usize, m: usize) -> f64 {
        self.h_rate[index(n, m)]
    }

    /// Copy truncated to degree `max_degree` (no-op when already lower).
    pub fn truncated(&self, max_degree: usize) -> Self {
        let d = max_degree.min(self.max_degree);
        let len = index(d + 1, 0);
        Self {
            epoch: self.epoch,
            max_degree: d,
            g: self.g[..len].to_vec(),
            h: self.h[..len].to_vec(),
            g_rate: self.g_rate[..len].to_vec(),
            h_rate: self.h_rate[..len].to_vec(),
            valid_until: self.valid_until,
        }
    }

    pub fn is_extrapolating(&self, year: f64) -> bool {
        year > self.valid_until || year < self.epoch
    }
}

/// Coefficients for all published epochs; the last epoch carries the
/// predictive secular variation.
#[derive(Debug, Clone, PartialEq)]
pub struct IgrfTable {
    /// Ascending epochs.
    pub epochs: Vec<f64>,
    /// One set per epoch, each with rates pointing to the next epoch.
    sets: Vec<IgrfCoefficientSet>,
}

impl IgrfTable {
    /// `main[k]` are the coefficients of `epochs[k]`; `secular` is the rate
    /// table (nT/yr) applied after the last epoch.
    pub fn new(epochs: Vec<f64>, mut main: Vec<IgrfCoefficientSet>, secular: IgrfCoefficientSet) -> Result<Self> {
        if epochs.is_empty() || epochs.len() != main.len() {
            return Err(Error::InvalidParameter("IGRF table needs one coefficient set per epoch"));
        }
        if epochs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("IGRF epochs must increase"));
        }
        let last = epochs.len() - 1;
        for k in 0..main.len() {
            let (lo, hi) = main.split_at_mut(k + 1);
            let set = &mut lo[k];
            set.epoch = epochs[k];
            if k < last {
                let next = &hi[0];
                let span = epochs[k + 1] - epochs[k];
                // Degrees missing from one of the two epochs count as zero.
                let d = set.max_degree.max(next.max_degree);
                let mut widened = IgrfCoefficientSet::zeros(epochs[k], d);
                widened.g[..set.g.len()].copy_from_slice(&set.g);
                widened.h[..set.h.len()].copy_from_slice(&set.h);
                for i in 0..widened.g.len() {
                    let (gn, hn) = (next.g.get(i).copied().unwrap_or(0.0), next.h.get(i).copied().unwrap_or(0.0));
                    widened.g_rate[i] = (gn - widened.g[i]) / span;
                    widened.h_rate[i] = (hn - widened.h[i]) / span;
                }
                widened.valid_until = epochs[k + 1];
                *set = widened;
            } else {
                let n = secular.g_rate.len().min(set.g_rate.len());
                set.g_rate[..n].copy_from_slice(&secular.g_rate[..n]);
                set.h_rate[..n].copy_from_slice(&secular.h_rate[..n]);
                set.valid_until = epochs[k] + 5.0;
            }
        }
        Ok(Self { epochs, sets: main })
    }

    /// The coefficient set whose interval contains `year`. Years past the last
    /// epoch return the last set, flagged through
    /// [`IgrfCoefficientSet::is_extrapolating`].
    pub fn at(&self, year: f64) -> Result<&IgrfCoefficientSet> {
        if !(year >= self.epochs[0]) {
            return Err(Error::InvalidParameter("requested year precedes the first IGRF epoch"));
        }
        let k = self.epochs.iter().rposition(|&e| e <= year).unwrap_or(0);
        Ok(&self.sets[k])
    }
}

/// Geocentric spherical position (ECEF): radius, colatitude, east longitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeocentricPosition {
    pub radius_km: f64,
    pub colatitude_rad: f64,
    pub longitude_rad: f64,
}

impl GeocentricPosition {
    pub fn from_ecef(r: &Vector3<f64>) -> Self {
        let radius_km = r.norm();
        Self {
            radius_km,
            colatitude_rad: (r.x.hypot(r.y)).atan2(r.z),
            longitude_rad: r.y.atan2(r.x),
        }
    }

    /// Columns are the local `r̂`, `θ̂` (south) and `φ̂` (east) unit vectors in
    /// ECEF.
    pub fn local_basis(&self) -> Matrix3<f64> {
        let (st, ct) = self.colatitude_rad.sin_cos();
        let (sp, cp) = self.longitude_rad.sin_cos();
        Matrix3::from_columns(&[
            Vector3::new(st * cp, st * sp, ct),
            Vector3::new(ct * cp, ct * sp, -st),
            Vector3::new(-sp, cp, 0.0),
        ])
    }
}

/// Schmidt semi-normalized associated Legendre functions `P(n, m)` and their
/// colatitude derivatives, packed with [`index`].
pub fn schmidt_legendre(max_degree: usize, colatitude_rad: f64) -> (Vec<f64>, Vec<f64>) {
    let len = index(max_degree + 1, 0);
    let mut p = vec![0.0; len];
    let mut dp = vec![0.0; len];
    let (s, c) = colatitude_rad.sin_cos();
    p[0] = 1.0;
    for n in 1..=max_degree {
        for m in 0..=n {
            let k = index(n, m);
            if n == m {
                let prev = index(n - 1, n - 1);
                let f = if n == 1 { 1.0 } else { ((2 * n - 1) as f64 / (2 * n) as f64).sqrt() };
                p[k] = f * s * p[prev];
                dp[k] = f * (c * p[prev] + s * dp[prev]);
            } else {
                let nf = n as f64;
                let mf = m as f64;
                let a = (nf * nf - mf * mf).sqrt();
                let b = (((nf - 1.0) * (nf - 1.0) - mf * mf).max(0.0)).sqrt();
                let k1 = index(n - 1, m);
                let (p2, dp2) = if n >= 2 && m <= n - 2 {
                    let k2 = index(n - 2, m);
                    (p[k2], dp[k2])
                } else {
                    (0.0, 0.0)
                };
                p[k] = ((2.0 * nf - 1.0) * c * p[k1] - b * p2) / a;
                dp[k] = ((2.0 * nf - 1.0) * (c * dp[k1] - s * p[k1]) - b * dp2) / a;
            }
        }
    }
    (p, dp)
}

/// Field at `pos` for decimal year `year`, in ECEF components (tesla).
pub fn igrf_field_ecef(coeffs: &IgrfCoefficientSet, pos: &GeocentricPosition, year: f64) -> Result<Vector3<f64>> {
    if !(pos.radius_km > MIN_RADIUS_KM) {
        return Err(Error::InvalidParameter("IGRF synthesis needs a radius above 3000 km"));
    }
    let dt = year - coeffs.epoch;
    let nmax = coeffs.max_degree;
    let (p, dp) = schmidt_legendre(nmax, pos.colatitude_rad);
    let sin_theta = pos.colatitude_rad.sin();
    // Guard against the pole; the east component's 1/sin θ limit is finite.
    let sin_theta = if sin_theta.abs() < 1e-12 { 1e-12f64.copysign(sin_theta) } else { sin_theta };
    let ratio = REFERENCE_RADIUS_KM / pos.radius_km;
    let (mut br, mut bt, mut bp) = (0.0, 0.0, 0.0);
    let mut rn = ratio * ratio;
    for n in 1..=nmax {
        rn *= ratio;
        let (mut sr, mut st, mut sp) = (0.0, 0.0, 0.0);
        for m in 0..=n {
            let k = index(n, m);
            let g = coeffs.g[k] + coeffs.g_rate[k] * dt;
            let h = coeffs.h[k] + coeffs.h_rate[k] * dt;
            let (sm, cm) = (m as f64 * pos.longitude_rad).sin_cos();
            let gh = g * cm + h * sm;
            sr += gh * p[k];
            st += gh * dp[k];
            sp += m as f64 * (g * sm - h * cm) * p[k];
        }
        br += (n as f64 + 1.0) * rn * sr;
        bt -= rn * st;
        bp += rn * sp;
    }
    bp /= sin_theta;
    Ok(pos.local_basis() * Vector3::new(br, bt, bp) * 1e-9)
}

/// Field at `pos` in the local (r̂, θ̂, φ̂) basis, tesla.
pub fn igrf_field_spherical(coeffs: &IgrfCoefficientSet, pos: &GeocentricPosition, year: f64) -> Result<Vector3<f64>> {
    Ok(pos.local_basis().transpose() * igrf_field_ecef(coeffs, pos, year)?)
}

/// IGRF evaluated along a Keplerian orbit and rotated into the orbital frame.
///
/// Earth's rotation angle at the scenario epoch is `rotation_angle0_rad`; the
/// decimal year advances with simulated time from `epoch_year`.
#[derive(Debug, Clone)]
pub struct IgrfFieldModel {
    pub elements: KeplerianElements,
    pub coeffs: IgrfCoefficientSet,
    pub epoch_year: f64,
    pub rotation_angle0_rad: f64,
    eci_to_orbital: Matrix3<f64>,
}

impl IgrfFieldModel {
    pub fn new(elements: KeplerianElements, coeffs: IgrfCoefficientSet, epoch_year: f64, rotation_angle0_rad: f64) -> Self {
        Self { eci_to_orbital: elements.eci_to_orbital(), elements, coeffs, epoch_year, rotation_angle0_rad }
    }

    pub fn year_at(&self, t: f64) -> f64 {
        self.epoch_year + t / SECONDS_PER_YEAR
    }

    fn eci_to_ecef(&self, t: f64) -> Matrix3<f64> {
        let (s, c) = (self.rotation_angle0_rad + EARTH_ROTATION_RATE * t).sin_cos();
        Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0)
    }

    /// Satellite position in ECEF, km.
    pub fn position_ecef(&self, t: f64) -> Result<Vector3<f64>> {
        let pos = propagate_orbit(&self.elements, t)?;
        let r_eci = self.eci_to_orbital.transpose() * pos.orbital_position();
        Ok(self.eci_to_ecef(t) * r_eci)
    }
}

impl FieldModel for IgrfFieldModel {
    fn field(&self, t: f64) -> Result<MagneticFieldSample> {
        let r_ecef = self.position_ecef(t)?;
        let b_ecef = igrf_field_ecef(&self.coeffs, &GeocentricPosition::from_ecef(&r_ecef), self.year_at(t))?;
        let b_eci = self.eci_to_ecef(t).transpose() * b_ecef;
        Ok(MagneticFieldSample::orbital(self.eci_to_orbital * b_eci, t))
    }
}
