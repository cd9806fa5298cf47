//! Seven-level hysteretic amplitude quantizer for the dipole commands.
//!
//! Each axis snaps to one of `k · u_max / 3`, `k ∈ -3..=3`. The band edges
//! depend on the level chosen at the previous sample. Every edge has the form
//! `j · u_span + c · u_span / 2` with `c ∈ {1, 1 + κ, 1 - κ}`. The branch
//! tables are transcribed row by row and evaluated top-down, first match wins.

use nalgebra::Vector3;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Widen {
    Plain,
    Wide,
    Narrow,
}

impl Widen {
    fn factor(self, kappa: f64) -> f64 {
        match self {
            Widen::Plain => 1.0,
            Widen::Wide => 1.0 + kappa,
            Widen::Narrow => 1.0 - kappa,
        }
    }
}

use Widen::{Narrow as N, Plain as P, Wide as W};

/// Lower-edge factors for levels `3, 2, 1, 0, -1, -2` (level `k` starts at
/// `(k - 1) u_span + c u_span / 2`), indexed by `prev + 3`. Level `-3` takes
/// whatever falls below the level `-2` edge.
const TABLES: [[Widen; 6]; 7] = [
    [P, P, P, P, W, N], // prev = -3
    [P, P, P, P, W, W], // prev = -2
    [P, P, P, W, W, P], // prev = -1
    [P, P, W, W, P, P], // prev = 0
    [P, W, W, P, P, P], // prev = 1
    [W, W, P, P, P, P], // prev = 2
    [N, W, P, P, P, P], // prev = 3
];

/// Per-axis quantizer state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwmState {
    prev_level: [i8; 3],
    kappa: f64,
    u_max: f64,
}

impl PwmState {
    pub fn new(kappa: f64, u_max: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&kappa) {
            return Err(Error::InvalidParameter("kappa must lie in [0, 1)"));
        }
        if !(u_max > 0.0) || !u_max.is_finite() {
            return Err(Error::InvalidParameter("u_max must be positive"));
        }
        Ok(Self { prev_level: [0; 3], kappa, u_max })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn u_span(&self) -> f64 {
        self.u_max / 3.0
    }

    pub fn prev_levels(&self) -> [i8; 3] {
        self.prev_level
    }

    pub fn set_prev_level(&mut self, axis: usize, level: i8) {
        assert!((-3..=3).contains(&level), "level out of range");
        self.prev_level[axis] = level;
    }

    /// Stateless table lookup: the level chosen for `u_c` after `prev`.
    pub fn level_for(&self, prev: i8, u_c: f64) -> i8 {
        let table = &TABLES[(prev + 3) as usize];
        let s = self.u_span();
        for (row, widen) in table.iter().enumerate() {
            let level = 3 - row as i8;
            let edge = f64::from(level - 1) * s + widen.factor(self.kappa) * s / 2.0;
            if u_c >= edge {
                return level;
            }
        }
        -3
    }

    pub fn level_value(&self, level: i8) -> f64 {
        f64::from(level) * self.u_span()
    }

    /// Quantizes one axis and records the chosen level.
    pub fn quantize_axis(&mut self, axis: usize, u_c: f64) -> f64 {
        let level = self.level_for(self.prev_level[axis], u_c);
        self.prev_level[axis] = level;
        self.level_value(level)
    }

    pub fn quantize(&mut self, u_c: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.quantize_axis(0, u_c.x), self.quantize_axis(1, u_c.y), self.quantize_axis(2, u_c.z))
    }
}
