//! Field-model comparison and controllability audit.

use std::io::Write;
use std::path::Path;

use magnmpc_core::actuation::{average_psi3, Psi3Average};
use magnmpc_core::field::{compare_field_models, FieldComparison, FieldModel};

use crate::trace::fmt_value;
use crate::{csv_err, io_err, Result};

/// Samples `[0, duration)` at `step`; the last sample is added at
/// `duration` so the average covers the whole interval.
pub fn psi3_audit(model: &dyn FieldModel, duration: f64, step: f64) -> magnmpc_core::Result<Psi3Average> {
    let count = (duration / step).round() as usize;
    let samples = (0..=count)
        .map(|k| model.field((k as f64 * step).min(duration)))
        .collect::<magnmpc_core::Result<Vec<_>>>()?;
    average_psi3(&samples, duration)
}

pub fn write_psi3_report<W: Write>(avg: &Psi3Average, mut out: W) -> std::io::Result<()> {
    writeln!(out, "quantity,value")?;
    writeln!(out, "span_s,{}", fmt_value(avg.span))?;
    for (k, e) in avg.eigenvalues.iter().enumerate() {
        writeln!(out, "eigenvalue_{},{}", k, fmt_value(*e))?;
    }
    writeln!(out, "min_eigenvalue,{}", fmt_value(avg.min_eigenvalue))?;
    writeln!(out, "positive_definite,{}", avg.min_eigenvalue > 0.0)?;
    for i in 0..3 {
        for j in 0..3 {
            writeln!(out, "psi3_avg_{}{},{}", i, j, fmt_value(avg.matrix[(i, j)]))?;
        }
    }
    Ok(())
}

/// Per-component summary of a field comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentAgreement {
    pub rms_dipole: [f64; 3],
    pub rms_truth: [f64; 3],
    pub peak_dipole: [f64; 3],
    pub peak_truth: [f64; 3],
}

impl ComponentAgreement {
    pub fn from_samples(samples: &[FieldComparison]) -> Self {
        let n = samples.len().max(1) as f64;
        let mut out = Self { rms_dipole: [0.0; 3], rms_truth: [0.0; 3], peak_dipole: [0.0; 3], peak_truth: [0.0; 3] };
        for s in samples {
            for k in 0..3 {
                out.rms_dipole[k] += s.dipole[k] * s.dipole[k] / n;
                out.rms_truth[k] += s.truth[k] * s.truth[k] / n;
                out.peak_dipole[k] = out.peak_dipole[k].max(s.dipole[k].abs());
                out.peak_truth[k] = out.peak_truth[k].max(s.truth[k].abs());
            }
        }
        for k in 0..3 {
            out.rms_dipole[k] = out.rms_dipole[k].sqrt();
            out.rms_truth[k] = out.rms_truth[k].sqrt();
        }
        out
    }

    /// Largest per-component RMS ratio, taken as `max/min` so it is at least 1.
    pub fn rms_ratio(&self) -> f64 {
        (0..3).map(|k| ratio(self.rms_dipole[k], self.rms_truth[k])).fold(1.0, f64::max)
    }

    /// Largest per-component ratio of the peak magnitudes.
    pub fn peak_ratio(&self) -> f64 {
        (0..3).map(|k| ratio(self.peak_dipole[k], self.peak_truth[k])).fold(1.0, f64::max)
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    a.max(b) / a.min(b)
}

pub fn field_comparison(
    dipole: &dyn FieldModel,
    truth: &dyn FieldModel,
    duration: f64,
    step: f64,
) -> magnmpc_core::Result<Vec<FieldComparison>> {
    compare_field_models(dipole, truth, duration, step)
}

pub fn write_field_comparison<W: Write>(samples: &[FieldComparison], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "dipole_x", "dipole_y", "dipole_z", "igrf_x", "igrf_y", "igrf_z"])?;
    for s in samples {
        let mut rec = vec![fmt_value(s.t)];
        rec.extend(s.dipole.iter().map(|v| fmt_value(*v)));
        rec.extend(s.truth.iter().map(|v| fmt_value(*v)));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_field_comparison(samples: &[FieldComparison], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(io_err(path))?;
    write_field_comparison(samples, std::io::BufWriter::new(f)).map_err(csv_err(path))
}
