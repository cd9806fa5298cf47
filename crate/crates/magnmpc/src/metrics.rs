//! Text and JSON renderings of run metrics.

use std::fmt::Write as _;
use std::path::Path;

use magnmpc_core::sim::{Metrics, RunStatus, ScenarioMode, ScenarioOutcome};
use serde::Serialize;

use crate::{io_err, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t_s: f64,
    /// Scalar last.
    pub quaternion: [f64; 4],
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub mode: String,
    pub status: String,
    pub samples: usize,
    pub final_time_s: f64,
    pub detumble_time_s: Option<f64>,
    pub final_quaternion: [f64; 4],
    pub snapshots: Vec<Snapshot>,
    pub residual_max: f64,
    pub residual_mean: f64,
    pub residual_median: f64,
    pub residual_spike_times_s: Vec<f64>,
    pub flagged_samples: usize,
    pub initial_kinetic_energy_j: f64,
    pub final_kinetic_energy_j: f64,
    pub initial_residual: f64,
}

pub fn status_label(s: &RunStatus) -> String {
    match s {
        RunStatus::Detumbled => "detumbled".into(),
        RunStatus::Completed => "completed".into(),
        RunStatus::Aborted(e) => format!("aborted: {e}"),
    }
}

impl MetricsReport {
    pub fn new(mode: ScenarioMode, outcome: &ScenarioOutcome, m: &Metrics) -> Self {
        let q = |q: &magnmpc_core::dynamics::Quaternion| [q.q1, q.q2, q.q3, q.q4];
        let mode = match mode {
            ScenarioMode::Detumble => "detumble",
            ScenarioMode::Attitude => "attitude",
        };
        Self {
            mode: mode.into(),
            status: status_label(&outcome.status),
            samples: outcome.trace.rows.len(),
            final_time_s: m.final_time,
            detumble_time_s: m.detumble_time,
            final_quaternion: q(&m.final_quaternion),
            snapshots: m.snapshots.iter().map(|(t, s)| Snapshot { t_s: *t, quaternion: q(s) }).collect(),
            residual_max: m.residual.max,
            residual_mean: m.residual.mean,
            residual_median: m.residual.median,
            residual_spike_times_s: m.residual.spike_times.clone(),
            flagged_samples: m.flagged_samples,
            initial_kinetic_energy_j: m.initial_kinetic_energy,
            final_kinetic_energy_j: m.final_kinetic_energy,
            initial_residual: outcome.initial_residual,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "status            {}", self.status);
        let _ = writeln!(s, "samples           {}", self.samples);
        let _ = writeln!(s, "final time        {:.2} s", self.final_time_s);
        match self.detumble_time_s {
            Some(t) => {
                let _ = writeln!(s, "detumble time     {:.1} s ({:.2} min)", t, t / 60.0);
            }
            None if self.mode == "detumble" => {
                let _ = writeln!(s, "detumble time     not reached");
            }
            None => {}
        }
        let fq = self.final_quaternion;
        let _ = writeln!(s, "final quaternion  [{:.4}, {:.4}, {:.4}, {:.4}]", fq[0], fq[1], fq[2], fq[3]);
        for snap in &self.snapshots {
            let q = snap.quaternion;
            let _ = writeln!(s, "q at {:>8.1} s    [{:.4}, {:.4}, {:.4}, {:.4}]", snap.t_s, q[0], q[1], q[2], q[3]);
        }
        let _ = writeln!(s, "residual max      {:.3e}", self.residual_max);
        let _ = writeln!(s, "residual mean     {:.3e}", self.residual_mean);
        let spikes: Vec<String> = self.residual_spike_times_s.iter().map(|t| format!("{:.1}", t / 60.0)).collect();
        let _ = writeln!(s, "residual spikes   [{}] min", spikes.join(", "));
        let _ = writeln!(s, "flagged samples   {}", self.flagged_samples);
        let _ = writeln!(
            s,
            "kinetic energy    {:.3e} -> {:.3e} J",
            self.initial_kinetic_energy_j, self.final_kinetic_energy_j
        );
        s
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("metrics serialize");
        std::fs::write(path, text).map_err(io_err(path))
    }
}
