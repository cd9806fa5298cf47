//! Closed-loop scenario runner: RK4 plant driven by a truth field model,
//! C/GMRES controller predicting with the onboard dipole model, optional
//! seven-level quantization of the commands.

use alloc::vec::Vec;

use nalgebra::Vector3;

use crate::cgmres::{CgmresParams, CgmresTracker};
use crate::dynamics::{dynamics, rk4_step, InertiaTensor, Quaternion, SatelliteState, StateVector};
use crate::field::{field_to_body, DipoleFieldModel, FieldModel};
use crate::nmpc::{HorizonConfig, HorizonSolution, NmpcProblem, NmpcWeights};
use crate::orbit::KeplerianElements;
use crate::pwm::PwmState;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioMode {
    /// Stops as soon as every body rate is below the threshold.
    Detumble,
    /// Runs for the full duration.
    Attitude,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Termination {
    /// deg/s
    pub rate_threshold_deg_s: f64,
    /// s
    pub max_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwmConfig {
    pub kappa: f64,
    pub enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    /// Controller sample period, s.
    pub dt_ctrl: f64,
    pub cgmres: CgmresParams,
    /// Initial multiplier value of the warm start.
    pub initial_multiplier: f64,
    /// Newton iterations spent on the initial solution.
    pub initial_newton_iterations: usize,
    pub initial_tolerance: f64,
}

impl ControllerConfig {
    pub fn with_defaults(dt_ctrl: f64, steps: usize) -> Self {
        Self {
            dt_ctrl,
            cgmres: CgmresParams::for_period(dt_ctrl, steps),
            initial_multiplier: 0.01,
            initial_newton_iterations: 50,
            initial_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mode: ScenarioMode,
    pub orbit: KeplerianElements,
    pub inertia: InertiaTensor,
    pub x0: SatelliteState,
    pub x_f: SatelliteState,
    pub weights: NmpcWeights,
    pub horizon: HorizonConfig,
    pub controller: ControllerConfig,
    pub pwm: PwmConfig,
    pub termination: Termination,
    /// Plant integration step, s.
    pub plant_dt: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.controller.cgmres.validate()?;
        if !(self.termination.rate_threshold_deg_s > 0.0) {
            return Err(Error::InvalidParameter("rate threshold must be positive"));
        }
        if !(self.termination.max_time >= 0.0) || !self.termination.max_time.is_finite() {
            return Err(Error::InvalidParameter("maximum simulation time must be non-negative"));
        }
        if !(self.controller.dt_ctrl > 0.0) || !(self.plant_dt > 0.0) {
            return Err(Error::InvalidParameter("time steps must be positive"));
        }
        if self.plant_dt > self.controller.dt_ctrl * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter("plant step exceeds the controller period"));
        }
        if !(0.0..1.0).contains(&self.pwm.kappa) {
            return Err(Error::InvalidParameter("kappa must lie in [0, 1)"));
        }
        if !self.x0.q.is_unit(1e-9) || !self.x_f.q.is_unit(1e-9) {
            return Err(Error::InvalidState("initial and reference quaternions must be unit norm"));
        }
        if !self.x0.w.is_sane() {
            return Err(Error::InvalidState("initial angular velocity out of range"));
        }
        Ok(())
    }

    /// Plant sub-steps per controller period.
    pub fn substeps(&self) -> usize {
        ((self.controller.dt_ctrl / self.plant_dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn problem(&self) -> Result<NmpcProblem> {
        NmpcProblem::new(self.inertia, self.weights.clone(), self.horizon, &self.x_f)
    }
}

/// One controller sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub x: [f64; 7],
    /// Continuous command `(m, v)`.
    pub u_c: [f64; 6],
    /// Applied moment.
    pub u_d: [f64; 3],
    pub residual_norm: f64,
    /// Body-frame truth field, tesla.
    pub b_truth: [f64; 3],
    /// Body-frame onboard (dipole) field, tesla.
    pub b_onboard: [f64; 3],
    /// GMRES stopped at its iteration cap, or the update failed and the
    /// previous solution was kept.
    pub solver_flag: bool,
}

impl TraceRow {
    pub fn state(&self) -> SatelliteState {
        SatelliteState::from_vector(&StateVector::from_column_slice(&self.x))
    }

    pub fn max_rate_deg_s(&self) -> f64 {
        self.x[4..].iter().fold(0.0f64, |a, w| a.max(w.abs())).to_degrees()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    /// Detumble threshold reached.
    Detumbled,
    /// Ran to the maximum time.
    Completed,
    /// Plant left its sanity bounds; the trace is partial.
    Aborted(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub status: RunStatus,
    pub trace: SimulationTrace,
    pub final_state: SatelliteState,
    /// `‖F‖` after the initial Newton solve.
    pub initial_residual: f64,
}

fn arr3(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn arr7(x: &StateVector) -> [f64; 7] {
    let mut a = [0.0; 7];
    a.copy_from_slice(x.as_slice());
    a
}

/// Runs one closed-loop scenario against the given truth field. The
/// controller always predicts with the dipole model of `cfg.orbit`.
pub fn run_scenario(cfg: &ScenarioConfig, truth: &dyn FieldModel) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let onboard = DipoleFieldModel::new(cfg.orbit);
    let problem = cfg.problem()?;
    let u_max = cfg.weights.u_max;
    let mut tracker = CgmresTracker::new(
        problem,
        cfg.controller.cgmres,
        HorizonSolution::warm_start(cfg.horizon.steps, u_max, cfg.controller.initial_multiplier),
    )?;
    let x0 = cfg.x0.to_vector();
    let initial_residual = tracker.initialize(
        &x0,
        0.0,
        &onboard,
        cfg.controller.initial_newton_iterations,
        cfg.controller.initial_tolerance,
    )?;

    let mut pwm = PwmState::new(cfg.pwm.kappa, u_max)?;
    let dt = cfg.controller.dt_ctrl;
    let substeps = cfg.substeps();
    let h = dt / substeps as f64;
    let threshold = cfg.termination.rate_threshold_deg_s;

    let mut state = cfg.x0;
    let mut applied = Vector3::zeros();
    let mut rows = Vec::new();
    let mut k: usize = 0;
    let status = loop {
        let t = k as f64 * dt;
        if t > cfg.termination.max_time + 1e-9 * dt {
            break RunStatus::Completed;
        }
        let x = state.to_vector();
        let b_truth = field_to_body(&truth.field(t)?, &state.q)?.b;
        let b_onboard = field_to_body(&onboard.field(t)?, &state.q)?.b;
        let x_dot = dynamics(&x, &applied, &b_onboard, &cfg.inertia);

        let (residual_norm, solver_flag) = match tracker.update(&x, &x_dot, t, dt, &onboard) {
            Ok(rep) => (rep.residual_norm, rep.stagnated()),
            Err(_) => (f64::NAN, true),
        };
        let cmd = tracker.control();
        let clamped = cmd.moment.saturated(u_max).0;
        applied = if cfg.pwm.enabled { pwm.quantize(&clamped) } else { clamped };

        let row = TraceRow {
            t,
            x: arr7(&x),
            u_c: [cmd.moment.0.x, cmd.moment.0.y, cmd.moment.0.z, cmd.dummy.x, cmd.dummy.y, cmd.dummy.z],
            u_d: arr3(&applied),
            residual_norm,
            b_truth: arr3(&b_truth),
            b_onboard: arr3(&b_onboard),
            solver_flag,
        };
        let done = cfg.mode == ScenarioMode::Detumble && row.max_rate_deg_s() < threshold;
        rows.push(row);
        if done {
            break RunStatus::Detumbled;
        }
        if t + dt > cfg.termination.max_time + 1e-9 * dt {
            break RunStatus::Completed;
        }

        let mut aborted = None;
        for s in 0..substeps {
            let ts = t + s as f64 * h;
            let m = applied;
            let step = rk4_step(&state, ts, h, |tt, xx| {
                let q = Quaternion::from_vector(xx.fixed_rows::<4>(0).into_owned()).renormalized();
                let b = q.attitude_matrix() * truth.field(tt)?.b;
                Ok(dynamics(xx, &m, &b, &cfg.inertia))
            });
            match step {
                Ok(next) if next.w.is_sane() => state = next,
                Ok(_) => {
                    aborted = Some(Error::Propagation("angular rate exceeded the plant guard"));
                    break;
                }
                Err(e) => {
                    aborted = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = aborted {
            break RunStatus::Aborted(e);
        }
        k += 1;
    };
    Ok(ScenarioOutcome { status, trace: SimulationTrace { rows }, final_state: state, initial_residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStats {
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Non-finite samples (failed updates) are excluded from the statistics.
    pub finite_samples: usize,
    /// Peak times of the excursions above the spike threshold.
    pub spike_times: Vec<f64>,
}

impl ResidualStats {
    pub fn from_trace(trace: &SimulationTrace, spike_factor: f64) -> Self {
        let mut vals: Vec<f64> = trace.rows.iter().map(|r| r.residual_norm).filter(|v| v.is_finite()).collect();
        let finite_samples = vals.len();
        let max = vals.iter().cloned().fold(0.0, f64::max);
        let mean = if finite_samples > 0 { vals.iter().sum::<f64>() / finite_samples as f64 } else { f64::NAN };
        vals.sort_by(f64::total_cmp);
        let median = if finite_samples > 0 { vals[finite_samples / 2] } else { f64::NAN };
        let limit = (spike_factor * median).max(SPIKE_PEAK_FRACTION * max);
        // Excursions closer than SPIKE_MERGE_GAP are one spike; keep its peak.
        let mut spike_times: Vec<f64> = Vec::new();
        let mut current: Option<(f64, f64, f64)> = None;
        for r in &trace.rows {
            if !(r.residual_norm.is_finite() && r.residual_norm > limit) {
                continue;
            }
            current = match current {
                Some((tp, vp, last)) if r.t - last < SPIKE_MERGE_GAP => {
                    if r.residual_norm > vp {
                        Some((r.t, r.residual_norm, r.t))
                    } else {
                        Some((tp, vp, r.t))
                    }
                }
                Some((tp, _, _)) => {
                    spike_times.push(tp);
                    Some((r.t, r.residual_norm, r.t))
                }
                None => Some((r.t, r.residual_norm, r.t)),
            };
        }
        if let Some((t, _, _)) = current {
            spike_times.push(t);
        }
        Self { max, mean, median, finite_samples, spike_times }
    }

    /// Fraction of all samples whose residual is finite and at most `bound`.
    pub fn fraction_at_most(trace: &SimulationTrace, bound: f64) -> f64 {
        if trace.rows.is_empty() {
            return 0.0;
        }
        let ok = trace.rows.iter().filter(|r| r.residual_norm.is_finite() && r.residual_norm <= bound).count();
        ok as f64 / trace.rows.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// First sample time at which every rate is below the threshold;
    /// always `None` for attitude runs.
    pub detumble_time: Option<f64>,
    pub final_time: f64,
    pub final_quaternion: Quaternion,
    /// Requested snapshot times paired with the quaternion of the sample
    /// nearest to each; times past the end of the trace are skipped.
    pub snapshots: Vec<(f64, Quaternion)>,
    pub residual: ResidualStats,
    pub flagged_samples: usize,
    pub initial_kinetic_energy: f64,
    pub final_kinetic_energy: f64,
}

/// Spike threshold as a multiple of the median residual.
pub const DEFAULT_SPIKE_FACTOR: f64 = 10.0;
/// A spike must also reach this fraction of the largest residual.
pub const SPIKE_PEAK_FRACTION: f64 = 0.25;
/// Seconds between excursions before they count as separate spikes.
pub const SPIKE_MERGE_GAP: f64 = 300.0;

pub fn report_metrics(trace: &SimulationTrace, cfg: &ScenarioConfig, snapshot_times: &[f64]) -> Result<Metrics> {
    let (first, last) = match (trace.rows.first(), trace.rows.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::InsufficientData("metrics need a non-empty trace")),
    };
    let threshold = cfg.termination.rate_threshold_deg_s;
    let detumble_time = match cfg.mode {
        ScenarioMode::Detumble => trace.rows.iter().find(|r| r.max_rate_deg_s() < threshold).map(|r| r.t),
        ScenarioMode::Attitude => None,
    };
    let dt = cfg.controller.dt_ctrl;
    let snapshots = snapshot_times
        .iter()
        .filter(|&&ts| ts <= last.t + 0.5 * dt)
        .map(|&ts| {
            let row = trace
                .rows
                .iter()
                .min_by(|a, b| (a.t - ts).abs().total_cmp(&(b.t - ts).abs()))
                .expect("non-empty trace");
            (ts, row.state().q)
        })
        .collect();
    Ok(Metrics {
        detumble_time,
        final_time: last.t,
        final_quaternion: last.state().q,
        snapshots,
        residual: ResidualStats::from_trace(trace, DEFAULT_SPIKE_FACTOR),
        flagged_samples: trace.rows.iter().filter(|r| r.solver_flag).count(),
        initial_kinetic_energy: first.state().kinetic_energy(&cfg.inertia),
        final_kinetic_energy: last.state().kinetic_energy(&cfg.inertia),
    })
}

/// The detumbling scenario of the sun-synchronous orbit.
pub fn detumble_scenario() -> ScenarioConfig {
    use crate::dynamics::AngularVelocity;
    let horizon = HorizonConfig::new(10.0, 10).expect("valid horizon");
    ScenarioConfig {
        mode: ScenarioMode::Detumble,
        orbit: KeplerianElements::sun_synchronous(),
        inertia: InertiaTensor::new(0.020, 0.030, 0.040).expect("valid inertia"),
        x0: SatelliteState::new(Quaternion::IDENTITY, AngularVelocity::from_deg_per_s(3.0, 3.0, 3.0)),
        x_f: SatelliteState::default(),
        weights: NmpcWeights {
            q: [0.0, 0.0, 0.0, 0.0, 100.0, 100.0, 250.0],
            qt: [0.0, 0.0, 0.0, 0.0, 100.0, 100.0, 250.0],
            r: [1e-8; 6],
            p: [0.1; 3],
            u_max: 0.1,
        },
        horizon,
        controller: ControllerConfig::with_defaults(horizon.dtau(), horizon.steps),
        pwm: PwmConfig { kappa: 0.3, enabled: true },
        termination: Termination { rate_threshold_deg_s: 0.10, max_time: 7200.0 },
        plant_dt: 0.1,
    }
}

/// The attitude maneuver from a half turn about `x`, 50 minutes.
pub fn attitude_scenario(pwm: bool) -> ScenarioConfig {
    let horizon = HorizonConfig::new(5.0, 20).expect("valid horizon");
    ScenarioConfig {
        mode: ScenarioMode::Attitude,
        x0: SatelliteState::new(Quaternion { q1: 1.0, q2: 0.0, q3: 0.0, q4: 0.0 }, Default::default()),
        weights: NmpcWeights {
            q: [20.0, 20.0, 20.0, 20.0, 2e4, 2e4, 2e4],
            qt: [100.0, 100.0, 100.0, 100.0, 2e4, 2e4, 2e4],
            r: [1e-8; 6],
            p: [0.1; 3],
            u_max: 0.1,
        },
        horizon,
        controller: ControllerConfig::with_defaults(horizon.dtau(), horizon.steps),
        pwm: PwmConfig { kappa: 0.3, enabled: pwm },
        termination: Termination { rate_threshold_deg_s: 0.10, max_time: 3000.0 },
        ..detumble_scenario()
    }
}
