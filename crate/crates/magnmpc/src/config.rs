//! Scenario files: sectioned `key = value` text (TOML syntax).
//!
//! ```text
//! [scenario]
//! mode = "detumble"
//!
//! [orbit]
//! semi_major_axis_km = 6691.6
//! ...
//! ```
//!
//! Every section except `[scenario]`, `[initial]` and `[nmpc]` may be left
//! out; missing keys fall back to the sun-synchronous detumbling setup.

use std::path::{Path, PathBuf};

use magnmpc_core::dynamics::{AngularVelocity, InertiaTensor, Quaternion, SatelliteState};
use magnmpc_core::field::{DipoleFieldModel, FieldModel};
use magnmpc_core::igrf::{IgrfFieldModel, IgrfTable};
use magnmpc_core::nmpc::{HorizonConfig, NmpcWeights};
use magnmpc_core::orbit::KeplerianElements;
use magnmpc_core::sim::{ControllerConfig, PwmConfig, ScenarioConfig, ScenarioMode, Termination};
use serde::Deserialize;

use crate::igrf_file::{bundled_igrf_table, load_igrf_table};
use crate::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Detumble,
    Attitude,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub mode: Mode,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSection {
    pub semi_major_axis_km: f64,
    pub eccentricity: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub arg_perigee_deg: f64,
    pub mean_anomaly_deg: f64,
}

impl Default for OrbitSection {
    fn default() -> Self {
        let e = KeplerianElements::sun_synchronous();
        Self {
            semi_major_axis_km: e.semi_major_axis_km,
            eccentricity: e.eccentricity,
            inclination_deg: e.inclination_deg,
            raan_deg: e.raan_deg,
            arg_perigee_deg: e.arg_perigee_deg,
            mean_anomaly_deg: e.mean_anomaly_deg,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InertiaSection {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl Default for InertiaSection {
    fn default() -> Self {
        Self { jx: 0.020, jy: 0.030, jz: 0.040 }
    }
}

/// Scalar-last quaternion and body rates in deg/s.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    pub quaternion: [f64; 4],
    pub rate_deg_s: [f64; 3],
}

impl Default for StateSection {
    fn default() -> Self {
        Self { quaternion: [0.0, 0.0, 0.0, 1.0], rate_deg_s: [0.0; 3] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmpcSection {
    pub u_max: f64,
    pub horizon_s: f64,
    pub steps: usize,
    pub q: [f64; 7],
    pub qt: [f64; 7],
    pub r: [f64; 6],
    pub p: [f64; 3],
    /// Defaults to the horizon step.
    pub dt_ctrl_s: Option<f64>,
    /// Defaults to `1 / dt_ctrl`.
    pub zeta: Option<f64>,
    pub fd_step: Option<f64>,
    /// Defaults to `min(9N, 30)`.
    pub gmres_max_iterations: Option<usize>,
    pub initial_multiplier: Option<f64>,
    pub initial_newton_iterations: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PwmSection {
    pub kappa: f64,
    pub enabled: bool,
}

impl Default for PwmSection {
    fn default() -> Self {
        Self { kappa: 0.3, enabled: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminationSection {
    pub rate_threshold_deg_s: f64,
    pub max_time_s: f64,
}

impl Default for TerminationSection {
    fn default() -> Self {
        Self { rate_threshold_deg_s: 0.10, max_time_s: 7200.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthModel {
    Igrf,
    Dipole,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub dt_s: f64,
    pub field_model: TruthModel,
    pub igrf_degree: usize,
    /// Decimal year at `t = 0`.
    pub epoch_year: f64,
    /// Greenwich rotation angle at `t = 0`.
    pub earth_rotation_angle_deg: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self { dt_s: 0.1, field_model: TruthModel::Igrf, igrf_degree: 10, epoch_year: 2020.0, earth_rotation_angle_deg: 0.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// Quaternion snapshot times, s.
    pub snapshot_times_s: Vec<f64>,
    /// Sampling step of `field-compare` and `controllability-report`, s.
    pub sample_step_s: f64,
    /// Span of those reports, s; one orbital period when absent.
    pub duration_s: Option<f64>,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self { snapshot_times_s: vec![3000.0], sample_step_s: 10.0, duration_s: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub orbit: OrbitSection,
    #[serde(default)]
    pub inertia: InertiaSection,
    pub initial: StateSection,
    #[serde(default)]
    pub reference: StateSection,
    pub nmpc: NmpcSection,
    #[serde(default)]
    pub pwm: PwmSection,
    #[serde(default)]
    pub termination: TerminationSection,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub report: ReportSection,
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub path: PathBuf,
    pub file: ScenarioFile,
    pub config: ScenarioConfig,
}

fn state(s: &StateSection) -> magnmpc_core::Result<SatelliteState> {
    let [q1, q2, q3, q4] = s.quaternion;
    let norm = (q1 * q1 + q2 * q2 + q3 * q3 + q4 * q4).sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(magnmpc_core::Error::InvalidState("quaternion must be unit norm"));
    }
    // Taken verbatim (renormalized only): a scalar part of 0 is a valid
    // half-turn attitude and must keep its sign.
    let q = Quaternion { q1: q1 / norm, q2: q2 / norm, q3: q3 / norm, q4: q4 / norm };
    let [wx, wy, wz] = s.rate_deg_s;
    Ok(SatelliteState::new(q, AngularVelocity::from_deg_per_s(wx, wy, wz)))
}

impl ScenarioFile {
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_config(&self) -> magnmpc_core::Result<ScenarioConfig> {
        let o = &self.orbit;
        let orbit = KeplerianElements::new(
            o.semi_major_axis_km,
            o.eccentricity,
            o.inclination_deg,
            o.raan_deg,
            o.arg_perigee_deg,
            o.mean_anomaly_deg,
        )?;
        let inertia = InertiaTensor::new(self.inertia.jx, self.inertia.jy, self.inertia.jz)?;
        let n = &self.nmpc;
        let horizon = HorizonConfig::new(n.horizon_s, n.steps)?;
        let dt_ctrl = n.dt_ctrl_s.unwrap_or_else(|| horizon.dtau());
        let mut controller = ControllerConfig::with_defaults(dt_ctrl, n.steps);
        if let Some(z) = n.zeta {
            controller.cgmres.zeta = z;
        }
        if let Some(h) = n.fd_step {
            controller.cgmres.fd_step = h;
        }
        if let Some(k) = n.gmres_max_iterations {
            controller.cgmres.max_iterations = k;
        }
        if let Some(mu) = n.initial_multiplier {
            controller.initial_multiplier = mu;
        }
        if let Some(it) = n.initial_newton_iterations {
            controller.initial_newton_iterations = it;
        }
        let cfg = ScenarioConfig {
            mode: match self.scenario.mode {
                Mode::Detumble => ScenarioMode::Detumble,
                Mode::Attitude => ScenarioMode::Attitude,
            },
            orbit,
            inertia,
            x0: state(&self.initial)?,
            x_f: state(&self.reference)?,
            weights: NmpcWeights { q: n.q, qt: n.qt, r: n.r, p: n.p, u_max: n.u_max },
            horizon,
            controller,
            pwm: PwmConfig { kappa: self.pwm.kappa, enabled: self.pwm.enabled },
            termination: Termination {
                rate_threshold_deg_s: self.termination.rate_threshold_deg_s,
                max_time: self.termination.max_time_s,
            },
            plant_dt: self.plant.dt_s,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_str(&text, path)
    }

    pub fn from_str(text: &str, path: &Path) -> Result<Self> {
        let cfg_err = |message: String| Error::Config { path: path.to_path_buf(), message };
        let file = ScenarioFile::parse(text).map_err(|e| cfg_err(e.to_string()))?;
        let config = file.to_config().map_err(|e| cfg_err(e.to_string()))?;
        if file.report.sample_step_s <= 0.0 {
            return Err(cfg_err("report.sample_step_s must be positive".into()));
        }
        Ok(Self { path: path.to_path_buf(), file, config })
    }

    pub fn dipole_model(&self) -> DipoleFieldModel {
        DipoleFieldModel::new(self.config.orbit)
    }

    /// IGRF truth model at the configured epoch and degree.
    pub fn igrf_model(&self, table: &IgrfTable) -> Result<IgrfFieldModel> {
        let p = &self.file.plant;
        let coeffs = table.at(p.epoch_year)?.truncated(p.igrf_degree);
        Ok(IgrfFieldModel::new(self.config.orbit, coeffs, p.epoch_year, p.earth_rotation_angle_deg.to_radians()))
    }

    /// The plant's truth field: IGRF (from `igrf_file` or the bundled table)
    /// or the dipole model.
    pub fn truth_model(&self, igrf_file: Option<&Path>) -> Result<Box<dyn FieldModel>> {
        Ok(match self.file.plant.field_model {
            TruthModel::Dipole => Box::new(self.dipole_model()),
            TruthModel::Igrf => {
                let table = match igrf_file {
                    Some(p) => load_igrf_table(p)?,
                    None => bundled_igrf_table(),
                };
                Box::new(self.igrf_model(&table)?)
            }
        })
    }

    /// Report span: configured, or one orbital period.
    pub fn report_duration(&self) -> f64 {
        self.file.report.duration_s.unwrap_or_else(|| self.config.orbit.period())
    }
}
