use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use magnmpc::config::Scenario;
use magnmpc::metrics::MetricsReport;
use magnmpc::reports::{emit_field_comparison, field_comparison, psi3_audit, write_psi3_report, ComponentAgreement};
use magnmpc::trace::emit_trace;
use magnmpc_core::sim::{report_metrics, run_scenario, RunStatus};

#[derive(Parser)]
#[command(name = "magnmpc", version, about = "Magnetorquer-only attitude control with C/GMRES NMPC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Trace CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
        /// IGRF coefficient table replacing the bundled IGRF-13 one.
        #[arg(long)]
        igrf_file: Option<PathBuf>,
        /// Apply the continuous commands directly.
        #[arg(long)]
        no_pwm: bool,
        #[arg(long)]
        metrics_json: Option<PathBuf>,
    },
    /// Orbit-averaged ψ₃ of the onboard dipole field, CSV on stdout.
    ControllabilityReport {
        #[arg(long)]
        config: PathBuf,
    },
    /// Dipole versus IGRF field along the orbit, orbital frame.
    FieldCompare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        igrf_file: Option<PathBuf>,
    },
}

enum Outcome {
    Ok,
    Aborted,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Simulate { config, out, igrf_file, no_pwm, metrics_json } => {
            let mut scenario = Scenario::load(&config)?;
            if no_pwm {
                scenario.config.pwm.enabled = false;
            }
            let truth = scenario.truth_model(igrf_file.as_deref())?;
            let outcome = run_scenario(&scenario.config, truth.as_ref())
                .with_context(|| format!("{}: scenario could not start", config.display()))?;
            if let Some(path) = &out {
                emit_trace(&outcome.trace, path)?;
            }
            if outcome.trace.rows.is_empty() {
                anyhow::bail!("scenario produced no samples");
            }
            let m = report_metrics(&outcome.trace, &scenario.config, &scenario.file.report.snapshot_times_s)?;
            let report = MetricsReport::new(scenario.config.mode, &outcome, &m);
            print!("{}", report.to_text());
            if let Some(path) = &metrics_json {
                report.write_json(path)?;
            }
            Ok(match outcome.status {
                RunStatus::Aborted(_) => Outcome::Aborted,
                _ => Outcome::Ok,
            })
        }
        Command::ControllabilityReport { config } => {
            let scenario = Scenario::load(&config)?;
            let avg = psi3_audit(&scenario.dipole_model(), scenario.report_duration(), scenario.file.report.sample_step_s)?;
            write_psi3_report(&avg, std::io::stdout().lock())?;
            Ok(Outcome::Ok)
        }
        Command::FieldCompare { config, out, igrf_file } => {
            let scenario = Scenario::load(&config)?;
            let table = match &igrf_file {
                Some(p) => magnmpc::igrf_file::load_igrf_table(p)?,
                None => magnmpc::igrf_file::bundled_igrf_table(),
            };
            let igrf = scenario.igrf_model(&table)?;
            let samples = field_comparison(
                &scenario.dipole_model(),
                &igrf,
                scenario.report_duration(),
                scenario.file.report.sample_step_s,
            )?;
            emit_field_comparison(&samples, &out)?;
            let agreement = ComponentAgreement::from_samples(&samples);
            println!("samples           {}", samples.len());
            println!("rms dipole (T)    {:?}", agreement.rms_dipole);
            println!("rms igrf (T)      {:?}", agreement.rms_truth);
            println!("rms ratio         {:.3}", agreement.rms_ratio());
            println!("peak ratio        {:.3}", agreement.peak_ratio());
            Ok(Outcome::Ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Aborted) => {
            eprintln!("run aborted; partial trace kept");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
