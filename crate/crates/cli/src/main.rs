use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ris_core::acceptance::run_acceptance;
use ris_core::circuit::UnitCellParams;
use ris_core::scenario::{
    run_beam, run_sweep, write_beam_artifacts, write_sweep, PlanMode, ScenarioSpec, SweepSpec,
};
use ris_core::synthesis::FeedSpec;

#[derive(Parser)]
#[command(
    name = "ris",
    version,
    about = "Varactor RIS cell sweeps, beam planning and acceptance checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the unit-cell reflection over frequency and bias.
    Sweep {
        /// Unit-cell TOML; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5.8)]
        f_start_ghz: f64,
        #[arg(long, default_value_t = 6.4)]
        f_stop_ghz: f64,
        #[arg(long, default_value_t = 10.0)]
        f_step_mhz: f64,
        #[arg(long, default_value_t = 0.0)]
        v_start: f64,
        #[arg(long, default_value_t = 14.0)]
        v_stop: f64,
        #[arg(long, default_value_t = 0.1)]
        v_step: f64,
        #[arg(long, default_value = "out/sweep")]
        out: PathBuf,
    },
    /// Synthesize, plan, encode and evaluate one steered beam.
    Beam {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 6.1)]
        freq_ghz: f64,
        #[arg(long, default_value_t = 15.0, allow_hyphen_values = true)]
        theta_deg: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phi_deg: f64,
        /// Horn phase center in millimetres.
        #[arg(
            long,
            value_delimiter = ',',
            num_args = 3,
            default_value = "0,0,450",
            allow_hyphen_values = true
        )]
        feed_mm: Vec<f64>,
        /// Illuminate with a normally incident plane wave instead of the horn.
        #[arg(long, conflicts_with = "feed_mm")]
        plane_wave: bool,
        #[arg(long, value_enum, default_value_t = Mode::Quantized)]
        mode: Mode,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every exit criterion and print the report table.
    Acceptance {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ideal,
    Quantized,
}

fn load_params(config: Option<&PathBuf>) -> Result<UnitCellParams> {
    match config {
        Some(path) => {
            UnitCellParams::load(path).with_context(|| format!("invalid config {}", path.display()))
        }
        None => Ok(UnitCellParams::default()),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sweep {
            config,
            f_start_ghz,
            f_stop_ghz,
            f_step_mhz,
            v_start,
            v_stop,
            v_step,
            out,
        } => {
            let params = load_params(config.as_ref())?;
            let spec = SweepSpec {
                f_start_hz: f_start_ghz * 1e9,
                f_stop_hz: f_stop_ghz * 1e9,
                f_step_hz: f_step_mhz * 1e6,
                v_start,
                v_stop,
                v_step,
            };
            let (table, summary) = run_sweep(&params, &spec)?;
            write_sweep(&table, &summary, &out)?;
            print!("{}", summary.to_text());
            Ok(true)
        }
        Command::Beam {
            config,
            freq_ghz,
            theta_deg,
            phi_deg,
            feed_mm,
            plane_wave,
            mode,
            out,
        } => {
            let params = load_params(config.as_ref())?;
            let mut spec = ScenarioSpec::new(freq_ghz * 1e9, theta_deg);
            spec.phi_deg = phi_deg;
            spec.mode = match mode {
                Mode::Ideal => PlanMode::Ideal,
                Mode::Quantized => PlanMode::Quantized,
            };
            spec.feed = if plane_wave {
                FeedSpec::normal_incidence()
            } else {
                let [x, y, z] = feed_mm[..] else {
                    bail!("--feed-mm needs exactly three values X,Y,Z");
                };
                FeedSpec::spherical([x * 1e-3, y * 1e-3, z * 1e-3]).context("invalid --feed-mm")?
            };
            let art = run_beam(&spec, &params)?;
            let dir = write_beam_artifacts(&art, &out)?;
            print!("{}", art.metrics.to_text());
            eprintln!("artifacts written to {}", dir.display());
            Ok(true)
        }
        Command::Acceptance { config } => {
            let params = load_params(config.as_ref())?;
            let report = run_acceptance(&params);
            print!("{}", report.to_table());
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
