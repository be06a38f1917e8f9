//! Command-line front end: `simulate`, `check` and `sweep`.

pub mod check;
pub mod config;
pub mod simulate;
pub mod sweep;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

pub use check::{check_report, CheckPoint};
pub use config::{MachineBlock, MachineKind, OutputBlock, RunConfig, Scenario, CONFIG_VERSION};
pub use simulate::{plot_script, simulate, write_outputs};
pub use sweep::{fit_through_origin, run_sweep, Axis, LineFit, SweepSpec, SweepSummary};

use crate::error::Error;
use crate::observability::DEFAULT_THRESHOLD;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;
pub const EXIT_NOT_GUARANTEED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "drivobs", version, about = "Observability analysis and EKF simulation of electric drives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the machine's scenario and write trace.csv, summary.json and plot.gp.
    Simulate(SimulateArgs),
    /// Evaluate the observability conditions at one operating point.
    #[command(allow_negative_numbers = true)]
    Check(CheckArgs),
    /// Map determinant and margin over a grid and write sweep.csv and sweep.json.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides output.directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Keep every N-th trace row.
    #[arg(long, value_name = "N")]
    decimate: Option<usize>,
    #[arg(long, value_name = "RAD_PER_S")]
    threshold: Option<f64>,
    /// Measurement-noise seed (needs a noise block).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Machine kind; overrides the config. Its parameters are kept only if the kind matches.
    #[arg(long, value_enum)]
    machine: Option<MachineKind>,
    /// Parameter override NAME=VALUE, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    #[arg(long, value_name = "RAD_PER_S")]
    threshold: Option<f64>,
    #[command(flatten)]
    point: CheckPoint,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "RAD_PER_S")]
    threshold: Option<f64>,
}

/// Failure with its process exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidParams(_) | Error::DegenerateFlux(_) => EXIT_CONFIG,
            _ => EXIT_SIMULATION,
        };
        Failure { code, message: e.to_string() }
    }
}

fn config_error(message: String) -> Failure {
    Failure { code: EXIT_CONFIG, message }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Check(a) => cmd_check(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("drivobs: {}", f.message);
            f.code
        }
    }
}

fn out_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.clone().or_else(|| cfg.output.directory.clone()).unwrap_or_else(|| PathBuf::from("."))
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32, Failure> {
    let cfg = RunConfig::load(&a.config)?;
    let decimate = a.decimate.unwrap_or(cfg.output.decimate);
    if decimate == 0 {
        return Err(config_error("--decimate must be at least 1".into()));
    }
    if a.seed.is_some() && cfg.noise.is_none() {
        eprintln!("drivobs: --seed ignored, the config has no noise block");
    }
    let scenario = cfg.scenario(a.threshold, a.seed)?;
    let (trace, summary) =
        simulate(&scenario, decimate).map_err(|e| Failure { code: EXIT_SIMULATION, message: e.to_string() })?;
    write_outputs(&out_dir(&a.out, &cfg), &trace, &summary, cfg.output.plot)
        .map_err(|e| Failure { code: EXIT_SIMULATION, message: e.to_string() })?;
    print_json(&summary);
    Ok(EXIT_OK)
}

fn parse_param(s: &str) -> Result<(String, Value), Failure> {
    let (k, v) = s.split_once('=').ok_or_else(|| config_error(format!("--param {s:?}: expected NAME=VALUE")))?;
    let value = serde_json::from_str(v).map_err(|e| config_error(format!("--param {k}: {e}")))?;
    Ok((k.trim().to_string(), value))
}

fn cmd_check(a: &CheckArgs) -> Result<i32, Failure> {
    let cfg = a.config.as_deref().map(RunConfig::load).transpose()?;
    let mut block = match (&cfg, a.machine) {
        (Some(c), Some(k)) if c.machine.kind == k => c.machine.clone(),
        (Some(c), None) => c.machine.clone(),
        (_, Some(k)) => MachineBlock::new(k),
        (None, None) => return Err(config_error("check needs --machine or --config".into())),
    };
    let overrides: Map<String, Value> = a.params.iter().map(|s| parse_param(s)).collect::<Result<_, _>>()?;
    block.params.extend(overrides);
    let machine = block.build()?;
    let base = cfg.as_ref().and_then(|c| c.check.clone()).unwrap_or_default();
    let point = a.point.or(&base);
    let threshold = a.threshold.or(cfg.as_ref().and_then(|c| c.threshold)).unwrap_or(DEFAULT_THRESHOLD);
    let report = check_report(&machine, &point, threshold).map_err(|e| config_error(e.to_string()))?;
    print_json(&report);
    Ok(if report.guaranteed { EXIT_OK } else { EXIT_NOT_GUARANTEED })
}

fn write_text(path: &Path, text: String) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure { code: EXIT_SIMULATION, message: format!("cannot write {}: {e}", path.display()) })
}

fn cmd_sweep(a: &SweepArgs) -> Result<i32, Failure> {
    let cfg = RunConfig::load(&a.config)?;
    let spec = cfg.sweep.clone().ok_or_else(|| config_error("config has no sweep block".into()))?;
    let machine = cfg.machine.build()?;
    let threshold = a.threshold.or(cfg.threshold).unwrap_or(DEFAULT_THRESHOLD);
    let (trace, summary) = run_sweep(&machine, &spec, threshold)?;
    let dir = out_dir(&a.out, &cfg);
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure { code: EXIT_SIMULATION, message: format!("cannot create {}: {e}", dir.display()) })?;
    trace.save_csv(&dir.join("sweep.csv"), 1).map_err(|e| Failure { code: EXIT_SIMULATION, message: e.to_string() })?;
    write_text(&dir.join("sweep.json"), serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")?;
    print_json(&summary);
    Ok(EXIT_OK)
}
