//! `adrc`: simulate scenarios, sweep grids, certify stability and run the
//! telescope experiments from JSON configs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adrc_core::config::{ScenarioConfig, TelescopeConfig};
use adrc_core::control::CompensationMode;
use adrc_core::sim::output::{grid_csv, omega_sweep_csv, timeseries_csv};
use adrc_core::sim::{run_grid, run_scenario, run_telescope, GridRow, Metrics};
use adrc_core::stability::{certify, StabilityReport};
use adrc_core::AdrcError;
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "adrc",
    version,
    about = "ADRC with input dynamics: simulation and stability certification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario: timeseries.csv, summary.json
    Simulate(Args),
    /// Run the scenario's `grid` section: grid_summary.csv, summary.json
    Grid(Args),
    /// Certify the scenario: stability_report.json, omega_sweep.csv
    Stability(Args),
    /// Run a telescope experiment config: timeseries_<variant>.csv, summary.json
    Telescope(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override the integration step, s
    #[arg(long)]
    step: Option<f64>,
    /// Override the simulated duration, s
    #[arg(long)]
    duration: Option<f64>,
    /// Worker threads for grid cells and sweeps (default: all cores)
    #[arg(long)]
    parallel: Option<usize>,
    /// Reserved; every scenario is deterministic
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<AdrcError> for Failure {
    fn from(e: AdrcError) -> Self {
        let code = match e {
            AdrcError::NonFinite { .. } | AdrcError::SingularSystem(_) | AdrcError::NotPositiveDefinite { .. } => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    config_path: String,
    output_dir: String,
    seed: u64,
    version: &'static str,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'static str,
    #[serde(flatten)]
    metrics: &'a Metrics,
}

#[derive(Serialize)]
struct GridSummary<'a> {
    command: &'static str,
    rows: &'a [GridRow],
}

#[derive(Serialize)]
struct TelescopeRun<'a> {
    compensation_mode: CompensationMode,
    #[serde(flatten)]
    metrics: &'a Metrics,
}

#[derive(Serialize)]
struct TelescopeSummary<'a> {
    command: &'static str,
    runs: Vec<TelescopeRun<'a>>,
}

/// Output directory whose files are written to a temporary sibling and
/// renamed into place.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::config(format!("output directory {} is not writable: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let fail = |e: std::io::Error| Failure {
            code: 1,
            message: format!("writing {name}: {e}"),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(fail)?;
        tmp.write_all(contents.as_bytes()).map_err(fail)?;
        tmp.persist(self.dir.join(name)).map_err(|e| fail(e.error))?;
        self.written.push(name.to_owned());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).expect("outputs serialize") + "\n";
        self.write(name, &text)
    }
}

fn read_config(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))
}

fn scenario_config(args: &Args) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::from_json(&read_config(&args.config)?)?;
    if let Some(s) = args.step {
        cfg.step = s;
    }
    if let Some(d) = args.duration {
        cfg.duration = d;
    }
    Ok(cfg)
}

fn simulate(args: &Args, out: &mut Outputs) -> Result<(), Failure> {
    let cfg = scenario_config(args)?;
    let built = cfg.build()?;
    let res = run_scenario(&built.scenario)?;
    out.write("timeseries.csv", &timeseries_csv(cfg.dim(), &res.samples))?;
    out.json(
        "summary.json",
        &Summary {
            command: "simulate",
            metrics: &res.metrics,
        },
    )
}

fn grid(args: &Args, out: &mut Outputs) -> Result<(), Failure> {
    let cfg = scenario_config(args)?;
    let rows = run_grid(&cfg)?;
    out.write("grid_summary.csv", &grid_csv(&rows))?;
    out.json(
        "summary.json",
        &GridSummary {
            command: "grid",
            rows: &rows,
        },
    )
}

fn stability(args: &Args, out: &mut Outputs) -> Result<(), Failure> {
    let cfg = scenario_config(args)?;
    let (cert, p) = cfg.certifier()?;
    let report: StabilityReport =
        certify(&cert, p, &cfg.stability.omega_grid, &cfg.stability.kappa_grid).map_err(|e| match e {
            AdrcError::Empty(_) | AdrcError::NonPositive { .. } | AdrcError::InvalidBound { .. } => {
                Failure::config(format!("invalid configuration at `stability`: {e}"))
            }
            e => e.into(),
        })?;
    out.json("stability_report.json", &report)?;
    out.write("omega_sweep.csv", &omega_sweep_csv(&report.omega_sweep))
}

fn telescope(args: &Args, out: &mut Outputs) -> Result<(), Failure> {
    let mut cfg = TelescopeConfig::from_json(&read_config(&args.config)?)?;
    if let Some(s) = args.step {
        cfg.experiment.step = s;
    }
    if let Some(d) = args.duration {
        cfg.experiment.duration = d;
    }
    let setups = cfg.setups()?;
    let results = setups
        .par_iter()
        .map(|s| run_telescope(s).map(|r| (s.compensation_mode, r)))
        .collect::<Result<Vec<_>, _>>()?;
    for (mode, r) in &results {
        out.write(
            &format!("timeseries_{}.csv", mode.as_str()),
            &timeseries_csv(2, &r.samples),
        )?;
    }
    out.json(
        "summary.json",
        &TelescopeSummary {
            command: "telescope",
            runs: results
                .iter()
                .map(|(m, r)| TelescopeRun {
                    compensation_mode: *m,
                    metrics: &r.metrics,
                })
                .collect(),
        },
    )
}

type Handler = fn(&Args, &mut Outputs) -> Result<(), Failure>;

fn run(cli: Cli) -> Result<(), Failure> {
    let (name, args, f): (&'static str, Args, Handler) = match cli.command {
        Command::Simulate(a) => ("simulate", a, simulate),
        Command::Grid(a) => ("grid", a, grid),
        Command::Stability(a) => ("stability", a, stability),
        Command::Telescope(a) => ("telescope", a, telescope),
    };
    if let Some(n) = args.parallel {
        if n == 0 {
            return Err(Failure::config("--parallel must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(e.to_string()))?;
    }
    let mut out = Outputs::new(&args.out)?;
    f(&args, &mut out)?;
    let mut outputs = out.written.clone();
    outputs.push("manifest.json".into());
    out.json(
        "manifest.json",
        &RunManifest {
            command: name,
            config_path: args.config.display().to_string(),
            output_dir: args.out.display().to_string(),
            seed: args.seed,
            version: env!("CARGO_PKG_VERSION"),
            outputs,
        },
    )
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let kind = match f.code {
                2 => "configuration error",
                3 => "numeric error",
                _ => "error",
            };
            eprintln!("adrc: {kind}: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
