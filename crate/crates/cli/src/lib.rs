//! Command-line front end: `analyze`, `simulate` and `invariants` over a
//! JSON run configuration.

// NaN-rejecting checks are written as `!(x >= 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use vortexlines::dynamics::{integrate_trajectory, VortexDynamics};
use vortexlines::invariants::{
    check_absolute_invariant, check_liouville, check_relative_invariant, InvariantOptions,
};
use vortexlines::wellposed::{analyze, Analysis};

pub use config::{load_config, parse_config, ConfigError, Overrides, RunConfig};
use report::{
    to_json, write_atomic, AnalyzeReport, FormsSummary, InvariantEntry, InvariantsDocument, LiouvilleSummary,
    TrajectoryDocument,
};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const ILL_POSED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, Parser)]
#[command(
    name = "vortexlines",
    version,
    about = "Vortex-line dynamics of differential forms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide well-posedness and print the report.
    Analyze(CommonArgs),
    /// Integrate a trajectory from the configured initial point.
    Simulate(CommonArgs),
    /// Run the configured invariant checks.
    Invariants(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Run configuration (JSON).
    config: PathBuf,
    /// Write the result here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Output format; trajectories default to CSV, reports are always JSON.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    t0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t1: Option<f64>,
    /// Rank sample count and Liouville sample count.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("sigma is ill-posed: {0}")]
    IllPosed(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => exit::CONFIG,
            CliError::IllPosed(_) => exit::ILL_POSED,
            CliError::Numerical(_) | CliError::Output(_) => exit::NUMERICAL,
        }
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run_cli`] with explicit output streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::SUCCESS
            };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, out, err),
        Command::Invariants(a) => cmd_invariants(a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}

fn prepare(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = load_config(&args.config)?;
    if args.samples == Some(0) {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    cfg.apply(&Overrides {
        seed: args.seed,
        samples: args.samples,
        t0: args.t0,
        t1: args.t1,
    });
    if !(cfg.time.t0.is_finite() && cfg.time.t1.is_finite()) {
        return Err(CliError::Usage("t0 and t1 must be finite".into()));
    }
    Ok(cfg)
}

fn emit(args: &CommonArgs, bytes: &[u8], out: &mut dyn Write) -> Result<(), CliError> {
    match &args.output {
        Some(path) => write_atomic(path, bytes)?,
        None => out.write_all(bytes)?,
    }
    Ok(())
}

fn require_json(args: &CommonArgs, what: &str) -> Result<(), CliError> {
    if args.format == Some(Format::Csv) {
        return Err(CliError::Usage(format!("{what} reports are JSON only")));
    }
    Ok(())
}

fn run_analysis(cfg: &RunConfig) -> Result<Analysis, CliError> {
    analyze(&cfg.sigma, &cfg.sampling).map_err(|e| CliError::Numerical(e.to_string()))
}

fn ill_posed_summary(analysis: &Analysis) -> String {
    let r = &analysis.report;
    let mut parts: Vec<String> = r.reasons.iter().map(|x| x.describe().to_string()).collect();
    if let Some(w) = &r.witness {
        match w.rank {
            Some(rank) => parts.push(format!("rank {rank} at {:?}", w.point)),
            None => parts.push(format!("evaluation failed at {:?}", w.point)),
        }
    }
    parts.join("; ")
}

fn cmd_analyze(args: &CommonArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    require_json(args, "analysis")?;
    let cfg = prepare(args)?;
    let analysis = run_analysis(&cfg)?;
    let doc = AnalyzeReport {
        report: &analysis.report,
        min_rank: analysis.report.min_rank(),
        forms: FormsSummary {
            sigma: analysis.sigma.to_string(),
            s_hat: analysis.s_hat.to_string(),
            r_hat: analysis.r_hat.to_string(),
            s_cap: analysis.s_cap.to_string(),
            r_cap: analysis.r_cap.to_string(),
        },
    };
    emit(args, &to_json(&doc)?, out)?;
    if analysis.report.is_well_posed() {
        Ok(exit::SUCCESS)
    } else {
        let _ = writeln!(err, "ill-posed: {}", ill_posed_summary(&analysis));
        Ok(exit::ILL_POSED)
    }
}

fn well_posed_dynamics(cfg: &RunConfig) -> Result<(Analysis, VortexDynamics), CliError> {
    let analysis = run_analysis(cfg)?;
    if !analysis.report.is_well_posed() {
        return Err(CliError::IllPosed(ill_posed_summary(&analysis)));
    }
    let dynamics = VortexDynamics::new(&analysis).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok((analysis, dynamics))
}

fn cmd_simulate(args: &CommonArgs, out: &mut dyn Write, _err: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = prepare(args)?;
    let x0 = cfg.initial.clone().ok_or_else(|| ConfigError::Invalid {
        pointer: "/initial".into(),
        message: "simulate needs an initial point".into(),
    })?;
    let (_, dynamics) = well_posed_dynamics(&cfg)?;
    let mut opts = cfg.integrator.clone();
    if let Some(count) = cfg.time.samples {
        opts = opts.with_uniform_samples(cfg.time.t0, cfg.time.t1, count);
    }
    let traj = integrate_trajectory(&dynamics, &x0, cfg.time.t0, cfg.time.t1, &opts);
    let names = cfg.space.spatial_names();
    let bytes = match args.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            traj.write_csv(names, &mut buf)?;
            buf
        }
        Format::Json => to_json(&TrajectoryDocument::new(names, &traj))?,
    };
    // the partial trajectory is still written before reporting the failure
    emit(args, &bytes, out)?;
    match &traj.failure {
        Some(e) => Err(CliError::Numerical(e.to_string())),
        None => Ok(exit::SUCCESS),
    }
}

fn cmd_invariants(args: &CommonArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    require_json(args, "invariant")?;
    let cfg = prepare(args)?;
    let (analysis, dynamics) = well_posed_dynamics(&cfg)?;
    let (t0, t1) = (cfg.time.t0, cfg.time.t1);
    let tasks = &cfg.invariants;
    let opts = InvariantOptions {
        order: tasks.order,
        integrator: cfg.integrator.clone(),
        sampling: Some(cfg.sampling.clone()),
    };
    let numerical = |e: vortexlines::invariants::InvariantError| CliError::Numerical(e.to_string());
    let judge = |drift: f64| tasks.tolerance.map(|tol| drift <= tol);

    let mut entries = Vec::new();
    for task in &tasks.relative {
        let chain = task.chain(&cfg.space, t0).map_err(numerical)?;
        let r = check_relative_invariant(&cfg.sigma, &chain, t0, t1, task.k, &opts).map_err(numerical)?;
        let pass = judge(r.drift_abs);
        entries.push(InvariantEntry { report: r, pass });
    }
    for task in &tasks.absolute {
        let chain = task.chain(&cfg.space, t0).map_err(numerical)?;
        let r = check_absolute_invariant(&cfg.sigma, &chain, t0, t1, task.k, &opts).map_err(numerical)?;
        let pass = judge(r.drift_abs);
        entries.push(InvariantEntry { report: r, pass });
    }
    let liouville = if tasks.liouville.is_empty() {
        None
    } else {
        let mut reports = Vec::new();
        for (i, task) in tasks.liouville.iter().enumerate() {
            let seed = cfg.sampling.seed.wrapping_add(i as u64);
            let r = check_liouville(
                &dynamics,
                &task.lower,
                &task.upper,
                t0,
                t1,
                task.samples,
                seed,
                &cfg.integrator,
            )
            .map_err(numerical)?;
            reports.push(r);
        }
        Some(LiouvilleSummary {
            max_abs_det_minus_one: reports
                .iter()
                .map(|r| r.max_abs_det_minus_one)
                .fold(0.0, f64::max),
            failures: reports.iter().map(|r| r.failures).sum(),
            tasks: reports,
        })
    };
    let liouville_ok = liouville
        .as_ref()
        .is_none_or(|l| l.failures == 0 && tasks.tolerance.is_none_or(|tol| l.max_abs_det_minus_one <= tol));
    let failed = entries.iter().filter(|e| e.pass == Some(false)).count();
    let doc = InvariantsDocument {
        verdict: analysis.report.verdict,
        degree_ok: analysis.report.degree_ok,
        parity_ok: analysis.report.parity_ok,
        rank_samples: &analysis.report.rank_samples,
        seed: cfg.sampling.seed,
        invariants: entries,
        liouville,
        tolerance: tasks.tolerance,
    };
    emit(args, &to_json(&doc)?, out)?;
    if failed > 0 || !liouville_ok {
        let _ = writeln!(
            err,
            "invariant check failed: {failed} drift(s) above tolerance, liouville ok = {liouville_ok}"
        );
        return Ok(exit::NUMERICAL);
    }
    Ok(exit::SUCCESS)
}

/// Path of a fixture shipped with the repository.
pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}
