//! Command-line front end. [`run_cli`] returns the process exit code so the
//! binary stays a one-liner and tests can drive it in-process.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::analysis::{fit_rate, rate_exponent, DEFAULT_FLOOR_FACTOR};
use crate::check::{run_checks, CheckOptions};
use crate::config::parse_config_onto;
use crate::report::{loglog_svg, read_csv, series_by_beta, write_csv};
use crate::timeloop::{run, Forcing, RunConfig, SweepRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

pub const DEFAULT_SWEEP_EPSILONS: [f64; 8] = [1e0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];
pub const DEFAULT_SWEEP_BETAS: [f64; 4] = [0.0, 0.2, 0.4, 0.6];

#[derive(Debug, Parser)]
#[command(name = "brinkfem", version, about = "Brinkman-penalized fictitious domain solver for 2D Navier-Stokes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration and print a CSV record.
    Run(RunArgs),
    /// Run every (epsilon, beta) combination and write a CSV table.
    Sweep(SweepArgs),
    /// Run the invariant suite.
    Check(CheckArgs),
    /// Fit convergence slopes from a sweep CSV.
    Rates(RatesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// n = 160, dt = 0.025. Slow: hours on a single core.
    Paper,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Background cells per side.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Start from a named preset; the config file and flags override it.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Debug: replace the manufactured forcing by zero.
    #[arg(long)]
    pub zero_forcing: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated penalty parameters.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP_EPSILONS)]
    pub epsilon: Vec<f64>,
    /// Comma-separated penalty exponents.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP_BETAS)]
    pub beta: Vec<f64>,
    /// CSV destination; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one log-log chart per error norm next to the CSV.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Test hook: corrupt one cut-cell quadrature weight.
    #[arg(long, hide = true)]
    pub perturb_quadrature_weight: bool,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    /// CSV written by `sweep`.
    pub csv: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FLOOR_FACTOR)]
    pub floor_factor: f64,
}

/// Parses `args` (including the program name) and executes the command.
pub fn run_cli<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let sink: &mut dyn Write = if informational { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return if informational { EXIT_OK } else { EXIT_USAGE };
        }
    };
    match cli.command {
        Command::Run(a) => {
            set_threads(a.common.threads);
            cmd_run(&a, out, err)
        }
        Command::Sweep(a) => {
            set_threads(a.common.threads);
            cmd_sweep(&a, out, err)
        }
        Command::Check(a) => {
            set_threads(a.threads);
            cmd_check(&a, out)
        }
        Command::Rates(a) => cmd_rates(&a, out, err),
    }
}

/// Sizes the global pool. Only the first call in a process takes effect.
fn set_threads(threads: Option<usize>) {
    if let Some(k) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
}

/// Preset, then config file, then explicit flags.
fn base_config(common: &CommonArgs, err: &mut dyn Write) -> Option<RunConfig> {
    let mut cfg = match common.preset {
        Some(Preset::Paper) => RunConfig::fine_preset(),
        None => RunConfig::default(),
    };
    if let Some(path) = &common.config {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
                return None;
            }
        };
        cfg = match parse_config_onto(&text, cfg) {
            Ok(c) => c,
            Err(e) => {
                let _ = writeln!(err, "error: {}: {e}", path.display());
                return None;
            }
        };
    }
    if let Some(n) = common.n {
        cfg.n = n;
    }
    if let Some(dt) = common.dt {
        cfg.dt = dt;
    }
    Some(cfg)
}

fn validated(cfg: RunConfig, err: &mut dyn Write) -> Option<RunConfig> {
    match cfg.validate() {
        Ok(()) => Some(cfg),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            None
        }
    }
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(mut cfg) = base_config(&a.common, err) else { return EXIT_USAGE };
    if let Some(e) = a.epsilon {
        cfg.epsilon = e;
    }
    if let Some(b) = a.beta {
        cfg.beta = b;
    }
    if a.zero_forcing {
        cfg.forcing = Forcing::Zero;
    }
    let Some(cfg) = validated(cfg, err) else { return EXIT_USAGE };
    let outcome = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Err(e) = write_csv(&mut *out, std::slice::from_ref(&outcome.record)) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    match outcome.failure {
        Some(f) => {
            let _ = writeln!(err, "solver failed after {} steps: {f}", outcome.stats.steps_taken);
            EXIT_SOLVER
        }
        None => EXIT_OK,
    }
}

/// Runs all combinations, `epsilon` outer and `beta` inner. Rows come back in
/// that order whatever the completion order.
pub fn sweep_records(base: &RunConfig, epsilons: &[f64], betas: &[f64], log: &(dyn Fn(&SweepRecord) + Sync)) -> Vec<SweepRecord> {
    let grid: Vec<RunConfig> = epsilons
        .iter()
        .flat_map(|&epsilon| betas.iter().map(move |&beta| RunConfig { epsilon, beta, ..base.clone() }))
        .collect();
    grid.par_iter()
        .map(|cfg| {
            let record = run(cfg).expect("configuration validated").record;
            log(&record);
            record
        })
        .collect()
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if a.epsilon.is_empty() || a.beta.is_empty() {
        let _ = writeln!(err, "error: epsilon and beta lists must be nonempty");
        return EXIT_USAGE;
    }
    let Some(base) = base_config(&a.common, err) else { return EXIT_USAGE };
    for &epsilon in &a.epsilon {
        for &beta in &a.beta {
            if validated(RunConfig { epsilon, beta, ..base.clone() }, err).is_none() {
                return EXIT_USAGE;
            }
        }
    }
    let log = |r: &SweepRecord| {
        eprintln!("beta={} epsilon={:e} err_l2h1={:.4e} {} {:.1}s", r.beta, r.epsilon, r.err_l2h1, r.status.as_str(), r.wall_seconds);
    };
    let records = sweep_records(&base, &a.epsilon, &a.beta, &log);

    let written = match &a.out {
        Some(path) => fs::File::create(path).map_err(|e| e.to_string()).and_then(|f| write_csv(f, &records).map_err(|e| e.to_string())),
        None => write_csv(&mut *out, &records).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    if a.svg {
        let stem = a.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
        if let Err(e) = write_charts(&stem, &records) {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    }
    EXIT_OK
}

/// Chart paths derived from the CSV path, e.g. `run.csv` -> `run_err_l2h1.svg`.
pub fn chart_paths(csv_path: &Path) -> [(PathBuf, &'static str); 2] {
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    let dir = csv_path.parent().unwrap_or_else(|| Path::new(""));
    ["err_l2h1", "err_l2_final"].map(|col| (dir.join(format!("{stem}_{col}.svg")), col))
}

fn write_charts(csv_path: &Path, records: &[SweepRecord]) -> std::io::Result<()> {
    for (path, column) in chart_paths(csv_path) {
        let pick = |r: &SweepRecord| if column == "err_l2h1" { r.err_l2h1 } else { r.err_l2_final };
        let series: Vec<(String, Vec<(f64, f64)>)> =
            series_by_beta(records, pick).into_iter().map(|(b, pts)| (format!("beta = {b}"), pts)).collect();
        fs::write(path, loglog_svg(&format!("{column} versus epsilon"), column, &series))?;
    }
    Ok(())
}

fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> i32 {
    let results = run_checks(CheckOptions { perturb_quadrature_weight: a.perturb_quadrature_weight });
    let mut failed = 0;
    for c in &results {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!c.passed);
        let _ = writeln!(out, "{tag} {:<24} {:>8.3}s  {}", c.name, c.seconds, c.detail);
    }
    let _ = writeln!(out, "{} of {} checks passed", results.len() - failed, results.len());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_CHECK
    }
}

fn cmd_rates(a: &RatesArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let records = match fs::File::open(&a.csv).map_err(|e| e.to_string()).and_then(|f| read_csv(f).map_err(|e| e.to_string())) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", a.csv.display());
            return EXIT_USAGE;
        }
    };
    for (beta, points) in series_by_beta(&records, |r| r.err_l2h1) {
        let fit = fit_rate(&points, a.floor_factor);
        let reference = rate_exponent(0.0, beta).map(|v| format!("{:.4}", v / 2.0)).unwrap_or_else(|_| "n/a".into());
        let slope = if fit.is_fitted() { format!("{:.4}", fit.slope) } else { "inconclusive".into() };
        let _ = writeln!(out, "beta={beta} slope={slope} window={} reference={reference}", fit.window_description());
    }
    EXIT_OK
}
