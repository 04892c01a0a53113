//! Command-line front end: run sweeps, aggregate results, plot metrics, and
//! run the closed-form oracle suites.
//!
//! Exit codes: 0 success, 1 validation failure, 2 config error, 3 I/O error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use collapse_lab::error::Error;
use collapse_lab::harness::{
    aggregate, emit, execute_sweep, load_aggregate_csv, load_cells, oracle, plot_metric,
    OutputFormat, SweepConfig,
};

#[derive(Parser)]
#[command(name = "collapse-lab")]
#[command(about = "Self-consuming training-loop simulations and collapse measurements")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OracleSuite {
    /// Accumulate variance product and its sinc-type limit.
    GaussianTheorem1,
    /// Kernel-convolution variance law and the shrinking-bandwidth bound.
    KdeVariance,
    /// Incomplete beta / F-test p-values against quadrature.
    StatsBeta,
}

#[derive(Subcommand)]
enum Command {
    /// Expand a sweep config and execute every grid cell.
    Run {
        /// Sweep config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (per-cell files under `cells/`, merged results
        /// at `results.csv`).
        #[arg(long)]
        out: PathBuf,
        /// Merged output format.
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Worker threads; the COLLAPSE_LAB_THREADS environment variable
        /// overrides this.
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        /// Skip cells whose result files already exist.
        #[arg(long)]
        resume: bool,
    },
    /// Aggregate a sweep output directory across seeds.
    Aggregate {
        /// Sweep output directory (as given to `run --out`).
        #[arg(long = "in")]
        input: PathBuf,
        /// Aggregate file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Render one metric of an aggregate CSV as an SVG line chart.
    Plot {
        /// Aggregate CSV (from `aggregate`).
        #[arg(long = "in")]
        input: PathBuf,
        /// Metric name (e.g. w2_sq, nll, test_error).
        #[arg(long)]
        metric: String,
        /// SVG file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a closed-form validation suite; exits nonzero on failure.
    Oracle {
        #[arg(long, value_enum)]
        check: OracleSuite,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse { .. }
        | Error::UnknownKey { .. }
        | Error::UnknownValue { .. }
        | Error::EmptyGrid(_) => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}

fn run() -> Result<u8, Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            format,
            parallelism,
            resume,
        } => {
            let text = fs::read_to_string(&config)?;
            let sweep = SweepConfig::parse(&text)?;
            let parallelism = std::env::var("COLLAPSE_LAB_THREADS")
                .ok()
                .and_then(|v| v.parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .unwrap_or(parallelism.max(1));
            eprintln!(
                "task {}: {} cells, parallelism {}, resume {}",
                sweep.task.name(),
                sweep.cell_count(),
                parallelism,
                resume
            );
            let outcome = execute_sweep(&sweep, &out, parallelism, resume)?;
            if format == Format::Json {
                let rows = aggregate(&outcome.results);
                emit(&rows, OutputFormat::Json, &out.join("results.json"))?;
            }
            eprintln!(
                "executed {} cells, skipped {}, failed {}",
                outcome.executed,
                outcome.skipped,
                outcome.failures.len()
            );
            for (cell, msg) in &outcome.failures {
                eprintln!("  failed: {cell}: {msg}");
            }
            Ok(if outcome.failures.is_empty() { 0 } else { 1 })
        }
        Command::Aggregate { input, out, format } => {
            let cells = load_cells(&input)?;
            if cells.is_empty() {
                eprintln!("no completed cells under {}", input.display());
                return Ok(1);
            }
            let rows = aggregate(&cells);
            let fmt = match format {
                Format::Csv => OutputFormat::Csv,
                Format::Json => OutputFormat::Json,
            };
            emit(&rows, fmt, &out)?;
            eprintln!("wrote {} aggregate rows to {}", rows.len(), out.display());
            Ok(0)
        }
        Command::Plot { input, metric, out } => {
            let rows = load_aggregate_csv(&input)?;
            plot_metric(&rows, &metric, &out)?;
            eprintln!("wrote {}", out.display());
            Ok(0)
        }
        Command::Oracle { check } => {
            let report = match check {
                OracleSuite::GaussianTheorem1 => oracle::check_gaussian_theorem1(),
                OracleSuite::KdeVariance => oracle::check_kde_variance(),
                OracleSuite::StatsBeta => oracle::check_stats_beta(),
            };
            println!("suite: {}", report.suite);
            for c in &report.checks {
                println!("  [{}] {} — {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
