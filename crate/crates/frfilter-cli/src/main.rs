//! `frfilter` — benchmark and self-test harness for the frfilter library.
//!
//! Subcommands: `converge <config.json>` sweeps the proximal filter against
//! the reference filter over step sizes and seeds; `geometry <config.json>`
//! tabulates distance computations against closed forms; `selftest` runs
//! the library's invariant suites. Outputs land in the directory given by
//! `--out` (or the config's `out_dir`, or `out/`).

mod config;
mod convergence;
mod geometry;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use frfilter::selftest::{run_selftest, SuiteReport};

#[derive(Debug, Parser)]
#[command(
    name = "frfilter",
    about = "Fisher-Rao proximal filtering: convergence studies, geometry tables, self-tests",
    version
)]
struct Cli {
    /// Output directory for CSV and summary files (overrides the config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for the sweep (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Offset added to every seed in the config.
    #[arg(long, global = true, value_name = "K", default_value_t = 0)]
    seed_offset: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the step-size convergence study from a config file.
    Converge {
        /// Path to the experiment JSON.
        config: PathBuf,
    },
    /// Tabulate geometry computations against closed-form references.
    Geometry {
        /// Path to the experiment JSON.
        config: PathBuf,
    },
    /// Run the library's invariant suites and report pass/fail per check.
    Selftest {
        /// Run a single suite: matfun, frgeom, proxfilter, or reference.
        #[arg(long, value_name = "NAME")]
        suite: Option<String>,

        /// Shrink every tolerance to zero to exercise the failure path.
        #[arg(long)]
        inject_failure: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }

    match cli.command {
        Command::Converge { config } => {
            let exp = config::load(&config)?;
            let out_dir = resolve_out_dir(cli.out.as_deref(), exp.out_dir.as_deref())?;
            let rows = convergence::run_convergence(&exp, &out_dir, cli.seed_offset)?;
            println!(
                "wrote {} rows to {} (and summary.txt)",
                rows.len(),
                out_dir.join("convergence.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Geometry { config } => {
            let exp = config::load(&config)?;
            let out_dir = resolve_out_dir(cli.out.as_deref(), exp.out_dir.as_deref())?;
            let rows = geometry::run_geometry(&exp, &out_dir, cli.seed_offset)?;
            println!(
                "wrote {} rows to {}",
                rows.len(),
                out_dir.join("geometry.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest {
            suite,
            inject_failure,
        } => {
            let scale = if inject_failure { 0.0 } else { 1.0 };
            let reports = run_selftest(suite.as_deref(), scale)?;
            let all_passed = print_reports(&reports);
            Ok(if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn resolve_out_dir(flag: Option<&Path>, from_config: Option<&Path>) -> Result<PathBuf> {
    let dir = flag
        .or(from_config)
        .unwrap_or_else(|| Path::new("out"))
        .to_path_buf();
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn print_reports(reports: &[SuiteReport]) -> bool {
    let mut all_passed = true;
    let mut checks = 0usize;
    for report in reports {
        println!("suite {}", report.suite);
        for check in &report.checks {
            checks += 1;
            let verdict = if check.passed { "PASS" } else { "FAIL" };
            println!(
                "  [{verdict}] {:<42} measured {:<12.3e} bound {:.3e}",
                check.name, check.measured, check.bound
            );
            all_passed &= check.passed;
        }
    }
    let verdict = if all_passed { "PASS" } else { "FAIL" };
    println!(
        "result: {verdict} ({} suites, {checks} checks)",
        reports.len()
    );
    all_passed
}
