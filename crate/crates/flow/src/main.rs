#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ginibre_flow::config::{Experiment, ExperimentConfig};
use ginibre_flow::output::{write_atomic, Sink};
use ginibre_flow::verify::{report_table, verify_all, Level, VerifyOptions};
use ginibre_flow::{run, FlowError};

/// What to run: an experiment name or `verify`.
#[derive(Clone, Copy, Debug)]
enum Target {
    Experiment(Experiment),
    Verify,
}

fn parse_target(s: &str) -> Result<Target, String> {
    if s == "verify" {
        return Ok(Target::Verify);
    }
    s.parse().map(Target::Experiment)
}

#[derive(Parser)]
#[command(name = "ginibre-flow", version, about = "Monte Carlo and flow experiments for Brownian Ginibre matrices")]
struct Cli {
    /// density, petermann, greens, characteristics, edge, verify-burgers,
    /// determinant-check, or verify. May be omitted when the config file
    /// names the experiment.
    #[arg(value_parser = parse_target)]
    target: Option<Target>,
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set n=50`. Wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (for verify, also writes `verify.csv` there).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Verification level: quick or full.
    #[arg(long, default_value = "quick")]
    level: Level,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "GINIBRE_FLOW_THREADS")]
    threads: Option<usize>,
}

fn init_threads(threads: Option<usize>) -> Result<(), FlowError> {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| FlowError::Config(format!("thread pool: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn run_experiment(
    experiment: Option<Experiment>,
    config: Option<PathBuf>,
    overrides: &[String],
    out: PathBuf,
) -> Result<bool, FlowError> {
    let cfg = ExperimentConfig::load(config.as_deref(), overrides, experiment)?;
    let manifest = run(&cfg, &out)?;
    for f in &manifest.files {
        println!("wrote {} ({} rows)", f.path, f.rows);
    }
    for c in &manifest.checks {
        println!("{} {}: {:.6e}", if c.passed { "pass" } else { "FAIL" }, c.name, c.measured);
    }
    if !manifest.passed {
        let failures = manifest.failures();
        Sink::new(&out)?.write_json("failure_report.json", &failures)?;
        eprintln!("{} check(s) failed; see {}", failures.len(), out.join("failure_report.json").display());
    }
    Ok(manifest.passed)
}

fn run_verify(level: Level, out: Option<PathBuf>) -> Result<bool, FlowError> {
    let reports = verify_all(&VerifyOptions::new(level))?;
    for r in &reports {
        println!("{}", r.line());
    }
    let table = report_table(&reports);
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        write_atomic(&dir.join("verify.csv"), &table.to_bytes()?)?;
    }
    Ok(reports.iter().all(|r| r.passed()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads(cli.threads).and_then(|()| match cli.target {
        Some(Target::Verify) => run_verify(cli.level, cli.out),
        Some(Target::Experiment(e)) => run_experiment(Some(e), cli.config, &cli.overrides, cli.out.unwrap_or_else(|| "out".into())),
        None => run_experiment(None, cli.config, &cli.overrides, cli.out.unwrap_or_else(|| "out".into())),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
