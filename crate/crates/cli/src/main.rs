use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fas_swipt::config::ConfigFile;
use fas_swipt::driver::{self, RunOptions};
use fas_swipt::experiment::{run_baseline, run_sweep, write_csv, Baseline, SweepSpec, SweepVariable};
use fas_swipt::Error;
use serde_json::json;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

/// Joint covariance and antenna-position optimization for fluid-antenna
/// SWIPT.
#[derive(Debug, Parser)]
#[command(name = "fas-swipt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize one scenario and print the solution as JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Seeds the generated channel and the random restarts.
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
    },
    /// Sweep one parameter over Monte-Carlo trials and write CSV, plus a
    /// JSON echo of the inputs next to it.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_variable)]
        variable: SweepVariable,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', value_parser = parse_baseline, default_value = "fas,tfa,fpa")]
        baselines: Vec<Baseline>,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        /// Fill the wall_ms column (makes the output non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Compare baselines on one channel realization and print JSON.
    Baseline {
        #[arg(long, value_delimiter = ',', value_parser = parse_baseline, required = true)]
        kinds: Vec<Baseline>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
    },
}

fn parse_variable(s: &str) -> Result<SweepVariable, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_baseline(s: &str) -> Result<Baseline, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Json(_)
        | Error::RegionTooSmall { .. }
        | Error::NonPositiveNoise(_)
        | Error::DimensionMismatch(_) => EXIT_CONFIG,
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        _ => EXIT_FAILURE,
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn run(config: &Path, seed: u64, restarts: usize) -> Result<u8, Error> {
    let scenario = ConfigFile::load(config)?.scenario(seed)?;
    let opts = RunOptions {
        restarts,
        ..RunOptions::default()
    };
    let (sol, trace) = driver::run(&scenario, &opts, seed)?;
    let q: Vec<Vec<[f64; 2]>> = sol
        .q
        .matrix()
        .row_iter()
        .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
        .collect();
    print_json(&json!({
        "w_watts": sol.w,
        "sinr_linear": sol.sinr,
        "converged": sol.converged,
        "outer_iters": sol.outer_iterations,
        "start": trace.start,
        "layout": sol.layout,
        "q": q,
    }));
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    config: &Path,
    variable: SweepVariable,
    values: Vec<f64>,
    trials: usize,
    seed: u64,
    out: &Path,
    baselines: Vec<Baseline>,
    restarts: usize,
    timing: bool,
) -> Result<u8, Error> {
    let base = ConfigFile::load(config)?;
    let spec = SweepSpec {
        variable,
        values,
        trials,
        master_seed: seed,
        baselines,
        restarts,
        timing,
    };
    let rows = run_sweep(&spec, &base)?;
    write_csv(&spec, &rows, BufWriter::new(File::create(out)?))?;
    let echo = File::create(out.with_extension("json"))?;
    serde_json::to_writer_pretty(BufWriter::new(echo), &json!({ "config": base, "sweep": spec }))?;
    let feasible = rows.iter().filter(|r| r.result.w.is_some()).count();
    eprintln!("{} rows, {feasible} feasible, written to {}", rows.len(), out.display());
    Ok(if feasible == 0 { EXIT_INFEASIBLE } else { 0 })
}

fn baseline(kinds: Vec<Baseline>, config: &Path, seed: u64, restarts: usize) -> Result<u8, Error> {
    let scenario = ConfigFile::load(config)?.scenario(seed)?;
    let opts = RunOptions {
        restarts,
        ..RunOptions::default()
    };
    let mut results = Vec::new();
    for kind in kinds {
        let r = run_baseline(kind, &scenario, &opts, seed)?;
        results.push(json!({
            "baseline": kind.label(),
            "w_watts": r.w,
            "sinr_linear": r.sinr,
            "converged": r.converged,
            "outer_iters": r.outer_iterations,
        }));
    }
    let any_feasible = results.iter().any(|r| !r["w_watts"].is_null());
    print_json(&serde_json::Value::Array(results));
    Ok(if any_feasible { 0 } else { EXIT_INFEASIBLE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, restarts } => run(&config, seed, restarts),
        Command::Sweep {
            config,
            variable,
            values,
            trials,
            seed,
            out,
            baselines,
            restarts,
            timing,
        } => sweep(&config, variable, values, trials, seed, &out, baselines, restarts, timing),
        Command::Baseline {
            kinds,
            config,
            seed,
            restarts,
        } => baseline(kinds, &config, seed, restarts),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
