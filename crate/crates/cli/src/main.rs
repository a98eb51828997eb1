//! `wavepipe` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration error, 2 completed without
//! converging, 3 run or validation failure.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{write_file, ModeArg, RunArgs, RunConfig};
use wavepipe::measure::{measure_efficiency, write_measured_csv, MeasureSpec};
use wavepipe::report::Method;
use wavepipe::schedule::{theoretical_vs_simulated, write_efficiency_csv};
use wavepipe::{dnwr, nnwr, Error, RunReport};

#[derive(Parser, Debug)]
#[command(name = "wavepipe", version, about = "Classical and pipeline waveform relaxation for the 1D heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one solver and write the report JSON and residual CSV
    Solve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
        #[arg(long, default_value = "residuals.csv")]
        residuals: PathBuf,
    },
    /// Run a baseline mode and the pipeline mode with the same K and
    /// compare their traces
    Validate {
        #[command(flatten)]
        run: RunArgs,
        /// Iterates for the pipeline run; must equal K
        #[arg(long = "pipeline-K")]
        pipeline_k: Option<usize>,
    },
    /// Efficiency of the pipeline ordering for a list of J
    EfficiencyTable {
        #[command(flatten)]
        run: RunArgs,
        /// Exact efficiencies from the schedule simulator (default)
        #[arg(long, conflicts_with = "measure")]
        simulate: bool,
        /// Walltime efficiencies from threaded runs
        #[arg(long)]
        measure: bool,
        /// Timed runs per configuration, best kept
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// CSV destination, stdout if absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Unconverged,
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::BlocksDoNotDivide { .. }
            | Error::OffGrid { .. }
            | Error::Degenerate(_)
            | Error::LengthMismatch { .. }
            | Error::Precondition(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn run_solver(cfg: &RunConfig, mode: ModeArg, blocks: usize, enforce_bound: bool) -> Result<RunReport, Error> {
    let (problem, decomp) = cfg.build(blocks)?;
    match cfg.method {
        Method::Nnwr => nnwr::run(&problem, &decomp, &cfg.nnwr(mode)),
        Method::Dnwr => {
            let mut c = cfg.dnwr(mode);
            c.enforce_block_bound = enforce_bound;
            // the one-worker-per-subdomain orderings run the whole window
            let decomp = if mode == ModeArg::Pipeline { decomp } else { decomp.with_blocks(1)? };
            dnwr::run(&problem, &decomp, &c)
        }
    }
}

fn cmd_solve(run: RunArgs, report: PathBuf, residuals: PathBuf) -> Result<(), Failure> {
    let cfg = run.resolve()?;
    let j = cfg.single_block()?;
    cfg.build(j)?;
    let r = run_solver(&cfg, cfg.mode, j, true)?;
    let doc = json!({ "config": cfg.echo(), "report": r });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Run(e.to_string()))?;
    write_file(&report, text.as_bytes())?;
    let mut csv = Vec::new();
    r.write_residual_csv(&mut csv).map_err(Error::from)?;
    write_file(&residuals, &csv)?;
    println!(
        "{} {}: {} iterates, converged {}, final residual {:e}, {} messages",
        match r.method {
            Method::Nnwr => "nnwr",
            Method::Dnwr => "dnwr",
        },
        r.mode,
        r.iterations,
        r.converged,
        r.residuals.last().copied().unwrap_or(0.0),
        r.counters.total_messages
    );
    if cfg.tol > 0.0 && !r.converged {
        return Err(Failure::Unconverged);
    }
    Ok(())
}

const VALIDATE_TOL: f64 = 1e-13;

fn cmd_validate(run: RunArgs, pipeline_k: Option<usize>) -> Result<(), Failure> {
    let mut cfg = run.resolve()?;
    if let Some(k) = pipeline_k.filter(|&k| k != cfg.iterates) {
        return Err(Failure::Config(format!(
            "validate needs the same K in both modes, got {} and {k}",
            cfg.iterates
        )));
    }
    if cfg.mode == ModeArg::Pipeline {
        cfg.mode = match cfg.method {
            Method::Nnwr => ModeArg::Classical,
            Method::Dnwr => ModeArg::Naive,
        };
    }
    let j = cfg.single_block()?;
    cfg.build(j)?;
    // fixed K in both runs
    cfg.tol = 0.0;
    let base = run_solver(&cfg, cfg.mode, j, false)?;
    let pipe = run_solver(&cfg, ModeArg::Pipeline, j, false)?;
    let diff = base.traces.max_abs_diff(&pipe.traces);
    let bitwise = base.traces.bitwise_eq(&pipe.traces);
    println!(
        "{} vs {}: K = {}, J = {j}, max abs difference {diff:e}{}",
        base.mode,
        pipe.mode,
        cfg.iterates,
        if bitwise { " (bitwise equal)" } else { "" }
    );
    if diff <= VALIDATE_TOL {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(Failure::Run(format!("traces differ by {diff:e} > {VALIDATE_TOL:e}")))
    }
}

fn cmd_efficiency(run: RunArgs, measure: bool, repeats: usize, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut run = run;
    if run.n.is_none() && run.config.is_none() {
        run.n = Some(8);
    }
    if run.k.is_none() && run.config.is_none() {
        run.k = Some(4);
    }
    let cfg = run.resolve()?;
    if cfg.blocks.contains(&0) {
        return Err(Failure::Config("J must be at least 1".into()));
    }
    let mut csv = Vec::new();
    if measure {
        let (problem, decomp) = cfg.build(1)?;
        let spec = MeasureSpec {
            method: cfg.method,
            iterates: cfg.iterates,
            theta: cfg.theta,
            repeats,
        };
        let rows = measure_efficiency(&problem, &decomp, &spec, &cfg.blocks)?;
        if let Some(r) = rows.iter().find(|r| r.oversubscribed) {
            eprintln!(
                "note: {} logical workers on {} hardware threads",
                r.pipeline_workers, r.hardware_threads
            );
        }
        write_measured_csv(&rows, &mut csv).map_err(Error::from)?;
    } else {
        let rows = cfg
            .blocks
            .iter()
            .map(|&j| theoretical_vs_simulated(cfg.method, cfg.subdomains, cfg.iterates, j))
            .collect::<Result<Vec<_>, _>>()?;
        write_efficiency_csv(&rows, &mut csv).map_err(Error::from)?;
    }
    match out {
        Some(path) => write_file(&path, &csv)?,
        None => std::io::stdout().write_all(&csv).map_err(|e| Failure::Run(e.to_string()))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { run, report, residuals } => cmd_solve(run, report, residuals),
        Command::Validate { run, pipeline_k } => cmd_validate(run, pipeline_k),
        Command::EfficiencyTable {
            run,
            simulate: _,
            measure,
            repeats,
            out,
        } => cmd_efficiency(run, measure, repeats, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Unconverged) => {
            eprintln!("not converged within K iterates");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
