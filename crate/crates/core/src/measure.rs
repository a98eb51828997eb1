//! Walltime efficiency of the pipeline solvers against their classical
//! baseline: speedup over the classical run divided by the ratio of
//! compute workers.

use std::io::Write;

use serde::Serialize;

use crate::dnwr::{self, DnwrConfig, DnwrMode};
use crate::error::{Error, Result};
use crate::grid::Decomposition;
use crate::nnwr::{self, NnwrConfig, NnwrMode};
use crate::problem::HeatProblem;
use crate::report::{Method, RunReport};
use crate::schedule::{ratio_to_f64, theoretical_vs_simulated};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasuredRow {
    pub blocks: usize,
    pub classical_wall_s: f64,
    pub pipeline_wall_s: f64,
    pub speedup: f64,
    /// Compute workers of the pipeline run over those of the baseline.
    pub worker_ratio: usize,
    pub efficiency: f64,
    pub simulated: f64,
    pub pipeline_workers: usize,
    pub hardware_threads: usize,
    pub oversubscribed: bool,
}

#[derive(Debug, Clone)]
pub struct MeasureSpec {
    pub method: Method,
    pub iterates: usize,
    pub theta: f64,
    /// Best of this many runs per configuration.
    pub repeats: usize,
}

fn best_wall(repeats: usize, mut run: impl FnMut() -> Result<RunReport>) -> Result<RunReport> {
    let mut best: Option<RunReport> = None;
    for _ in 0..repeats.max(1) {
        let r = run()?;
        if best.as_ref().is_none_or(|b| r.wall_s < b.wall_s) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one run"))
}

fn run_mode(problem: &HeatProblem, decomp: &Decomposition, spec: &MeasureSpec, pipeline: bool) -> Result<RunReport> {
    match spec.method {
        Method::Nnwr => {
            let mut c = NnwrConfig::new(spec.iterates);
            c.theta = spec.theta;
            c.tol = 0.0;
            c.mode = if pipeline { NnwrMode::Pipeline } else { NnwrMode::Classical };
            nnwr::run(problem, decomp, &c)
        }
        Method::Dnwr => {
            let mut c = DnwrConfig::new(spec.iterates);
            c.theta = spec.theta;
            c.tol = 0.0;
            c.mode = if pipeline { DnwrMode::Pipeline } else { DnwrMode::Naive };
            c.enforce_block_bound = false;
            dnwr::run(problem, decomp, &c)
        }
    }
}

/// Time the classical run once per call and the pipeline run for every
/// `J` in `blocks`. Thread counts above the hardware threads are allowed
/// and flagged in each row.
pub fn measure_efficiency(
    problem: &HeatProblem,
    decomp: &Decomposition,
    spec: &MeasureSpec,
    blocks: &[usize],
) -> Result<Vec<MeasuredRow>> {
    if blocks.is_empty() {
        return Err(Error::Config("J list is empty".into()));
    }
    let n = decomp.subdomains();
    let base_decomp = decomp.with_blocks(1)?;
    let classical = best_wall(spec.repeats, || run_mode(problem, &base_decomp, spec, false))?;
    let mut rows = Vec::with_capacity(blocks.len());
    for &j in blocks {
        let d = decomp.with_blocks(j)?;
        let pipe = best_wall(spec.repeats, || run_mode(problem, &d, spec, true))?;
        let worker_ratio = match spec.method {
            Method::Nnwr => j.min(2 * spec.iterates),
            Method::Dnwr => spec.iterates,
        };
        let speedup = classical.wall_s / pipe.wall_s;
        let simulated = theoretical_vs_simulated(spec.method, n, spec.iterates, j)?;
        rows.push(MeasuredRow {
            blocks: j,
            classical_wall_s: classical.wall_s,
            pipeline_wall_s: pipe.wall_s,
            speedup,
            worker_ratio,
            efficiency: speedup / worker_ratio as f64,
            simulated: ratio_to_f64(simulated.simulated),
            pipeline_workers: pipe.worker_count,
            hardware_threads: pipe.hardware_threads,
            oversubscribed: pipe.worker_count > pipe.hardware_threads,
        });
    }
    Ok(rows)
}

/// `J,actual_efficiency,theoretical_efficiency`
pub fn write_measured_csv<W: Write>(rows: &[MeasuredRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "J,actual_efficiency,theoretical_efficiency")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.blocks, r.efficiency, r.simulated)?;
    }
    Ok(())
}
