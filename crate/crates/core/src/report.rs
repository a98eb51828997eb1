use std::io::Write;

use serde::Serialize;

use crate::runtime::{TaskEvent, WorkerStats};
use crate::traces::TraceSet;
use crate::transport::{MsgCounter, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nnwr,
    Dnwr,
}

/// One-sided fluxes of both neighbours at each interface after the final
/// iterate. `from_left[i-1]` comes from subdomain `i`, `from_right[i-1]`
/// from subdomain `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfaceFlux {
    pub from_left: Vec<Vec<f64>>,
    pub from_right: Vec<Vec<f64>>,
}

impl InterfaceFlux {
    pub fn max_mismatch(&self) -> f64 {
        crate::traces::max_abs_diff(&self.from_left, &self.from_right)
    }
}

/// Outcome of one solver run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub method: Method,
    pub mode: String,
    pub subdomains: usize,
    pub max_iterates: usize,
    pub blocks: usize,
    pub theta: f64,
    pub tol: f64,
    /// Iterates whose subdomain solves ran.
    pub iterations: usize,
    pub converged: bool,
    /// `||w^[k] - w^[k-1]||_inf` for `k = 1, 2, ...`.
    pub residuals: Vec<f64>,
    pub counters: MsgCounter,
    pub unmatched_messages: usize,
    pub worker_count: usize,
    pub hardware_threads: usize,
    pub workers: Vec<WorkerStats>,
    pub wall_s: f64,
    /// Last computed traces.
    #[serde(skip)]
    pub traces: TraceSet,
    /// Traces for every computed iterate, starting with the initial guess.
    #[serde(skip)]
    pub history: Vec<TraceSet>,
    /// Global node values at the final time from the last subdomain solves.
    #[serde(skip)]
    pub final_state: Vec<f64>,
    #[serde(skip)]
    pub interface_flux: Option<InterfaceFlux>,
    #[serde(skip)]
    pub timeline: Vec<TaskEvent>,
    #[serde(skip)]
    pub message_trace: Vec<TraceRecord>,
}

impl RunReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// `k,residual_Linf`
    pub fn write_residual_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,residual_Linf")?;
        for (k, r) in self.residuals.iter().enumerate() {
            writeln!(out, "{},{:e}", k + 1, r)?;
        }
        Ok(())
    }

    /// `worker,i,k,j,start_event,end_event`
    pub fn write_timeline_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "worker,i,k,j,start_event,end_event")?;
        for e in &self.timeline {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.worker, e.subdomain, e.iterate, e.block, e.start_event, e.end_event
            )?;
        }
        Ok(())
    }
}

pub(crate) fn hardware_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
