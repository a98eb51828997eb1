//! Neumann-Neumann waveform relaxation.
//!
//! Each iterate solves a Dirichlet problem on every subdomain with the
//! current traces, forms the flux jump at every interface, solves an
//! auxiliary problem driven by the jumps and corrects the traces:
//!
//! `w_i <- w_i - theta (psi_i(x_i) + psi_{i+1}(x_i))`.
//!
//! The classical ordering sweeps the whole horizon per stage; the pipeline
//! ordering streams time blocks between one worker per stage. Both call
//! the same block kernels, so their traces agree bit for bit.

mod classical;
mod pipeline;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use classical::run_classical;
pub use pipeline::run_pipeline;

use crate::error::{check_len, Error, Result};
use crate::grid::Decomposition;
use crate::heat::{
    advance_block, assemble_factor, BcPattern, BcSpec, BoundaryData, BoundarySeries, FluxStencil,
    SubdomainState, TriFactor,
};
use crate::problem::HeatProblem;
use crate::report::RunReport;
use crate::traces::InitialGuess;
use crate::transport::TransportOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NnwrMode {
    #[default]
    Classical,
    Pipeline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnwrConfig {
    pub theta: f64,
    /// Maximum iterate count `K` (the exact count in pipeline mode).
    pub iterates: usize,
    /// Stop when `||w^[k] - w^[k-1]||_inf < tol` (classical mode).
    pub tol: f64,
    pub mode: NnwrMode,
    pub initial_guess: InitialGuess,
    /// Flux sent across interfaces.
    pub flux: FluxStencil,
    pub transport: TransportOptions,
}

impl Default for NnwrConfig {
    fn default() -> Self {
        Self {
            theta: 0.25,
            iterates: 8,
            tol: 1e-8,
            mode: NnwrMode::Classical,
            initial_guess: InitialGuess::default(),
            flux: FluxStencil::default(),
            transport: TransportOptions::default(),
        }
    }
}

impl NnwrConfig {
    pub fn new(iterates: usize) -> Self {
        Self {
            iterates,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if self.iterates == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!("tol must be non-negative, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Run in the configured mode.
pub fn run(problem: &HeatProblem, decomp: &Decomposition, config: &NnwrConfig) -> Result<RunReport> {
    match config.mode {
        NnwrMode::Classical => run_classical(problem, decomp, config),
        NnwrMode::Pipeline => run_pipeline(problem, decomp, config),
    }
}

pub(crate) fn check_inputs(problem: &HeatProblem, decomp: &Decomposition) -> Result<()> {
    if problem.grid() != decomp.grid() {
        return Err(Error::Config("problem and decomposition use different grids".into()));
    }
    Ok(())
}

/// Peak efficiency of the pipeline ordering with unit task costs and free
/// communication.
pub fn peak_efficiency_nnwr(iterates: usize, blocks: usize) -> f64 {
    let (k2, j) = (2 * iterates as u64, blocks as u64);
    let span = (k2 + j - 1) as f64;
    if k2 >= j {
        k2 as f64 / span
    } else {
        j as f64 / span
    }
}

/// Dirichlet solve of subdomain `i` with traces (or physical data) at both
/// ends.
#[derive(Debug, Clone)]
pub struct DirichletSweep {
    i: usize,
    n: usize,
    factor: TriFactor,
    initial: SubdomainState,
    state: SubdomainState,
}

impl DirichletSweep {
    pub fn new(problem: &HeatProblem, decomp: &Decomposition, i: usize) -> Result<Self> {
        let extent = decomp.extent(i);
        let factor = assemble_factor(problem.grid(), extent, BcPattern::DD)?;
        let initial = SubdomainState::restrict(problem.initial(), extent);
        Ok(Self {
            i,
            n: decomp.subdomains(),
            factor,
            state: initial.clone(),
            initial,
        })
    }

    /// Return to `t = 0` for a new iterate.
    pub fn restart(&mut self) {
        self.state.clone_from(&self.initial);
    }

    pub fn state(&self) -> &SubdomainState {
        &self.state
    }

    /// Advance over global steps `steps`. Interior ends take `w_left` /
    /// `w_right`; physical ends take the problem's boundary data.
    pub fn sweep(
        &mut self,
        problem: &HeatProblem,
        steps: Range<usize>,
        w_left: Option<&[f64]>,
        w_right: Option<&[f64]>,
    ) -> Result<BoundarySeries> {
        let left = if self.i == 1 {
            &problem.left_bc()[steps.clone()]
        } else {
            w_left.ok_or_else(|| missing("left trace", self.i))?
        };
        let right = if self.i == self.n {
            &problem.right_bc()[steps.clone()]
        } else {
            w_right.ok_or_else(|| missing("right trace", self.i))?
        };
        let bc = BcSpec {
            left: BoundaryData::Dirichlet(left),
            right: BoundaryData::Dirichlet(right),
        };
        advance_block(&mut self.state, &self.factor, &bc, problem.forcing(), steps.len())
    }
}

/// Auxiliary problem of subdomain `i`: zero initial data, flux jumps at
/// interior ends and homogeneous Dirichlet data at physical ends.
#[derive(Debug, Clone)]
pub struct AuxiliarySweep {
    i: usize,
    n: usize,
    factor: TriFactor,
    state: SubdomainState,
    zeros: Vec<f64>,
}

impl AuxiliarySweep {
    pub fn new(decomp: &Decomposition, i: usize) -> Result<Self> {
        let n = decomp.subdomains();
        let extent = decomp.extent(i);
        let pattern = match (i == 1, i == n) {
            (true, true) => BcPattern::DD,
            (true, false) => BcPattern::DN,
            (false, true) => BcPattern::ND,
            (false, false) => BcPattern::NN,
        };
        Ok(Self {
            i,
            n,
            factor: assemble_factor(decomp.grid(), extent, pattern)?,
            state: SubdomainState::zeros(extent),
            zeros: Vec::new(),
        })
    }

    pub fn restart(&mut self) {
        self.state.u.iter_mut().for_each(|v| *v = 0.0);
        self.state.t_index = 0;
    }

    /// `jump_left` is the jump at `x_{i-1}`, `jump_right` the jump at `x_i`.
    pub fn sweep(
        &mut self,
        jump_left: Option<&[f64]>,
        jump_right: Option<&[f64]>,
        nsteps: usize,
    ) -> Result<BoundarySeries> {
        self.zeros.resize(nsteps, 0.0);
        let left_flux: Vec<f64>;
        let left = if self.i == 1 {
            BoundaryData::Dirichlet(&self.zeros)
        } else {
            let jump = jump_left.ok_or_else(|| missing("left jump", self.i))?;
            left_flux = jump.iter().map(|v| -v).collect();
            BoundaryData::Neumann(&left_flux)
        };
        let right = if self.i == self.n {
            BoundaryData::Dirichlet(&self.zeros)
        } else {
            BoundaryData::Neumann(jump_right.ok_or_else(|| missing("right jump", self.i))?)
        };
        advance_block(&mut self.state, &self.factor, &BcSpec { left, right }, None, nsteps)
    }
}

fn missing(what: &str, i: usize) -> Error {
    Error::Precondition(format!("{what} of subdomain {i} is missing"))
}

/// Jump `du_i/dx - du_{i+1}/dx` at `x_i` from the two fluxes.
pub fn neumann_jump(flux_from_left: &[f64], flux_from_right: &[f64]) -> Result<Vec<f64>> {
    check_len(flux_from_left.len(), flux_from_right.len())?;
    Ok(flux_from_left
        .iter()
        .zip(flux_from_right)
        .map(|(a, b)| a - b)
        .collect())
}

/// `w_old - theta (psi_left + psi_right)` where `psi_left` belongs to the
/// subdomain left of the interface.
pub fn update_traces(w_old: &[f64], psi_left: &[f64], psi_right: &[f64], theta: f64) -> Result<Vec<f64>> {
    check_len(w_old.len(), psi_left.len())?;
    check_len(w_old.len(), psi_right.len())?;
    Ok(w_old
        .iter()
        .zip(psi_left.iter().zip(psi_right))
        .map(|(w, (a, b))| w - theta * (a + b))
        .collect())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

fn max_abs_delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}
