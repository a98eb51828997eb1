//! Dirichlet-Neumann waveform relaxation.
//!
//! The pivot subdomain `m` solves with Dirichlet data at both ends.
//! Subdomains left of `m` take Dirichlet data on their left and the flux of
//! their right neighbour on their right; subdomains right of `m` mirror
//! this. Interface `x_i` is owned by the subdomain on its far side from
//! `m`, which relaxes the trace after each solve:
//!
//! `w_i <- theta u(x_i) + (1 - theta) w_i`.
//!
//! Three orderings share one block task: one worker per subdomain, two
//! subdomains per worker, and one worker per (subdomain, iterate) streaming
//! the time blocks.

mod run;
mod table;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use run::run;
pub use table::{packed_table, PackedTable};

use crate::error::{check_len, Error, Result};
use crate::grid::Decomposition;
use crate::heat::{
    advance_block, assemble_factor, BcPattern, BcSpec, BoundaryData, BoundarySeries, FluxStencil,
    SubdomainState, TriFactor,
};
use crate::problem::HeatProblem;
use crate::traces::InitialGuess;
use crate::transport::TransportOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DnwrMode {
    /// `N` workers, one per subdomain.
    #[default]
    Naive,
    /// Two subdomains per worker.
    ClassicalPacked,
    /// `NK` workers, each streaming the time blocks of one iterate.
    Pipeline,
}

impl DnwrMode {
    pub fn name(self) -> &'static str {
        match self {
            DnwrMode::Naive => "naive",
            DnwrMode::ClassicalPacked => "classical-packed",
            DnwrMode::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DnwrConfig {
    pub theta: f64,
    /// Iterate count `K`; every mode computes exactly `K` iterates.
    pub iterates: usize,
    /// Overrides the decomposition's pivot.
    pub pivot: Option<usize>,
    pub mode: DnwrMode,
    /// Only used to set `converged` in the report.
    pub tol: f64,
    pub initial_guess: InitialGuess,
    pub flux: FluxStencil,
    /// Reject pipeline runs with `J <= ceil(N/2) + 2K - 1`. The ordering is
    /// correct for any `J`; the bound is where the efficiency formula holds.
    pub enforce_block_bound: bool,
    pub transport: TransportOptions,
}

impl Default for DnwrConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            iterates: 8,
            pivot: None,
            mode: DnwrMode::Naive,
            tol: 1e-8,
            initial_guess: InitialGuess::default(),
            flux: FluxStencil::default(),
            enforce_block_bound: true,
            transport: TransportOptions::default(),
        }
    }
}

impl DnwrConfig {
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

/// Smallest block count the pipeline ordering accepts is one more than this.
pub fn pipeline_block_bound(subdomains: usize, iterates: usize) -> usize {
    subdomains.div_ceil(2) + 2 * iterates - 1
}

/// `J / (J + floor(N/2) + 2(K - 1))`, defined for `J > ceil(N/2) + 2K - 1`.
pub fn efficiency_dnwr(subdomains: usize, iterates: usize, blocks: usize) -> Result<f64> {
    if subdomains == 0 || iterates == 0 {
        return Err(Error::Config("N and K must be at least 1".into()));
    }
    let bound = pipeline_block_bound(subdomains, iterates);
    if blocks <= bound {
        return Err(Error::Precondition(format!(
            "DNWR pipeline needs J > ceil(N/2) + 2K - 1 = {bound}, got J = {blocks}"
        )));
    }
    let j = blocks as f64;
    Ok(j / (j + (subdomains / 2) as f64 + 2.0 * (iterates - 1) as f64))
}

/// Which subproblem subdomain `i` solves for pivot `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// Dirichlet at both ends.
    Pivot,
    /// Left of the pivot: Dirichlet left, Neumann right.
    Left,
    /// Right of the pivot: Neumann left, Dirichlet right.
    Right,
}

impl Role {
    pub fn of(i: usize, pivot: usize) -> Self {
        match i.cmp(&pivot) {
            std::cmp::Ordering::Equal => Role::Pivot,
            std::cmp::Ordering::Less => Role::Left,
            std::cmp::Ordering::Greater => Role::Right,
        }
    }

    fn pattern(self) -> BcPattern {
        match self {
            Role::Pivot => BcPattern::DD,
            Role::Left => BcPattern::DN,
            Role::Right => BcPattern::ND,
        }
    }
}

/// Interface whose trace subdomain `i` relaxes, if any.
pub fn owned_interface(i: usize, pivot: usize) -> Option<usize> {
    match Role::of(i, pivot) {
        Role::Pivot => None,
        Role::Left => Some(i),
        Role::Right => Some(i - 1),
    }
}

/// Subdomain that relaxes the trace at interface `b`.
pub fn interface_owner(b: usize, pivot: usize) -> usize {
    if b < pivot {
        b
    } else {
        b + 1
    }
}

/// Data at the end of a subdomain that lies on an interface.
#[derive(Debug, Clone, Copy)]
pub enum EndData<'a> {
    Trace(&'a [f64]),
    Flux(&'a [f64]),
}

/// One subdomain's solver for its role.
#[derive(Debug, Clone)]
pub struct SubdomainSweep {
    i: usize,
    n: usize,
    role: Role,
    factor: TriFactor,
    initial: SubdomainState,
    state: SubdomainState,
}

impl SubdomainSweep {
    pub fn new(problem: &HeatProblem, decomp: &Decomposition, i: usize) -> Result<Self> {
        let extent = decomp.extent(i);
        let role = Role::of(i, decomp.pivot());
        let factor = assemble_factor(problem.grid(), extent, role.pattern())?;
        let initial = SubdomainState::restrict(problem.initial(), extent);
        Ok(Self {
            i,
            n: decomp.subdomains(),
            role,
            factor,
            state: initial.clone(),
            initial,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn restart(&mut self) {
        self.state.clone_from(&self.initial);
    }

    pub fn state(&self) -> &SubdomainState {
        &self.state
    }

    /// Advance over global steps `steps`. `left` / `right` are ignored at
    /// physical ends, which take the problem's boundary data.
    pub fn sweep(
        &mut self,
        problem: &HeatProblem,
        steps: Range<usize>,
        left: Option<EndData<'_>>,
        right: Option<EndData<'_>>,
    ) -> Result<BoundarySeries> {
        let i = self.i;
        let left = if i == 1 {
            BoundaryData::Dirichlet(&problem.left_bc()[steps.clone()])
        } else {
            end_data(left, "left", i)?
        };
        let right = if i == self.n {
            BoundaryData::Dirichlet(&problem.right_bc()[steps.clone()])
        } else {
            end_data(right, "right", i)?
        };
        advance_block(&mut self.state, &self.factor, &BcSpec { left, right }, problem.forcing(), steps.len())
    }
}

fn end_data<'a>(data: Option<EndData<'a>>, side: &str, i: usize) -> Result<BoundaryData<'a>> {
    match data {
        Some(EndData::Trace(w)) => Ok(BoundaryData::Dirichlet(w)),
        Some(EndData::Flux(q)) => Ok(BoundaryData::Neumann(q)),
        None => Err(Error::Precondition(format!("{side} data of subdomain {i} is missing"))),
    }
}

/// `theta u + (1 - theta) w_old`.
pub fn update_trace_dnwr(w_old: &[f64], u_trace: &[f64], theta: f64) -> Result<Vec<f64>> {
    check_len(w_old.len(), u_trace.len())?;
    Ok(w_old
        .iter()
        .zip(u_trace)
        .map(|(w, u)| theta * u + (1.0 - theta) * w)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_examples() {
        assert_eq!(update_trace_dnwr(&[0.2], &[1.0], 0.5).unwrap(), vec![0.6]);
        assert_eq!(update_trace_dnwr(&[0.2, 3.0], &[1.0, -1.0], 1.0).unwrap(), vec![1.0, -1.0]);
        assert!(update_trace_dnwr(&[0.2], &[1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(efficiency_dnwr(8, 1, 1024).unwrap(), 1024.0 / 1028.0);
        assert_eq!(efficiency_dnwr(8, 4, 1024).unwrap(), 1024.0 / 1034.0);
        assert_eq!(efficiency_dnwr(2, 1, 8).unwrap(), 8.0 / 9.0);
        assert!(efficiency_dnwr(8, 4, 11).is_err());
        assert!(efficiency_dnwr(8, 4, 12).is_ok());
    }

    #[test]
    fn ownership() {
        // N = 5, m = 3: interfaces 1, 2 owned by 1, 2; interfaces 3, 4 by 4, 5
        assert_eq!((1..=4).map(|b| interface_owner(b, 3)).collect::<Vec<_>>(), vec![1, 2, 4, 5]);
        assert_eq!(owned_interface(3, 3), None);
        assert_eq!(owned_interface(2, 3), Some(2));
        assert_eq!(owned_interface(4, 3), Some(3));
        for b in 1..=4 {
            assert_eq!(owned_interface(interface_owner(b, 3), 3), Some(b));
        }
    }
}
