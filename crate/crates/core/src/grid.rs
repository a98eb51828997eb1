//! Space-time discretization and its split into spatial subdomains and
//! time blocks.
//!
//! Subdomains share their interface nodes: subdomain `i` (1-based) owns the
//! global nodes `interfaces[i-2] ..= interfaces[i-1]`, with the physical
//! boundary nodes `0` and `nx + 1` closing the first and last subdomain.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[0, length] x [0, horizon]` with `nx` interior nodes and
/// `nt` backward-Euler steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    length: f64,
    horizon: f64,
    nx: usize,
    nt: usize,
    dx: f64,
    dt: f64,
}

impl SpaceTimeGrid {
    pub fn new(length: f64, horizon: f64, nx: usize, nt: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Config(format!("length must be positive, got {length}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        if nx == 0 || nt == 0 {
            return Err(Error::Config(format!(
                "Nx and Nt must be at least 1 (Nx = {nx}, Nt = {nt})"
            )));
        }
        Ok(Self {
            length,
            horizon,
            nx,
            nt,
            dx: length / (nx + 1) as f64,
            dt: horizon / nt as f64,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of interior nodes.
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Number of time steps.
    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Total node count including both physical boundary nodes.
    pub fn node_count(&self) -> usize {
        self.nx + 2
    }

    /// Coordinate of global node `p`.
    pub fn x(&self, p: usize) -> f64 {
        p as f64 * self.dx
    }

    /// Time level `n` (`n = 0` is the initial condition).
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

/// How the DNWR pivot subdomain is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PivotPolicy {
    /// `m = ceil(N / 2)`.
    #[default]
    Middle,
    /// Explicit 1-based pivot.
    Fixed(usize),
}

/// `N` spatial subdomains times `J` uniform time blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    grid: SpaceTimeGrid,
    /// Global node index of each interface, strictly increasing.
    interfaces: Vec<usize>,
    blocks: usize,
    pivot: usize,
}

/// Equal-width split; `nx + 1` must be divisible by `n`.
pub fn decompose(
    grid: &SpaceTimeGrid,
    n: usize,
    blocks: usize,
    pivot: PivotPolicy,
) -> Result<Decomposition> {
    if n == 0 {
        return Err(Error::Config("subdomain count N must be at least 1".into()));
    }
    let cells = grid.nx() + 1;
    if cells % n != 0 {
        return Err(Error::Config(format!(
            "equal-width split needs Nx + 1 = {cells} divisible by N = {n}; pass explicit interfaces instead"
        )));
    }
    let width = cells / n;
    let nodes = (1..n).map(|i| i * width).collect();
    Decomposition::from_nodes(grid, nodes, blocks, pivot)
}

impl Decomposition {
    /// Build from explicit interface node indices.
    pub fn from_nodes(
        grid: &SpaceTimeGrid,
        interfaces: Vec<usize>,
        blocks: usize,
        pivot: PivotPolicy,
    ) -> Result<Self> {
        if blocks == 0 || grid.nt() % blocks != 0 {
            return Err(Error::BlocksDoNotDivide {
                blocks,
                steps: grid.nt(),
            });
        }
        let mut prev = 0;
        for (idx, &p) in interfaces.iter().enumerate() {
            if p <= prev || p > grid.nx() {
                return Err(Error::Config(format!(
                    "interface {} at node {p} must be interior and strictly increasing",
                    idx + 1
                )));
            }
            prev = p;
        }
        let n = interfaces.len() + 1;
        let pivot = match pivot {
            PivotPolicy::Middle => n.div_ceil(2),
            PivotPolicy::Fixed(m) => m,
        };
        if pivot == 0 || pivot > n {
            return Err(Error::Config(format!("pivot m = {pivot} must lie in 1..={n}")));
        }
        Ok(Self {
            grid: *grid,
            interfaces,
            blocks,
            pivot,
        })
    }

    /// Build from interface coordinates; each must coincide with a grid node
    /// to within one unit roundoff.
    pub fn from_coordinates(
        grid: &SpaceTimeGrid,
        coords: &[f64],
        blocks: usize,
        pivot: PivotPolicy,
    ) -> Result<Self> {
        let nodes = coords
            .iter()
            .enumerate()
            .map(|(idx, &x)| {
                let p = (x / grid.dx()).round();
                let snapped = p * grid.dx();
                if p < 1.0 || (snapped - x).abs() > f64::EPSILON * x.abs().max(grid.length()) {
                    Err(Error::OffGrid { index: idx + 1, x })
                } else {
                    Ok(p as usize)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_nodes(grid, nodes, blocks, pivot)
    }

    /// Near-equal split for grids where `nx + 1` is not divisible by `n`:
    /// interface `i` sits at node `round(i (nx + 1) / n)`.
    pub fn near_uniform(
        grid: &SpaceTimeGrid,
        n: usize,
        blocks: usize,
        pivot: PivotPolicy,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("subdomain count N must be at least 1".into()));
        }
        let cells = grid.nx() + 1;
        let nodes = (1..n).map(|i| (2 * i * cells + n) / (2 * n)).collect();
        Self::from_nodes(grid, nodes, blocks, pivot)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn subdomains(&self) -> usize {
        self.interfaces.len() + 1
    }

    pub fn interface_count(&self) -> usize {
        self.interfaces.len()
    }

    /// Global node of interface `i` (1-based, `1 <= i <= N - 1`).
    pub fn interface_node(&self, i: usize) -> usize {
        self.interfaces[i - 1]
    }

    pub fn interface_nodes(&self) -> &[usize] {
        &self.interfaces
    }

    pub fn interface_x(&self, i: usize) -> f64 {
        self.grid.x(self.interface_node(i))
    }

    /// Inclusive global node range `(first, last)` of subdomain `i` (1-based).
    pub fn extent(&self, i: usize) -> (usize, usize) {
        let first = if i == 1 { 0 } else { self.interfaces[i - 2] };
        let last = if i == self.subdomains() {
            self.grid.nx() + 1
        } else {
            self.interfaces[i - 1]
        };
        (first, last)
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn block_len(&self) -> usize {
        self.grid.nt() / self.blocks
    }

    /// Step indices advanced in block `j` (1-based). Step `n` takes level `n`
    /// to level `n + 1`.
    pub fn block_steps(&self, j: usize) -> Range<usize> {
        let len = self.block_len();
        (j - 1) * len..j * len
    }

    pub fn pivot(&self) -> usize {
        self.pivot
    }

    /// Same spatial split with a different block count.
    pub fn with_blocks(&self, blocks: usize) -> Result<Self> {
        Self::from_nodes(
            &self.grid,
            self.interfaces.clone(),
            blocks,
            PivotPolicy::Fixed(self.pivot),
        )
    }

    pub fn with_pivot(&self, pivot: usize) -> Result<Self> {
        Self::from_nodes(
            &self.grid,
            self.interfaces.clone(),
            self.blocks,
            PivotPolicy::Fixed(pivot),
        )
    }

    /// Width `h_i` of subdomain `i` (1-based).
    pub fn width(&self, i: usize) -> f64 {
        let (a, b) = self.extent(i);
        (b - a) as f64 * self.grid.dx()
    }

    pub fn widths(&self) -> Vec<f64> {
        (1..=self.subdomains()).map(|i| self.width(i)).collect()
    }

    pub fn h_min(&self) -> f64 {
        self.widths().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn h_max(&self) -> f64 {
        self.widths().into_iter().fold(0.0, f64::max)
    }

    /// Minimum subdomain width used by the NNWR estimate.
    pub fn h_tilde(&self) -> f64 {
        self.h_min()
    }
}
