use std::fmt;

use crate::error::{check_len, Result};
use crate::grid::SpaceTimeGrid;
use crate::heat::Forcing;

/// The model problem `u_t = u_xx + f` on a grid with Dirichlet data at
/// both physical ends.
#[derive(Clone)]
pub struct HeatProblem {
    grid: SpaceTimeGrid,
    initial: Vec<f64>,
    left_bc: Vec<f64>,
    right_bc: Vec<f64>,
    forcing: Option<Forcing>,
}

impl fmt::Debug for HeatProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HeatProblem")
            .field("grid", &self.grid)
            .field("forced", &self.forcing.is_some())
            .finish()
    }
}

impl HeatProblem {
    /// `initial` holds all `nx + 2` node values; the boundary series hold
    /// values at levels `1..=nt`.
    pub fn new(
        grid: SpaceTimeGrid,
        initial: Vec<f64>,
        left_bc: Vec<f64>,
        right_bc: Vec<f64>,
    ) -> Result<Self> {
        check_len(grid.node_count(), initial.len())?;
        check_len(grid.nt(), left_bc.len())?;
        check_len(grid.nt(), right_bc.len())?;
        Ok(Self {
            grid,
            initial,
            left_bc,
            right_bc,
            forcing: None,
        })
    }

    /// Homogeneous Dirichlet problem with initial data sampled from `u0`.
    pub fn from_fn(grid: SpaceTimeGrid, u0: impl Fn(f64) -> f64) -> Self {
        let initial = (0..grid.node_count()).map(|p| u0(grid.x(p))).collect();
        Self {
            grid,
            initial,
            left_bc: vec![0.0; grid.nt()],
            right_bc: vec![0.0; grid.nt()],
            forcing: None,
        }
    }

    /// `u0 = (x - 0.5)^2 - 0.25` with zero boundary data, the benchmark used
    /// throughout the test suite and the efficiency studies.
    pub fn parabolic_bump(grid: SpaceTimeGrid) -> Self {
        Self::from_fn(grid, |x| (x - 0.5) * (x - 0.5) - 0.25)
    }

    pub fn with_forcing(mut self, forcing: Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn left_bc(&self) -> &[f64] {
        &self.left_bc
    }

    pub fn right_bc(&self) -> &[f64] {
        &self.right_bc
    }

    pub fn forcing(&self) -> Option<&Forcing> {
        self.forcing.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_data_is_compatible() {
        let g = SpaceTimeGrid::new(1.0, 0.1, 7, 4).unwrap();
        let p = HeatProblem::parabolic_bump(g);
        assert_eq!(p.initial()[0], 0.0);
        assert_eq!(p.initial()[8], 0.0);
        assert_eq!(p.initial()[4], -0.25);
        assert!(HeatProblem::new(g, vec![0.0; 8], vec![0.0; 4], vec![0.0; 4]).is_err());
    }
}
