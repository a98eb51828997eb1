//! Reference solutions and convergence estimates used to check the solvers.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Decomposition, SpaceTimeGrid};
use crate::heat::{advance_block, assemble_factor, BcPattern, BcSpec, BoundaryData, SubdomainState};
use crate::problem::HeatProblem;
use crate::traces::TraceSet;

/// Undecomposed backward-Euler solution at every time level.
#[derive(Debug, Clone)]
pub struct MonolithicSolution {
    grid: SpaceTimeGrid,
    /// `levels[n]` holds all node values at `t_n`, `n = 0..=nt`.
    levels: Vec<Vec<f64>>,
}

impl MonolithicSolution {
    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    pub fn final_state(&self) -> &[f64] {
        &self.levels[self.grid.nt()]
    }

    /// Values at `node` for levels `1..=nt`.
    pub fn trace(&self, node: usize) -> Vec<f64> {
        self.levels[1..].iter().map(|u| u[node]).collect()
    }

    /// Interface traces of a decomposition, as a solver would converge to.
    pub fn traces(&self, decomp: &Decomposition) -> TraceSet {
        TraceSet::new(0, decomp.interface_nodes().iter().map(|&p| self.trace(p)).collect())
    }

    /// Max over nodes and levels of `|u - exact(x, t)|`.
    pub fn max_error(&self, exact: impl Fn(f64, f64) -> f64) -> f64 {
        let g = &self.grid;
        let mut err: f64 = 0.0;
        for (n, u) in self.levels.iter().enumerate() {
            for (p, v) in u.iter().enumerate() {
                err = err.max((v - exact(g.x(p), g.t(n))).abs());
            }
        }
        err
    }
}

/// Solve the problem on the whole grid with the subdomain kernels.
pub fn solve_monolithic(problem: &HeatProblem) -> Result<MonolithicSolution> {
    let grid = *problem.grid();
    let extent = (0, grid.nx() + 1);
    let factor = assemble_factor(&grid, extent, BcPattern::DD)?;
    let mut state = SubdomainState::restrict(problem.initial(), extent);
    let mut levels = Vec::with_capacity(grid.nt() + 1);
    levels.push(state.u.clone());
    for n in 0..grid.nt() {
        let bc = BcSpec {
            left: BoundaryData::Dirichlet(&problem.left_bc()[n..n + 1]),
            right: BoundaryData::Dirichlet(&problem.right_bc()[n..n + 1]),
        };
        advance_block(&mut state, &factor, &bc, problem.forcing(), 1)?;
        levels.push(state.u.clone());
    }
    Ok(MonolithicSolution { grid, levels })
}

/// Series solution of `u_t = u_xx` on `[0, 1]` with zero boundary data and
/// `u(x, 0) = (x - 1/2)^2 - 1/4`:
///
/// `u = sum_n b_n exp(-(n pi)^2 t) sin(n pi x)`, `b_n = -8 / (n pi)^3` for
/// odd `n` and zero for even `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSolution {
    /// `(n, b_n)` for the nonzero terms up to the truncation.
    pub modes: Vec<(usize, f64)>,
    pub truncation: usize,
}

impl FourierSolution {
    pub fn new(truncation: usize) -> Result<Self> {
        if truncation < 1 {
            return Err(Error::Config("Fourier truncation M must be at least 1".into()));
        }
        let modes = (1..=truncation)
            .step_by(2)
            .map(|n| (n, -8.0 / (n as f64 * PI).powi(3)))
            .collect();
        Ok(Self { modes, truncation })
    }

    /// Smallest truncation whose tail at `t = 0` is below `tol`.
    pub fn with_tail_below(tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Config(format!("tail tolerance must be positive, got {tol}")));
        }
        let m = (4.0 / (PI.powi(3) * tol)).sqrt().ceil() as usize;
        Self::new(m.max(1))
    }

    /// Bound on the dropped terms at `t = 0`: `sum_{n>M} 8/(n pi)^3 <= 4/(pi^3 M^2)`.
    pub fn tail_bound(&self) -> f64 {
        4.0 / (PI.powi(3) * (self.truncation as f64).powi(2))
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(n, b)| {
                let k = n as f64 * PI;
                b * (-k * k * t).exp() * (k * x).sin()
            })
            .sum()
    }
}

/// Truncated series value with `M` terms, see [`FourierSolution`].
pub fn fourier_exact(x: f64, t: f64, truncation: usize) -> Result<f64> {
    Ok(FourierSolution::new(truncation)?.value(x, t))
}

/// NNWR estimate for `theta = 1/4`:
/// `(sqrt 6 / (1 - exp(-(2k+1) h^2/T)))^(2k) exp(-k^2 h^2/T) err0`,
/// evaluated through its logarithm.
pub fn nnwr_bound(k: usize, h_tilde: f64, horizon: f64, err0: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::Config("bound needs k >= 1".into()));
    }
    if !(h_tilde > 0.0 && horizon > 0.0 && err0 >= 0.0) {
        return Err(Error::Config(format!(
            "bound needs h > 0, T > 0, err0 >= 0 (h = {h_tilde}, T = {horizon}, err0 = {err0})"
        )));
    }
    if err0 == 0.0 {
        return Ok(0.0);
    }
    let a = h_tilde * h_tilde / horizon;
    let k = k as f64;
    // ln(1 - e^{-y}) = ln(-expm1(-y))
    let ln_denominator = (-(-(2.0 * k + 1.0) * a).exp_m1()).ln();
    let ln = 2.0 * k * (0.5 * 6f64.ln() - ln_denominator) - k * k * a + err0.ln();
    Ok(ln.exp())
}

/// DNWR estimate for `N > 2`, `theta = 1/2`, middle pivot:
/// `(N - 4 + 2 h_max / h_m)^k erfc(k h_min / (2 sqrt T)) err0`.
pub fn dnwr_bound(
    k: usize,
    subdomains: usize,
    h_min: f64,
    h_max: f64,
    h_pivot: f64,
    horizon: f64,
    err0: f64,
) -> Result<f64> {
    if subdomains <= 2 {
        return Err(Error::Precondition(format!(
            "DNWR estimate holds for N > 2, got N = {subdomains}"
        )));
    }
    if !(h_min > 0.0 && h_max >= h_min && h_pivot > 0.0 && horizon > 0.0 && err0 >= 0.0) {
        return Err(Error::Config(format!(
            "bound needs 0 < h_min <= h_max, h_m > 0, T > 0, err0 >= 0 (h_min = {h_min}, h_max = {h_max}, h_m = {h_pivot}, T = {horizon}, err0 = {err0})"
        )));
    }
    if err0 == 0.0 {
        return Ok(0.0);
    }
    let base = subdomains as f64 - 4.0 + 2.0 * h_max / h_pivot;
    let k = k as f64;
    let e = erfc(k * h_min / (2.0 * horizon.sqrt()));
    if e == 0.0 {
        return Ok(0.0);
    }
    Ok((k * base.ln() + e.ln() + err0.ln()).exp())
}

/// Complementary error function.
///
/// Power series of `erf` (all terms positive) below 2.5, Lentz continued
/// fraction above, reflection for negative arguments. Relative error is
/// near machine precision.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.5 {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

pub fn erf(x: f64) -> f64 {
    if x.abs() < 2.5 {
        x.signum() * erf_series(x.abs())
    } else {
        x.signum() * (1.0 - erfc(x.abs()))
    }
}

// erf x = 2/sqrt(pi) e^{-x^2} sum_n 2^n x^{2n+1} / (1 3 5 ... (2n+1))
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > sum * 1e-17 {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
    }
    2.0 / PI.sqrt() * (-x2).exp() * sum
}

// erfc x = e^{-x^2}/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
fn erfc_continued_fraction(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..500 {
        let a = n as f64 / 2.0;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}
