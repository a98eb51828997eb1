//! Backward-Euler kernels for `u_t = u_xx + f` on one subdomain.
//!
//! The spatial operator is the centered second difference. A Neumann end
//! is discretized with a ghost node eliminated through the centered flux
//! `(u_ghost - u_inside) / (2 dx) = flux`, which keeps the implicit matrix
//! tridiagonal so a single LU factor serves every step of a run.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::SpaceTimeGrid;

/// Source term `f(x, t)`.
pub type Forcing = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// Boundary-condition types at the two ends of a subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BcPattern {
    pub left: BoundaryKind,
    pub right: BoundaryKind,
}

impl BcPattern {
    pub const DD: Self = Self::new(BoundaryKind::Dirichlet, BoundaryKind::Dirichlet);
    pub const DN: Self = Self::new(BoundaryKind::Dirichlet, BoundaryKind::Neumann);
    pub const ND: Self = Self::new(BoundaryKind::Neumann, BoundaryKind::Dirichlet);
    pub const NN: Self = Self::new(BoundaryKind::Neumann, BoundaryKind::Neumann);

    pub const fn new(left: BoundaryKind, right: BoundaryKind) -> Self {
        Self { left, right }
    }
}

/// Per-step boundary data for the steps being advanced. Dirichlet series
/// hold values, Neumann series hold `du/dx` signed in the `+x` direction.
#[derive(Debug, Clone, Copy)]
pub enum BoundaryData<'a> {
    Dirichlet(&'a [f64]),
    Neumann(&'a [f64]),
}

impl BoundaryData<'_> {
    fn kind(&self) -> BoundaryKind {
        match self {
            BoundaryData::Dirichlet(_) => BoundaryKind::Dirichlet,
            BoundaryData::Neumann(_) => BoundaryKind::Neumann,
        }
    }

    fn series(&self) -> &[f64] {
        match self {
            BoundaryData::Dirichlet(s) | BoundaryData::Neumann(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BcSpec<'a> {
    pub left: BoundaryData<'a>,
    pub right: BoundaryData<'a>,
}

impl BcSpec<'_> {
    pub fn pattern(&self) -> BcPattern {
        BcPattern::new(self.left.kind(), self.right.kind())
    }
}

/// LU factors of `I - dt A` restricted to the unknowns of one boundary
/// pattern. Unknowns are the local nodes not fixed by a Dirichlet end.
#[derive(Debug, Clone)]
pub struct TriFactor {
    pattern: BcPattern,
    nodes: usize,
    first: usize,
    dx: f64,
    dt: f64,
    ratio: f64,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    multipliers: Vec<f64>,
    pivots: Vec<f64>,
}

/// Factor the implicit matrix of the subdomain spanning global nodes
/// `extent.0 ..= extent.1`.
pub fn assemble_factor(
    grid: &SpaceTimeGrid,
    extent: (usize, usize),
    pattern: BcPattern,
) -> Result<TriFactor> {
    let (a, b) = extent;
    if b <= a || b > grid.nx() + 1 {
        return Err(Error::Degenerate(format!("invalid node range {a}..={b}")));
    }
    let nodes = b - a + 1;
    let first = usize::from(pattern.left == BoundaryKind::Dirichlet);
    let last = nodes - 1 - usize::from(pattern.right == BoundaryKind::Dirichlet);
    if last < first + 1 {
        return Err(Error::Degenerate(format!(
            "{nodes} nodes leave fewer than 2 unknowns for pattern {pattern:?}"
        )));
    }
    let n = last - first + 1;
    let (dx, dt) = (grid.dx(), grid.dt());
    let r = dt / (dx * dx);

    let mut sub = vec![-r; n];
    let diag = vec![1.0 + 2.0 * r; n];
    let mut sup = vec![-r; n];
    sub[0] = 0.0;
    sup[n - 1] = 0.0;
    if pattern.left == BoundaryKind::Neumann {
        sup[0] = -2.0 * r;
    }
    if pattern.right == BoundaryKind::Neumann {
        sub[n - 1] = -2.0 * r;
    }

    let mut multipliers = vec![0.0; n];
    let mut pivots = vec![0.0; n];
    pivots[0] = diag[0];
    for q in 1..n {
        multipliers[q] = sub[q] / pivots[q - 1];
        pivots[q] = diag[q] - multipliers[q] * sup[q - 1];
    }
    if let Some(bad) = pivots.iter().find(|&&p| !(p > 0.0)) {
        return Err(Error::Degenerate(format!("non-positive pivot {bad}")));
    }

    Ok(TriFactor {
        pattern,
        nodes,
        first,
        dx,
        dt,
        ratio: r,
        sub,
        diag,
        sup,
        multipliers,
        pivots,
    })
}

impl TriFactor {
    pub fn pattern(&self) -> BcPattern {
        self.pattern
    }

    /// Local node count, endpoints included.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn unknowns(&self) -> usize {
        self.diag.len()
    }

    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    /// Dense copy of the matrix, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.unknowns();
        let mut m = vec![vec![0.0; n]; n];
        for q in 0..n {
            m[q][q] = self.diag[q];
            if q > 0 {
                m[q][q - 1] = self.sub[q];
            }
            if q + 1 < n {
                m[q][q + 1] = self.sup[q];
            }
        }
        m
    }

    /// Solve in place with the stored factors.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.unknowns();
        debug_assert_eq!(rhs.len(), n);
        for q in 1..n {
            rhs[q] -= self.multipliers[q] * rhs[q - 1];
        }
        rhs[n - 1] /= self.pivots[n - 1];
        for q in (0..n - 1).rev() {
            rhs[q] = (rhs[q] - self.sup[q] * rhs[q + 1]) / self.pivots[q];
        }
    }

    /// Matrix-vector product with the unfactored matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.unknowns();
        (0..n)
            .map(|q| {
                let mut v = self.diag[q] * x[q];
                if q > 0 {
                    v += self.sub[q] * x[q - 1];
                }
                if q + 1 < n {
                    v += self.sup[q] * x[q + 1];
                }
                v
            })
            .collect()
    }
}

/// Node values of one subdomain at the current time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainState {
    /// Global index of local node 0.
    pub first_node: usize,
    /// Values on all local nodes, endpoints included.
    pub u: Vec<f64>,
    /// Global time level of `u`.
    pub t_index: usize,
}

impl SubdomainState {
    pub fn new(first_node: usize, u: Vec<f64>) -> Self {
        Self {
            first_node,
            u,
            t_index: 0,
        }
    }

    /// Restriction of a global node vector to `extent`.
    pub fn restrict(global: &[f64], extent: (usize, usize)) -> Self {
        Self::new(extent.0, global[extent.0..=extent.1].to_vec())
    }

    pub fn zeros(extent: (usize, usize)) -> Self {
        Self::new(extent.0, vec![0.0; extent.1 - extent.0 + 1])
    }
}

/// How `du/dx` at a subdomain end is recovered from a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FluxStencil {
    /// Three-point one-sided difference of the new time level.
    OneSided,
    /// Flux that balances the end node's own update:
    /// `(u_1 - u_0) / dx - dx/2 ((u_0' - u_0) / dt - f)` on the left and
    /// mirrored on the right. It is exactly the flux a ghost-node Neumann
    /// end would need to reproduce the solve, so a zero jump means the
    /// unsplit scheme holds at the interface node.
    #[default]
    Balance,
}

/// Endpoint values and fluxes after each advanced step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundarySeries {
    pub left_value: Vec<f64>,
    pub right_value: Vec<f64>,
    /// One-sided stencil.
    pub left_flux: Vec<f64>,
    pub right_flux: Vec<f64>,
    /// Balance flux, see [`FluxStencil::Balance`].
    pub left_balance: Vec<f64>,
    pub right_balance: Vec<f64>,
}

impl BoundarySeries {
    fn with_capacity(n: usize) -> Self {
        Self {
            left_value: Vec::with_capacity(n),
            right_value: Vec::with_capacity(n),
            left_flux: Vec::with_capacity(n),
            right_flux: Vec::with_capacity(n),
            left_balance: Vec::with_capacity(n),
            right_balance: Vec::with_capacity(n),
        }
    }

    pub fn value(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.left_value,
            Side::Right => &self.right_value,
        }
    }

    pub fn flux(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.left_flux,
            Side::Right => &self.right_flux,
        }
    }

    pub fn flux_with(&self, side: Side, stencil: FluxStencil) -> &[f64] {
        match (stencil, side) {
            (FluxStencil::OneSided, _) => self.flux(side),
            (FluxStencil::Balance, Side::Left) => &self.left_balance,
            (FluxStencil::Balance, Side::Right) => &self.right_balance,
        }
    }
}

/// Advance `nsteps` backward-Euler steps.
///
/// Splitting a run into blocks gives bitwise the same result as one call,
/// since every step is computed independently from the carried state.
pub fn advance_block(
    state: &mut SubdomainState,
    factor: &TriFactor,
    bc: &BcSpec<'_>,
    forcing: Option<&Forcing>,
    nsteps: usize,
) -> Result<BoundarySeries> {
    if bc.pattern() != factor.pattern {
        return Err(Error::Config(format!(
            "boundary data {:?} does not match factor pattern {:?}",
            bc.pattern(),
            factor.pattern
        )));
    }
    check_len(nsteps, bc.left.series().len())?;
    check_len(nsteps, bc.right.series().len())?;
    check_len(factor.nodes, state.u.len())?;

    let n = factor.unknowns();
    let first = factor.first;
    let last = first + n - 1;
    let r = factor.ratio;
    let neumann = 2.0 * r * factor.dx;
    let mut rhs = vec![0.0; n];
    let mut out = BoundarySeries::with_capacity(nsteps);

    let (dx, dt) = (factor.dx, factor.dt);
    let end = factor.nodes - 1;
    let x_left = state.first_node as f64 * dx;
    let x_right = (state.first_node + end) as f64 * dx;
    for s in 0..nsteps {
        let t_next = (state.t_index + 1) as f64 * factor.dt;
        let (old_left, old_right) = (state.u[0], state.u[end]);
        rhs.copy_from_slice(&state.u[first..=last]);
        if let Some(f) = forcing {
            for (q, v) in rhs.iter_mut().enumerate() {
                let x = (state.first_node + first + q) as f64 * factor.dx;
                *v += factor.dt * f(x, t_next);
            }
        }
        match bc.left {
            BoundaryData::Dirichlet(g) => rhs[0] += r * g[s],
            BoundaryData::Neumann(q) => rhs[0] -= neumann * q[s],
        }
        match bc.right {
            BoundaryData::Dirichlet(g) => rhs[n - 1] += r * g[s],
            BoundaryData::Neumann(q) => rhs[n - 1] += neumann * q[s],
        }
        factor.solve(&mut rhs);
        state.u[first..=last].copy_from_slice(&rhs);
        if let BoundaryData::Dirichlet(g) = bc.left {
            state.u[0] = g[s];
        }
        if let BoundaryData::Dirichlet(g) = bc.right {
            state.u[factor.nodes - 1] = g[s];
        }
        state.t_index += 1;

        out.left_value.push(state.u[0]);
        out.right_value.push(state.u[factor.nodes - 1]);
        out.left_flux.push(one_sided_flux(&state.u, Side::Left, dx));
        out.right_flux.push(one_sided_flux(&state.u, Side::Right, dx));
        let (f_left, f_right) = forcing.map_or((0.0, 0.0), |f| (f(x_left, t_next), f(x_right, t_next)));
        let u = &state.u;
        out.left_balance
            .push((u[1] - u[0]) / dx - 0.5 * dx * ((u[0] - old_left) / dt - f_left));
        out.right_balance
            .push((u[end] - u[end - 1]) / dx + 0.5 * dx * ((u[end] - old_right) / dt - f_right));
    }
    Ok(out)
}

/// Second-order one-sided approximation of `du/dx` at an endpoint.
pub fn extract_flux(u: &[f64], side: Side, dx: f64) -> Result<f64> {
    if u.len() < 3 {
        return Err(Error::Degenerate(format!(
            "flux stencil needs 3 nodes, subdomain has {}",
            u.len()
        )));
    }
    Ok(one_sided_flux(u, side, dx))
}

#[inline]
fn one_sided_flux(u: &[f64], side: Side, dx: f64) -> f64 {
    match side {
        Side::Left => (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx),
        Side::Right => {
            let n = u.len();
            (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * dx)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gaussian elimination with partial pivoting on a dense copy.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    fn grid_with_ratio(nx: usize, ratio: f64) -> SpaceTimeGrid {
        let dx = 1.0 / (nx + 1) as f64;
        SpaceTimeGrid::new(1.0, ratio * dx * dx, nx, 1).unwrap()
    }

    #[test]
    fn dd_matrix_rows() {
        let g = grid_with_ratio(3, 1.0);
        let f = assemble_factor(&g, (0, 4), BcPattern::DD).unwrap();
        let m = f.to_dense();
        let expect = [[3.0, -1.0, 0.0], [-1.0, 3.0, -1.0], [0.0, -1.0, 3.0]];
        for (row, want) in m.iter().zip(expect.iter()) {
            for (a, b) in row.iter().zip(want.iter()) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
        assert!(f.pivots().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn nn_factor_preserves_constants() {
        let g = SpaceTimeGrid::new(1.0, 0.1, 15, 10).unwrap();
        let f = assemble_factor(&g, (0, 16), BcPattern::NN).unwrap();
        let mut s = SubdomainState::new(0, vec![0.7; 17]);
        let zeros = vec![0.0; 10];
        let bc = BcSpec {
            left: BoundaryData::Neumann(&zeros),
            right: BoundaryData::Neumann(&zeros),
        };
        advance_block(&mut s, &f, &bc, None, 10).unwrap();
        for v in &s.u {
            assert_relative_eq!(*v, 0.7, epsilon = 1e-14);
        }
    }

    #[test]
    fn factor_solve_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for pattern in [BcPattern::DD, BcPattern::DN, BcPattern::ND, BcPattern::NN] {
            for _ in 0..20 {
                let nx = rng.gen_range(3..40);
                let ratio = rng.gen_range(0.01..50.0);
                let g = grid_with_ratio(nx, ratio);
                let f = assemble_factor(&g, (0, nx + 1), pattern).unwrap();
                let rhs: Vec<f64> = (0..f.unknowns()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut x = rhs.clone();
                f.solve(&mut x);
                let oracle = dense_solve(f.to_dense(), rhs.clone());
                let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (a, b) in x.iter().zip(&oracle) {
                    assert!((a - b).abs() <= 1e-12 * scale.max(1.0));
                }
                let back = f.apply(&x);
                let res = back.iter().zip(&rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let norm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(res / norm <= 1e-12);
            }
        }
    }

    #[test]
    fn too_few_unknowns() {
        let g = SpaceTimeGrid::new(1.0, 0.1, 9, 10).unwrap();
        assert!(assemble_factor(&g, (0, 2), BcPattern::DD).is_err());
        assert!(assemble_factor(&g, (0, 3), BcPattern::DD).is_ok());
        assert!(assemble_factor(&g, (0, 1), BcPattern::NN).is_ok());
        assert!(assemble_factor(&g, (3, 3), BcPattern::NN).is_err());
    }

    #[test]
    fn zero_is_fixed_point() {
        let g = SpaceTimeGrid::new(1.0, 0.1, 9, 10).unwrap();
        let f = assemble_factor(&g, (0, 10), BcPattern::DD).unwrap();
        let mut s = SubdomainState::zeros((0, 10));
        let z = vec![0.0; 10];
        let bc = BcSpec {
            left: BoundaryData::Dirichlet(&z),
            right: BoundaryData::Dirichlet(&z),
        };
        let out = advance_block(&mut s, &f, &bc, None, 10).unwrap();
        assert!(s.u.iter().all(|&v| v == 0.0));
        assert!(out.left_flux.iter().chain(&out.right_flux).all(|&v| v == 0.0));
        assert_eq!(s.t_index, 10);
    }

    #[test]
    fn linear_steady_state() {
        let g = SpaceTimeGrid::new(1.0, 0.5, 9, 7).unwrap();
        let f = assemble_factor(&g, (0, 10), BcPattern::DD).unwrap();
        let u0: Vec<f64> = (0..11).map(|p| g.x(p)).collect();
        let mut s = SubdomainState::new(0, u0.clone());
        let (zero, one) = (vec![0.0; 7], vec![1.0; 7]);
        let bc = BcSpec {
            left: BoundaryData::Dirichlet(&zero),
            right: BoundaryData::Dirichlet(&one),
        };
        let out = advance_block(&mut s, &f, &bc, None, 7).unwrap();
        for (a, b) in s.u.iter().zip(&u0) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
        for q in out.left_flux.iter().chain(&out.right_flux) {
            assert_relative_eq!(*q, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sine_mode_decays_by_discrete_eigenvalue() {
        let g = SpaceTimeGrid::new(1.0, 0.01, 31, 1).unwrap();
        let f = assemble_factor(&g, (0, 32), BcPattern::DD).unwrap();
        let pi = std::f64::consts::PI;
        let u0: Vec<f64> = (0..33).map(|p| (pi * g.x(p)).sin()).collect();
        let mut s = SubdomainState::new(0, u0.clone());
        let z = [0.0];
        let bc = BcSpec {
            left: BoundaryData::Dirichlet(&z),
            right: BoundaryData::Dirichlet(&z),
        };
        advance_block(&mut s, &f, &bc, None, 1).unwrap();
        let dx = g.dx();
        let lambda = (2.0 - 2.0 * (pi * dx).cos()) / (dx * dx);
        for (a, b) in s.u.iter().zip(&u0) {
            assert!((a - b / (1.0 + g.dt() * lambda)).abs() <= 1e-12);
        }
    }

    #[test]
    fn flux_stencil_exact_on_quadratics() {
        let u: Vec<f64> = (0..5).map(|p| 2.0 * (p as f64 * 0.1) + 1.0).collect();
        assert_relative_eq!(extract_flux(&u, Side::Left, 0.1).unwrap(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(extract_flux(&u, Side::Right, 0.1).unwrap(), 2.0, epsilon = 1e-12);
        let sq: Vec<f64> = [0.5f64, 0.75, 1.0].iter().map(|x| x * x).collect();
        assert_eq!(extract_flux(&sq, Side::Right, 0.25).unwrap(), 2.0);
        assert!(extract_flux(&[1.0, 2.0], Side::Left, 0.1).is_err());
    }

    #[test]
    fn flux_stencil_second_order() {
        let errs: Vec<f64> = [8usize, 16, 32, 64]
            .iter()
            .map(|&n| {
                let dx = 1.0 / n as f64;
                let u: Vec<f64> = (0..=n).map(|p| (p as f64 * dx).sin()).collect();
                let l = (extract_flux(&u, Side::Left, dx).unwrap() - 1.0).abs();
                let r = (extract_flux(&u, Side::Right, dx).unwrap() - 1f64.cos()).abs();
                l.max(r)
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9, "{errs:?}");
        }
    }

    #[test]
    fn series_length_mismatch() {
        let g = SpaceTimeGrid::new(1.0, 0.1, 9, 10).unwrap();
        let f = assemble_factor(&g, (0, 10), BcPattern::DD).unwrap();
        let mut s = SubdomainState::zeros((0, 10));
        let (a, b) = (vec![0.0; 3], vec![0.0; 4]);
        let bc = BcSpec {
            left: BoundaryData::Dirichlet(&a),
            right: BoundaryData::Dirichlet(&b),
        };
        assert!(matches!(
            advance_block(&mut s, &f, &bc, None, 3),
            Err(Error::LengthMismatch { expected: 3, got: 4 })
        ));
        let bc = BcSpec {
            left: BoundaryData::Neumann(&a),
            right: BoundaryData::Dirichlet(&a),
        };
        assert!(advance_block(&mut s, &f, &bc, None, 3).is_err());
    }

    #[test]
    fn forcing_drives_steady_parabola() {
        // -u'' = 2 on [0,1] with zero ends has steady state x(1-x)
        let g = SpaceTimeGrid::new(1.0, 50.0, 19, 50).unwrap();
        let f = assemble_factor(&g, (0, 20), BcPattern::DD).unwrap();
        let mut s = SubdomainState::zeros((0, 20));
        let z = vec![0.0; 50];
        let bc = BcSpec {
            left: BoundaryData::Dirichlet(&z),
            right: BoundaryData::Dirichlet(&z),
        };
        let src: Forcing = Arc::new(|_, _| 2.0);
        advance_block(&mut s, &f, &bc, Some(&src), 50).unwrap();
        for (p, v) in s.u.iter().enumerate() {
            let x = g.x(p);
            assert_relative_eq!(*v, x * (1.0 - x), epsilon = 1e-10);
        }
    }

    proptest! {
        #[test]
        fn block_split_is_bitwise(split in 1usize..12, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = SpaceTimeGrid::new(1.0, 0.05, 13, 12).unwrap();
            let f = assemble_factor(&g, (0, 14), BcPattern::DN).unwrap();
            let u0: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let left: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let right: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let mut whole = SubdomainState::new(0, u0.clone());
            let bc = BcSpec { left: BoundaryData::Dirichlet(&left), right: BoundaryData::Neumann(&right) };
            let all = advance_block(&mut whole, &f, &bc, None, 12).unwrap();

            let mut parts = SubdomainState::new(0, u0);
            let mut fluxes = Vec::new();
            for (l, r) in left.chunks(split).zip(right.chunks(split)) {
                let bc = BcSpec { left: BoundaryData::Dirichlet(l), right: BoundaryData::Neumann(r) };
                fluxes.extend(advance_block(&mut parts, &f, &bc, None, l.len()).unwrap().left_flux);
            }
            prop_assert_eq!(whole.u.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            parts.u.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(all.left_flux, fluxes);
        }

        #[test]
        fn maximum_principle(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nx = rng.gen_range(4..30);
            let g = SpaceTimeGrid::new(1.0, rng.gen_range(0.001..1.0), nx, 20).unwrap();
            let f = assemble_factor(&g, (0, nx + 1), BcPattern::DD).unwrap();
            let mut s = SubdomainState::new(0, (0..nx + 2).map(|_| rng.gen_range(-1.0..1.0)).collect());
            for _ in 0..20 {
                let l = [rng.gen_range(-2.0f64..2.0)];
                let r = [rng.gen_range(-2.0f64..2.0)];
                let before = s.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let bound = before.max(l[0].abs()).max(r[0].abs());
                let bc = BcSpec { left: BoundaryData::Dirichlet(&l), right: BoundaryData::Dirichlet(&r) };
                advance_block(&mut s, &f, &bc, None, 1).unwrap();
                let after = s.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                prop_assert!(after <= bound * (1.0 + 1e-14));
            }
        }
    }
}
