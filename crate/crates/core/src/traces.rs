//! Interface waveforms exchanged by the iterations.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Decomposition;
use crate::problem::HeatProblem;

/// Dirichlet traces `w_i(t_l)`, `l = 1..=Nt`, for every interface at one
/// iterate. Interface `i` (1-based) is stored at index `i - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSet {
    pub iterate: usize,
    pub series: Vec<Vec<f64>>,
}

impl TraceSet {
    pub fn new(iterate: usize, series: Vec<Vec<f64>>) -> Self {
        Self { iterate, series }
    }

    pub fn interfaces(&self) -> usize {
        self.series.len()
    }

    /// Samples of interface `i` inside block `j` of `decomp`.
    pub fn block(&self, decomp: &Decomposition, i: usize, j: usize) -> &[f64] {
        &self.series[i - 1][decomp.block_steps(j)]
    }

    /// `max_i max_l |a - b|`.
    pub fn max_abs_diff(&self, other: &TraceSet) -> f64 {
        max_abs_diff(&self.series, &other.series)
    }

    pub fn max_abs(&self) -> f64 {
        self.series
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// True when every sample agrees bit for bit.
    pub fn bitwise_eq(&self, other: &TraceSet) -> bool {
        self.series.len() == other.series.len()
            && self
                .series
                .iter()
                .zip(&other.series)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}

/// Largest pointwise difference between two nested series; infinite if the
/// shapes differ.
pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Starting traces `w^[0]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub enum InitialGuess {
    /// `w_i(t) = u0(x_i)` for all `t`.
    #[default]
    InitialConditionTrace,
    Zero,
    /// One series of length `Nt` per interface.
    Custom(Vec<Vec<f64>>),
}

impl InitialGuess {
    pub fn build(&self, problem: &HeatProblem, decomp: &Decomposition) -> Result<TraceSet> {
        let nt = problem.grid().nt();
        let count = decomp.interface_count();
        let series = match self {
            InitialGuess::InitialConditionTrace => decomp
                .interface_nodes()
                .iter()
                .map(|&p| vec![problem.initial()[p]; nt])
                .collect(),
            InitialGuess::Zero => vec![vec![0.0; nt]; count],
            InitialGuess::Custom(series) => {
                if series.len() != count {
                    return Err(Error::Config(format!(
                        "custom initial guess has {} interfaces, decomposition has {count}",
                        series.len()
                    )));
                }
                for s in series {
                    check_len(nt, s.len())?;
                }
                series.clone()
            }
        };
        Ok(TraceSet::new(0, series))
    }
}

/// `max_k ||w^[k] - w^[k-1]||` per iterate of a trace history.
pub fn residual_history(history: &[TraceSet]) -> Vec<f64> {
    history.windows(2).map(|w| w[1].max_abs_diff(&w[0])).collect()
}
