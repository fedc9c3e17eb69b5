//! Consensus-side analysis: classification of update matrices, the effective
//! per-update matrix acting on displaced references, products of stochastic
//! factors, the energy function, and the agreement step of a run.

use thiserror::Error;

use crate::channel::WeightMatrix;
use crate::geometry::{SafetyParams, Vec2};
use crate::matrix::SquareMatrix;
use crate::potential::{total_potential, Potential};

const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ConsensusError {
    #[error("row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("entry ({i}, {j}) is negative: {value}")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("convex weight {i} is {value}, outside [0, 1)")]
    InvalidWeight { i: usize, value: f64 },
}

/// Structural verdict on a square matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixClass {
    pub row_stochastic: bool,
    /// The directed graph of the nonzero pattern is strongly connected.
    pub irreducible: bool,
    pub primitive: bool,
}

fn pattern_rows(m: &SquareMatrix) -> Vec<u64> {
    let n = m.n();
    assert!(n <= 64, "pattern analysis is limited to 64 nodes");
    (0..n)
        .map(|i| {
            let mut row = 0u64;
            for j in 0..n {
                if m.get(i, j) != 0.0 {
                    row |= 1 << j;
                }
            }
            row
        })
        .collect()
}

fn bool_mul(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter()
        .map(|&row| {
            let mut out = 0u64;
            let mut bits = row;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                out |= b[j];
            }
            out
        })
        .collect()
}

fn pattern_strongly_connected(rows: &[u64]) -> bool {
    let n = rows.len();
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    for start in 0..n {
        let mut reach = 1u64 << start;
        loop {
            let mut next = reach;
            let mut bits = reach;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                next |= rows[i];
            }
            if next == reach {
                break;
            }
            reach = next;
        }
        if reach != full {
            return false;
        }
    }
    true
}

/// Classify a matrix by its entries and nonzero pattern. Primitivity uses the
/// positive-trace shortcut for irreducible matrices and otherwise checks the
/// boolean power at exponent (n-1)n + 1 for strict positivity.
pub fn classify(m: &SquareMatrix) -> MatrixClass {
    let n = m.n();
    let mut row_stochastic = true;
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            let v = m.get(i, j);
            if v < 0.0 {
                row_stochastic = false;
            }
            sum += v;
        }
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            row_stochastic = false;
        }
    }
    let rows = pattern_rows(m);
    let irreducible = pattern_strongly_connected(&rows);
    let primitive = if !irreducible {
        false
    } else if m.trace() > 0.0 {
        true
    } else {
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let exponent = (n - 1) * n + 1;
        let mut power = rows.clone();
        let mut all_positive = power.iter().all(|&r| r == full);
        for _ in 1..exponent {
            if all_positive {
                break;
            }
            power = bool_mul(&power, &rows);
            all_positive = power.iter().all(|&r| r == full);
        }
        all_positive
    };
    MatrixClass {
        row_stochastic,
        irreducible,
        primitive,
    }
}

/// Per-agent convex weights in [0, 1) blending the old reference with the
/// received aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexWeights(Vec<f64>);

impl ConvexWeights {
    pub fn new(values: Vec<f64>) -> Result<Self, ConsensusError> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..1.0).contains(&v) {
                return Err(ConsensusError::InvalidWeight { i, value: v });
            }
        }
        Ok(ConvexWeights(values))
    }

    /// Weight exp(-a delta) for agents that stayed safe through the whole
    /// interval, zero for the rest.
    pub fn from_interval_safety(interval_safe: &[bool], gain_a: f64, delta: f64) -> Self {
        let lambda = (-gain_a * delta).exp();
        ConvexWeights(
            interval_safe
                .iter()
                .map(|&s| if s { lambda } else { 0.0 })
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Row-stochastic matrix, validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix(SquareMatrix);

impl StochasticMatrix {
    pub fn new(m: SquareMatrix) -> Result<Self, ConsensusError> {
        let n = m.n();
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let v = m.get(i, j);
                if v < 0.0 {
                    return Err(ConsensusError::NegativeEntry { i, j, value: v });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(ConsensusError::NotStochastic { row: i, sum });
            }
        }
        Ok(StochasticMatrix(m))
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.0
    }
}

impl From<WeightMatrix> for StochasticMatrix {
    fn from(w: WeightMatrix) -> Self {
        StochasticMatrix::new(w.into_matrix())
            .expect("receive weights are stochastic by construction")
    }
}

/// The matrix through which one update maps old displaced references to new
/// ones: diag(lambda) + (I - diag(lambda)) H.
pub fn effective_update_matrix(weights: &ConvexWeights, h: &StochasticMatrix) -> StochasticMatrix {
    let n = h.matrix().n();
    assert_eq!(weights.values().len(), n, "one weight per agent");
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        let lambda = weights.values()[i];
        for j in 0..n {
            let mut v = (1.0 - lambda) * h.matrix().get(i, j);
            if i == j {
                v += lambda;
            }
            m.set(i, j, v);
        }
    }
    StochasticMatrix::new(m).expect("convex blend of stochastic rows is stochastic")
}

/// Outcome of a left product of stochastic factors.
#[derive(Debug, Clone, PartialEq)]
pub enum ProductLimit {
    /// Rows agreed within tolerance; `weights` is the common row, normalized
    /// to sum exactly to one.
    Converged {
        weights: Vec<f64>,
        factors: usize,
    },
    NotConverged {
        factors: usize,
        spread: f64,
    },
}

/// Accumulate P <- M P over the factor sequence until every column's spread
/// falls below `tol` or `max_factors` factors have been absorbed.
pub fn product_limit<I>(factors: I, max_factors: usize, tol: f64) -> ProductLimit
where
    I: IntoIterator<Item = StochasticMatrix>,
{
    let mut product: Option<SquareMatrix> = None;
    let mut count = 0usize;
    let mut spread = f64::INFINITY;
    for factor in factors {
        let p = match product.take() {
            None => factor.into_matrix(),
            Some(p) => factor.matrix().mul(&p),
        };
        count += 1;
        spread = p.max_row_spread();
        if spread < tol {
            let n = p.n();
            let row: Vec<f64> = (0..n).map(|j| p.get(0, j)).collect();
            let sum: f64 = row.iter().sum();
            let weights = row.iter().map(|v| v / sum).collect();
            return ProductLimit::Converged {
                weights,
                factors: count,
            };
        }
        product = Some(p);
        if count == max_factors {
            break;
        }
    }
    ProductLimit::NotConverged {
        factors: count,
        spread,
    }
}

/// Energy of a configuration against fixed targets: gain-weighted squared
/// tracking error plus the interaction potential.
pub fn lyapunov_value(
    positions: &[Vec2],
    targets: &[Vec2],
    gain_a: f64,
    safety: &SafetyParams,
) -> Potential {
    assert_eq!(positions.len(), targets.len(), "one target per agent");
    let quad: f64 = positions
        .iter()
        .zip(targets)
        .map(|(&p, &t)| (p - t).norm_squared())
        .sum();
    match total_potential(positions, safety) {
        Potential::Unbounded => Potential::Unbounded,
        Potential::Finite(v) => Potential::Finite(gain_a / 2.0 * quad + v),
    }
}

fn reference_variance(refs: &[Vec2]) -> f64 {
    let n = refs.len() as f64;
    let mut mean = Vec2::ZERO;
    for &r in refs {
        mean += r;
    }
    mean = mean / n;
    refs.iter().map(|&r| (r - mean).norm_squared()).sum::<f64>() / n
}

/// First update index from which the displaced references stay in agreement:
/// the summed per-coordinate population variance is below `threshold` at that
/// index and at every later one. `None` when the last entry still disagrees.
pub fn agreement_step(history: &[Vec<Vec2>], threshold: f64) -> Option<usize> {
    let last_above = (0..history.len())
        .rev()
        .find(|&k| reference_variance(&history[k]) >= threshold);
    match last_above {
        None => {
            if history.is_empty() {
                None
            } else {
                Some(0)
            }
        }
        Some(k) if k + 1 == history.len() => None,
        Some(k) => Some(k + 1),
    }
}
