//! Wireless multiple-access channel: fading coefficients on the arcs of a
//! topology, superposition of simultaneous broadcasts, and the known-value
//! side channel that normalizes the aggregate into a convex combination.

use rand::Rng;
use thiserror::Error;

use crate::geometry::Vec2;
use crate::matrix::SquareMatrix;
use crate::topology::CommTopology;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("fading bounds must satisfy 0 <= lower < upper, got [{lower}, {upper})")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("fading realization does not match the topology (receiver {receiver}: {found} coefficients for {expected} in-neighbors)")]
    ShapeMismatch {
        receiver: usize,
        found: usize,
        expected: usize,
    },
    #[error("expected {expected} payloads, got {found}")]
    PayloadCountMismatch { expected: usize, found: usize },
    #[error("non-positive fading coefficient {value} on arc ({sender} -> {receiver})")]
    NonPositiveCoefficient {
        sender: usize,
        receiver: usize,
        value: f64,
    },
}

/// One draw of the channel: a positive coefficient per arc, stored parallel
/// to the topology's in-neighbor lists (`coefficients(i)[k]` scales the
/// signal from `in_neighbors(i)[k]` as heard by `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct FadingRealization {
    coefficients: Vec<Vec<f64>>,
}

impl FadingRealization {
    /// Wrap externally produced coefficients, enforcing shape and positivity.
    pub fn from_coefficients(
        topology: &CommTopology,
        coefficients: Vec<Vec<f64>>,
    ) -> Result<Self, ChannelError> {
        if coefficients.len() != topology.n() {
            return Err(ChannelError::ShapeMismatch {
                receiver: coefficients.len().min(topology.n()),
                found: coefficients.len(),
                expected: topology.n(),
            });
        }
        for (i, row) in coefficients.iter().enumerate() {
            let neighbors = topology.in_neighbors(i);
            if row.len() != neighbors.len() {
                return Err(ChannelError::ShapeMismatch {
                    receiver: i,
                    found: row.len(),
                    expected: neighbors.len(),
                });
            }
            for (k, &xi) in row.iter().enumerate() {
                if xi <= 0.0 || !xi.is_finite() {
                    return Err(ChannelError::NonPositiveCoefficient {
                        sender: neighbors[k],
                        receiver: i,
                        value: xi,
                    });
                }
            }
        }
        Ok(FadingRealization { coefficients })
    }

    /// Coefficients entering receiver `i`, parallel to its in-neighbor list.
    pub fn coefficients(&self, i: usize) -> &[f64] {
        &self.coefficients[i]
    }

    fn check_shape(&self, topology: &CommTopology) -> Result<(), ChannelError> {
        if self.coefficients.len() != topology.n() {
            return Err(ChannelError::ShapeMismatch {
                receiver: 0,
                found: self.coefficients.len(),
                expected: topology.n(),
            });
        }
        for (i, row) in self.coefficients.iter().enumerate() {
            let expected = topology.in_neighbors(i).len();
            if row.len() != expected {
                return Err(ChannelError::ShapeMismatch {
                    receiver: i,
                    found: row.len(),
                    expected,
                });
            }
        }
        Ok(())
    }
}

/// Per-agent receive result: raw superposition `nu`, side-channel sum
/// `nu_prime`, and the normalized value `zeta = nu / nu_prime`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedAggregate {
    pub nu: Vec<Vec2>,
    pub nu_prime: Vec<f64>,
    pub zeta: Vec<Vec2>,
}

/// Row-stochastic receive-weight matrix induced by a fading realization:
/// entry (i, j) is the normalized coefficient of sender j at receiver i.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(SquareMatrix);

impl WeightMatrix {
    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.0
    }

    /// Apply the weights to one planar value per agent.
    pub fn apply(&self, values: &[Vec2]) -> Vec<Vec2> {
        let n = self.0.n();
        assert_eq!(values.len(), n, "value count must match matrix size");
        (0..n)
            .map(|i| {
                let mut acc = Vec2::ZERO;
                for (j, &v) in values.iter().enumerate() {
                    acc += self.0.get(i, j) * v;
                }
                acc
            })
            .collect()
    }
}

/// Draw one coefficient per arc, independently uniform on `[lower, upper)`,
/// re-drawing any non-positive sample so that every coefficient is > 0.
pub fn sample_fading<R: Rng>(
    topology: &CommTopology,
    rng: &mut R,
    lower: f64,
    upper: f64,
) -> Result<FadingRealization, ChannelError> {
    if !(lower.is_finite() && upper.is_finite() && lower >= 0.0 && upper > lower) {
        return Err(ChannelError::InvalidBounds { lower, upper });
    }
    let coefficients = (0..topology.n())
        .map(|i| {
            topology
                .in_neighbors(i)
                .iter()
                .map(|_| {
                    let mut xi = rng.gen_range(lower..upper);
                    while xi <= 0.0 {
                        xi = rng.gen_range(lower..upper);
                    }
                    xi
                })
                .collect()
        })
        .collect();
    Ok(FadingRealization { coefficients })
}

/// Superimpose simultaneous broadcasts as the channel does: every receiver
/// hears the coefficient-weighted sum of its in-neighbors' payloads plus the
/// side-channel sum of the coefficients themselves.
pub fn superimpose(
    topology: &CommTopology,
    fading: &FadingRealization,
    payloads: &[Vec2],
) -> Result<ReceivedAggregate, ChannelError> {
    fading.check_shape(topology)?;
    let n = topology.n();
    if payloads.len() != n {
        return Err(ChannelError::PayloadCountMismatch {
            expected: n,
            found: payloads.len(),
        });
    }
    let mut nu = Vec::with_capacity(n);
    let mut nu_prime = Vec::with_capacity(n);
    let mut zeta = Vec::with_capacity(n);
    for i in 0..n {
        let mut sum = Vec2::ZERO;
        let mut sum_prime = 0.0;
        for (k, &j) in topology.in_neighbors(i).iter().enumerate() {
            let xi = fading.coefficients[i][k];
            sum += xi * payloads[j];
            sum_prime += xi;
        }
        if sum_prime <= 0.0 {
            return Err(ChannelError::NonPositiveCoefficient {
                sender: i,
                receiver: i,
                value: sum_prime,
            });
        }
        nu.push(sum);
        nu_prime.push(sum_prime);
        zeta.push(sum / sum_prime);
    }
    Ok(ReceivedAggregate { nu, nu_prime, zeta })
}

/// Normalize a fading realization into the row-stochastic weight matrix.
pub fn weight_matrix(
    topology: &CommTopology,
    fading: &FadingRealization,
) -> Result<WeightMatrix, ChannelError> {
    fading.check_shape(topology)?;
    let n = topology.n();
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        let total: f64 = fading.coefficients[i].iter().sum();
        for (k, &j) in topology.in_neighbors(i).iter().enumerate() {
            m.set(i, j, fading.coefficients[i][k] / total);
        }
    }
    Ok(WeightMatrix(m))
}
