//! Repulsive potential field between agent pairs: the pair potential, the
//! total field energy, and its exact negative gradient (the repulsion term
//! used by the flow dynamics).

use thiserror::Error;

use crate::geometry::{SafetyParams, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("agents {i} and {j} are {distance} apart, at or below the safety radius {delta_s}")]
    SafetyViolation {
        i: usize,
        j: usize,
        distance: f64,
        delta_s: f64,
    },
}

/// Field energy; `Unbounded` marks a pair at or below the safety radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    Finite(f64),
    Unbounded,
}

impl Potential {
    pub fn is_unbounded(self) -> bool {
        matches!(self, Potential::Unbounded)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Potential::Finite(v) => Some(v),
            Potential::Unbounded => None,
        }
    }
}

/// Potential of a single pair at distance `dist`: blows up toward the safety
/// radius, reaches zero with zero slope at the critical radius, and vanishes
/// beyond it.
pub fn pair_potential(dist: f64, safety: &SafetyParams) -> Potential {
    assert!(dist > 0.0, "pair distance must be positive, got {dist}");
    let ds = safety.delta_s();
    let dc = safety.delta_c();
    if dist <= ds {
        Potential::Unbounded
    } else if dist <= dc {
        let barrier = dc * (dc - ds) * (dc - ds) / (dist - ds);
        Potential::Finite(barrier + dist * dist / 2.0 - 1.5 * dc * dc + dc * ds)
    } else {
        Potential::Finite(0.0)
    }
}

/// Magnitude of the pairwise repulsion at distance `dist`, valid on
/// `(delta_s, delta_c]`; zero at the critical radius by construction.
fn repulsion_coefficient(dist: f64, safety: &SafetyParams) -> f64 {
    let ds = safety.delta_s();
    let dc = safety.delta_c();
    dc * (dc - ds) * (dc - ds) / ((dist - ds) * (dist - ds)) - dist
}

/// Exact negative gradient of the total potential with respect to agent `i`'s
/// position. Pairs beyond the critical radius contribute nothing.
pub fn repulsion(
    positions: &[Vec2],
    i: usize,
    safety: &SafetyParams,
) -> Result<Vec2, PotentialError> {
    let mut force = Vec2::ZERO;
    for (j, &p_j) in positions.iter().enumerate() {
        if j == i {
            continue;
        }
        let l = positions[i] - p_j;
        let dist = l.norm();
        if dist <= safety.delta_s() {
            return Err(PotentialError::SafetyViolation {
                i,
                j,
                distance: dist,
                delta_s: safety.delta_s(),
            });
        }
        if dist <= safety.delta_c() {
            force += repulsion_coefficient(dist, safety) * (l / dist);
        }
    }
    Ok(force)
}

/// Total field energy, summing each unordered pair once.
pub fn total_potential(positions: &[Vec2], safety: &SafetyParams) -> Potential {
    let mut total = 0.0;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let dist = positions[i].distance(positions[j]);
            if dist <= safety.delta_s() {
                return Potential::Unbounded;
            }
            match pair_potential(dist, safety) {
                Potential::Finite(v) => total += v,
                Potential::Unbounded => return Potential::Unbounded,
            }
        }
    }
    Potential::Finite(total)
}
