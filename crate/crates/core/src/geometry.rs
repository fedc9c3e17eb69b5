//! Planar vector math, formation specification, safety radii, and
//! danger-set queries shared by every other module.

use std::collections::BTreeSet;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error(
        "safety radii must satisfy delta_c > delta_s > 0, got delta_s={delta_s}, delta_c={delta_c}"
    )]
    InvalidSafetyParams { delta_s: f64, delta_c: f64 },
    #[error("non-finite component in planar vector ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
}

/// A point or displacement in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotate counterclockwise by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

/// Safety radius `delta_s` (hard minimum separation) and critical radius
/// `delta_c` (activation distance of the repulsive potential).
///
/// Invariant: `delta_c > delta_s > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSafetyParams")]
pub struct SafetyParams {
    delta_s: f64,
    delta_c: f64,
}

#[derive(Deserialize)]
struct RawSafetyParams {
    delta_s: f64,
    delta_c: f64,
}

impl TryFrom<RawSafetyParams> for SafetyParams {
    type Error = GeometryError;
    fn try_from(raw: RawSafetyParams) -> Result<Self, GeometryError> {
        SafetyParams::new(raw.delta_s, raw.delta_c)
    }
}

impl SafetyParams {
    pub fn new(delta_s: f64, delta_c: f64) -> Result<Self, GeometryError> {
        if !(delta_s.is_finite() && delta_c.is_finite() && delta_s > 0.0 && delta_c > delta_s) {
            return Err(GeometryError::InvalidSafetyParams { delta_s, delta_c });
        }
        Ok(SafetyParams { delta_s, delta_c })
    }

    pub fn delta_s(&self) -> f64 {
        self.delta_s
    }

    pub fn delta_c(&self) -> f64 {
        self.delta_c
    }
}

/// Desired formation given as one displacement vector per agent; the targets
/// are `centroid + displacement[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FormationSpec {
    pub displacements: Vec<Vec2>,
}

impl FormationSpec {
    pub fn new(displacements: Vec<Vec2>) -> Self {
        FormationSpec { displacements }
    }

    pub fn len(&self) -> usize {
        self.displacements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacements.is_empty()
    }

    pub fn displacement(&self, i: usize) -> Vec2 {
        self.displacements[i]
    }

    /// Target positions for a given formation centroid.
    pub fn targets(&self, centroid: Vec2) -> Vec<Vec2> {
        self.displacements.iter().map(|&d| centroid + d).collect()
    }
}

/// The set of agents currently *not* in danger of colliding: agent `i` is a
/// member iff its distance to every other agent strictly exceeds `delta_c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafeSet {
    n: usize,
    members: BTreeSet<usize>,
}

impl SafeSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_safe(&self, i: usize) -> bool {
        self.members.contains(&i)
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// True iff every agent is safe.
    pub fn is_full(&self) -> bool {
        self.members.len() == self.n
    }
}

/// True iff every pair of displacements is strictly farther apart than
/// `delta_c`, so that agents sitting exactly on the formation are all safe.
pub fn is_well_posed(formation: &FormationSpec, safety: &SafetyParams) -> bool {
    let d = &formation.displacements;
    for i in 0..d.len() {
        for j in (i + 1)..d.len() {
            if d[i].distance(d[j]) <= safety.delta_c() {
                return false;
            }
        }
    }
    true
}

/// Agents whose distance to every other agent strictly exceeds `delta_c`.
pub fn safe_set(positions: &[Vec2], safety: &SafetyParams) -> SafeSet {
    let n = positions.len();
    let mut members = BTreeSet::new();
    'outer: for i in 0..n {
        for j in 0..n {
            if i != j && positions[i].distance(positions[j]) <= safety.delta_c() {
                continue 'outer;
            }
        }
        members.insert(i);
    }
    SafeSet { n, members }
}

/// Minimum distance over all agent pairs; `None` with fewer than two agents.
pub fn min_pairwise_distance(positions: &[Vec2]) -> Option<f64> {
    if positions.len() < 2 {
        return None;
    }
    let mut min = f64::INFINITY;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            min = min.min(positions[i].distance(positions[j]));
        }
    }
    Some(min)
}
