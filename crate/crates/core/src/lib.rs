//! Multi-agent formation control with over-the-air consensus.
//!
//! Agents move as single integrators toward per-agent reference points. At
//! fixed update times everybody broadcasts simultaneously; the wireless
//! channel superimposes the signals with unknown positive fading gains, and a
//! known-value side channel lets each receiver normalize the aggregate into a
//! convex combination of its in-neighbors' payloads. Between updates a
//! repulsive potential field keeps agents apart. The crate also ships a
//! consensus-analysis toolkit (matrix classification, product limits,
//! Lyapunov evaluation) and a protocol cost comparator.

// Numeric kernels walk several parallel arrays per index; iterator zips
// would obscure which agent the body touches.
#![allow(clippy::needless_range_loop)]

pub mod channel;
pub mod config;
pub mod consensus;
pub mod dynamics;
pub mod geometry;
pub mod matrix;
pub mod metrics;
pub mod potential;
pub mod presets;
pub mod rng;
pub mod topology;

pub use config::{ScenarioConfig, TopologyConfig};
pub use dynamics::{simulate, simulate_with, Aggregation, TrajectoryRecord};
pub use geometry::{FormationSpec, SafetyParams, Vec2};
pub use topology::{CommTopology, TopologyPool};
