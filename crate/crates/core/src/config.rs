//! Scenario configuration: the full description of one simulation run,
//! deserializable from the sectioned TOML format the CLI reads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{is_well_posed, FormationSpec, SafetyParams, Vec2};
use crate::matrix::SquareMatrix;
use crate::topology::CommTopology;

/// Validation failure; `key` names the offending config entry.
#[derive(Debug, Error, PartialEq)]
#[error("{key}: {reason}")]
pub struct ConfigError {
    pub key: &'static str,
    pub reason: String,
}

impl ConfigError {
    fn new(key: &'static str, reason: impl Into<String>) -> Self {
        ConfigError {
            key,
            reason: reason.into(),
        }
    }
}

fn default_record_every() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub agents: AgentsConfig,
    pub safety: SafetyParams,
    pub channel: ChannelConfig,
    pub topology: TopologyConfig,
    pub integrator: IntegratorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsConfig {
    pub n: usize,
    pub gain_a: f64,
    /// Desired formation as one displacement per agent.
    pub displacements: Vec<Vec2>,
    /// Exactly one of `initial_positions` and `initial_box_half_width` must
    /// be given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_positions: Option<Vec<Vec2>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_box_half_width: Option<f64>,
    /// Reference override; defaults to the initial positions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_references: Option<Vec<Vec2>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub fading_lower: f64,
    pub fading_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyConfig {
    /// Random pool re-sampled at every update time.
    Pool { pool_size: usize, density: f64 },
    /// One fixed topology; fading still varies per update.
    Explicit { arcs: Vec<(usize, usize)> },
    /// One fixed receive-weight matrix; no fading at all.
    FixedWeights { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub update_interval: f64,
    pub integrator_step: f64,
    pub duration: f64,
    /// Record every this many integrator steps.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_interval_bounds: Option<[f64; 2]>,
}

impl ScenarioConfig {
    pub fn formation(&self) -> FormationSpec {
        FormationSpec::new(self.agents.displacements.clone())
    }

    /// Number of update times in the run (`duration / update_interval`).
    pub fn update_count(&self) -> usize {
        (self.integrator.duration / self.integrator.update_interval).round() as usize
    }

    /// Integrator steps per update interval (last step may be partial).
    pub fn steps_per_interval(&self) -> usize {
        ((self.integrator.update_interval / self.integrator.integrator_step) - 1e-9).ceil() as usize
    }

    /// The fixed topology for `Explicit` and `FixedWeights`; `None` for pools.
    pub fn fixed_topology(&self) -> Option<Result<CommTopology, ConfigError>> {
        match &self.topology {
            TopologyConfig::Pool { .. } => None,
            TopologyConfig::Explicit { arcs } => Some(
                CommTopology::new(self.agents.n, arcs)
                    .map_err(|e| ConfigError::new("topology.arcs", e.to_string())),
            ),
            TopologyConfig::FixedWeights { rows } => Some(Ok(fixed_weight_topology(rows))),
        }
    }

    /// The fixed weight matrix for `FixedWeights` configs.
    pub fn fixed_weights(&self) -> Option<SquareMatrix> {
        match &self.topology {
            TopologyConfig::FixedWeights { rows } => Some(SquareMatrix::from_rows(rows)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.agents.n;
        if n < 1 {
            return Err(ConfigError::new("agents.n", "must be at least 1"));
        }
        if !(self.agents.gain_a.is_finite() && self.agents.gain_a > 0.0) {
            return Err(ConfigError::new(
                "agents.gain_a",
                "must be finite and positive",
            ));
        }
        if self.agents.displacements.len() != n {
            return Err(ConfigError::new(
                "agents.displacements",
                format!(
                    "expected {n} entries, got {}",
                    self.agents.displacements.len()
                ),
            ));
        }
        if self.agents.displacements.iter().any(|d| !d.is_finite()) {
            return Err(ConfigError::new("agents.displacements", "non-finite entry"));
        }
        if !is_well_posed(&self.formation(), &self.safety) {
            return Err(ConfigError::new(
                "agents.displacements",
                "formation is not well posed: some displacement pair is within delta_c",
            ));
        }
        match (
            &self.agents.initial_positions,
            self.agents.initial_box_half_width,
        ) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::new(
                    "agents.initial_positions",
                    "give either explicit positions or a box half-width, not both",
                ));
            }
            (None, None) => {
                return Err(ConfigError::new(
                    "agents.initial_positions",
                    "give either explicit positions or initial_box_half_width",
                ));
            }
            (Some(p), None) => {
                if p.len() != n {
                    return Err(ConfigError::new(
                        "agents.initial_positions",
                        format!("expected {n} entries, got {}", p.len()),
                    ));
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(ConfigError::new(
                        "agents.initial_positions",
                        "non-finite entry",
                    ));
                }
            }
            (None, Some(w)) => {
                if !(w.is_finite() && w > 0.0) {
                    return Err(ConfigError::new(
                        "agents.initial_box_half_width",
                        "must be finite and positive",
                    ));
                }
            }
        }
        if let Some(refs) = &self.agents.initial_references {
            if refs.len() != n {
                return Err(ConfigError::new(
                    "agents.initial_references",
                    format!("expected {n} entries, got {}", refs.len()),
                ));
            }
            if refs.iter().any(|v| !v.is_finite()) {
                return Err(ConfigError::new(
                    "agents.initial_references",
                    "non-finite entry",
                ));
            }
        }
        let ch = &self.channel;
        if !(ch.fading_lower.is_finite()
            && ch.fading_upper.is_finite()
            && ch.fading_lower >= 0.0
            && ch.fading_upper > ch.fading_lower)
        {
            return Err(ConfigError::new(
                "channel.fading_lower",
                format!(
                    "bounds must satisfy 0 <= lower < upper, got [{}, {})",
                    ch.fading_lower, ch.fading_upper
                ),
            ));
        }
        self.validate_integrator()?;
        self.validate_topology()
    }

    fn validate_integrator(&self) -> Result<(), ConfigError> {
        let ig = &self.integrator;
        if !(ig.update_interval.is_finite() && ig.update_interval > 0.0) {
            return Err(ConfigError::new(
                "integrator.update_interval",
                "must be positive",
            ));
        }
        if !(ig.integrator_step.is_finite()
            && ig.integrator_step > 0.0
            && ig.integrator_step <= ig.update_interval)
        {
            return Err(ConfigError::new(
                "integrator.integrator_step",
                "must satisfy 0 < integrator_step <= update_interval",
            ));
        }
        if !(ig.duration.is_finite() && ig.duration > 0.0) {
            return Err(ConfigError::new("integrator.duration", "must be positive"));
        }
        let intervals = ig.duration / ig.update_interval;
        if (intervals - intervals.round()).abs() > 1e-9 || intervals.round() < 1.0 {
            return Err(ConfigError::new(
                "integrator.duration",
                "must be a whole number of update intervals",
            ));
        }
        if ig.record_every < 1 {
            return Err(ConfigError::new(
                "integrator.record_every",
                "must be at least 1",
            ));
        }
        if let Some([lo, hi]) = ig.update_interval_bounds {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(ConfigError::new(
                    "integrator.update_interval_bounds",
                    "must satisfy 0 < lower <= upper",
                ));
            }
            if ig.update_interval < lo || ig.update_interval > hi {
                return Err(ConfigError::new(
                    "integrator.update_interval",
                    format!("outside the configured bounds [{lo}, {hi}]"),
                ));
            }
        }
        Ok(())
    }

    fn validate_topology(&self) -> Result<(), ConfigError> {
        let n = self.agents.n;
        match &self.topology {
            TopologyConfig::Pool { pool_size, density } => {
                if *pool_size < 1 {
                    return Err(ConfigError::new("topology.pool_size", "must be at least 1"));
                }
                if !(0.0..=1.0).contains(density) {
                    return Err(ConfigError::new("topology.density", "must lie in [0, 1]"));
                }
            }
            TopologyConfig::Explicit { arcs } => {
                let g = CommTopology::new(n, arcs)
                    .map_err(|e| ConfigError::new("topology.arcs", e.to_string()))?;
                if !g.is_strongly_connected() {
                    return Err(ConfigError::new(
                        "topology.arcs",
                        "topology is not strongly connected",
                    ));
                }
            }
            TopologyConfig::FixedWeights { rows } => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(ConfigError::new(
                        "topology.rows",
                        format!("expected an {n}x{n} matrix"),
                    ));
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                        return Err(ConfigError::new(
                            "topology.rows",
                            format!("row {i} has a negative or non-finite entry"),
                        ));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > 1e-12 {
                        return Err(ConfigError::new(
                            "topology.rows",
                            format!("row {i} sums to {sum}, expected 1"),
                        ));
                    }
                    if row[i] <= 0.0 {
                        return Err(ConfigError::new(
                            "topology.rows",
                            format!("row {i} needs a positive diagonal (agents hear themselves)"),
                        ));
                    }
                }
                if !fixed_weight_topology(rows).is_strongly_connected() {
                    return Err(ConfigError::new(
                        "topology.rows",
                        "nonzero pattern is not strongly connected",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Topology induced by the nonzero pattern of a weight matrix.
fn fixed_weight_topology(rows: &[Vec<f64>]) -> CommTopology {
    let n = rows.len();
    let mut arcs = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if w > 0.0 {
                arcs.push((j, i));
            }
        }
    }
    CommTopology::new(n, &arcs).expect("indices bounded by row length")
}
