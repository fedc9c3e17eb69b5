//! Ready-made scenarios used by the comparison studies and the CLI.

use std::f64::consts::PI;

use crate::config::{
    AgentsConfig, ChannelConfig, IntegratorConfig, ScenarioConfig, TopologyConfig,
};
use crate::geometry::{SafetyParams, Vec2};

fn base_integrator() -> IntegratorConfig {
    IntegratorConfig {
        update_interval: 0.1,
        integrator_step: 1e-3,
        duration: 20.0,
        record_every: 10,
        update_interval_bounds: None,
    }
}

fn base_safety() -> SafetyParams {
    SafetyParams::new(4.0, 8.0).expect("preset radii are valid")
}

/// Six agents forming a regular hexagon of circumradius 10 from random safe
/// starts, communicating over randomly drawn ring topologies.
pub fn hexagon6() -> ScenarioConfig {
    let displacements: Vec<Vec2> = (0..6)
        .map(|i| {
            let angle = i as f64 * PI / 3.0;
            10.0 * Vec2::new(angle.cos(), angle.sin())
        })
        .collect();
    ScenarioConfig {
        seed: 7,
        agents: AgentsConfig {
            n: 6,
            gain_a: 1.0,
            displacements,
            initial_positions: None,
            // Wide enough that agreement takes tens of updates; narrower
            // boxes reach consensus too quickly to study its cost.
            initial_box_half_width: Some(30.0),
            initial_references: None,
        },
        safety: base_safety(),
        channel: ChannelConfig {
            fading_lower: 0.0,
            fading_upper: 1.0,
        },
        // Density zero keeps each drawn topology a bare directed ring, the
        // slowest-mixing strongly connected choice.
        topology: TopologyConfig::Pool {
            pool_size: 5,
            density: 0.0,
        },
        integrator: base_integrator(),
    }
}

fn square4_agents() -> AgentsConfig {
    // Corners of a square, each assigned the slot past the center: every
    // agent's straight-line path to its slot runs through the middle.
    AgentsConfig {
        n: 4,
        gain_a: 1.0,
        displacements: vec![
            Vec2::new(-5.0, -5.0),
            Vec2::new(5.0, -5.0),
            Vec2::new(5.0, 5.0),
            Vec2::new(-5.0, 5.0),
        ],
        initial_positions: Some(vec![
            Vec2::new(10.0, 10.0),
            Vec2::new(-10.0, 10.0),
            Vec2::new(-10.0, -10.0),
            Vec2::new(10.0, -10.0),
        ]),
        initial_box_half_width: None,
        initial_references: None,
    }
}

/// Four agents crossing through the center under equal fixed weights. The
/// perfect symmetry never breaks, so the group jams against the repulsive
/// barrier short of the formation.
pub fn square4_symmetric() -> ScenarioConfig {
    ScenarioConfig {
        seed: 0,
        agents: square4_agents(),
        safety: base_safety(),
        channel: ChannelConfig {
            fading_lower: 0.0,
            fading_upper: 1.0,
        },
        topology: TopologyConfig::FixedWeights {
            rows: vec![vec![0.25; 4]; 4],
        },
        integrator: base_integrator(),
    }
}

/// The same crossing scenario over randomly drawn topologies and fading; the
/// randomness breaks the symmetry and the formation resolves.
pub fn square4_random_topologies() -> ScenarioConfig {
    ScenarioConfig {
        seed: 1,
        agents: square4_agents(),
        safety: base_safety(),
        channel: ChannelConfig {
            fading_lower: 0.0,
            fading_upper: 1.0,
        },
        topology: TopologyConfig::Pool {
            pool_size: 5,
            density: 0.3,
        },
        integrator: base_integrator(),
    }
}

pub const PRESET_NAMES: &[&str] = &["hexagon6", "square4-symmetric", "square4-random"];

pub fn by_name(name: &str) -> Option<ScenarioConfig> {
    match name {
        "hexagon6" => Some(hexagon6()),
        "square4-symmetric" => Some(square4_symmetric()),
        "square4-random" => Some(square4_random_topologies()),
        _ => None,
    }
}
