//! Jump-flow dynamics: at every update time the agents broadcast, the
//! channel aggregates, and references jump; between updates positions flow
//! under reference tracking, the repulsive field, and the constant-velocity
//! recovery that follows a danger episode.

use thiserror::Error;

use crate::channel::{sample_fading, superimpose, weight_matrix, ChannelError};
use crate::config::{ConfigError, ScenarioConfig, TopologyConfig};
use crate::geometry::{
    min_pairwise_distance, safe_set, FormationSpec, SafeSet, SafetyParams, Vec2,
};
use crate::matrix::SquareMatrix;
use crate::potential::{repulsion, PotentialError};
use crate::rng::stream_rng;
use crate::topology::{CommTopology, TopologyError, TopologyPool};

use rand::Rng;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("agents {i} and {j} are {distance:.6} apart at t={time:.4}s, at or below the safety radius {delta_s}")]
    SafetyViolation {
        time: f64,
        i: usize,
        j: usize,
        distance: f64,
        delta_s: f64,
    },
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("initial positions put agents {i} and {j} only {distance:.3} apart (critical radius {delta_c}); every agent must start safe")]
    InitialConditions {
        i: usize,
        j: usize,
        distance: f64,
        delta_c: f64,
    },
    #[error("no safe initial placement found in {attempts} attempts; enlarge the box or reduce n")]
    SamplingExhausted { attempts: usize },
}

/// Per-agent hybrid state: continuous position, piecewise-constant reference,
/// and the danger bookkeeping that selects the flow regime.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub position: Vec2,
    pub reference: Vec2,
    /// True once the agent has been unsafe at any point since the last jump.
    pub in_danger_since_update: bool,
    /// Most recent integration boundary at which the agent was unsafe.
    pub last_danger_time: Option<f64>,
    pub last_danger_position: Option<Vec2>,
    /// Cached recovery velocity; cleared on danger re-entry.
    release_velocity: Option<Vec2>,
}

impl AgentState {
    pub fn new(position: Vec2, reference: Vec2) -> Self {
        AgentState {
            position,
            reference,
            in_danger_since_update: false,
            last_danger_time: None,
            last_danger_position: None,
            release_velocity: None,
        }
    }

    /// State with an already-recorded danger episode, for driving
    /// `step_interval` directly in tests and analysis code.
    pub fn with_danger_snapshot(
        position: Vec2,
        reference: Vec2,
        danger_time: f64,
        danger_position: Vec2,
    ) -> Self {
        AgentState {
            position,
            reference,
            in_danger_since_update: true,
            last_danger_time: Some(danger_time),
            last_danger_position: Some(danger_position),
            release_velocity: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlowParams {
    pub gain_a: f64,
    pub safety: SafetyParams,
    pub integrator_step: f64,
}

/// What each agent puts on the air at an update time: its displaced position
/// when safe, its displaced reference otherwise.
pub fn broadcast_payload(
    states: &[AgentState],
    safe: &SafeSet,
    formation: &FormationSpec,
) -> Vec<Vec2> {
    states
        .iter()
        .enumerate()
        .map(|(i, st)| {
            let base = if safe.is_safe(i) {
                st.position
            } else {
                st.reference
            };
            base - formation.displacement(i)
        })
        .collect()
}

/// Reference update at an update time: positions stay, each reference becomes
/// the received aggregate plus the agent's displacement, danger bookkeeping
/// resets.
pub fn jump(states: &mut [AgentState], zeta: &[Vec2], formation: &FormationSpec) {
    assert_eq!(states.len(), zeta.len(), "one aggregate per agent");
    for (i, st) in states.iter_mut().enumerate() {
        st.reference = zeta[i] + formation.displacement(i);
        st.in_danger_since_update = false;
        st.last_danger_time = None;
        st.last_danger_position = None;
        st.release_velocity = None;
    }
}

/// Instantaneous flow velocity of one agent given everybody's current
/// positions. `t_next` is the end of the running update interval.
pub fn flow_velocity(
    state: &AgentState,
    agent: usize,
    positions: &[Vec2],
    t: f64,
    t_next: f64,
    params: &FlowParams,
) -> Result<Vec2, DynamicsError> {
    let p = positions[agent];
    let mut unsafe_now = false;
    for (j, &q) in positions.iter().enumerate() {
        if j == agent {
            continue;
        }
        let dist = p.distance(q);
        if dist <= params.safety.delta_s() {
            return Err(DynamicsError::SafetyViolation {
                time: t,
                i: agent.min(j),
                j: agent.max(j),
                distance: dist,
                delta_s: params.safety.delta_s(),
            });
        }
        if dist <= params.safety.delta_c() {
            unsafe_now = true;
        }
    }
    let tracking = -params.gain_a * (p - state.reference);
    if unsafe_now {
        let r = repulsion(positions, agent, &params.safety).expect("distances checked above");
        Ok(r + tracking)
    } else if state.in_danger_since_update {
        let tau = state
            .last_danger_time
            .expect("danger flag implies a recorded time");
        let p_tau = state
            .last_danger_position
            .expect("danger flag implies a recorded position");
        Ok(-(p_tau - state.reference) / (t_next - tau))
    } else {
        Ok(tracking)
    }
}

/// Summary of one integrated interval.
#[derive(Debug, Clone)]
pub struct IntervalStats {
    /// Largest boundary speed seen per agent.
    pub peak_speed: Vec<f64>,
    /// Agent was unsafe at some boundary of this interval.
    pub endangered: Vec<bool>,
    /// Agent started a constant-velocity recovery segment.
    pub released: Vec<bool>,
    /// Recovery had less than one step left and was landed exactly instead.
    pub pinned: Vec<bool>,
    /// Minimum pairwise distance over all boundaries including the endpoint.
    pub min_distance: f64,
}

#[derive(Clone, Copy)]
enum Regime {
    Track,
    Release(Vec2),
    Repel,
}

fn boundary_check(
    positions: &[Vec2],
    t: f64,
    safety: &SafetyParams,
    min_distance: &mut f64,
) -> Result<(), DynamicsError> {
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let dist = positions[i].distance(positions[j]);
            *min_distance = min_distance.min(dist);
            if dist <= safety.delta_s() {
                return Err(DynamicsError::SafetyViolation {
                    time: t,
                    i,
                    j,
                    distance: dist,
                    delta_s: safety.delta_s(),
                });
            }
        }
    }
    Ok(())
}

/// Integrate all agents from `t_start` to `t_end` with fixed-step classical
/// RK4. Regimes are re-evaluated at every step boundary and held constant
/// within a step; the observer runs at every boundary except `t_end`.
pub fn step_interval<F>(
    states: &mut [AgentState],
    t_start: f64,
    t_end: f64,
    params: &FlowParams,
    mut observer: F,
) -> Result<IntervalStats, DynamicsError>
where
    F: FnMut(f64, &[AgentState], &[bool]),
{
    let n = states.len();
    let h = params.integrator_step;
    let a = params.gain_a;
    let span = t_end - t_start;
    assert!(span >= 0.0, "interval must not run backwards");
    assert!(h > 0.0, "integrator step must be positive");
    let steps = if span == 0.0 {
        0
    } else {
        ((span / h) - 1e-9).ceil().max(1.0) as usize
    };
    let mut stats = IntervalStats {
        peak_speed: vec![0.0; n],
        endangered: vec![false; n],
        released: vec![false; n],
        pinned: vec![false; n],
        min_distance: f64::INFINITY,
    };
    let references: Vec<Vec2> = states.iter().map(|s| s.reference).collect();

    for m in 0..steps {
        let t = t_start + m as f64 * h;
        let step_end = if m + 1 == steps {
            t_end
        } else {
            t_start + (m + 1) as f64 * h
        };
        let positions: Vec<Vec2> = states.iter().map(|s| s.position).collect();
        boundary_check(&positions, t, &params.safety, &mut stats.min_distance)?;
        let safe = safe_set(&positions, &params.safety);

        let mut regimes = Vec::with_capacity(n);
        let mut unsafe_now = vec![false; n];
        for (i, st) in states.iter_mut().enumerate() {
            if !safe.is_safe(i) {
                unsafe_now[i] = true;
                st.in_danger_since_update = true;
                st.last_danger_time = Some(t);
                st.last_danger_position = Some(positions[i]);
                st.release_velocity = None;
                stats.endangered[i] = true;
                regimes.push(Regime::Repel);
            } else if st.in_danger_since_update {
                if st.release_velocity.is_none() {
                    let tau = st
                        .last_danger_time
                        .expect("danger flag implies a recorded time");
                    let p_tau = st
                        .last_danger_position
                        .expect("danger flag implies a recorded position");
                    stats.released[i] = true;
                    let v = if t_end - tau < h {
                        // Less than one step of recovery time remains; land on
                        // the reference exactly instead of prescribing a
                        // velocity the step size cannot resolve.
                        stats.pinned[i] = true;
                        (st.reference - positions[i]) / (t_end - t)
                    } else {
                        -(p_tau - st.reference) / (t_end - tau)
                    };
                    st.release_velocity = Some(v);
                }
                regimes.push(Regime::Release(
                    st.release_velocity.expect("just populated"),
                ));
            } else {
                regimes.push(Regime::Track);
            }
        }

        observer(t, states, &unsafe_now);

        let derivs = |pos: &[Vec2]| -> Result<Vec<Vec2>, DynamicsError> {
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let v = match regimes[i] {
                    Regime::Track => -a * (pos[i] - references[i]),
                    Regime::Release(v) => v,
                    Regime::Repel => {
                        let r = repulsion(pos, i, &params.safety).map_err(|e| {
                            let PotentialError::SafetyViolation {
                                i,
                                j,
                                distance,
                                delta_s,
                            } = e;
                            DynamicsError::SafetyViolation {
                                time: t,
                                i,
                                j,
                                distance,
                                delta_s,
                            }
                        })?;
                        r - a * (pos[i] - references[i])
                    }
                };
                out.push(v);
            }
            Ok(out)
        };
        let stage = |base: &[Vec2], dir: &[Vec2], scale: f64| -> Vec<Vec2> {
            base.iter().zip(dir).map(|(&p, &v)| p + scale * v).collect()
        };

        let hs = step_end - t;
        let k1 = derivs(&positions)?;
        for i in 0..n {
            stats.peak_speed[i] = stats.peak_speed[i].max(k1[i].norm());
        }
        let k2 = derivs(&stage(&positions, &k1, hs / 2.0))?;
        let k3 = derivs(&stage(&positions, &k2, hs / 2.0))?;
        let k4 = derivs(&stage(&positions, &k3, hs))?;
        for (i, st) in states.iter_mut().enumerate() {
            st.position = positions[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (hs / 6.0);
        }
    }

    let positions: Vec<Vec2> = states.iter().map(|s| s.position).collect();
    boundary_check(&positions, t_end, &params.safety, &mut stats.min_distance)?;
    Ok(stats)
}

/// How the received value is formed at each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Superimposed broadcasts normalized by the known-value side channel.
    OverTheAir,
    /// Exact arithmetic mean over in-neighbors (the orthogonal baseline).
    ExactMean,
}

/// Everything a run records: decimated samples, per-update communication
/// artifacts, and end-of-run summaries.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub sample_times: Vec<f64>,
    /// Indexed `[sample][agent]`.
    pub positions: Vec<Vec<Vec2>>,
    pub references: Vec<Vec<Vec2>>,
    pub unsafe_flags: Vec<Vec<bool>>,
    pub update_times: Vec<f64>,
    /// Post-jump references, indexed `[update][agent]`.
    pub reference_history: Vec<Vec<Vec2>>,
    /// Receive-weight matrix used at each update.
    pub weight_history: Vec<SquareMatrix>,
    pub safe_at_update: Vec<SafeSet>,
    /// Agent stayed safe through the whole interval following each update.
    pub interval_safe: Vec<Vec<bool>>,
    /// Non-self arcs of the topology drawn at each update.
    pub arc_counts: Vec<usize>,
    /// Instantaneous speed of each agent at the end of the run.
    pub final_speeds: Vec<f64>,
    pub min_pairwise_distance: f64,
}

impl TrajectoryRecord {
    pub fn n(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    pub fn final_positions(&self) -> &[Vec2] {
        self.positions
            .last()
            .expect("a run records at least one sample")
    }

    pub fn final_references(&self) -> &[Vec2] {
        self.references
            .last()
            .expect("a run records at least one sample")
    }

    /// Per-update references with the formation displacement removed; the
    /// sequence whose variance defines agreement.
    pub fn displaced_references(&self, formation: &FormationSpec) -> Vec<Vec<Vec2>> {
        self.reference_history
            .iter()
            .map(|refs| {
                refs.iter()
                    .enumerate()
                    .map(|(i, &r)| r - formation.displacement(i))
                    .collect()
            })
            .collect()
    }

    /// The agreed formation centroid: mean of the final displaced references.
    pub fn consensus_centroid(&self, formation: &FormationSpec) -> Vec2 {
        let last = self
            .reference_history
            .last()
            .expect("a run has at least one update");
        let mut sum = Vec2::ZERO;
        for (i, &r) in last.iter().enumerate() {
            sum += r - formation.displacement(i);
        }
        sum / last.len() as f64
    }

    /// Largest final distance to the agreed target positions.
    pub fn formation_error(&self, formation: &FormationSpec) -> f64 {
        let centroid = self.consensus_centroid(formation);
        self.final_positions()
            .iter()
            .enumerate()
            .map(|(i, &p)| (p - (centroid + formation.displacement(i))).norm())
            .fold(0.0, f64::max)
    }
}

enum TopologySource {
    Pool(TopologyPool),
    Fixed(CommTopology),
}

pub(crate) fn exact_mean(topology: &CommTopology, payloads: &[Vec2]) -> Vec<Vec2> {
    (0..topology.n())
        .map(|i| {
            let neighbors = topology.in_neighbors(i);
            let mut sum = Vec2::ZERO;
            for &j in neighbors {
                sum += payloads[j];
            }
            sum / neighbors.len() as f64
        })
        .collect()
}

fn mean_matrix(topology: &CommTopology) -> SquareMatrix {
    let n = topology.n();
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        let neighbors = topology.in_neighbors(i);
        let w = 1.0 / neighbors.len() as f64;
        for &j in neighbors {
            m.set(i, j, w);
        }
    }
    m
}

fn apply_weights(m: &SquareMatrix, payloads: &[Vec2]) -> Vec<Vec2> {
    (0..m.n())
        .map(|i| {
            let mut acc = Vec2::ZERO;
            for (j, &p) in payloads.iter().enumerate() {
                acc += m.get(i, j) * p;
            }
            acc
        })
        .collect()
}

fn draw_initial_positions(
    config: &ScenarioConfig,
    rng: &mut impl Rng,
) -> Result<Vec<Vec2>, SimulationError> {
    let n = config.agents.n;
    let delta_c = config.safety.delta_c();
    if let Some(explicit) = &config.agents.initial_positions {
        for i in 0..n {
            for j in (i + 1)..n {
                let distance = explicit[i].distance(explicit[j]);
                if distance <= delta_c {
                    return Err(SimulationError::InitialConditions {
                        i,
                        j,
                        distance,
                        delta_c,
                    });
                }
            }
        }
        return Ok(explicit.clone());
    }
    let w = config
        .agents
        .initial_box_half_width
        .expect("validate ensures one choice");
    const MAX_ATTEMPTS: usize = 10_000;
    for _ in 0..MAX_ATTEMPTS {
        let candidate: Vec<Vec2> = (0..n)
            .map(|_| Vec2::new(rng.gen_range(-w..w), rng.gen_range(-w..w)))
            .collect();
        let ok = min_pairwise_distance(&candidate).is_none_or(|d| d > delta_c);
        if ok {
            return Ok(candidate);
        }
    }
    Err(SimulationError::SamplingExhausted {
        attempts: MAX_ATTEMPTS,
    })
}

/// Run the full scenario with over-the-air aggregation.
pub fn simulate(config: &ScenarioConfig) -> Result<TrajectoryRecord, SimulationError> {
    simulate_with(config, Aggregation::OverTheAir)
}

/// Run the full scenario with the chosen aggregation. Identical config and
/// seed reproduce the record exactly; the two aggregations share topology and
/// initial-position draws.
pub fn simulate_with(
    config: &ScenarioConfig,
    aggregation: Aggregation,
) -> Result<TrajectoryRecord, SimulationError> {
    config.validate()?;
    let n = config.agents.n;
    let formation = config.formation();
    let safety = config.safety;
    let params = FlowParams {
        gain_a: config.agents.gain_a,
        safety,
        integrator_step: config.integrator.integrator_step,
    };

    let mut topo_rng = stream_rng(config.seed, "topology");
    let source = match &config.topology {
        TopologyConfig::Pool { pool_size, density } => TopologySource::Pool(
            TopologyPool::generate(n, *pool_size, *density, &mut topo_rng)?,
        ),
        _ => TopologySource::Fixed(
            config
                .fixed_topology()
                .expect("non-pool topology is fixed")
                .map_err(SimulationError::Config)?,
        ),
    };
    let fixed_weights = config.fixed_weights();
    let mut fading_rng = stream_rng(config.seed, "fading");
    let mut init_rng = stream_rng(config.seed, "init");

    let initial_positions = draw_initial_positions(config, &mut init_rng)?;
    let initial_references = config
        .agents
        .initial_references
        .clone()
        .unwrap_or_else(|| initial_positions.clone());
    let mut states: Vec<AgentState> = initial_positions
        .iter()
        .zip(&initial_references)
        .map(|(&p, &r)| AgentState::new(p, r))
        .collect();

    let update_count = config.update_count();
    let delta = config.integrator.update_interval;
    let steps_per = config.steps_per_interval();
    let record_every = config.integrator.record_every;

    let mut record = TrajectoryRecord {
        sample_times: Vec::new(),
        positions: Vec::new(),
        references: Vec::new(),
        unsafe_flags: Vec::new(),
        update_times: Vec::with_capacity(update_count),
        reference_history: Vec::with_capacity(update_count),
        weight_history: Vec::with_capacity(update_count),
        safe_at_update: Vec::with_capacity(update_count),
        interval_safe: Vec::with_capacity(update_count),
        arc_counts: Vec::with_capacity(update_count),
        final_speeds: Vec::new(),
        min_pairwise_distance: f64::INFINITY,
    };

    for k in 0..update_count {
        let t_k = k as f64 * delta;
        let t_next = (k + 1) as f64 * delta;
        let positions: Vec<Vec2> = states.iter().map(|s| s.position).collect();
        let safe = safe_set(&positions, &safety);
        let payloads = broadcast_payload(&states, &safe, &formation);

        let topology = match &source {
            TopologySource::Pool(pool) => pool.sample(&mut topo_rng),
            TopologySource::Fixed(g) => g,
        };
        let (zeta, weights) = match (&fixed_weights, aggregation) {
            (Some(h), Aggregation::OverTheAir) => (apply_weights(h, &payloads), h.clone()),
            (_, Aggregation::ExactMean) => (exact_mean(topology, &payloads), mean_matrix(topology)),
            (None, Aggregation::OverTheAir) => {
                let fading = sample_fading(
                    topology,
                    &mut fading_rng,
                    config.channel.fading_lower,
                    config.channel.fading_upper,
                )?;
                let aggregate = superimpose(topology, &fading, &payloads)?;
                let h = weight_matrix(topology, &fading)?;
                (aggregate.zeta, h.into_matrix())
            }
        };
        record.arc_counts.push(topology.non_self_arc_count());

        jump(&mut states, &zeta, &formation);
        record.update_times.push(t_k);
        record
            .reference_history
            .push(states.iter().map(|s| s.reference).collect());
        record.weight_history.push(weights);
        record.safe_at_update.push(safe);

        let base_index = k * steps_per;
        let mut boundary = 0usize;
        let stats = step_interval(&mut states, t_k, t_next, &params, |t, st, unsafe_now| {
            if (base_index + boundary).is_multiple_of(record_every) {
                record.sample_times.push(t);
                record
                    .positions
                    .push(st.iter().map(|s| s.position).collect());
                record
                    .references
                    .push(st.iter().map(|s| s.reference).collect());
                record.unsafe_flags.push(unsafe_now.to_vec());
            }
            boundary += 1;
        })?;
        record.min_pairwise_distance = record.min_pairwise_distance.min(stats.min_distance);

        let end_positions: Vec<Vec2> = states.iter().map(|s| s.position).collect();
        let safe_end = safe_set(&end_positions, &safety);
        record.interval_safe.push(
            (0..n)
                .map(|i| !stats.endangered[i] && safe_end.is_safe(i))
                .collect(),
        );
    }

    let duration = config.integrator.duration;
    let final_positions: Vec<Vec2> = states.iter().map(|s| s.position).collect();
    let final_safe = safe_set(&final_positions, &safety);
    record.sample_times.push(duration);
    record.positions.push(final_positions.clone());
    record
        .references
        .push(states.iter().map(|s| s.reference).collect());
    record
        .unsafe_flags
        .push((0..n).map(|i| !final_safe.is_safe(i)).collect());
    for (i, st) in states.iter().enumerate() {
        let tracking = -params.gain_a * (st.position - st.reference);
        let v = if !final_safe.is_safe(i) {
            let r = repulsion(&final_positions, i, &safety).map_err(|e| {
                let PotentialError::SafetyViolation {
                    i,
                    j,
                    distance,
                    delta_s,
                } = e;
                DynamicsError::SafetyViolation {
                    time: duration,
                    i,
                    j,
                    distance,
                    delta_s,
                }
            })?;
            r + tracking
        } else {
            tracking
        };
        record.final_speeds.push(v.norm());
    }
    Ok(record)
}
