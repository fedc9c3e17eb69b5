//! Directed communication topologies and the pool an update step samples
//! from. An arc `(i, j)` means agent `i`'s signal reaches agent `j`; agent
//! `i` always hears itself, so the self-loop `(i, i)` is stored explicitly.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("arc ({0}, {1}) references an agent outside 0..{2}")]
    ArcOutOfRange(usize, usize, usize),
    #[error("a topology needs at least one agent")]
    NoAgents,
    #[error("topology pool is empty")]
    EmptyPool,
    #[error("pool mixes sizes: topology {index} has {found} agents, expected {expected}")]
    MixedSizes {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("topology {index} in pool is not strongly connected")]
    NotStronglyConnected { index: usize },
    #[error("arc density must lie in [0, 1], got {0}")]
    InvalidDensity(f64),
}

/// A communication topology over `n` agents, stored as sorted in-neighbor
/// lists. `in_neighbors(i)` always contains `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommTopology {
    n: usize,
    in_neighbors: Vec<Vec<usize>>,
}

impl CommTopology {
    /// Build from directed arcs `(source, destination)`. Self-loops are added
    /// for every agent whether or not they appear in `arcs`; duplicates are
    /// collapsed.
    pub fn new(n: usize, arcs: &[(usize, usize)]) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::NoAgents);
        }
        let mut sets: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
        for &(src, dst) in arcs {
            if src >= n || dst >= n {
                return Err(TopologyError::ArcOutOfRange(src, dst, n));
            }
            sets[dst].insert(src);
        }
        Ok(CommTopology {
            n,
            in_neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    /// Every agent hears every other agent.
    pub fn complete(n: usize) -> Self {
        let all: Vec<usize> = (0..n).collect();
        CommTopology {
            n,
            in_neighbors: vec![all; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Agents whose signal reaches `i`, sorted ascending, including `i`.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    /// Number of arcs excluding the mandatory self-loops.
    pub fn non_self_arc_count(&self) -> usize {
        self.in_neighbors.iter().map(|nb| nb.len() - 1).sum()
    }

    /// All arcs `(source, destination)` including self-loops.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (dst, nbs) in self.in_neighbors.iter().enumerate() {
            for &src in nbs {
                out.push((src, dst));
            }
        }
        out
    }

    /// True iff every agent can reach every other agent along arcs.
    pub fn is_strongly_connected(&self) -> bool {
        // Reachability from node 0 along reversed arcs (we store in-lists)
        // and along forward arcs covers all of strong connectivity.
        let reverse_ok = reach_all(self.n, |dst| self.in_neighbors[dst].iter().copied());
        if !reverse_ok {
            return false;
        }
        let mut out_adj: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for (dst, nbs) in self.in_neighbors.iter().enumerate() {
            for &src in nbs {
                out_adj[src].push(dst);
            }
        }
        reach_all(self.n, |src| out_adj[src].iter().copied())
    }
}

/// BFS from node 0; true iff all `n` nodes are visited.
fn reach_all<I>(n: usize, neighbors: impl Fn(usize) -> I) -> bool
where
    I: Iterator<Item = usize>,
{
    let mut seen = vec![false; n];
    let mut queue = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop() {
        for w in neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push(w);
            }
        }
    }
    count == n
}

/// A fixed collection of strongly connected topologies over the same agents;
/// each update step draws one uniformly at random.
#[derive(Debug, Clone)]
pub struct TopologyPool {
    topologies: Vec<CommTopology>,
}

impl TopologyPool {
    pub fn new(topologies: Vec<CommTopology>) -> Result<Self, TopologyError> {
        let first = topologies.first().ok_or(TopologyError::EmptyPool)?;
        let expected = first.n();
        for (index, t) in topologies.iter().enumerate() {
            if t.n() != expected {
                return Err(TopologyError::MixedSizes {
                    index,
                    found: t.n(),
                    expected,
                });
            }
            if !t.is_strongly_connected() {
                return Err(TopologyError::NotStronglyConnected { index });
            }
        }
        Ok(TopologyPool { topologies })
    }

    /// Generate `pool_size` random topologies. Each starts from a random
    /// Hamiltonian cycle (guaranteeing strong connectivity), then every other
    /// ordered pair is added independently with probability `density`.
    pub fn generate<R: Rng>(
        n: usize,
        pool_size: usize,
        density: f64,
        rng: &mut R,
    ) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::NoAgents);
        }
        if pool_size == 0 {
            return Err(TopologyError::EmptyPool);
        }
        if !(0.0..=1.0).contains(&density) {
            return Err(TopologyError::InvalidDensity(density));
        }
        let mut topologies = Vec::with_capacity(pool_size);
        for _ in 0..pool_size {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let mut arcs = BTreeSet::new();
            for i in 0..n {
                let src = order[i];
                let dst = order[(i + 1) % n];
                if src != dst {
                    arcs.insert((src, dst));
                }
            }
            for src in 0..n {
                for dst in 0..n {
                    if src != dst && !arcs.contains(&(src, dst)) && rng.gen_bool(density) {
                        arcs.insert((src, dst));
                    }
                }
            }
            let arcs: Vec<(usize, usize)> = arcs.into_iter().collect();
            topologies.push(CommTopology::new(n, &arcs)?);
        }
        Ok(TopologyPool { topologies })
    }

    pub fn len(&self) -> usize {
        self.topologies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topologies.is_empty()
    }

    pub fn get(&self, index: usize) -> &CommTopology {
        &self.topologies[index]
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> &CommTopology {
        &self.topologies[rng.gen_range(0..self.topologies.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn in_neighbors_follow_arc_direction() {
        let t = CommTopology::new(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(t.in_neighbors(0), &[0, 2]);
        assert_eq!(t.in_neighbors(1), &[0, 1]);
        assert_eq!(t.in_neighbors(2), &[1, 2]);
    }

    #[test]
    fn self_loops_always_present() {
        let t = CommTopology::new(2, &[]).unwrap();
        assert_eq!(t.in_neighbors(0), &[0]);
        assert_eq!(t.in_neighbors(1), &[1]);
        assert_eq!(t.non_self_arc_count(), 0);
    }

    #[test]
    fn duplicate_and_self_arcs_collapse() {
        let t = CommTopology::new(2, &[(0, 1), (0, 1), (1, 1)]).unwrap();
        assert_eq!(t.in_neighbors(1), &[0, 1]);
        assert_eq!(t.non_self_arc_count(), 1);
    }

    #[test]
    fn out_of_range_arc_rejected() {
        assert_eq!(
            CommTopology::new(2, &[(0, 2)]),
            Err(TopologyError::ArcOutOfRange(0, 2, 2))
        );
    }

    #[test]
    fn complete_six_has_thirty_non_self_arcs() {
        assert_eq!(CommTopology::complete(6).non_self_arc_count(), 30);
    }

    #[test]
    fn cycle_is_strongly_connected_chain_is_not() {
        let cycle = CommTopology::new(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(cycle.is_strongly_connected());
        let chain = CommTopology::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(!chain.is_strongly_connected());
    }

    #[test]
    fn singleton_is_strongly_connected() {
        assert!(CommTopology::new(1, &[]).unwrap().is_strongly_connected());
    }

    /// Warshall closure over the arc set (self-loops ignored): strongly
    /// connected iff every ordered pair is mutually reachable.
    fn strongly_connected_oracle(n: usize, arcs: &[(usize, usize)]) -> bool {
        let mut reach = vec![vec![false; n]; n];
        for i in 0..n {
            reach[i][i] = true;
        }
        for &(s, d) in arcs {
            reach[s][d] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        reach.iter().all(|row| row.iter().all(|&r| r))
    }

    fn non_self_pairs(n: usize) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    #[test]
    fn connectivity_matches_oracle_exhaustively_up_to_four_agents() {
        for n in 1..=4usize {
            let pairs = non_self_pairs(n);
            for mask in 0u32..(1 << pairs.len()) {
                let arcs: Vec<(usize, usize)> = pairs
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask & (1 << b) != 0)
                    .map(|(_, &p)| p)
                    .collect();
                let t = CommTopology::new(n, &arcs).unwrap();
                assert_eq!(
                    t.is_strongly_connected(),
                    strongly_connected_oracle(n, &arcs),
                    "n={n} arcs={arcs:?}"
                );
            }
        }
    }

    #[test]
    fn connectivity_matches_oracle_on_random_six_agent_graphs() {
        let mut rng = stream_rng(99, "topology-test");
        let pairs = non_self_pairs(6);
        for _ in 0..2000 {
            let arcs: Vec<(usize, usize)> = pairs
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.25))
                .collect();
            let t = CommTopology::new(6, &arcs).unwrap();
            assert_eq!(
                t.is_strongly_connected(),
                strongly_connected_oracle(6, &arcs)
            );
        }
    }

    #[test]
    fn pool_rejects_disconnected_member() {
        let chain = CommTopology::new(3, &[(0, 1), (1, 2)]).unwrap();
        let err = TopologyPool::new(vec![chain]).unwrap_err();
        assert_eq!(err, TopologyError::NotStronglyConnected { index: 0 });
    }

    #[test]
    fn pool_rejects_mixed_sizes() {
        let a = CommTopology::complete(3);
        let b = CommTopology::complete(4);
        let err = TopologyPool::new(vec![a, b]).unwrap_err();
        assert_eq!(
            err,
            TopologyError::MixedSizes {
                index: 1,
                found: 4,
                expected: 3
            }
        );
    }

    #[test]
    fn generated_pools_are_strongly_connected() {
        let mut rng = stream_rng(42, "topology");
        for &density in &[0.0, 0.3, 1.0] {
            let pool = TopologyPool::generate(6, 5, density, &mut rng).unwrap();
            assert_eq!(pool.len(), 5);
            for i in 0..pool.len() {
                let t = pool.get(i);
                assert!(t.is_strongly_connected());
                for agent in 0..6 {
                    assert!(t.in_neighbors(agent).contains(&agent));
                }
            }
        }
    }

    #[test]
    fn density_extremes_pin_arc_counts() {
        let mut rng = stream_rng(42, "topology");
        let sparse = TopologyPool::generate(6, 3, 0.0, &mut rng).unwrap();
        for i in 0..sparse.len() {
            // Just the Hamiltonian cycle.
            assert_eq!(sparse.get(i).non_self_arc_count(), 6);
        }
        let dense = TopologyPool::generate(6, 3, 1.0, &mut rng).unwrap();
        for i in 0..dense.len() {
            assert_eq!(dense.get(i).non_self_arc_count(), 30);
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = TopologyPool::generate(5, 4, 0.4, &mut stream_rng(7, "topology")).unwrap();
        let b = TopologyPool::generate(5, 4, 0.4, &mut stream_rng(7, "topology")).unwrap();
        for i in 0..a.len() {
            assert_eq!(a.get(i), b.get(i));
        }
    }

    #[test]
    fn sampling_is_uniform_enough() {
        let pool = TopologyPool::new(vec![
            CommTopology::complete(3),
            CommTopology::new(3, &[(0, 1), (1, 2), (2, 0)]).unwrap(),
        ])
        .unwrap();
        let mut rng = stream_rng(11, "topology");
        let mut hits = [0usize; 2];
        for _ in 0..1000 {
            let t = pool.sample(&mut rng);
            if t == pool.get(0) {
                hits[0] += 1;
            } else {
                hits[1] += 1;
            }
        }
        assert!(hits[0] > 400 && hits[1] > 400, "hits={hits:?}");
    }

    #[test]
    fn singleton_pool_generation_works() {
        let mut rng = stream_rng(1, "topology");
        let pool = TopologyPool::generate(1, 2, 0.5, &mut rng).unwrap();
        assert_eq!(pool.get(0).in_neighbors(0), &[0]);
    }
}
