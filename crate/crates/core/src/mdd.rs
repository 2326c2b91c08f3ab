//! Per-agent time expansion pruned by distance from the start and to the goal.
//!
//! Level `t` holds the vertices an agent can occupy at time `t` on some walk
//! of exactly `horizon` steps from its start to its goal. Arcs connect level
//! `t` to level `t + 1` along graph edges or as waits.

use std::fmt::Write as _;

use thiserror::Error;

use crate::instance::{Instance, Vertex};
use crate::pathcalc::{agent_lower_bounds, bfs_distances, DistanceField, Unreachable};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MddError {
    #[error(transparent)]
    Unreachable(#[from] Unreachable),
    #[error("cost bound {xi} is below the lower bound {lower}")]
    BelowLowerBound { xi: u64, lower: u64 },
    #[error("agent {agent} needs {distance} steps but the horizon is {horizon}")]
    Empty { agent: usize, distance: u32, horizon: usize },
}

/// Makespan that fits every plan of sum-of-costs at most `xi`, given the
/// per-agent shortest-path lengths: `max_i d_i + (xi - sum_i d_i)`.
pub fn horizon_for(lower_bounds: &[u32], xi: u64) -> Result<usize, MddError> {
    let lower: u64 = lower_bounds.iter().map(|&d| u64::from(d)).sum();
    if xi < lower {
        return Err(MddError::BelowLowerBound { xi, lower });
    }
    let longest = lower_bounds.iter().copied().max().unwrap_or(0);
    Ok(longest as usize + (xi - lower) as usize)
}

pub fn compute_horizon(instance: &Instance, xi: u64) -> Result<usize, MddError> {
    horizon_for(&agent_lower_bounds(instance)?, xi)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mdd {
    pub agent: usize,
    pub horizon: usize,
    levels: Vec<Vec<Vertex>>,
    /// `arcs[t]` holds `(u, v)` pairs from level `t` to `t + 1`, sorted.
    arcs: Vec<Vec<(Vertex, Vertex)>>,
}

impl Mdd {
    pub fn level(&self, t: usize) -> &[Vertex] {
        &self.levels[t]
    }

    pub fn levels(&self) -> &[Vec<Vertex>] {
        &self.levels
    }

    pub fn contains(&self, t: usize, v: Vertex) -> bool {
        self.levels.get(t).is_some_and(|l| l.binary_search(&v).is_ok())
    }

    pub fn arcs(&self, t: usize) -> &[(Vertex, Vertex)] {
        &self.arcs[t]
    }

    pub fn has_arc(&self, t: usize, u: Vertex, v: Vertex) -> bool {
        self.arcs.get(t).is_some_and(|a| a.binary_search(&(u, v)).is_ok())
    }

    /// Successors of `u^t` at level `t + 1`.
    pub fn successors(&self, t: usize, u: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        let arcs = &self.arcs[t];
        let lo = arcs.partition_point(|&(a, _)| a < u);
        arcs[lo..].iter().take_while(move |&&(a, _)| a == u).map(|&(_, v)| v)
    }

    /// Predecessors of `v^t` at level `t - 1`.
    pub fn predecessors(&self, t: usize, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.arcs[t - 1].iter().filter(move |&&(_, b)| b == v).map(|&(a, _)| a)
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.iter().map(Vec::len).sum()
    }

    /// Plain-text dump, one line per level: `t: v v v`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (t, level) in self.levels.iter().enumerate() {
            let _ = write!(out, "{t}:");
            for v in level {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the MDD of one agent from precomputed distance fields.
pub fn build_from_fields(
    instance: &Instance,
    agent: usize,
    from_start: &DistanceField,
    to_goal: &DistanceField,
    horizon: usize,
) -> Result<Mdd, MddError> {
    let a = instance.agents[agent];
    let distance = from_start.get(a.goal).ok_or(Unreachable { agent, start: a.start, goal: a.goal })?;
    if distance as usize > horizon {
        return Err(MddError::Empty { agent, distance, horizon });
    }
    let graph = &instance.graph;

    let within = |field: &DistanceField, v: Vertex, limit: usize| field.get(v).is_some_and(|d| d as usize <= limit);
    let mut levels: Vec<Vec<Vertex>> = (0..=horizon)
        .map(|t| {
            (0..graph.vertex_count())
                .filter(|&v| within(from_start, v, t) && within(to_goal, v, horizon - t))
                .collect()
        })
        .collect();

    let mut arcs: Vec<Vec<(Vertex, Vertex)>> = (0..horizon)
        .map(|t| {
            let next = &levels[t + 1];
            let mut out = Vec::new();
            for &u in &levels[t] {
                let moves = std::iter::once(u).chain(graph.neighbors(u).iter().copied());
                out.extend(moves.filter(|v| next.binary_search(v).is_ok()).map(|v| (u, v)));
            }
            out.sort_unstable();
            out
        })
        .collect();

    prune_dead_nodes(&mut levels, &mut arcs);
    Ok(Mdd { agent, horizon, levels, arcs })
}

/// Keeps only nodes on some level-0 to level-`horizon` path. A forward pass
/// followed by a backward pass reaches the fixpoint.
fn prune_dead_nodes(levels: &mut [Vec<Vertex>], arcs: &mut [Vec<(Vertex, Vertex)>]) {
    let horizon = arcs.len();
    for t in 0..horizon {
        let (head, tail) = levels.split_at_mut(t + 1);
        let here = &head[t];
        arcs[t].retain(|(u, _)| here.binary_search(u).is_ok());
        let mut heads: Vec<Vertex> = arcs[t].iter().map(|&(_, v)| v).collect();
        heads.sort_unstable();
        heads.dedup();
        tail[0].retain(|v| heads.binary_search(v).is_ok());
    }
    for t in (0..horizon).rev() {
        let next = &levels[t + 1];
        arcs[t].retain(|(_, v)| next.binary_search(v).is_ok());
        let arcs_t = &arcs[t];
        levels[t].retain(|u| arcs_t.binary_search_by(|&(a, _)| a.cmp(u)).is_ok());
    }
}

pub fn build_mdd(instance: &Instance, agent: usize, horizon: usize) -> Result<Mdd, MddError> {
    let a = instance.agents[agent];
    let from_start = bfs_distances(&instance.graph, a.start);
    let to_goal = bfs_distances(&instance.graph, a.goal);
    build_from_fields(instance, agent, &from_start, &to_goal, horizon)
}

/// MDDs of all agents at a shared horizon.
pub fn build_all(instance: &Instance, horizon: usize) -> Result<Vec<Mdd>, MddError> {
    (0..instance.agent_count()).map(|i| build_mdd(instance, i, horizon)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{CapacityMap, Graph};

    fn p3(pairs: &[(Vertex, Vertex)]) -> Instance {
        Instance::from_pairs(Graph::path(3), CapacityMap::uniform(3, 1), pairs).unwrap()
    }

    #[test]
    fn horizon_formula() {
        assert_eq!(horizon_for(&[2, 3], 7), Ok(5));
        assert_eq!(horizon_for(&[2, 3], 5), Ok(3));
        assert_eq!(horizon_for(&[2], 4), Ok(4));
        assert_eq!(horizon_for(&[2, 3], 4), Err(MddError::BelowLowerBound { xi: 4, lower: 5 }));
        assert_eq!(horizon_for(&[], 0), Ok(0));
        assert_eq!(compute_horizon(&p3(&[(0, 2), (2, 0)]), 6), Ok(4));
    }

    #[test]
    fn tight_horizon_is_the_shortest_path() {
        let mdd = build_mdd(&p3(&[(0, 2)]), 0, 2).unwrap();
        assert_eq!(mdd.levels(), &[vec![0], vec![1], vec![2]]);
        assert_eq!(mdd.arcs(0), &[(0, 1)]);
        assert_eq!(mdd.arcs(1), &[(1, 2)]);
    }

    #[test]
    fn one_step_of_slack() {
        let mdd = build_mdd(&p3(&[(0, 2)]), 0, 3).unwrap();
        assert_eq!(mdd.level(1), &[0, 1]);
        assert_eq!(mdd.level(2), &[1, 2]);
        assert_eq!(mdd.successors(1, 1).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(mdd.predecessors(2, 1).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn idle_agent_has_wait_arcs() {
        let mdd = build_mdd(&p3(&[(1, 1)]), 0, 2).unwrap();
        for t in 0..=2 {
            assert!(mdd.contains(t, 1));
        }
        assert!(mdd.has_arc(0, 1, 1) && mdd.has_arc(1, 1, 1));
        assert_eq!(mdd.level(1), &[0, 1, 2]);
    }

    #[test]
    fn short_horizon_is_empty() {
        assert_eq!(
            build_mdd(&p3(&[(0, 2)]), 0, 1),
            Err(MddError::Empty { agent: 0, distance: 2, horizon: 1 })
        );
    }

    #[test]
    fn dump_format() {
        let mdd = build_mdd(&p3(&[(0, 2)]), 0, 3).unwrap();
        assert_eq!(mdd.dump(), "0: 0\n1: 0 1\n2: 1 2\n3: 2\n");
    }

    /// All walks of exactly `horizon` moves/waits from start to goal.
    fn enumerate_walks(g: &Graph, start: Vertex, goal: Vertex, horizon: usize) -> Vec<Vec<Vertex>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![start]];
        while let Some(walk) = stack.pop() {
            let last = *walk.last().unwrap();
            if walk.len() == horizon + 1 {
                if last == goal {
                    out.push(walk);
                }
                continue;
            }
            for next in std::iter::once(last).chain(g.neighbors(last).iter().copied()) {
                let mut w = walk.clone();
                w.push(next);
                stack.push(w);
            }
        }
        out.sort();
        out
    }

    fn mdd_paths(mdd: &Mdd) -> Vec<Vec<Vertex>> {
        let mut out = Vec::new();
        let mut stack: Vec<Vec<Vertex>> = mdd.level(0).iter().map(|&v| vec![v]).collect();
        while let Some(p) = stack.pop() {
            let t = p.len() - 1;
            if t == mdd.horizon {
                out.push(p);
                continue;
            }
            for v in mdd.successors(t, *p.last().unwrap()) {
                let mut q = p.clone();
                q.push(v);
                stack.push(q);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn mdd_paths_equal_enumerated_walks() {
        let graphs = [
            Graph::path(4),
            Graph::cycle(5),
            Graph::star(4),
            Graph::open_grid(3, 3),
            Graph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4)]).unwrap(),
        ];
        for g in &graphs {
            let n = g.vertex_count();
            for start in 0..n {
                for goal in 0..n {
                    let inst = Instance::from_pairs(g.clone(), CapacityMap::uniform(n, 1), &[(start, goal)]).unwrap();
                    let reachable = bfs_distances(g, start).get(goal);
                    let mut previous: Option<Mdd> = None;
                    for horizon in 0..=5 {
                        match build_mdd(&inst, 0, horizon) {
                            Ok(mdd) => {
                                assert!(reachable.is_some_and(|d| d as usize <= horizon));
                                assert_eq!(mdd.level(0), &[start]);
                                assert_eq!(mdd.level(horizon), &[goal]);
                                assert_eq!(mdd_paths(&mdd), enumerate_walks(g, start, goal, horizon));
                                if let Some(prev) = &previous {
                                    for t in 0..=prev.horizon {
                                        assert!(prev.level(t).len() <= mdd.level(t).len());
                                    }
                                }
                                previous = Some(mdd);
                            }
                            Err(_) => {
                                assert!(enumerate_walks(g, start, goal, horizon).is_empty());
                            }
                        }
                    }
                }
            }
        }
    }
}
