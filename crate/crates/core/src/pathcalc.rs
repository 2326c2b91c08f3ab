//! Unweighted shortest-path distances and the sum-of-costs lower bound.

use std::collections::VecDeque;

use thiserror::Error;

use crate::instance::{Graph, Instance, Vertex};

/// Distance from a source vertex; `None` marks an unreachable vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    pub source: Vertex,
    dist: Vec<Option<u32>>,
}

impl DistanceField {
    pub fn get(&self, v: Vertex) -> Option<u32> {
        self.dist[v]
    }

    pub fn as_slice(&self) -> &[Option<u32>] {
        &self.dist
    }
}

pub fn bfs_distances(graph: &Graph, source: Vertex) -> DistanceField {
    let mut dist = vec![None; graph.vertex_count()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let next = dist[u].map(|d| d + 1);
        for &w in graph.neighbors(u) {
            if dist[w].is_none() {
                dist[w] = next;
                queue.push_back(w);
            }
        }
    }
    DistanceField { source, dist }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("agent {agent} cannot reach goal {goal} from {start}")]
pub struct Unreachable {
    pub agent: usize,
    pub start: Vertex,
    pub goal: Vertex,
}

/// Shortest-path length of every agent.
pub fn agent_lower_bounds(instance: &Instance) -> Result<Vec<u32>, Unreachable> {
    instance
        .agents
        .iter()
        .map(|a| {
            bfs_distances(&instance.graph, a.start)
                .get(a.goal)
                .ok_or(Unreachable { agent: a.id, start: a.start, goal: a.goal })
        })
        .collect()
}

/// Sum of individual shortest-path lengths.
pub fn cost_lower_bound(instance: &Instance) -> Result<u64, Unreachable> {
    Ok(agent_lower_bounds(instance)?.iter().map(|&d| u64::from(d)).sum())
}
