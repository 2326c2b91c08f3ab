//! Independent plan checking and an exhaustive optimal-cost oracle for
//! small instances. Nothing here depends on the CNF encodings.

mod oracle;

pub use oracle::{brute_force_optimal, OracleLimits, OracleOutcome};

use std::fmt;

use crate::instance::{Instance, Vertex};
use crate::plan::Plan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    AgentCount { expected: usize, found: usize },
    /// Paths of different lengths.
    Ragged { agent: usize, len: usize, expected: usize },
    InvalidVertex { agent: usize, t: usize, vertex: Vertex },
    WrongStart { agent: usize, expected: Vertex, found: Vertex },
    WrongGoal { agent: usize, expected: Vertex, found: Vertex },
    NotEdge { agent: usize, t: usize, from: Vertex, to: Vertex },
    Swap { agents: (usize, usize), t: usize, from: Vertex, to: Vertex },
    OverCapacity { vertex: Vertex, t: usize, agents: Vec<usize>, capacity: u32 },
    /// Entering a vertex already filled to capacity at the same step.
    Follow { agent: usize, t: usize, from: Vertex, to: Vertex, occupants: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AgentCount { expected, found } => write!(f, "plan has {found} paths, instance has {expected} agents"),
            Violation::Ragged { agent, len, expected } => write!(f, "agent {agent}: path length {len}, expected {expected}"),
            Violation::InvalidVertex { agent, t, vertex } => write!(f, "agent {agent} at t={t}: vertex {vertex} not in graph"),
            Violation::WrongStart { agent, expected, found } => write!(f, "agent {agent} starts at {found}, expected {expected}"),
            Violation::WrongGoal { agent, expected, found } => write!(f, "agent {agent} ends at {found}, expected {expected}"),
            Violation::NotEdge { agent, t, from, to } => write!(f, "agent {agent} at t={t}: {from} -> {to} is not an edge"),
            Violation::Swap { agents: (i, j), t, from, to } => {
                write!(f, "agents {i} and {j} swap across {from}-{to} at t={t}")
            }
            Violation::OverCapacity { vertex, t, agents, capacity } => {
                write!(f, "vertex {vertex} at t={t} holds {} agents {agents:?} (capacity {capacity})", agents.len())
            }
            Violation::Follow { agent, t, from, to, occupants } => {
                write!(f, "agent {agent} at t={t} enters {to} from {from} while {occupants:?} fill it")
            }
        }
    }
}

/// All rule violations of `plan`, with following moves allowed.
pub fn validate_plan(instance: &Instance, plan: &Plan) -> Vec<Violation> {
    validate_plan_with(instance, plan, false)
}

/// All rule violations of `plan`. With `no_follow`, a move into `v` also
/// requires fewer than `c(v)` other agents at `v` before the move.
pub fn validate_plan_with(instance: &Instance, plan: &Plan, no_follow: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = instance.agent_count();
    if plan.agent_count() != k {
        out.push(Violation::AgentCount { expected: k, found: plan.agent_count() });
        return out;
    }
    if k == 0 {
        return out;
    }
    let steps = plan.steps();
    let n = instance.graph.vertex_count();
    for (agent, path) in plan.paths().iter().enumerate() {
        if path.len() != steps || path.is_empty() {
            out.push(Violation::Ragged { agent, len: path.len(), expected: steps.max(1) });
        }
        for (t, &vertex) in path.iter().enumerate() {
            if vertex >= n {
                out.push(Violation::InvalidVertex { agent, t, vertex });
            }
        }
    }
    if !out.is_empty() {
        return out;
    }

    for (agent, (path, a)) in plan.paths().iter().zip(&instance.agents).enumerate() {
        if path[0] != a.start {
            out.push(Violation::WrongStart { agent, expected: a.start, found: path[0] });
        }
        let last = path[steps - 1];
        if last != a.goal {
            out.push(Violation::WrongGoal { agent, expected: a.goal, found: last });
        }
        for t in 0..steps - 1 {
            let (from, to) = (path[t], path[t + 1]);
            if from != to && !instance.graph.has_edge(from, to) {
                out.push(Violation::NotEdge { agent, t, from, to });
            }
        }
    }

    let mut occupants: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in 0..steps {
        for list in &mut occupants {
            list.clear();
        }
        for (agent, path) in plan.paths().iter().enumerate() {
            occupants[path[t]].push(agent);
        }
        for (vertex, list) in occupants.iter().enumerate() {
            let capacity = instance.capacity(vertex);
            if list.len() > capacity as usize {
                out.push(Violation::OverCapacity { vertex, t, agents: list.clone(), capacity });
            }
        }
        if t + 1 == steps {
            break;
        }
        for (i, pi) in plan.paths().iter().enumerate() {
            let (from, to) = (pi[t], pi[t + 1]);
            if from == to {
                continue;
            }
            for (j, pj) in plan.paths().iter().enumerate().skip(i + 1) {
                if pj[t] == to && pj[t + 1] == from {
                    out.push(Violation::Swap { agents: (i, j), t, from, to });
                }
            }
            if no_follow {
                let others: Vec<usize> = occupants[to].iter().copied().filter(|&j| j != i).collect();
                if others.len() >= instance.capacity(to) as usize {
                    out.push(Violation::Follow { agent: i, t, from, to, occupants: others });
                }
            }
        }
    }
    out
}

/// Sum over agents of the time of final arrival at the goal.
pub fn sum_of_costs(plan: &Plan) -> u64 {
    plan.sum_of_costs()
}
