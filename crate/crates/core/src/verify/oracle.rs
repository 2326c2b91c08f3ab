//! Best-first search over joint configurations.
//!
//! A state is the vector of agent positions plus the set of agents that have
//! settled for good at their goals. Each joint step costs the number of
//! unsettled agents, so the cost of a path to the all-settled state equals
//! the sum of settle times. The search is exhaustive, so an empty frontier
//! proves the instance unsolvable.

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};

use crate::instance::{Instance, Vertex};
use crate::pathcalc::bfs_distances;
use crate::plan::Plan;

const MAX_AGENTS: usize = 6;
const MAX_VERTICES: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_states: usize,
    pub no_follow: bool,
}

impl Default for OracleLimits {
    fn default() -> OracleLimits {
        OracleLimits { max_states: 2_000_000, no_follow: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOutcome {
    Optimal { cost: u64, plan: Plan },
    Unsolvable,
    /// The state budget ran out before the search finished.
    Exceeded { states: usize },
    /// The instance is too large for the packed state representation.
    Unsupported { reason: String },
}

impl OracleOutcome {
    pub fn cost(&self) -> Option<u64> {
        match self {
            OracleOutcome::Optimal { cost, .. } => Some(*cost),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct State {
    positions: u64,
    done: u8,
}

fn pack(positions: &[Vertex]) -> u64 {
    positions.iter().rev().fold(0, |acc, &v| (acc << 8) | v as u64)
}

fn unpack(packed: u64, k: usize) -> Vec<Vertex> {
    (0..k).map(|i| ((packed >> (8 * i)) & 0xff) as Vertex).collect()
}

struct Node {
    cost: u64,
    parent: Option<State>,
    closed: bool,
}

/// Minimum sum-of-costs of `instance` by exhaustive search.
pub fn brute_force_optimal(instance: &Instance, limits: OracleLimits) -> OracleOutcome {
    let k = instance.agent_count();
    let n = instance.graph.vertex_count();
    if k > MAX_AGENTS || n > MAX_VERTICES {
        return OracleOutcome::Unsupported {
            reason: format!("{k} agents on {n} vertices exceeds {MAX_AGENTS} agents or {MAX_VERTICES} vertices"),
        };
    }
    let to_goal: Vec<_> = instance.agents.iter().map(|a| bfs_distances(&instance.graph, a.goal)).collect();
    if instance.agents.iter().zip(&to_goal).any(|(a, f)| f.get(a.start).is_none()) {
        return OracleOutcome::Unsolvable;
    }
    let goals: Vec<Vertex> = instance.agents.iter().map(|a| a.goal).collect();
    let all_done: u8 = if k == 0 { 0 } else { ((1u16 << k) - 1) as u8 };
    let heuristic = |positions: &[Vertex], done: u8| -> u64 {
        (0..k).filter(|&i| done & (1 << i) == 0).map(|i| u64::from(to_goal[i].get(positions[i]).unwrap_or(0))).sum()
    };

    let start_positions: Vec<Vertex> = instance.agents.iter().map(|a| a.start).collect();
    let start = State { positions: pack(&start_positions), done: 0 };
    let mut nodes: HashMap<State, Node> = HashMap::new();
    nodes.insert(start, Node { cost: 0, parent: None, closed: false });
    let mut frontier = BinaryHeap::new();
    frontier.push(Reverse((heuristic(&start_positions, 0), 0u64, start)));

    let mut successors = Vec::new();
    while let Some(Reverse((_, cost, state))) = frontier.pop() {
        let node = nodes.get_mut(&state).expect("queued states are recorded");
        if node.closed || node.cost < cost {
            continue;
        }
        node.closed = true;
        if state.done == all_done {
            return OracleOutcome::Optimal { cost, plan: reconstruct(&nodes, state, k) };
        }
        if nodes.len() > limits.max_states {
            return OracleOutcome::Exceeded { states: nodes.len() };
        }

        let positions = unpack(state.positions, k);
        successors.clear();
        // Settling is free and does not advance time.
        for i in 0..k {
            if state.done & (1 << i) == 0 && positions[i] == goals[i] {
                successors.push((State { positions: state.positions, done: state.done | (1 << i) }, 0));
            }
        }
        let step_cost = (k - state.done.count_ones() as usize) as u64;
        joint_moves(instance, &positions, state.done, limits.no_follow, &mut |next| {
            successors.push((State { positions: pack(next), done: state.done }, step_cost));
        });

        for &(next, step) in &successors {
            let next_cost = cost + step;
            let improved = match nodes.entry(next) {
                Entry::Vacant(slot) => {
                    slot.insert(Node { cost: next_cost, parent: Some(state), closed: false });
                    true
                }
                Entry::Occupied(mut slot) => {
                    let existing = slot.get_mut();
                    if !existing.closed && next_cost < existing.cost {
                        existing.cost = next_cost;
                        existing.parent = Some(state);
                        true
                    } else {
                        false
                    }
                }
            };
            if improved {
                let h = heuristic(&unpack(next.positions, k), next.done);
                frontier.push(Reverse((next_cost + h, next_cost, next)));
            }
        }
    }
    OracleOutcome::Unsolvable
}

/// Calls `emit` with every legal next configuration. Settled agents wait.
fn joint_moves(instance: &Instance, positions: &[Vertex], done: u8, no_follow: bool, emit: &mut dyn FnMut(&[Vertex])) {
    let k = positions.len();
    let n = instance.graph.vertex_count();
    let mut before = vec![0usize; n];
    for &p in positions {
        before[p] += 1;
    }
    let mut after = vec![0usize; n];
    let mut next = positions.to_vec();
    for i in 0..k {
        if done & (1 << i) != 0 {
            after[positions[i]] += 1;
        }
    }

    struct Ctx<'a> {
        instance: &'a Instance,
        positions: &'a [Vertex],
        done: u8,
        no_follow: bool,
        before: Vec<usize>,
    }

    fn assign(ctx: &Ctx<'_>, i: usize, next: &mut Vec<Vertex>, after: &mut Vec<usize>, emit: &mut dyn FnMut(&[Vertex])) {
        if i == ctx.positions.len() {
            emit(next);
            return;
        }
        if ctx.done & (1 << i) != 0 {
            next[i] = ctx.positions[i];
            assign(ctx, i + 1, next, after, emit);
            return;
        }
        let from = ctx.positions[i];
        let targets = std::iter::once(from).chain(ctx.instance.graph.neighbors(from).iter().copied());
        for to in targets {
            let capacity = ctx.instance.capacity(to) as usize;
            if after[to] >= capacity {
                continue;
            }
            if to != from {
                if ctx.no_follow && ctx.before[to] >= capacity {
                    continue;
                }
                // Swap with an agent assigned earlier; later ones check against us.
                if (0..i).any(|j| ctx.positions[j] == to && next[j] == from) {
                    continue;
                }
            }
            next[i] = to;
            after[to] += 1;
            assign(ctx, i + 1, next, after, emit);
            after[to] -= 1;
        }
        next[i] = from;
    }

    let ctx = Ctx { instance, positions, done, no_follow, before };
    assign(&ctx, 0, &mut next, &mut after, emit);
}

fn reconstruct(nodes: &HashMap<State, Node>, goal: State, k: usize) -> Plan {
    let mut configs = Vec::new();
    let mut current = Some(goal);
    while let Some(state) = current {
        let parent = nodes[&state].parent;
        // Settling edges keep positions; record one configuration per time step.
        if parent.is_none_or(|p| p.positions != state.positions || p.done == state.done) {
            configs.push(unpack(state.positions, k));
        }
        current = parent;
    }
    configs.reverse();
    Plan::new((0..k).map(|i| configs.iter().map(|c| c[i]).collect()).collect())
}
