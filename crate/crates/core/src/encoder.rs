//! Translation of an instance and a sum-of-costs bound into CNF.
//!
//! Both encodings share the per-agent path constraints over the MDDs and
//! the sum-of-costs accounting. The complete encoding adds swap prohibition
//! and a cardinality constraint per vertex and time step; the basic
//! encoding adds only clauses for conflicts collected so far.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::cnf::{CnfFormula, VarKey};
use crate::instance::{Instance, Vertex};
use crate::lit::Lit;
use crate::mdd::{build_from_fields, horizon_for, Mdd, MddError};
use crate::pathcalc::{bfs_distances, Unreachable};
use crate::plan::Plan;
use crate::solvers::Conflict;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingMode {
    Complete,
    Basic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeOptions {
    /// Forbid entering a vertex whose occupancy at the current step already
    /// fills its capacity, even when the occupants are leaving.
    pub no_follow: bool,
}

#[derive(Debug, Clone)]
pub struct EncodingArtifacts {
    pub formula: CnfFormula,
    pub mdds: Vec<Mdd>,
    pub horizon: usize,
    pub xi: u64,
    /// Cost slack `xi - lower bound`.
    pub delta: u64,
    pub mode: EncodingMode,
    pub options: EncodeOptions,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error(transparent)]
    Unreachable(#[from] Unreachable),
    #[error("cost bound {xi} is below the lower bound {lower}")]
    BelowLowerBound { xi: u64, lower: u64 },
    /// Some agent cannot reach its goal within the horizon: unsatisfiable at this bound.
    #[error("agent {agent} cannot reach its goal within {horizon} steps")]
    EmptyMdd { agent: usize, horizon: usize },
}

impl From<MddError> for EncodeError {
    fn from(e: MddError) -> EncodeError {
        match e {
            MddError::Unreachable(u) => EncodeError::Unreachable(u),
            MddError::BelowLowerBound { xi, lower } => EncodeError::BelowLowerBound { xi, lower },
            MddError::Empty { agent, horizon, .. } => EncodeError::EmptyMdd { agent, horizon },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("agent {agent} occupies {count} vertices at time {t}")]
pub struct ExtractError {
    pub agent: usize,
    pub t: usize,
    pub count: usize,
}

pub fn vertex_key(agent: usize, vertex: Vertex, t: usize) -> VarKey {
    VarKey::Vertex { agent, vertex, t }
}

pub fn edge_key(agent: usize, from: Vertex, to: Vertex, t: usize) -> VarKey {
    VarKey::Edge { agent, from, to, t }
}

fn settled_key(agent: usize, t: usize) -> VarKey {
    VarKey::Aux { tag: "settled".into(), indices: vec![agent, t] }
}

/// Complete model: satisfiable iff a plan with sum-of-costs at most `xi` exists.
pub fn encode_complete(instance: &Instance, xi: u64, options: EncodeOptions) -> Result<EncodingArtifacts, EncodeError> {
    encode(instance, xi, EncodingMode::Complete, &[], options)
}

/// Relaxed model without inter-agent constraints, plus one clause per conflict.
pub fn encode_basic(
    instance: &Instance,
    xi: u64,
    conflicts: &[Conflict],
    options: EncodeOptions,
) -> Result<EncodingArtifacts, EncodeError> {
    encode(instance, xi, EncodingMode::Basic, conflicts, options)
}

fn encode(
    instance: &Instance,
    xi: u64,
    mode: EncodingMode,
    conflicts: &[Conflict],
    options: EncodeOptions,
) -> Result<EncodingArtifacts, EncodeError> {
    let mut lower_bounds = Vec::with_capacity(instance.agent_count());
    let mut fields = Vec::with_capacity(instance.agent_count());
    for a in &instance.agents {
        let from_start = bfs_distances(&instance.graph, a.start);
        let d = from_start.get(a.goal).ok_or(Unreachable { agent: a.id, start: a.start, goal: a.goal })?;
        lower_bounds.push(d);
        fields.push((from_start, bfs_distances(&instance.graph, a.goal)));
    }
    let horizon = horizon_for(&lower_bounds, xi)?;
    let lower: u64 = lower_bounds.iter().map(|&d| u64::from(d)).sum();
    let mdds = fields
        .iter()
        .enumerate()
        .map(|(i, (s, g))| build_from_fields(instance, i, s, g, horizon))
        .collect::<Result<Vec<_>, _>>()?;

    let mut formula = CnfFormula::new();
    for mdd in &mdds {
        allocate_agent(&mut formula, mdd);
    }
    for (mdd, a) in mdds.iter().zip(&instance.agents) {
        encode_paths(&mut formula, mdd, a.start, a.goal);
    }
    encode_cost_bound(&mut formula, instance, &mdds, &lower_bounds, xi - lower);

    match mode {
        EncodingMode::Complete => {
            encode_swaps(&mut formula, &mdds);
            encode_capacities(&mut formula, instance, &mdds);
            if options.no_follow {
                encode_no_follow(&mut formula, instance, &mdds);
            }
        }
        EncodingMode::Basic => {
            for conflict in conflicts {
                if let Some(clause) = conflict_clause(&formula, conflict) {
                    formula.add_clause(clause);
                }
            }
        }
    }

    Ok(EncodingArtifacts { formula, mdds, horizon, xi, delta: xi - lower, mode, options })
}

fn allocate_agent(formula: &mut CnfFormula, mdd: &Mdd) {
    let agent = mdd.agent;
    for t in 0..=mdd.horizon {
        for &v in mdd.level(t) {
            formula.allocate(vertex_key(agent, v, t));
        }
    }
    for t in 0..mdd.horizon {
        for &(u, v) in mdd.arcs(t) {
            formula.allocate(edge_key(agent, u, v, t));
        }
    }
}

fn x(formula: &CnfFormula, agent: usize, v: Vertex, t: usize) -> Lit {
    formula.lookup(&vertex_key(agent, v, t)).expect("vertex variable allocated").pos()
}

fn e(formula: &CnfFormula, agent: usize, u: Vertex, v: Vertex, t: usize) -> Lit {
    formula.lookup(&edge_key(agent, u, v, t)).expect("edge variable allocated").pos()
}

/// Endpoints, leave-through-exactly-one-arc, arrive-through-an-arc, and arc
/// endpoint consistency.
fn encode_paths(formula: &mut CnfFormula, mdd: &Mdd, start: Vertex, goal: Vertex) {
    let agent = mdd.agent;
    let horizon = mdd.horizon;
    formula.add_clause(vec![x(formula, agent, start, 0)]);
    formula.add_clause(vec![x(formula, agent, goal, horizon)]);

    for t in 0..horizon {
        let mut incoming: BTreeMap<Vertex, Vec<Lit>> = BTreeMap::new();
        for &u in mdd.level(t) {
            let out: Vec<Lit> = mdd.successors(t, u).map(|v| e(formula, agent, u, v, t)).collect();
            let mut clause = vec![!x(formula, agent, u, t)];
            clause.extend_from_slice(&out);
            formula.add_clause(clause);
            formula.at_most_one_pairwise(&out);
            for v in mdd.successors(t, u) {
                let edge = e(formula, agent, u, v, t);
                incoming.entry(v).or_default().push(edge);
                formula.add_clause(vec![!edge, x(formula, agent, u, t)]);
                formula.add_clause(vec![!edge, x(formula, agent, v, t + 1)]);
            }
        }
        for (v, edges) in incoming {
            let mut clause = vec![!x(formula, agent, v, t + 1)];
            clause.extend(edges);
            formula.add_clause(clause);
        }
    }
}

/// Settled indicators `S_i^t` (agent stays at its goal from `t` on) for
/// `t >= d_i`, and at most `delta` unsettled agent-steps past the lower bounds.
fn encode_cost_bound(formula: &mut CnfFormula, instance: &Instance, mdds: &[Mdd], lower_bounds: &[u32], delta: u64) {
    let mut unsettled = Vec::new();
    for (mdd, a) in mdds.iter().zip(&instance.agents) {
        let agent = mdd.agent;
        let first = lower_bounds[agent] as usize;
        let settled: Vec<Lit> = (first..=mdd.horizon).map(|t| formula.allocate(settled_key(agent, t)).pos()).collect();
        for (offset, &s) in settled.iter().enumerate() {
            let t = first + offset;
            formula.add_clause(vec![!s, x(formula, agent, a.goal, t)]);
            if let Some(&next) = settled.get(offset + 1) {
                formula.add_clause(vec![!s, next]);
                unsettled.push(!s);
            }
        }
        formula.add_clause(vec![*settled.last().expect("settled range is non-empty")]);
    }
    formula.at_most_k(&unsettled, usize::try_from(delta).unwrap_or(usize::MAX));
}

/// Directed arc `(t, u, v)` with `u != v` to the agents whose MDD contains it.
fn move_index(mdds: &[Mdd]) -> HashMap<(usize, Vertex, Vertex), Vec<usize>> {
    let mut index: HashMap<(usize, Vertex, Vertex), Vec<usize>> = HashMap::new();
    for mdd in mdds {
        for t in 0..mdd.horizon {
            for &(u, v) in mdd.arcs(t) {
                if u != v {
                    index.entry((t, u, v)).or_default().push(mdd.agent);
                }
            }
        }
    }
    index
}

fn encode_swaps(formula: &mut CnfFormula, mdds: &[Mdd]) {
    let index = move_index(mdds);
    let mut keys: Vec<_> = index.keys().filter(|(_, u, v)| u < v).copied().collect();
    keys.sort_unstable();
    for (t, u, v) in keys {
        let Some(backward) = index.get(&(t, v, u)) else { continue };
        for &i in &index[&(t, u, v)] {
            for &j in backward {
                if i != j {
                    formula.add_clause(vec![!e(formula, i, u, v, t), !e(formula, j, v, u, t)]);
                }
            }
        }
    }
}

/// Occupancy literals per `(t, v)` in deterministic order.
fn occupancy(formula: &CnfFormula, mdds: &[Mdd]) -> BTreeMap<(usize, Vertex), Vec<(usize, Lit)>> {
    let mut occ: BTreeMap<(usize, Vertex), Vec<(usize, Lit)>> = BTreeMap::new();
    for mdd in mdds {
        for t in 0..=mdd.horizon {
            for &v in mdd.level(t) {
                occ.entry((t, v)).or_default().push((mdd.agent, x(formula, mdd.agent, v, t)));
            }
        }
    }
    occ
}

fn encode_capacities(formula: &mut CnfFormula, instance: &Instance, mdds: &[Mdd]) {
    for ((_, v), agents) in occupancy(formula, mdds) {
        let lits: Vec<Lit> = agents.into_iter().map(|(_, l)| l).collect();
        match instance.capacity(v) {
            1 => formula.at_most_one_pairwise(&lits),
            c => formula.at_most_k(&lits, c as usize),
        }
    }
}

/// `E_i(u, v, t)` implies at most `c(v) - 1` other agents at `v` at time `t`,
/// encoded as at most `c(v)` of the arc and the other occupants.
fn encode_no_follow(formula: &mut CnfFormula, instance: &Instance, mdds: &[Mdd]) {
    let occ = occupancy(formula, mdds);
    for mdd in mdds {
        for t in 0..mdd.horizon {
            for &(u, v) in mdd.arcs(t) {
                if u == v {
                    continue;
                }
                let capacity = instance.capacity(v) as usize;
                let mut lits = vec![e(formula, mdd.agent, u, v, t)];
                if let Some(others) = occ.get(&(t, v)) {
                    lits.extend(others.iter().filter(|(a, _)| *a != mdd.agent).map(|&(_, l)| l));
                }
                if lits.len() > capacity {
                    formula.at_most_k(&lits, capacity);
                }
            }
        }
    }
}

/// Clause forbidding `conflict`, or `None` when one of its variables is not
/// in the formula (the conflict cannot recur at this horizon).
pub fn conflict_clause(formula: &CnfFormula, conflict: &Conflict) -> Option<Vec<Lit>> {
    let neg = |key: VarKey| formula.lookup(&key).map(|v| v.neg());
    match conflict {
        Conflict::Capacity { agents, vertex, t } => agents.iter().map(|&a| neg(vertex_key(a, *vertex, *t))).collect(),
        Conflict::Swap { agents: (i, j), from, to, t } => {
            Some(vec![neg(edge_key(*i, *from, *to, *t))?, neg(edge_key(*j, *to, *from, *t))?])
        }
        Conflict::Follow { agent, from, to, t, occupants } => {
            let mut clause = vec![neg(edge_key(*agent, *from, *to, *t))?];
            for &o in occupants {
                clause.push(neg(vertex_key(o, *to, *t))?);
            }
            Some(clause)
        }
    }
}

/// Reads each agent's unique occupied vertex per level off a model.
pub fn extract_plan(artifacts: &EncodingArtifacts, model: &[bool]) -> Result<Plan, ExtractError> {
    let formula = &artifacts.formula;
    let paths = artifacts
        .mdds
        .iter()
        .map(|mdd| {
            (0..=mdd.horizon)
                .map(|t| {
                    let mut occupied = mdd.level(t).iter().copied().filter(|&v| x(formula, mdd.agent, v, t).eval(model));
                    match (occupied.next(), occupied.next()) {
                        (Some(v), None) => Ok(v),
                        _ => Err(ExtractError {
                            agent: mdd.agent,
                            t,
                            count: mdd.level(t).iter().filter(|&&v| x(formula, mdd.agent, v, t).eval(model)).count(),
                        }),
                    }
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Plan::new(paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{CapacityMap, Graph};
    use crate::satcore::{solve_formula, Budget, SatResult};
    use crate::verify::validate_plan;

    fn p3(pairs: &[(Vertex, Vertex)], caps: CapacityMap) -> Instance {
        Instance::from_pairs(Graph::path(3), caps, pairs).unwrap()
    }

    fn solve(art: &EncodingArtifacts) -> Option<Vec<bool>> {
        match solve_formula(&art.formula, Budget::unlimited()) {
            SatResult::Sat(m) => Some(m),
            SatResult::Unsat => None,
            SatResult::Unknown => unreachable!(),
        }
    }

    #[test]
    fn lone_agent_shortest_path() {
        let inst = p3(&[(0, 2)], CapacityMap::uniform(3, 1));
        let art = encode_complete(&inst, 2, EncodeOptions::default()).unwrap();
        let model = solve(&art).expect("satisfiable");
        assert_eq!(extract_plan(&art, &model).unwrap().paths(), &[vec![0, 1, 2]]);
    }

    #[test]
    fn idle_agent_stays_put() {
        let inst = p3(&[(1, 1)], CapacityMap::uniform(3, 1));
        let art = encode_complete(&inst, 0, EncodeOptions::default()).unwrap();
        let model = solve(&art).unwrap();
        assert_eq!(extract_plan(&art, &model).unwrap().paths(), &[vec![1]]);
    }

    #[test]
    fn swap_on_path_is_unsat_at_unit_capacity() {
        let inst = p3(&[(0, 2), (2, 0)], CapacityMap::uniform(3, 1));
        for xi in 4..=8 {
            assert!(solve(&encode_complete(&inst, xi, EncodeOptions::default()).unwrap()).is_none(), "xi={xi}");
        }
    }

    #[test]
    fn swap_with_roomy_middle() {
        let inst = p3(&[(0, 2), (2, 0)], CapacityMap::uniform(3, 1).with(1, 2));
        for xi in [4, 6] {
            let art = encode_complete(&inst, xi, EncodeOptions::default()).unwrap();
            let plan = extract_plan(&art, &solve(&art).unwrap()).unwrap();
            assert!(validate_plan(&inst, &plan).is_empty());
            assert!(plan.sum_of_costs() <= xi);
            let t = (0..plan.steps()).find(|&t| plan.path(0)[t] == 1 && plan.path(1)[t] == 1);
            assert!(t.is_some(), "both agents share the middle vertex");
        }
    }

    #[test]
    fn no_follow_forbids_trains() {
        // Rotation on a triangle is a pure train move.
        let inst = Instance::from_pairs(Graph::cycle(3), CapacityMap::uniform(3, 1), &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let follow = encode_complete(&inst, 3, EncodeOptions::default()).unwrap();
        assert!(solve(&follow).is_some());
        let strict = encode_complete(&inst, 3, EncodeOptions { no_follow: true }).unwrap();
        assert!(solve(&strict).is_none());
    }

    #[test]
    fn basic_encoding_is_a_relaxation() {
        let inst = p3(&[(0, 2), (2, 0)], CapacityMap::uniform(3, 1));
        let art = encode_basic(&inst, 4, &[], EncodeOptions::default()).unwrap();
        let plan = extract_plan(&art, &solve(&art).unwrap()).unwrap();
        assert!(!validate_plan(&inst, &plan).is_empty());
    }

    #[test]
    fn recorded_conflict_is_respected() {
        let inst = p3(&[(0, 2), (2, 0)], CapacityMap::uniform(3, 2));
        let conflict = Conflict::Capacity { agents: vec![0, 1], vertex: 1, t: 1 };
        let art = encode_basic(&inst, 4, &[conflict], EncodeOptions::default()).unwrap();
        if let Some(model) = solve(&art) {
            let plan = extract_plan(&art, &model).unwrap();
            assert!(!(plan.path(0)[1] == 1 && plan.path(1)[1] == 1));
        }
        let art6 = encode_basic(&inst, 6, &[Conflict::Capacity { agents: vec![0, 1], vertex: 1, t: 1 }], EncodeOptions::default()).unwrap();
        let plan = extract_plan(&art6, &solve(&art6).unwrap()).unwrap();
        assert!(!(plan.path(0)[1] == 1 && plan.path(1)[1] == 1));
    }

    #[test]
    fn conflicts_outside_the_mdd_are_skipped() {
        let inst = p3(&[(0, 2)], CapacityMap::uniform(3, 1));
        let far = Conflict::Capacity { agents: vec![0], vertex: 2, t: 0 };
        let art = encode_basic(&inst, 2, &[far], EncodeOptions::default()).unwrap();
        assert!(solve(&art).is_some());
    }

    #[test]
    fn unit_capacity_emits_pairwise_clauses() {
        let inst = Instance::from_pairs(Graph::star(3), CapacityMap::uniform(4, 1), &[(1, 2), (2, 3), (3, 1)]).unwrap();
        let basic = encode_basic(&inst, 6, &[], EncodeOptions::default()).unwrap();
        let complete = encode_complete(&inst, 6, EncodeOptions::default()).unwrap();
        let extra = &complete.formula.clauses()[basic.formula.clause_count()..];
        assert_eq!(complete.formula.variable_count(), basic.formula.variable_count());
        assert!(extra.iter().all(|c| c.len() == 2 && c.iter().all(|l| !l.is_positive())));
        let mut expected = 0;
        for ((_, _), agents) in occupancy(&complete.formula, &complete.mdds) {
            expected += agents.len() * (agents.len().saturating_sub(1)) / 2;
        }
        let swaps = move_index(&complete.mdds);
        let swap_clauses: usize = swaps
            .iter()
            .filter(|((_, u, v), _)| u < v)
            .map(|((t, u, v), fwd)| {
                let back = swaps.get(&(*t, *v, *u)).map_or(&[][..], Vec::as_slice);
                fwd.iter().map(|i| back.iter().filter(|j| *j != i).count()).sum::<usize>()
            })
            .sum();
        assert_eq!(extra.len(), expected + swap_clauses);
    }

    #[test]
    fn every_allocated_variable_matches_the_mdds() {
        let inst = Instance::from_pairs(Graph::open_grid(3, 3), CapacityMap::uniform(9, 2), &[(0, 8), (8, 0), (2, 6)]).unwrap();
        let art = encode_complete(&inst, 14, EncodeOptions::default()).unwrap();
        for v in 0..art.formula.variable_count() {
            match art.formula.key_of(crate::lit::Var(v as u32)) {
                Some(VarKey::Vertex { agent, vertex, t }) => assert!(art.mdds[*agent].contains(*t, *vertex)),
                Some(VarKey::Edge { agent, from, to, t }) => assert!(art.mdds[*agent].has_arc(*t, *from, *to)),
                _ => {}
            }
        }
    }
}
