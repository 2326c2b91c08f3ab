//! Cost-bound iteration over the CNF encodings.
//!
//! Both solvers start at the sum of individual shortest paths and raise the
//! bound by one after every unsatisfiable call, so the first satisfiable
//! bound is the optimal sum-of-costs. The eager solver uses the complete
//! encoding. The lazy solver starts from the relaxed encoding and, while the
//! candidate plan breaks a rule, adds one clause per conflict to the live
//! SAT solver and solves again.

use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::encoder::{conflict_clause, encode_basic, encode_complete, extract_plan, EncodeError, EncodeOptions, EncodingArtifacts};
use crate::instance::{Instance, Vertex};
use crate::pathcalc::{cost_lower_bound, Unreachable};
use crate::plan::Plan;
use crate::satcore::{Budget, SatResult, Solver};
use crate::verify::{validate_plan_with, Violation};

/// A rule violation of a candidate plan, in the terms of the encoding variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Conflict {
    /// The listed agents may not all occupy `vertex` at time `t`.
    Capacity { agents: Vec<usize>, vertex: Vertex, t: usize },
    /// Agent `agents.0` moving `from -> to` while `agents.1` moves `to -> from`.
    Swap { agents: (usize, usize), from: Vertex, to: Vertex, t: usize },
    /// `agent` entering `to` while `occupants` fill it at time `t`.
    Follow { agent: usize, from: Vertex, to: Vertex, t: usize, occupants: Vec<usize> },
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conflict::Capacity { agents, vertex, t } => write!(f, "capacity v={vertex} t={t} agents={agents:?}"),
            Conflict::Swap { agents: (i, j), from, to, t } => write!(f, "swap {from}<->{to} t={t} agents=({i}, {j})"),
            Conflict::Follow { agent, from, to, t, occupants } => {
                write!(f, "follow {from}->{to} t={t} agent={agent} occupants={occupants:?}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Eager,
    Lazy,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Eager => "eager",
            SolverKind::Lazy => "lazy",
        }
    }
}

/// How an over-capacity vertex is turned into clauses by the lazy solver.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CapacityRefinement {
    /// One clause over all agents present.
    #[default]
    FullSet,
    /// One clause per `(c + 1)`-subset of the agents present.
    Subsets,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Limits {
    pub timeout: Option<Duration>,
    /// Largest cost bound tried. Defaults to the lower bound plus `|V| * k`.
    pub xi_ceiling: Option<u64>,
    pub no_follow: bool,
    pub refinement: CapacityRefinement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub xi: u64,
    pub horizon: usize,
    pub vars: usize,
    pub clauses: usize,
    /// Conflict clauses added during this iteration.
    pub refinements: usize,
    pub verdict: Verdict,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solver: SolverKind,
    pub plan: Plan,
    pub optimal_cost: u64,
    pub iterations: Vec<IterationStats>,
    pub elapsed: Duration,
}

impl SolveReport {
    pub fn refinements(&self) -> usize {
        self.iterations.iter().map(|i| i.refinements).sum()
    }

    pub fn final_vars(&self) -> usize {
        self.iterations.last().map_or(0, |i| i.vars)
    }

    pub fn final_clauses(&self) -> usize {
        self.iterations.last().map_or(0, |i| i.clauses)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExhaustReason {
    Timeout,
    /// Every bound up to the ceiling was unsatisfiable.
    Ceiling { xi: u64 },
}

impl fmt::Display for ExhaustReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExhaustReason::Timeout => f.write_str("timeout"),
            ExhaustReason::Ceiling { xi } => write!(f, "no plan with cost at most {xi}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Unreachable(#[from] Unreachable),
    #[error("search exhausted: {reason}")]
    Exhausted { reason: ExhaustReason, iterations: Vec<IterationStats> },
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<EncodeError> for SolveError {
    fn from(e: EncodeError) -> SolveError {
        match e {
            EncodeError::Unreachable(u) => SolveError::Unreachable(u),
            other => SolveError::Internal(other.to_string()),
        }
    }
}

pub fn solve(instance: &Instance, kind: SolverKind, limits: Limits) -> Result<SolveReport, SolveError> {
    match kind {
        SolverKind::Eager => solve_eager(instance, limits),
        SolverKind::Lazy => solve_lazy(instance, limits),
    }
}

/// Conflicts of a candidate plan, in a deterministic order.
pub fn validate_candidate(instance: &Instance, plan: &Plan, limits: &Limits) -> Vec<Conflict> {
    let mut out = Vec::new();
    for violation in validate_plan_with(instance, plan, limits.no_follow) {
        match violation {
            Violation::OverCapacity { vertex, t, agents, capacity } => match limits.refinement {
                CapacityRefinement::FullSet => out.push(Conflict::Capacity { agents, vertex, t }),
                CapacityRefinement::Subsets => {
                    for subset in subsets(&agents, capacity as usize + 1) {
                        out.push(Conflict::Capacity { agents: subset, vertex, t });
                    }
                }
            },
            Violation::Swap { agents, t, from, to } => out.push(Conflict::Swap { agents, from, to, t }),
            Violation::Follow { agent, t, from, to, occupants } => {
                out.push(Conflict::Follow { agent, from, to, t, occupants })
            }
            // Candidates come from the path constraints, which rule these out.
            _ => {}
        }
    }
    out
}

fn subsets(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    fn go(items: &[usize], size: usize, from: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for i in from..items.len() {
            if items.len() - i < size - current.len() {
                break;
            }
            current.push(items[i]);
            go(items, size, i + 1, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    go(items, size, 0, &mut Vec::new(), &mut out);
    out
}

struct Search<'a> {
    instance: &'a Instance,
    limits: Limits,
    started: Instant,
    deadline: Option<Instant>,
    lower: u64,
    ceiling: u64,
    iterations: Vec<IterationStats>,
}

impl<'a> Search<'a> {
    fn new(instance: &'a Instance, limits: Limits) -> Result<Search<'a>, SolveError> {
        let started = Instant::now();
        let lower = cost_lower_bound(instance)?;
        let span = (instance.graph.vertex_count() * instance.agent_count()) as u64;
        Ok(Search {
            instance,
            limits,
            started,
            deadline: limits.timeout.map(|t| started + t),
            lower,
            ceiling: limits.xi_ceiling.unwrap_or(lower + span),
            iterations: Vec::new(),
        })
    }

    fn budget(&self) -> Budget {
        Budget { max_conflicts: None, deadline: self.deadline }
    }

    fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn exhausted(self, reason: ExhaustReason) -> SolveError {
        SolveError::Exhausted { reason, iterations: self.iterations }
    }

    fn record(&mut self, art: &EncodingArtifacts, refinements: usize, verdict: Verdict, since: Instant) {
        self.iterations.push(IterationStats {
            xi: art.xi,
            horizon: art.horizon,
            vars: art.formula.variable_count(),
            clauses: art.formula.clause_count() + refinements,
            refinements,
            verdict,
            elapsed: since.elapsed(),
        });
    }

    fn finish(self, solver: SolverKind, art: &EncodingArtifacts, plan: Plan) -> Result<SolveReport, SolveError> {
        let violations = validate_plan_with(self.instance, &plan, self.limits.no_follow);
        if !violations.is_empty() {
            return Err(SolveError::Internal(format!("solver returned an invalid plan: {}", violations[0])));
        }
        if plan.sum_of_costs() > art.xi {
            return Err(SolveError::Internal(format!("plan cost {} exceeds bound {}", plan.sum_of_costs(), art.xi)));
        }
        Ok(SolveReport {
            solver,
            optimal_cost: plan.sum_of_costs(),
            plan: plan.trimmed(),
            iterations: self.iterations,
            elapsed: self.started.elapsed(),
        })
    }
}

/// Complete encoding per bound.
pub fn solve_eager(instance: &Instance, limits: Limits) -> Result<SolveReport, SolveError> {
    let mut search = Search::new(instance, limits)?;
    let options = EncodeOptions { no_follow: limits.no_follow };
    let mut xi = search.lower;
    loop {
        if xi > search.ceiling {
            let xi = search.ceiling;
            return Err(search.exhausted(ExhaustReason::Ceiling { xi }));
        }
        if search.timed_out() {
            return Err(search.exhausted(ExhaustReason::Timeout));
        }
        let since = Instant::now();
        let art = encode_complete(instance, xi, options)?;
        let mut solver = Solver::from_formula(&art.formula);
        match solver.solve(search.budget()) {
            SatResult::Sat(model) => {
                search.record(&art, 0, Verdict::Sat, since);
                let plan = extract_plan(&art, &model).map_err(|e| SolveError::Internal(e.to_string()))?;
                return search.finish(SolverKind::Eager, &art, plan);
            }
            SatResult::Unsat => search.record(&art, 0, Verdict::Unsat, since),
            SatResult::Unknown => {
                search.record(&art, 0, Verdict::Unknown, since);
                return Err(search.exhausted(ExhaustReason::Timeout));
            }
        }
        xi += 1;
    }
}

/// Relaxed encoding plus conflict clauses, refined incrementally per bound.
/// Conflicts found at one bound are carried into the encodings of later bounds.
pub fn solve_lazy(instance: &Instance, limits: Limits) -> Result<SolveReport, SolveError> {
    let mut search = Search::new(instance, limits)?;
    let options = EncodeOptions { no_follow: limits.no_follow };
    let mut conflicts: Vec<Conflict> = Vec::new();
    let mut xi = search.lower;
    loop {
        if xi > search.ceiling {
            let xi = search.ceiling;
            return Err(search.exhausted(ExhaustReason::Ceiling { xi }));
        }
        if search.timed_out() {
            return Err(search.exhausted(ExhaustReason::Timeout));
        }
        let since = Instant::now();
        let art = encode_basic(instance, xi, &conflicts, options)?;
        let mut solver = Solver::from_formula(&art.formula);
        let mut refinements = 0;
        loop {
            match solver.solve(search.budget()) {
                SatResult::Sat(model) => {
                    let plan = extract_plan(&art, &model).map_err(|e| SolveError::Internal(e.to_string()))?;
                    let found = validate_candidate(instance, &plan, &limits);
                    if found.is_empty() {
                        search.record(&art, refinements, Verdict::Sat, since);
                        return search.finish(SolverKind::Lazy, &art, plan);
                    }
                    for conflict in found {
                        let clause = conflict_clause(&art.formula, &conflict).ok_or_else(|| {
                            SolveError::Internal(format!("conflict {conflict} refers to variables outside the encoding"))
                        })?;
                        solver.add_clause(&clause);
                        conflicts.push(conflict);
                        refinements += 1;
                    }
                }
                SatResult::Unsat => {
                    search.record(&art, refinements, Verdict::Unsat, since);
                    break;
                }
                SatResult::Unknown => {
                    search.record(&art, refinements, Verdict::Unknown, since);
                    return Err(search.exhausted(ExhaustReason::Timeout));
                }
            }
        }
        xi += 1;
    }
}
