//! Benchmark harness: random placements on a grid or map, solved under a
//! list of uniform capacities by each requested solver.
//!
//! Agent placements are drawn once per (k, instance index) at capacity 1
//! and reused for every capacity, so rows for the same instance differ only
//! in capacity. Rows come out in a fixed order regardless of scheduling.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::instance::{random_agents, CapacityMap, Graph, Instance, InstanceError};
use crate::solvers::{solve, ExhaustReason, Limits, SolveError, SolverKind};

pub const CSV_HEADER: &str = "instance,solver,capacity,k,outcome,cost,time_s,vars,clauses,refinements";

#[derive(Debug, Clone)]
pub enum BenchSource {
    Grid { width: usize, height: usize },
    Map { name: String, graph: Graph },
}

impl BenchSource {
    fn graph(&self) -> Graph {
        match self {
            BenchSource::Grid { width, height } => Graph::open_grid(*width, *height),
            BenchSource::Map { graph, .. } => graph.clone(),
        }
    }

    fn label(&self) -> String {
        match self {
            BenchSource::Grid { width, height } => format!("grid{width}x{height}"),
            BenchSource::Map { name, .. } => name.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub source: BenchSource,
    pub agents: Vec<usize>,
    pub capacities: Vec<u32>,
    pub instances: usize,
    pub seed: u64,
    pub solvers: Vec<SolverKind>,
    pub timeout: Duration,
    pub no_follow: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Solved,
    Timeout,
    /// No plan up to the cost ceiling.
    Unsolved,
    Error,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Solved => "solved",
            Outcome::Timeout => "timeout",
            Outcome::Unsolved => "unsolved",
            Outcome::Error => "error",
        }
    }
}

/// One CSV row. Variable and clause counts refer to the last formula of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub instance: String,
    pub solver: SolverKind,
    pub capacity: u32,
    pub k: usize,
    pub outcome: Outcome,
    pub cost: Option<u64>,
    pub time_s: f64,
    pub vars: usize,
    pub clauses: usize,
    pub refinements: usize,
}

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.3},{},{},{}",
            self.instance,
            self.solver.name(),
            self.capacity,
            self.k,
            self.outcome.as_str(),
            self.cost.map(|c| c.to_string()).unwrap_or_default(),
            self.time_s,
            self.vars,
            self.clauses,
            self.refinements
        )
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("instance {instance}: {source}")]
    Placement { instance: String, source: InstanceError },
    #[error("capacity must be at least 1")]
    ZeroCapacity,
}

/// Placement seed for instance `index` with `k` agents.
pub fn instance_seed(seed: u64, k: usize, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((k as u64) << 32) ^ index as u64
}

/// Named base instances (capacity 1) in row order.
pub fn bench_instances(config: &BenchConfig) -> Result<Vec<(String, Instance)>, BenchError> {
    let graph = config.source.graph();
    let unit = CapacityMap::uniform(graph.vertex_count(), 1);
    let label = config.source.label();
    let mut out = Vec::new();
    for &k in &config.agents {
        for index in 0..config.instances {
            let name = format!("{label}-k{k}-i{index}");
            let agents = random_agents(&graph, &unit, k, instance_seed(config.seed, k, index))
                .map_err(|source| BenchError::Placement { instance: name.clone(), source })?;
            let instance = Instance::new(graph.clone(), unit.clone(), agents)
                .map_err(|source| BenchError::Placement { instance: name.clone(), source })?;
            out.push((name, instance));
        }
    }
    Ok(out)
}

pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    if config.capacities.contains(&0) {
        return Err(BenchError::ZeroCapacity);
    }
    let instances = bench_instances(config)?;
    let mut cells = Vec::new();
    for (name, base) in &instances {
        for &capacity in &config.capacities {
            for &solver in &config.solvers {
                cells.push((name, base, capacity, solver));
            }
        }
    }
    let limits = Limits { timeout: Some(config.timeout), no_follow: config.no_follow, ..Limits::default() };
    Ok(cells
        .into_par_iter()
        .map(|(name, base, capacity, solver)| {
            let instance = base
                .with_capacities(CapacityMap::uniform(base.graph.vertex_count(), capacity))
                .expect("raising capacity keeps a unit-capacity placement valid");
            run_cell(name, &instance, capacity, solver, limits)
        })
        .collect())
}

fn run_cell(name: &str, instance: &Instance, capacity: u32, solver: SolverKind, limits: Limits) -> BenchRecord {
    let started = Instant::now();
    let result = solve(instance, solver, limits);
    let time_s = started.elapsed().as_secs_f64();
    let mut record = BenchRecord {
        instance: name.to_string(),
        solver,
        capacity,
        k: instance.agent_count(),
        outcome: Outcome::Error,
        cost: None,
        time_s,
        vars: 0,
        clauses: 0,
        refinements: 0,
    };
    let last = |iterations: &[crate::solvers::IterationStats]| {
        iterations.last().map_or((0, 0), |i| (i.vars, i.clauses))
    };
    match result {
        Ok(report) => {
            record.outcome = Outcome::Solved;
            record.cost = Some(report.optimal_cost);
            (record.vars, record.clauses) = last(&report.iterations);
            record.refinements = report.refinements();
        }
        Err(SolveError::Exhausted { reason, iterations }) => {
            record.outcome = match reason {
                ExhaustReason::Timeout => Outcome::Timeout,
                ExhaustReason::Ceiling { .. } => Outcome::Unsolved,
            };
            (record.vars, record.clauses) = last(&iterations);
            record.refinements = iterations.iter().map(|i| i.refinements).sum();
        }
        Err(_) => {}
    }
    record
}

pub fn records_to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Runtimes of solved runs, ascending, per (solver, capacity):
/// `solver,capacity,rank,time_s`. Timed-out rows are left out.
pub fn sorted_runtime_table(records: &[BenchRecord]) -> String {
    let mut groups: Vec<(SolverKind, u32)> = Vec::new();
    for r in records {
        if !groups.contains(&(r.solver, r.capacity)) {
            groups.push((r.solver, r.capacity));
        }
    }
    groups.sort_by_key(|&(s, c)| (s.name(), c));
    let mut out = String::from("solver,capacity,rank,time_s\n");
    for (solver, capacity) in groups {
        let mut times: Vec<f64> = records
            .iter()
            .filter(|r| r.solver == solver && r.capacity == capacity && r.outcome == Outcome::Solved)
            .map(|r| r.time_s)
            .collect();
        times.sort_by(f64::total_cmp);
        for (rank, t) in times.iter().enumerate() {
            let _ = writeln!(out, "{},{capacity},{},{t:.3}", solver.name(), rank + 1);
        }
    }
    out
}

/// Median of the values, averaging the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len().is_multiple_of(2) { (sorted[mid - 1] + sorted[mid]) / 2.0 } else { sorted[mid] })
}
