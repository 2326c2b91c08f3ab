//! Acceptance suite. Each check prints one PASS/FAIL line; the process exits
//! non-zero if any check fails. Expected values are computed here by
//! independent means (exhaustive search, truth tables, a small DPLL) rather
//! than taken from the code under test.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mapfcap::bench::{median, records_to_csv, run_bench, BenchConfig, BenchSource, Outcome};
use mapfcap::cnf::CnfFormula;
use mapfcap::encoder::{encode_basic, encode_complete, EncodeOptions};
use mapfcap::instance::{
    generate_random, load_capacities, parse_capacity_file, parse_map, parse_scenario, random_agents, serialize_map, CapacityMap,
    Graph, Instance,
};
use mapfcap::lit::{Lit, Var};
use mapfcap::mdd::{build_all, compute_horizon, horizon_for};
use mapfcap::pathcalc::agent_lower_bounds;
use mapfcap::satcore::{solve_formula, Budget, SatResult, Solver};
use mapfcap::solvers::{solve_eager, solve_lazy, ExhaustReason, Limits, SolveError, SolverKind};
use mapfcap::verify::{brute_force_optimal, validate_plan, OracleLimits, OracleOutcome};

type Check = Result<String, String>;
type NamedCheck = (&'static str, fn() -> Check);

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).expect("fixture readable")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Answer {
    Cost(u64),
    Unsolvable,
}

fn oracle(instance: &Instance) -> Result<Answer, String> {
    match brute_force_optimal(instance, OracleLimits::default()) {
        OracleOutcome::Optimal { cost, plan } => {
            if !validate_plan(instance, &plan).is_empty() || plan.sum_of_costs() != cost {
                return Err("oracle witness does not check out".into());
            }
            Ok(Answer::Cost(cost))
        }
        OracleOutcome::Unsolvable => Ok(Answer::Unsolvable),
        other => Err(format!("oracle gave no answer: {other:?}")),
    }
}

fn run_solver(instance: &Instance, kind: SolverKind, limits: Limits) -> Result<Answer, String> {
    let result = match kind {
        SolverKind::Eager => solve_eager(instance, limits),
        SolverKind::Lazy => solve_lazy(instance, limits),
    };
    match result {
        Ok(report) => {
            let violations = validate_plan(instance, &report.plan);
            if !violations.is_empty() {
                return Err(format!("{} plan invalid: {}", kind.name(), violations[0]));
            }
            if report.plan.sum_of_costs() != report.optimal_cost {
                return Err(format!("{} reported cost differs from its plan", kind.name()));
            }
            Ok(Answer::Cost(report.optimal_cost))
        }
        Err(SolveError::Exhausted { reason: ExhaustReason::Ceiling { .. }, .. }) => Ok(Answer::Unsolvable),
        Err(e) => Err(format!("{}: {e}", kind.name())),
    }
}

/// Small graphs with at most 9 vertices.
fn corpus_graphs() -> Vec<(String, Graph)> {
    let mut graphs = Vec::new();
    for n in 2..=6 {
        graphs.push((format!("path{n}"), Graph::path(n)));
    }
    for n in 3..=6 {
        graphs.push((format!("cycle{n}"), Graph::cycle(n)));
    }
    for leaves in 2..=4 {
        graphs.push((format!("star{leaves}"), Graph::star(leaves)));
    }
    graphs.push(("grid2x3".into(), Graph::open_grid(2, 3)));
    graphs.push(("grid3x3".into(), Graph::open_grid(3, 3)));
    graphs
}

/// Unit-capacity placements; capacities are raised per check.
fn corpus() -> Vec<(String, Instance)> {
    let mut out = Vec::new();
    for (name, graph) in corpus_graphs() {
        let unit = CapacityMap::uniform(graph.vertex_count(), 1);
        for k in 1..=3usize.min(graph.vertex_count()) {
            for seed in 0..5u64 {
                let agents = random_agents(&graph, &unit, k, seed * 31 + k as u64).expect("placement fits");
                out.push((format!("{name}-k{k}-s{seed}"), Instance::new(graph.clone(), unit.clone(), agents).unwrap()));
            }
        }
    }
    out.push(("path3-swap".into(), Instance::from_pairs(Graph::path(3), CapacityMap::uniform(3, 1), &[(0, 2), (2, 0)]).unwrap()));
    out.push((
        "star3-rotate".into(),
        Instance::from_pairs(Graph::star(3), CapacityMap::uniform(4, 1), &[(1, 2), (2, 3), (3, 1)]).unwrap(),
    ));
    out
}

fn with_uniform(instance: &Instance, c: u32) -> Instance {
    instance.with_capacities(CapacityMap::uniform(instance.graph.vertex_count(), c)).unwrap()
}

fn oracle_equivalence() -> Check {
    let mut checked = 0;
    let mut unsolvable = 0;
    for (name, base) in corpus() {
        for c in [1, 2] {
            let instance = with_uniform(&base, c);
            let expected = oracle(&instance).map_err(|e| format!("{name} c={c}: {e}"))?;
            for kind in [SolverKind::Eager, SolverKind::Lazy] {
                let got = run_solver(&instance, kind, Limits::default()).map_err(|e| format!("{name} c={c}: {e}"))?;
                if got != expected {
                    return Err(format!("{name} c={c}: {} gave {got:?}, oracle {expected:?}", kind.name()));
                }
            }
            checked += 1;
            unsolvable += usize::from(expected == Answer::Unsolvable);
        }
    }
    if checked < 200 {
        return Err(format!("corpus has only {checked} instances"));
    }
    Ok(format!("{checked} instances agree exactly ({unsolvable} unsolvable)"))
}

fn cross_solver_agreement() -> Check {
    let limits = Limits { timeout: Some(Duration::from_secs(10)), ..Limits::default() };
    let (mut runs, mut completed, mut compared) = (0, 0, 0);
    for i in 0..100u64 {
        let k = if i % 2 == 0 { 5 } else { 10 };
        let c = 1 + ((i / 2) % 3) as u32;
        let instance = generate_random(8, 8, k, c, 1000 + i).map_err(|e| e.to_string())?;
        let mut costs = Vec::new();
        for kind in [SolverKind::Eager, SolverKind::Lazy] {
            runs += 1;
            match if kind == SolverKind::Eager { solve_eager(&instance, limits) } else { solve_lazy(&instance, limits) } {
                Ok(report) => {
                    completed += 1;
                    let violations = validate_plan(&instance, &report.plan);
                    if !violations.is_empty() {
                        return Err(format!("instance {i} {}: {}", kind.name(), violations[0]));
                    }
                    costs.push(report.optimal_cost);
                }
                Err(SolveError::Exhausted { reason: ExhaustReason::Timeout, .. }) => {}
                Err(e) => return Err(format!("instance {i} {}: {e}", kind.name())),
            }
        }
        if costs.len() == 2 {
            compared += 1;
            if costs[0] != costs[1] {
                return Err(format!("instance {i}: eager {} vs lazy {}", costs[0], costs[1]));
            }
        }
    }
    let rate = completed as f64 / runs as f64;
    let detail = format!("{completed}/{runs} runs completed ({:.1}%), {compared} cost pairs equal", rate * 100.0);
    if rate >= 0.95 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn capacity_monotonicity() -> Check {
    let mut checked = 0;
    for (name, base) in corpus() {
        let answers = [1, 2, 3]
            .iter()
            .map(|&c| oracle(&with_uniform(&base, c)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("{name}: {e}"))?;
        // The lazy solver must see the same ordering.
        for (c, expected) in [1u32, 2, 3].iter().zip(&answers) {
            let got = run_solver(&with_uniform(&base, *c), SolverKind::Lazy, Limits::default())?;
            if got != *expected {
                return Err(format!("{name} c={c}: lazy {got:?} vs oracle {expected:?}"));
            }
        }
        for pair in answers.windows(2) {
            let ok = match (pair[0], pair[1]) {
                (Answer::Cost(a), Answer::Cost(b)) => b <= a,
                (Answer::Unsolvable, _) => true,
                (Answer::Cost(_), Answer::Unsolvable) => false,
            };
            if !ok {
                return Err(format!("{name}: {:?} then {:?} as capacity grows", pair[0], pair[1]));
            }
        }
        checked += 1;
    }
    Ok(format!("{checked} instances monotone over c = 1, 2, 3"))
}

fn p3_fixture() -> Check {
    let graph = parse_map(&read_fixture("p3.map")).map_err(|e| e.to_string())?;
    let agents = parse_scenario(&read_fixture("p3_swap.scen"), &graph).map_err(|e| e.to_string())?;
    let tight = Instance::new(graph.clone(), CapacityMap::uniform(3, 1), agents.clone()).map_err(|e| e.to_string())?;
    if oracle(&tight)? != Answer::Unsolvable {
        return Err("oracle finds the swap solvable at c = 1".into());
    }
    for kind in [SolverKind::Eager, SolverKind::Lazy] {
        if run_solver(&tight, kind, Limits::default())? != Answer::Unsolvable {
            return Err(format!("{} solves the swap at c = 1", kind.name()));
        }
    }
    let caps = load_capacities(&parse_capacity_file(&read_fixture("p3_middle.cap")).map_err(|e| e.to_string())?, &graph)
        .map_err(|e| e.to_string())?;
    let roomy = Instance::new(graph, caps, agents).map_err(|e| e.to_string())?;
    let expected = oracle(&roomy)?;
    // Both agents cross the middle vertex together: 0 -> 1 -> 2 and 2 -> 1 -> 0.
    let witness = mapfcap::plan::Plan::new(vec![vec![0, 1, 2], vec![2, 1, 0]]);
    if !validate_plan(&roomy, &witness).is_empty() || expected != Answer::Cost(4) {
        return Err(format!("oracle optimum {expected:?}, expected 4 from the direct crossing"));
    }
    for kind in [SolverKind::Eager, SolverKind::Lazy] {
        let got = run_solver(&roomy, kind, Limits::default())?;
        if got != expected {
            return Err(format!("{} gave {got:?} with c(middle) = 2", kind.name()));
        }
    }
    Ok("unsolvable at c = 1; optimum 4 with c(middle) = 2 (a value of 6 would not be optimal)".into())
}

/// Tiny DPLL used as an independent satisfiability check.
fn dpll(clauses: &[Vec<Lit>], assignment: &mut [Option<bool>]) -> bool {
    loop {
        let mut unit = None;
        for clause in clauses {
            let mut unassigned = None;
            let mut free = 0;
            let mut satisfied = false;
            for &l in clause {
                match assignment[l.var().index()] {
                    Some(v) if v == l.is_positive() => {
                        satisfied = true;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        free += 1;
                        unassigned = Some(l);
                    }
                }
            }
            if satisfied {
                continue;
            }
            match free {
                0 => return false,
                1 => {
                    unit = unassigned;
                    break;
                }
                _ => {}
            }
        }
        match unit {
            Some(l) => assignment[l.var().index()] = Some(l.is_positive()),
            None => break,
        }
    }
    let Some(v) = assignment.iter().position(Option::is_none) else { return true };
    for value in [false, true] {
        let mut next = assignment.to_vec();
        next[v] = Some(value);
        if dpll(clauses, &mut next) {
            return true;
        }
    }
    false
}

fn cardinality_semantics() -> Check {
    let mut cases = 0;
    for n in 0..=8usize {
        for k in 0..=n {
            let mut formula = CnfFormula::new();
            let inputs: Vec<Lit> = (0..n).map(|_| formula.fresh().pos()).collect();
            formula.at_most_k(&inputs, k);
            for mask in 0u32..(1 << n) {
                let mut assignment = vec![None; formula.variable_count()];
                for (i, slot) in assignment.iter_mut().take(n).enumerate() {
                    *slot = Some(mask & (1 << i) != 0);
                }
                let allowed = dpll(formula.clauses(), &mut assignment);
                if allowed != (mask.count_ones() as usize <= k) {
                    return Err(format!("n={n} k={k} mask={mask:0n$b}: encoding allows={allowed}"));
                }
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} (n, k) pairs match the at-most-k sets exactly"))
}

fn horizon_formula() -> Check {
    let cases: [(&[u32], u64, usize); 5] = [
        (&[2, 2], 4, 2),
        (&[1, 4, 3], 8, 4),
        (&[1, 4, 3], 11, 7),
        (&[0], 5, 5),
        (&[5, 1], 6, 5),
    ];
    for (bounds, xi, expected) in cases {
        let got = horizon_for(bounds, xi).map_err(|e| e.to_string())?;
        let independent = *bounds.iter().max().unwrap() as u64 + xi - bounds.iter().map(|&d| d as u64).sum::<u64>();
        if got != expected || got as u64 != independent {
            return Err(format!("bounds {bounds:?} xi {xi}: got {got}, expected {expected}"));
        }
    }
    if horizon_for(&[2, 2], 3).is_ok() {
        return Err("a bound below the lower bound was accepted".into());
    }
    // Every optimal plan fits the horizon at its own cost.
    for (name, base) in corpus().into_iter().step_by(7) {
        let instance = with_uniform(&base, 2);
        if let OracleOutcome::Optimal { cost, plan } = brute_force_optimal(&instance, OracleLimits::default()) {
            let horizon = compute_horizon(&instance, cost).map_err(|e| e.to_string())?;
            if plan.makespan() > horizon {
                return Err(format!("{name}: optimal makespan {} exceeds horizon {horizon}", plan.makespan()));
            }
            let bounds = agent_lower_bounds(&instance).unwrap();
            let mdds = build_all(&instance, horizon).map_err(|e| e.to_string())?;
            if mdds.iter().zip(&bounds).any(|(m, &d)| m.horizon != horizon || (horizon as u32) < d) {
                return Err(format!("{name}: MDD depth disagrees with horizon"));
            }
        }
    }
    Ok("tight, heterogeneous and slack cases exact; optimal plans fit".into())
}

fn difficulty_trend() -> Check {
    let config = BenchConfig {
        source: BenchSource::Grid { width: 8, height: 8 },
        agents: vec![12],
        capacities: vec![1, 2],
        instances: 20,
        seed: 2024,
        solvers: vec![SolverKind::Lazy],
        timeout: Duration::from_secs(60),
        no_follow: false,
    };
    let records = run_bench(&config).map_err(|e| e.to_string())?;
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("difficulty_trend.csv");
    std::fs::write(&path, records_to_csv(&records)).map_err(|e| e.to_string())?;
    let stat = |c: u32, f: &dyn Fn(&mapfcap::bench::BenchRecord) -> f64| {
        let values: Vec<f64> = records.iter().filter(|r| r.capacity == c && r.outcome == Outcome::Solved).map(f).collect();
        median(&values).unwrap_or(f64::NAN)
    };
    let refinements = |r: &mapfcap::bench::BenchRecord| r.refinements as f64;
    let clauses = |r: &mapfcap::bench::BenchRecord| r.clauses as f64;
    let (r1, r2) = (stat(1, &refinements), stat(2, &refinements));
    let (k1, k2) = (stat(1, &clauses), stat(2, &clauses));
    let solved = records.iter().filter(|r| r.outcome == Outcome::Solved).count();
    let trend = if r2 <= r1 && k2 <= k1 { "holds" } else { "does not hold" };
    Ok(format!(
        "median refinements c=1 {r1} c=2 {r2}; median clauses c=1 {k1} c=2 {k2}; trend {trend}; {solved}/{} solved; csv {}",
        records.len(),
        path.display()
    ))
}

fn random_formula(rng: &mut ChaCha8Rng) -> (usize, Vec<Vec<Lit>>) {
    let vars = rng.gen_range(1..=20);
    let ratio = rng.gen_range(1.0..5.5);
    let count = ((vars as f64) * ratio) as usize;
    let clauses = (0..count)
        .map(|_| {
            let width = rng.gen_range(2..=3);
            (0..width).map(|_| Lit::new(Var(rng.gen_range(0..vars) as u32), rng.gen_bool(0.5))).collect()
        })
        .collect();
    (vars, clauses)
}

fn truth_table_sat(vars: usize, clauses: &[Vec<Lit>]) -> bool {
    (0u32..(1 << vars)).any(|mask| {
        let model: Vec<bool> = (0..vars).map(|i| mask & (1 << i) != 0).collect();
        clauses.iter().all(|c| c.iter().any(|l| l.eval(&model)))
    })
}

fn sat_core() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut sat, mut unsat) = (0, 0);
    for i in 0..200 {
        let (vars, clauses) = random_formula(&mut rng);
        let mut solver = Solver::new();
        solver.ensure_vars(vars);
        for c in &clauses {
            solver.add_clause(c);
        }
        let expected = truth_table_sat(vars, &clauses);
        match solver.solve(Budget::unlimited()) {
            SatResult::Sat(model) if expected => {
                if !clauses.iter().all(|c| c.iter().any(|l| l.eval(&model))) {
                    return Err(format!("formula {i}: model fails replay"));
                }
                sat += 1;
            }
            SatResult::Unsat if !expected => unsat += 1,
            other => return Err(format!("formula {i}: solver {other:?}, truth table sat={expected}")),
        }
    }

    // Three pigeons, two holes.
    let mut php = CnfFormula::new();
    let p: Vec<Vec<Lit>> = (0..3).map(|_| (0..2).map(|_| php.fresh().pos()).collect()).collect();
    for row in &p {
        php.add_clause(row.clone());
    }
    for h in 0..2 {
        let column: Vec<Lit> = p.iter().map(|row| row[h]).collect();
        php.at_most_one_pairwise(&column);
    }
    if solve_formula(&php, Budget::unlimited()) != SatResult::Unsat {
        return Err("PHP(3,2) not refuted".into());
    }

    let swap = Instance::from_pairs(Graph::path(3), CapacityMap::uniform(3, 1), &[(0, 2), (2, 0)]).unwrap();
    let corridor = Instance::from_pairs(Graph::path(4), CapacityMap::uniform(4, 1), &[(0, 3), (3, 0)]).unwrap();
    let mut fixtures = 0;
    for (name, instance) in [("swap", &swap), ("corridor", &corridor)] {
        for xi in 4..=9 {
            if xi < 6 && name == "corridor" {
                continue;
            }
            let art = encode_complete(instance, xi, EncodeOptions::default()).map_err(|e| e.to_string())?;
            if solve_formula(&art.formula, Budget::unlimited()) != SatResult::Unsat {
                return Err(format!("{name} at xi={xi} not refuted"));
            }
            fixtures += 1;
        }
    }
    Ok(format!("{sat} sat / {unsat} unsat random formulas match; PHP(3,2) and {fixtures} MAPF fixtures refuted"))
}

fn round_trips() -> Check {
    let mut maps = 0;
    for name in ["tiny.map", "p3.map", "hard.map"] {
        let text = read_fixture(name);
        let graph = parse_map(&text).map_err(|e| format!("{name}: {e}"))?;
        let out = serialize_map(&graph).ok_or("grid metadata lost")?;
        if out != text {
            return Err(format!("{name} does not serialize byte-identically"));
        }
        maps += 1;
    }

    let graph = parse_map(&read_fixture("p3.map")).unwrap();
    let agents = parse_scenario(&read_fixture("p3_swap.scen"), &graph).unwrap();
    let swap = Instance::new(graph, CapacityMap::uniform(3, 1), agents).unwrap();
    let graph = parse_map(&read_fixture("tiny.map")).unwrap();
    let agents = parse_scenario(&read_fixture("tiny.scen"), &graph).unwrap();
    let tiny = Instance::new(graph, CapacityMap::uniform(10, 2), agents).unwrap();
    let formulas = [
        encode_complete(&swap, 4, EncodeOptions::default()),
        encode_basic(&swap, 6, &[], EncodeOptions::default()),
        encode_complete(&tiny, 9, EncodeOptions::default()),
        encode_complete(&tiny, 8, EncodeOptions { no_follow: true }),
    ];
    for (i, art) in formulas.into_iter().enumerate() {
        let art = art.map_err(|e| e.to_string())?;
        let text = art.formula.to_dimacs();
        let back = CnfFormula::from_dimacs(&text).map_err(|e| format!("formula {i}: {e}"))?;
        if back.to_dimacs() != text || back != art.formula {
            return Err(format!("formula {i} does not round-trip"));
        }
    }
    Ok(format!("{maps} maps and 4 DIMACS files round-trip byte-identically"))
}

fn main() -> ExitCode {
    let checks: [NamedCheck; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("cross-solver agreement on 8x8 grids", cross_solver_agreement),
        ("capacity relaxation monotonicity", capacity_monotonicity),
        ("path swap fixture", p3_fixture),
        ("cardinality encoding semantics", cardinality_semantics),
        ("horizon formula", horizon_formula),
        ("difficulty trend c=1 vs c=2 (report only)", difficulty_trend),
        ("SAT core soundness and completeness", sat_core),
        ("format round trips", round_trips),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let started = Instant::now();
        let result = check();
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {}. {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
