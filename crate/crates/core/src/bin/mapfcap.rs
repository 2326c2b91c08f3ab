use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use mapfcap::bench::{records_to_csv, run_bench, sorted_runtime_table, BenchConfig, BenchSource};
use mapfcap::cnf::CnfFormula;
use mapfcap::encoder::{encode_basic, encode_complete, EncodeOptions};
use mapfcap::instance::{load_capacities, parse_capacity_file, parse_map, parse_scenario, random_agents, CapacitySpec, Instance};
use mapfcap::mdd::{build_mdd, compute_horizon};
use mapfcap::pathcalc::cost_lower_bound;
use mapfcap::plan::Plan;
use mapfcap::satcore::{Budget, SatResult, Solver};
use mapfcap::solvers::{solve, CapacityRefinement, Limits, SolveError, SolverKind};
use mapfcap::verify::validate_plan_with;

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_EXHAUSTED: u8 = 2;

#[derive(Parser)]
#[command(name = "mapfcap", version, about = "Optimal multi-agent path finding with vertex capacities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance optimally and print the plan.
    Solve(SolveArgs),
    /// Run random instances under several capacities and print CSV.
    Bench(BenchArgs),
    /// Write the CNF for one cost bound in DIMACS format.
    ExportCnf(ExportArgs),
    /// Check a plan file against an instance.
    Validate(ValidateArgs),
    /// Solve a DIMACS CNF file.
    Sat(SatArgs),
    /// Print the MDD of one agent.
    Mdd(MddArgs),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("placement").required(true).args(["scen", "seed"]))]
struct InstanceArgs {
    /// Movingai grid map.
    #[arg(long)]
    map: PathBuf,
    /// Movingai scenario; the first K agents are used.
    #[arg(long)]
    scen: Option<PathBuf>,
    /// Seed for random start and goal placement instead of a scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Uniform vertex capacity.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..), conflicts_with = "capacity_file")]
    capacity: Option<u32>,
    /// Per-vertex capacities, one `vertex_id capacity` pair per line.
    #[arg(long)]
    capacity_file: Option<PathBuf>,
    /// Number of agents.
    #[arg(long)]
    agents: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Eager,
    Lazy,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> SolverKind {
        match s {
            SolverArg::Eager => SolverKind::Eager,
            SolverArg::Lazy => SolverKind::Lazy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RefinementArg {
    Full,
    Subsets,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum)]
    solver: SolverArg,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 500.0)]
    timeout: f64,
    /// Forbid entering a vertex that is full before the step.
    #[arg(long)]
    no_follow: bool,
    /// Clauses per over-capacity vertex in the lazy solver.
    #[arg(long, value_enum, default_value = "full")]
    refinement: RefinementArg,
}

#[derive(Args)]
struct BenchArgs {
    /// Open grid as WIDTHxHEIGHT.
    #[arg(long, conflicts_with = "map", required_unless_present = "map", value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long)]
    map: Option<PathBuf>,
    /// Agent counts.
    #[arg(long, value_delimiter = ',', required = true)]
    agents: Vec<usize>,
    /// Uniform capacities.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3", value_parser = clap::value_parser!(u32).range(1..))]
    capacities: Vec<u32>,
    /// Random instances per agent count.
    #[arg(long, default_value_t = 25)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', value_enum, default_value = "eager,lazy")]
    solvers: Vec<SolverArg>,
    /// Per-run limit in seconds.
    #[arg(long, default_value_t = 500.0)]
    timeout: f64,
    #[arg(long)]
    no_follow: bool,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Print sorted runtimes of solved runs instead of the raw rows.
    #[arg(long)]
    sorted: bool,
    /// Write CSV to this file instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Complete,
    Basic,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Cost bound, or `auto` for the sum of shortest paths.
    #[arg(long, default_value = "auto")]
    xi: String,
    #[arg(long, value_enum, default_value = "complete")]
    mode: ModeArg,
    #[arg(long)]
    no_follow: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Plan in the format printed by `solve`.
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    no_follow: bool,
}

#[derive(Args)]
struct SatArgs {
    file: PathBuf,
    #[arg(long)]
    timeout: Option<f64>,
}

#[derive(Args)]
struct MddArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 0)]
    agent: usize,
    #[arg(long, default_value = "auto")]
    xi: String,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let parse = |v: &str| v.parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| format!("invalid grid size `{s}`"));
    Ok((parse(w)?, parse(h)?))
}

fn seconds(value: f64) -> Result<Duration, String> {
    Duration::try_from_secs_f64(value).map_err(|_| format!("invalid timeout {value}"))
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_instance(args: &InstanceArgs) -> Result<Instance, String> {
    let graph = parse_map(&read(&args.map)?).map_err(|e| format!("{}: {e}", args.map.display()))?;
    let spec = match (&args.capacity, &args.capacity_file) {
        (_, Some(path)) => parse_capacity_file(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?,
        (Some(c), None) => CapacitySpec::Uniform(i64::from(*c)),
        (None, None) => CapacitySpec::Uniform(1),
    };
    let capacities = load_capacities(&spec, &graph).map_err(|e| e.to_string())?;
    let agents = match (&args.scen, args.seed) {
        (Some(path), _) => {
            let mut agents = parse_scenario(&read(path)?, &graph).map_err(|e| format!("{}: {e}", path.display()))?;
            if agents.len() < args.agents {
                return Err(format!("{} lists {} agents, {} requested", path.display(), agents.len(), args.agents));
            }
            agents.truncate(args.agents);
            agents
        }
        (None, Some(seed)) => random_agents(&graph, &capacities, args.agents, seed).map_err(|e| e.to_string())?,
        (None, None) => unreachable!("clap requires --scen or --seed"),
    };
    Instance::new(graph, capacities, agents).map_err(|e| e.to_string())
}

fn resolve_xi(instance: &Instance, xi: &str) -> Result<u64, String> {
    let lower = cost_lower_bound(instance).map_err(|e| e.to_string())?;
    if xi == "auto" {
        return Ok(lower);
    }
    xi.parse().map_err(|_| format!("--xi expects a number or `auto`, got `{xi}`"))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_solve(args: SolveArgs) -> Result<u8, String> {
    let instance = load_instance(&args.instance)?;
    let limits = Limits {
        timeout: Some(seconds(args.timeout)?),
        no_follow: args.no_follow,
        refinement: match args.refinement {
            RefinementArg::Full => CapacityRefinement::FullSet,
            RefinementArg::Subsets => CapacityRefinement::Subsets,
        },
        ..Limits::default()
    };
    let kind = SolverKind::from(args.solver);
    match solve(&instance, kind, limits) {
        Ok(report) => {
            print!("{}", report.plan.to_text());
            eprintln!(
                "solver={} cost={} iterations={} refinements={} vars={} clauses={} time_s={:.3}",
                kind.name(),
                report.optimal_cost,
                report.iterations.len(),
                report.refinements(),
                report.final_vars(),
                report.final_clauses(),
                report.elapsed.as_secs_f64()
            );
            Ok(EXIT_OK)
        }
        Err(SolveError::Exhausted { reason, iterations }) => {
            let last = iterations.last().map_or(String::new(), |i| format!(" at cost bound {}", i.xi));
            eprintln!("exhausted: {reason}{last}");
            Ok(EXIT_EXHAUSTED)
        }
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<u8, String> {
    let source = match (args.grid, &args.map) {
        (Some((width, height)), _) => BenchSource::Grid { width, height },
        (None, Some(path)) => {
            let graph = parse_map(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
            let name = path.file_stem().map_or("map".into(), |s| s.to_string_lossy().into_owned());
            BenchSource::Map { name, graph }
        }
        (None, None) => unreachable!("clap requires --grid or --map"),
    };
    let config = BenchConfig {
        source,
        agents: args.agents,
        capacities: args.capacities,
        instances: args.instances,
        seed: args.seed,
        solvers: args.solvers.into_iter().map(SolverKind::from).collect(),
        timeout: seconds(args.timeout)?,
        no_follow: args.no_follow,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| e.to_string())?;
    let records = pool.install(|| run_bench(&config)).map_err(|e| e.to_string())?;
    let text = if args.sorted { sorted_runtime_table(&records) } else { records_to_csv(&records) };
    write_output(args.output.as_deref(), &text)?;
    eprintln!("{} rows, {} instances per agent count", records.len(), config.instances);
    Ok(EXIT_OK)
}

fn cmd_export(args: ExportArgs) -> Result<u8, String> {
    let instance = load_instance(&args.instance)?;
    let xi = resolve_xi(&instance, &args.xi)?;
    let options = EncodeOptions { no_follow: args.no_follow };
    let artifacts = match args.mode {
        ModeArg::Complete => encode_complete(&instance, xi, options),
        ModeArg::Basic => encode_basic(&instance, xi, &[], options),
    }
    .map_err(|e| e.to_string())?;
    write_output(args.output.as_deref(), &artifacts.formula.to_dimacs())?;
    Ok(EXIT_OK)
}

fn cmd_validate(args: ValidateArgs) -> Result<u8, String> {
    let instance = load_instance(&args.instance)?;
    let plan = Plan::parse(&read(&args.plan)?).map_err(|e| format!("{}: {e}", args.plan.display()))?;
    let violations = validate_plan_with(&instance, &plan, args.no_follow);
    if violations.is_empty() {
        println!("valid cost={} makespan={}", plan.sum_of_costs(), plan.makespan());
        return Ok(EXIT_OK);
    }
    for v in &violations {
        println!("{v}");
    }
    Ok(EXIT_ERROR)
}

fn cmd_sat(args: SatArgs) -> Result<u8, String> {
    let formula = CnfFormula::from_dimacs(&read(&args.file)?).map_err(|e| format!("{}: {e}", args.file.display()))?;
    let budget = match args.timeout {
        Some(t) => Budget::until(Instant::now() + seconds(t)?),
        None => Budget::unlimited(),
    };
    let mut solver = Solver::from_formula(&formula);
    match solver.solve(budget) {
        SatResult::Sat(model) => {
            if !formula.clauses().iter().all(|c| c.iter().any(|l| l.eval(&model))) {
                return Err("model fails replay".into());
            }
            println!("s SATISFIABLE");
            let values: Vec<String> =
                model.iter().enumerate().map(|(i, &b)| if b { format!("{}", i + 1) } else { format!("-{}", i + 1) }).collect();
            println!("v {} 0", values.join(" "));
            Ok(EXIT_OK)
        }
        SatResult::Unsat => {
            println!("s UNSATISFIABLE");
            Ok(EXIT_OK)
        }
        SatResult::Unknown => {
            println!("s UNKNOWN");
            Ok(EXIT_EXHAUSTED)
        }
    }
}

fn cmd_mdd(args: MddArgs) -> Result<u8, String> {
    let instance = load_instance(&args.instance)?;
    if args.agent >= instance.agent_count() {
        return Err(format!("agent {} out of range (k = {})", args.agent, instance.agent_count()));
    }
    let xi = resolve_xi(&instance, &args.xi)?;
    let horizon = compute_horizon(&instance, xi).map_err(|e| e.to_string())?;
    let mdd = build_mdd(&instance, args.agent, horizon).map_err(|e| e.to_string())?;
    print!("{}", mdd.dump());
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::ExportCnf(a) => cmd_export(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Sat(a) => cmd_sat(a),
        Command::Mdd(a) => cmd_mdd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
