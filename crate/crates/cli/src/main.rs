//! `mmplan`: solve `.domain` files, draw argumentation graphs and check the
//! solver against brute-force enumeration.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mmplan_core::domain_io::{self, Domain, DomainError};
use mmplan_core::eval::{expected_cost, goal_probability};
use mmplan_core::generate::{random_instance, GeneratorConfig};
use mmplan_core::oracle::{oracle_pareto_front, oracle_select, EnumerationBound, OracleError};
use mmplan_core::retrospection::{emit_argumentation_dot, select, MehrResult, RetroConfig, RetroError};
use mmplan_core::solver::{mplan, Solution, SolveError};
use mmplan_core::{Exact, Mmmdp, Policy, Real, Scalar, Worth, WorthVector};
use serde_json::{json, Value};

const EXIT_NO_POLICY: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_CAPACITY: u8 = 3;

#[derive(Parser)]
#[command(name = "mmplan", version, about = "Planning under moral uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find the undominated policies and select one by retrospection.
    Solve {
        file: PathBuf,
        /// Write a machine-readable report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        limits: Limits,
        /// Use exact rational arithmetic.
        #[arg(long)]
        exact: bool,
    },
    /// Write the argumentation graph of the selection as DOT.
    Graph {
        file: PathBuf,
        #[arg(long)]
        dot: PathBuf,
        #[command(flatten)]
        limits: Limits,
        #[arg(long)]
        exact: bool,
    },
    /// Compare the solver with enumeration on a file or on random instances.
    OracleCheck {
        #[arg(required_unless_present = "random", conflicts_with = "random")]
        file: Option<PathBuf>,
        /// Number of random instances.
        #[arg(long, requires = "seed")]
        random: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args, Clone, Copy)]
struct Limits {
    #[arg(long)]
    vector_cap: Option<usize>,
    #[arg(long)]
    max_policies: Option<usize>,
    #[arg(long)]
    max_histories: Option<usize>,
    /// Count each theory at most once per argument.
    #[arg(long)]
    per_theory_binary: bool,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure { code: EXIT_INPUT, message: message.to_string() }
    }
}

impl From<DomainError> for Failure {
    fn from(e: DomainError) -> Self {
        Failure::input(e)
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code =
            if e.is_capacity() || matches!(e, SolveError::NoConvergence(_)) { EXIT_CAPACITY } else { EXIT_INPUT };
        Failure { code, message: e.to_string() }
    }
}

impl From<RetroError> for Failure {
    fn from(e: RetroError) -> Self {
        let code = if e.is_capacity() { EXIT_CAPACITY } else { EXIT_INPUT };
        Failure { code, message: e.to_string() }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Retro(r) => r.into(),
            OracleError::BoundExceeded(_) => Failure { code: EXIT_CAPACITY, message: e.to_string() },
            other => Failure::input(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { file, report, limits, exact } => {
            if exact {
                solve::<Exact>(&file, report.as_deref(), limits, "exact")
            } else {
                solve::<Real>(&file, report.as_deref(), limits, "f64")
            }
        }
        Command::Graph { file, dot, limits, exact } => {
            if exact {
                graph::<Exact>(&file, &dot, limits)
            } else {
                graph::<Real>(&file, &dot, limits)
            }
        }
        Command::OracleCheck { file, random, seed } => match (file, random) {
            (Some(file), _) => oracle_check_file(&file),
            (None, Some(n)) => oracle_check_random(n, seed.unwrap_or(0)),
            (None, None) => Err(Failure::input("give a file or --random N --seed S")),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load<T: Scalar>(file: &Path, limits: Limits) -> Result<(Domain<T>, RetroConfig), Failure> {
    let mut domain = domain_io::parse_file::<T>(file)?;
    if let Some(v) = limits.vector_cap {
        domain.solver.vector_cap = v;
    }
    if let Some(v) = limits.max_policies {
        domain.solver.max_policies = v;
    }
    let mut retro = RetroConfig { per_theory_binary: limits.per_theory_binary, ..Default::default() };
    if let Some(v) = limits.max_histories {
        retro.max_histories = v;
    }
    Ok((domain, retro))
}

fn no_policy<T: Scalar>(model: &Mmmdp<T>) -> Failure {
    let message = match model.ssp() {
        Some(ssp) => format!("no policy reaches a goal within the budget of {}", ssp.budget.to_decimal()),
        None => "no policy found".into(),
    };
    Failure { code: EXIT_NO_POLICY, message }
}

fn solve<T: Scalar>(file: &Path, report: Option<&Path>, limits: Limits, arithmetic: &str) -> Result<(), Failure> {
    let (domain, retro) = load::<T>(file, limits)?;
    let model = &domain.model;
    let start = Instant::now();
    let solution = mplan(model, &domain.heuristic, domain.solver)?;
    let solved = start.elapsed();
    let result = if solution.policies.is_empty() { None } else { Some(select(model, &solution.policies, retro)?) };
    let elapsed = start.elapsed();

    print_summary(file, model, &solution, result.as_ref(), solved.as_secs_f64(), elapsed.as_secs_f64())?;
    if let Some(path) = report {
        let text = report_json(file, model, &solution, result.as_ref(), arithmetic)?;
        std::fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }
    match result {
        Some(_) => Ok(()),
        None => Err(no_policy(model)),
    }
}

fn worth_text<T: Scalar>(w: &Worth<T>) -> String {
    match w {
        Worth::Real(v) => v.to_decimal(),
        Worth::Flag(true) => "violated".into(),
        Worth::Flag(false) => "ok".into(),
    }
}

fn vector_text<T: Scalar>(v: &WorthVector<T>) -> String {
    let parts: Vec<String> = v.iter().map(worth_text).collect();
    format!("({})", parts.join(", "))
}

fn policy_lines<T: Scalar>(model: &Mmmdp<T>, policy: &Policy) -> Vec<String> {
    let mut rows: Vec<_> = policy.iter().filter(|&((s, _), _)| model.applicable_actions(s).count() > 1).collect();
    rows.sort_by_key(|&((s, t), _)| (t, s));
    rows.into_iter()
        .map(|((s, t), a)| format!("{:>4}  {:<28} {}", t, model.state_name(s), model.action_name(a)))
        .collect()
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

fn print_summary<T: Scalar>(
    file: &Path,
    model: &Mmmdp<T>,
    solution: &Solution<'_, T>,
    result: Option<&MehrResult<T>>,
    solve_secs: f64,
    total_secs: f64,
) -> Result<(), Failure> {
    let stats = solution.stats;
    let space = model.num_states() * model.horizon();
    println!(
        "{}: {} states, {} actions, horizon {}",
        file.display(),
        model.num_states(),
        model.num_actions(),
        model.horizon()
    );
    println!(
        "search: {} expansions ({:.1}% of {} state-times, {} reachable), {} backups, {} iterations",
        stats.expansions,
        percent(stats.expansions, space),
        space,
        solution.workspace.state_time_count(),
        stats.backups,
        stats.iterations
    );
    let Some(result) = result else {
        println!("no policies");
        return Ok(());
    };
    let names: Vec<&str> = model.considerations().iter().map(|c| c.name.as_str()).collect();
    println!("{} undominated policies; worth over [{}]", result.policies.len(), names.join(", "));
    let chosen = result.chosen();
    for (i, root) in result.roots.iter().enumerate() {
        let mark = if i == chosen {
            '*'
        } else if result.selected.contains(&i) {
            '='
        } else {
            ' '
        };
        let mut line =
            format!("{mark} {i:>4}  N = {:<24} {}", result.non_acceptability[i].to_decimal(), vector_text(root));
        if let Some(costs) = &result.expected_costs {
            line.push_str(&format!("  cost {}", costs[i].to_decimal()));
        }
        println!("{line}");
    }
    println!("selected policy {chosen} (minimal non-acceptability: {:?}); choices with alternatives:", result.selected);
    for line in policy_lines(model, &result.policies[chosen]) {
        println!("  {line}");
    }
    println!("time: {solve_secs:.3} s search, {total_secs:.3} s total");
    Ok(())
}

fn number<T: Scalar>(v: &T) -> Value {
    let text = v.to_decimal();
    match serde_json::Number::from_str(&text) {
        Ok(n) => Value::Number(n),
        Err(_) => Value::String(text),
    }
}

fn worth_value<T: Scalar>(w: &Worth<T>) -> Value {
    match w {
        Worth::Real(v) => number(v),
        Worth::Flag(b) => Value::Bool(*b),
    }
}

/// Deterministic for identical inputs; no timings.
fn report_json<T: Scalar>(
    file: &Path,
    model: &Mmmdp<T>,
    solution: &Solution<'_, T>,
    result: Option<&MehrResult<T>>,
    arithmetic: &str,
) -> Result<String, Failure> {
    let stats = solution.stats;
    let space = model.num_states() * model.horizon();
    let mut policies = Vec::new();
    if let Some(r) = result {
        for (i, p) in r.policies.iter().enumerate() {
            let mut entry = serde_json::Map::new();
            entry.insert("id".into(), json!(i));
            entry.insert("root".into(), Value::Array(r.roots[i].iter().map(worth_value).collect()));
            entry.insert("non_acceptability".into(), number(&r.non_acceptability[i]));
            entry.insert("histories".into(), json!(r.histories[i].len()));
            if model.ssp().is_some() {
                let cost = expected_cost(model, p).map_err(Failure::input)?.expect("budgeted model");
                entry.insert("expected_cost".into(), number(&cost));
                entry.insert("goal_probability".into(), number(&goal_probability(model, p).map_err(Failure::input)?));
            }
            policies.push(Value::Object(entry));
        }
    }
    let chosen = result.map(|r| {
        let p = &r.policies[r.chosen()];
        let mut rows: Vec<_> = p.iter().collect();
        rows.sort_by_key(|&((s, t), _)| (t, s));
        rows.into_iter()
            .map(|((s, t), a)| json!({"state": model.state_name(s), "time": t, "action": model.action_name(a)}))
            .collect::<Vec<_>>()
    });
    let report = json!({
        "schema_version": domain_io::SCHEMA_VERSION,
        "domain": file.file_name().map(|n| n.to_string_lossy().into_owned()),
        "arithmetic": arithmetic,
        "considerations": model.considerations().iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
        "theories": model.theories().iter().map(|t| t.name.clone()).collect::<Vec<_>>(),
        "budget": model.ssp().map(|s| number(&s.budget)),
        "selected": result.map(|r| r.selected.clone()).unwrap_or_default(),
        "chosen": result.map(|r| r.chosen()),
        "chosen_policy": chosen,
        "policies": policies,
        "stats": {
            "expansions": stats.expansions,
            "expansion_percent": number(&percent(stats.expansions, space)),
            "state_times": space,
            "reachable_state_times": solution.workspace.state_time_count(),
            "backups": stats.backups,
            "iterations": stats.iterations,
        },
    });
    Ok(domain_io::render(&report))
}

fn graph<T: Scalar>(file: &Path, dot: &Path, limits: Limits) -> Result<(), Failure> {
    let (domain, retro) = load::<T>(file, limits)?;
    let solution = mplan(&domain.model, &domain.heuristic, domain.solver)?;
    if solution.policies.is_empty() {
        return Err(no_policy(&domain.model));
    }
    let result = select(&domain.model, &solution.policies, retro)?;
    let text = emit_argumentation_dot(&domain.model, &result).map_err(Failure::input)?;
    std::fs::write(dot, text).map_err(|e| Failure::input(format!("{}: {e}", dot.display())))?;
    println!(
        "{} arguments, {} attacks -> {}",
        result.arguments.len(),
        result.attacks(&domain.model).map_err(Failure::input)?.len(),
        dot.display()
    );
    Ok(())
}

enum Check {
    Same,
    Skipped(String),
    Differs(String),
}

fn same_vectors<T: Scalar>(a: &[WorthVector<T>], b: &[WorthVector<T>]) -> bool {
    a.iter().all(|v| b.contains(v)) && b.iter().all(|v| a.contains(v))
}

fn check<T: Scalar>(
    model: &Mmmdp<T>,
    heuristic: &mmplan_core::Heuristic<T>,
    solver: mmplan_core::solver::SolverConfig,
) -> Result<Check, Failure> {
    let bound = EnumerationBound::default();
    let front = match oracle_pareto_front(model, bound) {
        Ok(f) => f,
        Err(OracleError::BoundExceeded(n)) => return Ok(Check::Skipped(format!("more than {n} policies"))),
        Err(e) => return Err(e.into()),
    };
    let solution = mplan(model, heuristic, solver)?;
    if !same_vectors(&solution.root_vectors, &front) {
        return Ok(Check::Differs(format!(
            "fronts differ: solver {} vectors, enumeration {}",
            solution.root_vectors.len(),
            front.len()
        )));
    }
    let retro = RetroConfig::default();
    let oracle = oracle_select(model, bound, retro)?;
    let ours = if solution.policies.is_empty() { None } else { Some(select(model, &solution.policies, retro)?) };
    let chosen = |r: &Option<MehrResult<T>>| -> Vec<Policy> {
        r.as_ref().map(|r| r.selected.iter().map(|&i| r.policies[i].clone()).collect()).unwrap_or_default()
    };
    if chosen(&ours) != chosen(&oracle) {
        return Ok(Check::Differs("selected sets differ".into()));
    }
    Ok(Check::Same)
}

fn oracle_check_file(file: &Path) -> Result<(), Failure> {
    let domain = domain_io::parse_file::<Exact>(file)?;
    match check(&domain.model, &domain.heuristic, domain.solver)? {
        Check::Same => {
            println!("{}: solver and enumeration agree", file.display());
            Ok(())
        }
        Check::Skipped(why) => {
            println!("{}: skipped, {why}", file.display());
            Ok(())
        }
        Check::Differs(why) => Err(Failure { code: EXIT_NO_POLICY, message: format!("{}: {why}", file.display()) }),
    }
}

fn oracle_check_random(n: u64, seed: u64) -> Result<(), Failure> {
    let (mut same, mut skipped, mut differ) = (0, 0, Vec::new());
    for i in 0..n {
        let s = seed.wrapping_add(i);
        let config = GeneratorConfig { budgeted: i % 2 == 1, ..Default::default() };
        let (model, heuristic) = random_instance::<Exact>(s, config);
        match check(&model, &heuristic, Default::default())? {
            Check::Same => same += 1,
            Check::Skipped(why) => {
                println!("seed {s}: skipped, {why}");
                skipped += 1;
            }
            Check::Differs(why) => {
                println!("seed {s}: {why}");
                differ.push(s);
            }
        }
    }
    println!("{same} agree, {skipped} skipped, {} differ", differ.len());
    if differ.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: EXIT_NO_POLICY, message: format!("mismatching seeds: {differ:?}") })
    }
}
