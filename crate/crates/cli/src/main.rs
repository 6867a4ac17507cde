//! `hpucsp` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use hpucsp::config::SolverConfig;
use hpucsp::doc::{instance_to_json, load_instance, load_schedule, schedule_to_csv, schedule_to_json};
use hpucsp::evaluate::{check_feasibility, evaluate_unchecked, ObjectiveBreakdown, Violation};
use hpucsp::gen::{make_campus, make_figure2, random_tiny, CampusProfile, CapacityMode};
use hpucsp::model::{Instance, Scenario};
use hpucsp::oracle::{solve_exact, OracleLimits};
use hpucsp::pra::enumerate_pras;
use hpucsp::report::{RunReport, SolveReport};
use hpucsp::solve::{configure, solve};
use hpucsp::sweep::run_sweep;

/// Worker threads for parallel runs; defaults to all cores.
const WORKERS_ENV: &str = "HPUCSP_WORKERS";

#[derive(Parser)]
#[command(name = "hpucsp", version, about = "Course scheduling with partial in-person instruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance document.
    Generate(GenerateArgs),
    /// Load an instance (and optionally a schedule) and report problems.
    Validate(ValidateArgs),
    /// Run OFFICE and write the best schedule and reports.
    Solve(SolveArgs),
    /// Print the objective breakdown and violations of a schedule.
    Evaluate(EvaluateArgs),
    /// Solve a small instance exactly.
    Oracle(OracleArgs),
    /// Run a grid of MinFraction values and scenarios.
    Sweep(SweepArgs),
    /// Recompute report statistics for a schedule.
    Report(ReportArgs),
    /// Per-section counts of possible room assignments.
    Pras(PrasArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Campus,
    Figure2,
    Tiny,
}

#[derive(Clone, Copy, ValueEnum)]
enum Capacities {
    Pandemic,
    Normal,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "campus")]
    kind: GenKind,
    /// Campus profile document; defaults to the built-in full-scale profile.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Scale applied to the built-in profile.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, value_enum)]
    capacities: Option<Capacities>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    schedule: Option<PathBuf>,
}

/// Instance and solver settings shared by the solving commands.
#[derive(Args)]
struct ProblemArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Preset name (`pandemic`, `normal-assignment`) or config file.
    #[arg(long, default_value = "pandemic")]
    config: String,
    #[arg(long, default_value = "NR")]
    scenario: Scenario,
    /// Overrides the MinFraction of every non-exam section.
    #[arg(long)]
    min_fraction: Option<f64>,
    /// Treat MinFraction as a hard constraint.
    #[arg(long)]
    enforce_min_fraction: bool,
}

impl ProblemArgs {
    fn load(&self) -> Result<(Instance, SolverConfig)> {
        let instance = read_instance(&self.instance)?;
        let mut config = read_config(&self.config)?;
        if let Some(f) = self.min_fraction {
            config.min_fraction = Some(f);
        }
        if self.enforce_min_fraction {
            config.weights.enforce_min_fraction = true;
        }
        Ok((instance, config))
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    time_limit_secs: Option<f64>,
    #[arg(long)]
    max_iterations: Option<u64>,
    #[arg(long)]
    stall_iterations: Option<u64>,
}

impl RunArgs {
    fn apply(&self, config: &mut SolverConfig) {
        let a = &mut config.anneal;
        if let Some(s) = self.seed {
            a.seed = s;
        }
        if let Some(r) = self.runs {
            a.runs = r;
        }
        if let Some(t) = self.time_limit_secs {
            a.time_limit_secs = t;
        }
        if self.max_iterations.is_some() {
            a.max_iterations = self.max_iterations;
        }
        if self.stall_iterations.is_some() {
            a.stall_iterations = self.stall_iterations;
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    /// Score with these weights instead of the instance's own.
    #[arg(long)]
    config: Option<String>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    node_budget: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.15, 0.2, 0.25])]
    fractions: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [Scenario::NR, Scenario::R])]
    scenarios: Vec<Scenario>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    schedule: PathBuf,
    /// Also count possible room assignments per section.
    #[arg(long)]
    with_pras: bool,
}

#[derive(Args)]
struct PrasArgs {
    #[command(flatten)]
    problem: ProblemArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = init_workers() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
        Command::Pras(a) => cmd_pras(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn init_workers() -> Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{WORKERS_ENV} must be a positive integer, got '{value}'"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_instance(path: &Path) -> Result<Instance> {
    load_instance(&read_text(path)?).with_context(|| format!("invalid instance {}", path.display()))
}

fn read_config(name_or_path: &str) -> Result<SolverConfig> {
    if let Ok(c) = SolverConfig::preset(name_or_path) {
        return Ok(c);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        bail!("'{name_or_path}' is neither a preset (pandemic, normal-assignment) nor a file");
    }
    SolverConfig::from_json(&read_text(path)?).with_context(|| format!("invalid config {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

fn cmd_generate(a: GenerateArgs) -> Result<u8> {
    let instance = match a.kind {
        GenKind::Figure2 => make_figure2(),
        GenKind::Tiny => random_tiny(a.seed),
        GenKind::Campus => {
            let mut profile = match &a.profile {
                Some(p) => serde_json::from_str(&read_text(p)?).with_context(|| format!("invalid profile {}", p.display()))?,
                None => CampusProfile::scaled(a.scale),
            };
            if let Some(c) = a.capacities {
                profile.capacity_mode = match c {
                    Capacities::Pandemic => CapacityMode::Pandemic,
                    Capacities::Normal => CapacityMode::Normal,
                };
            }
            make_campus(&profile, a.seed)?
        }
    };
    let mut text = instance_to_json(&instance);
    text.push('\n');
    match &a.out {
        Some(p) => {
            write(p, &text)?;
            info!(
                "wrote {} ({} sections, {} rooms)",
                p.display(),
                instance.sections.len(),
                instance.rooms.len()
            );
        }
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_validate(a: ValidateArgs) -> Result<u8> {
    let instance = read_instance(&a.instance)?;
    let mut no_pra = Vec::new();
    for s in 0..instance.sections.len() {
        if enumerate_pras(&instance, s, Scenario::NR).is_empty() {
            no_pra.push(s + 1);
        }
    }
    println!(
        "instance: {} sections, {} rooms, {} meeting times, {} weeks",
        instance.sections.len(),
        instance.rooms.len(),
        instance.meeting_times.len(),
        instance.calendar.weeks
    );
    let mut code = 0;
    if !no_pra.is_empty() {
        println!("sections without any feasible room set: {no_pra:?}");
        code = 1;
    }
    if let Some(path) = &a.schedule {
        let schedule = load_schedule(&read_text(path)?, &instance).with_context(|| format!("invalid schedule {}", path.display()))?;
        let violations = check_feasibility(&instance, &schedule);
        for v in &violations {
            println!("{v}");
        }
        println!("schedule: {} violations", violations.len());
        if !violations.is_empty() {
            code = 1;
        }
    }
    Ok(code)
}

fn cmd_solve(a: SolveArgs) -> Result<u8> {
    let (instance, mut config) = a.problem.load()?;
    a.run.apply(&mut config);
    let scenario = a.problem.scenario;
    info!(
        "solving {} sections, scenario {scenario}, {} run(s), time limit {} s",
        instance.sections.len(),
        config.anneal.runs,
        config.anneal.time_limit_secs
    );
    let outcome = solve(&instance, &config, scenario)?;
    for w in &outcome.prepared.warnings {
        warn!("{w}");
    }
    let (report, run_reports) = SolveReport::from_outcome(&outcome, scenario);
    let best = outcome.best_run();
    let out = &a.out_dir;
    write(&out.join("best_schedule.json"), &(schedule_to_json(&best.schedule) + "\n"))?;
    write(&out.join("best_schedule.csv"), &schedule_to_csv(&outcome.prepared.instance, &best.schedule))?;
    write(&out.join("report.json"), &to_json(&report))?;
    for (i, (run, r)) in outcome.runs.iter().zip(&run_reports).enumerate() {
        write(&out.join(format!("run_{}_report.json", i + 1)), &to_json(r))?;
        write(&out.join(format!("run_{}_log.jsonl", i + 1)), &run.log_jsonl())?;
    }
    println!(
        "best objective {} (run {}), mass-meeting share {:.4}",
        best.breakdown.total,
        outcome.best + 1,
        report.best.mass_meeting_share
    );
    if report.best.fairness_met {
        Ok(0)
    } else {
        println!("sections below MinFraction: {:?}", report.best.below_min_fraction);
        Ok(2)
    }
}

#[derive(Serialize)]
struct EvaluateOutput<'a> {
    feasible: bool,
    violations: &'a [Violation],
    breakdown: &'a ObjectiveBreakdown,
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<u8> {
    let mut instance = read_instance(&a.instance)?;
    if let Some(c) = &a.config {
        instance = instance.with_weights(read_config(c)?.weights)?;
    }
    let schedule = load_schedule(&read_text(&a.schedule)?, &instance)
        .with_context(|| format!("invalid schedule {}", a.schedule.display()))?;
    let violations = check_feasibility(&instance, &schedule);
    let breakdown = evaluate_unchecked(&instance, &schedule, &instance.weights);
    let out = EvaluateOutput {
        feasible: violations.is_empty(),
        violations: &violations,
        breakdown: &breakdown,
    };
    print!("{}", to_json(&out));
    for v in &violations {
        eprintln!("violation: {v}");
    }
    Ok(if violations.is_empty() { 0 } else { 1 })
}

#[derive(Serialize)]
struct OracleOutput {
    scenario: String,
    nodes: u64,
    total: f64,
    components: [f64; 7],
    report: RunReport,
}

fn cmd_oracle(a: OracleArgs) -> Result<u8> {
    let (instance, config) = a.problem.load()?;
    let scenario = a.problem.scenario;
    let (instance, warnings) = configure(&instance, &config, scenario)?;
    for w in &warnings {
        warn!("{w}");
    }
    let mut limits = OracleLimits::default();
    if let Some(b) = a.node_budget {
        limits.node_budget = b;
    }
    let solution = solve_exact(&instance, &limits)?;
    let report = RunReport::from_breakdown(&instance, &solution.schedule, &solution.breakdown, None);
    let out = &a.out_dir;
    write(&out.join("oracle_schedule.json"), &(schedule_to_json(&solution.schedule) + "\n"))?;
    write(&out.join("oracle_schedule.csv"), &schedule_to_csv(&instance, &solution.schedule))?;
    let fairness_met = report.fairness_met;
    let doc = OracleOutput {
        scenario: scenario.to_string(),
        nodes: solution.nodes,
        total: solution.breakdown.total,
        components: solution.breakdown.components,
        report,
    };
    write(&out.join("oracle_report.json"), &to_json(&doc))?;
    println!("optimal objective {} ({} nodes)", solution.breakdown.total, solution.nodes);
    Ok(if fairness_met { 0 } else { 2 })
}

fn cmd_sweep(a: SweepArgs) -> Result<u8> {
    let (instance, mut config) = a.problem.load()?;
    a.run.apply(&mut config);
    if let Some(f) = a.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        bail!("fraction {f} is outside (0, 1]");
    }
    let table = run_sweep(&instance, &config, &a.fractions, &a.scenarios)?;
    write(&a.out_dir.join("sweep.tsv"), &table.to_tsv())?;
    write(&a.out_dir.join("sweep.json"), &to_json(&table))?;
    print!("{}", table.to_tsv());
    Ok(0)
}

fn cmd_report(a: ReportArgs) -> Result<u8> {
    let (instance, config) = a.problem.load()?;
    let (instance, _) = configure(&instance, &config, a.problem.scenario)?;
    let schedule = load_schedule(&read_text(&a.schedule)?, &instance)
        .with_context(|| format!("invalid schedule {}", a.schedule.display()))?;
    let avg_pras = if a.with_pras {
        let total: usize = (0..instance.sections.len())
            .map(|s| enumerate_pras(&instance, s, a.problem.scenario).len())
            .sum();
        Some(total as f64 / instance.sections.len().max(1) as f64)
    } else {
        None
    };
    let report = RunReport::build(&instance, &schedule, &instance.weights, avg_pras);
    print!("{}", to_json(&report));
    Ok(0)
}

fn cmd_pras(a: PrasArgs) -> Result<u8> {
    let (instance, config) = a.problem.load()?;
    let scenario = a.problem.scenario;
    let (instance, _) = configure(&instance, &config, scenario)?;
    println!("section\tenrollment\tpras");
    let mut total = 0usize;
    for (s, sec) in instance.sections.iter().enumerate() {
        let n = enumerate_pras(&instance, s, scenario).len();
        total += n;
        println!("{}\t{}\t{}", s + 1, sec.enrollment, n);
    }
    println!(
        "average\t\t{:.1}",
        total as f64 / instance.sections.len().max(1) as f64
    );
    Ok(0)
}
