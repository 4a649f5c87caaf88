use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use dmfg::export::{read_strategy, write_json, write_path, write_strategy, write_trace};
use dmfg::format::load_spec;
use dmfg::scenario::{self, named_strategy};
use dmfg::sim::{deviation_test, simulate, CostEstimate, DeviationReport, SimConfig, RNG_NAME};
use dmfg::solver::IterationRecord;
use dmfg::validate::IssueKind;
use dmfg::{
    exploitability, integrate_population, solve_mfe, validate_spec, Damping, GameSpec, SolverConfig, Strategy,
    TimeGrid, TimeMode,
};
use rayon::prelude::*;
use serde::Serialize;

const FORMAT_VERSION: u32 = 1;
/// Default step of continuous-time grids.
const DEFAULT_STEP: f64 = 0.01;
/// Largest discounted tail allowed when the horizon is truncated.
const TAIL_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "dmfg", version, about = "Discrete mean field games: solve, simulate, evaluate")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a game spec file and print the report.
    Validate {
        spec_file: Option<PathBuf>,
        #[arg(long, conflicts_with = "spec_file")]
        scenario: Option<String>,
    },
    /// Search for a mean field equilibrium.
    Solve(SolveArgs),
    /// Simulate the N-player game and estimate player 0's cost.
    Simulate(SimulateArgs),
    /// Exploitability of a strategy.
    Exploit(ExploitArgs),
}

#[derive(Args)]
struct GameArgs {
    /// Game spec file (TOML).
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    spec: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Args)]
struct GridArgs {
    /// Number of grid intervals (default: step 0.01 in continuous time, 1 in discrete time).
    #[arg(long)]
    grid_steps: Option<usize>,
    /// End of the time grid (default: the horizon, or the truncation point of a discounted game).
    #[arg(long)]
    t_end: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    game: GameArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// `fp` (fictitious play) or `fixed:<lambda>`.
    #[arg(long, default_value = "fp")]
    damping: String,
    /// Exploitability tolerance.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Tolerance on the sup-norm change of the population path.
    #[arg(long, default_value_t = 1e-6)]
    path_tol: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    game: GameArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Number of players.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Population strategy: a strategy CSV file or a name (uniform, always:<a>, switch:<a>:<b>:<t>, grim, grim:<k>, punish).
    #[arg(long)]
    strategy: String,
    /// Strategy of player 0 when deviating (file or name).
    #[arg(long)]
    deviation: Option<String>,
    /// Write trace CSVs for the first K replications.
    #[arg(long, value_name = "K", num_args = 0..=1, default_missing_value = "1")]
    trace: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ExploitArgs {
    #[command(flatten)]
    game: GameArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Strategy CSV file or name.
    #[arg(long)]
    strategy: String,
    /// Directory for exploit.json and the best response.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn invalid(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<dmfg::Error>() {
            Some(
                dmfg::Error::InvalidSpec(_)
                | dmfg::Error::Format(_)
                | dmfg::Error::UnknownScenario(_)
                | dmfg::Error::UnknownStrategy(_)
                | dmfg::Error::InvalidStrategy(_)
                | dmfg::Error::InvalidConfig(_)
                | dmfg::Error::Csv(_),
            ) => 2,
            _ => 3,
        };
        Failure { code, error }
    }
}

impl From<dmfg::Error> for Failure {
    fn from(e: dmfg::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match cli.command {
        Command::Validate { spec_file, scenario } => cmd_validate(spec_file, scenario),
        Command::Solve(a) => cmd_solve(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Exploit(a) => cmd_exploit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_game(spec: Option<&Path>, scenario: Option<&str>) -> Result<GameSpec, Failure> {
    match (spec, scenario) {
        (Some(p), _) => Ok(load_spec(p)?),
        (None, Some(name)) => Ok(scenario::scenario(name)?),
        (None, None) => Err(invalid(anyhow!("give a spec file or --scenario"))),
    }
}

/// Loads the game and refuses specs with structural problems. A
/// discontinuous cost is only a warning: the solver still runs, it just has
/// no existence guarantee.
fn load_checked(game: &GameArgs) -> Result<GameSpec, Failure> {
    let spec = load_game(game.spec.as_deref(), game.scenario.as_deref())?;
    let report = validate_spec(&spec);
    let fatal = report.issues.iter().filter(|i| i.kind != IssueKind::DiscontinuousCost).count();
    if fatal > 0 {
        return Err(invalid(anyhow!("invalid game spec:\n{report}")));
    }
    for issue in &report.issues {
        eprintln!("warning: {issue}");
    }
    Ok(spec)
}

fn build_grid(spec: &GameSpec, args: &GridArgs) -> Result<TimeGrid, Failure> {
    let default = spec.default_grid(DEFAULT_STEP, TAIL_TOL)?;
    let t_end = args.t_end.unwrap_or(default.t_end());
    let n_steps = match (args.grid_steps, spec.time_mode()) {
        (Some(n), _) => n,
        (None, TimeMode::Continuous) if args.t_end.is_none() => default.n_steps(),
        (None, TimeMode::Continuous) => ((t_end / DEFAULT_STEP).ceil() as usize).max(1),
        (None, TimeMode::Discrete) => t_end.round() as usize,
    };
    Ok(TimeGrid::new(t_end, n_steps).map_err(invalid)?)
}

/// A strategy given as a CSV path (when such a file exists) or a name.
fn load_strategy(spec: &GameSpec, arg: &str, grid: &TimeGrid) -> Result<Strategy, Failure> {
    let path = Path::new(arg);
    if path.is_file() {
        let file = File::open(path).with_context(|| format!("opening {arg}"))?;
        let s = read_strategy(file, spec, grid.t_end())
            .with_context(|| format!("reading strategy file {arg}"))
            .map_err(invalid)?;
        return Ok(s.into());
    }
    Ok(named_strategy(spec, arg, grid)?)
}

fn parse_damping(s: &str) -> Result<Damping, Failure> {
    match s {
        "fp" => Ok(Damping::FictitiousPlay),
        _ => s
            .strip_prefix("fixed:")
            .and_then(|v| v.parse().ok())
            .map(Damping::Fixed)
            .ok_or_else(|| invalid(anyhow!("damping must be `fp` or `fixed:<lambda>`, got `{s}`"))),
    }
}

fn create_file(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    version: &'a str,
    unix_time: u64,
}

/// Run metadata kept out of the deterministic payload.
fn write_meta(dir: &Path, command: &str) -> anyhow::Result<()> {
    let unix_time = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = Meta {
        command,
        version: env!("CARGO_PKG_VERSION"),
        unix_time,
    };
    write_json(create_file(dir, "meta.json")?, &meta)?;
    Ok(())
}

#[derive(Serialize)]
struct GridSummary {
    t_end: f64,
    n_steps: usize,
    step: f64,
}

impl From<&TimeGrid> for GridSummary {
    fn from(g: &TimeGrid) -> Self {
        Self {
            t_end: g.t_end(),
            n_steps: g.n_steps(),
            step: g.step(),
        }
    }
}

fn cmd_validate(spec_file: Option<PathBuf>, scenario: Option<String>) -> CmdResult {
    let spec = load_game(spec_file.as_deref(), scenario.as_deref()).map_err(|f| Failure { code: 2, ..f })?;
    let report = validate_spec(&spec);
    if report.is_valid() {
        println!("{}: valid ({} states, {} actions)", spec.name, spec.n_states(), spec.n_actions());
        Ok(())
    } else {
        println!("{}:\n{report}", spec.name);
        Err(invalid(anyhow!("{} issue(s) found", report.issues.len())))
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    format_version: u32,
    game: &'a str,
    converged: bool,
    iterations: usize,
    exploitability: f64,
    pure: bool,
    damping: &'a str,
    max_iters: usize,
    eps: f64,
    path_tol: f64,
    grid: GridSummary,
    history: &'a [IterationRecord],
}

fn cmd_solve(a: SolveArgs) -> CmdResult {
    let spec = load_checked(&a.game)?;
    let grid = build_grid(&spec, &a.grid)?;
    let mut cfg = SolverConfig::new(grid);
    cfg.max_iters = a.max_iters;
    cfg.damping = parse_damping(&a.damping)?;
    cfg.eps_tol = a.eps;
    cfg.path_tol = a.path_tol;
    cfg.validate().map_err(invalid)?;
    let r = solve_mfe(&spec, &cfg)?;

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_strategy(create_file(&a.out, "strategy.csv")?, &r.strategy)?;
    write_path(create_file(&a.out, "mpath.csv")?, &r.mpath)?;
    let summary = SolveSummary {
        format_version: FORMAT_VERSION,
        game: &spec.name,
        converged: r.converged,
        iterations: r.iterations,
        exploitability: r.exploitability,
        pure: r.strategy.is_pure(),
        damping: &a.damping,
        max_iters: a.max_iters,
        eps: a.eps,
        path_tol: a.path_tol,
        grid: (&grid).into(),
        history: &r.history,
    };
    write_json(create_file(&a.out, "summary.json")?, &summary)?;
    write_meta(&a.out, "solve")?;
    println!(
        "{}: converged={} iterations={} exploitability={:.3e}",
        spec.name, r.converged, r.iterations, r.exploitability
    );
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    format_version: u32,
    game: &'a str,
    rng: &'a str,
    strategy: &'a str,
    grid: GridSummary,
    estimate: CostEstimate,
    /// Mean over replications of `sup_t |M^N(t) - m(t)|`.
    mean_field_deviation: f64,
    tail_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    deviation: Option<DeviationSummary<'a>>,
}

#[derive(Serialize)]
struct DeviationSummary<'a> {
    strategy: &'a str,
    estimate: CostEstimate,
    gain: CostEstimate,
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let spec = load_checked(&a.game)?;
    let grid = build_grid(&spec, &a.grid)?;
    let population = load_strategy(&spec, &a.strategy, &grid)?;
    let cfg = SimConfig::new(a.n, a.seed, a.reps, grid, population.clone());
    cfg.validate(&spec).map_err(|e| match e {
        dmfg::Error::GridMismatch(_) => invalid(e),
        other => other.into(),
    })?;

    let mpath = integrate_population(&spec, &population, &grid)?;
    let n_traces = a.trace.unwrap_or(0).min(a.reps);
    let runs: Vec<(f64, f64, f64, Option<dmfg::sim::SimTrace>)> = (0..a.reps as u64)
        .into_par_iter()
        .map(|rep| {
            simulate(&spec, &cfg, rep).map(|t| {
                let sup = t.sup_deviation(&mpath);
                let keep = (rep as usize) < n_traces;
                (t.cost, sup, t.tail_bound, keep.then_some(t))
            })
        })
        .collect::<dmfg::Result<_>>()?;
    let costs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let mean_sup = runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64;
    let tail_bound = runs.first().map_or(0.0, |r| r.2);

    let deviation = match &a.deviation {
        Some(name) => {
            let dev = load_strategy(&spec, name, &grid)?;
            let report: DeviationReport = deviation_test(&spec, &cfg, &population, &[(name.clone(), dev)])?;
            let entry = report.deviations.into_iter().next().ok_or_else(|| anyhow!("empty deviation report"))?;
            Some(DeviationSummary {
                strategy: name,
                estimate: entry.estimate,
                gain: entry.gain,
            })
        }
        None => None,
    };

    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (rep, run) in runs.iter().enumerate() {
        if let Some(trace) = &run.3 {
            write_trace(create_file(&a.out, &format!("trace_{rep}.csv"))?, trace)?;
        }
    }
    let summary = SimulateSummary {
        format_version: FORMAT_VERSION,
        game: &spec.name,
        rng: RNG_NAME,
        strategy: &a.strategy,
        grid: (&grid).into(),
        estimate: CostEstimate::from_samples(&costs, a.n, a.seed),
        mean_field_deviation: mean_sup,
        tail_bound,
        deviation,
    };
    write_json(create_file(&a.out, "estimate.json")?, &summary)?;
    write_meta(&a.out, "simulate")?;
    let e = &summary.estimate;
    match e.ci95 {
        Some(ci) => println!("V^N = {:.6} +- {:.6} (95%, R={}, N={})", e.mean, ci, e.reps, e.n_players),
        None => println!("V^N = {:.6} (R={}, N={})", e.mean, e.reps, e.n_players),
    }
    if let Some(d) = &summary.deviation {
        println!("deviation {}: V^N = {:.6}, gain {:.6}", d.strategy, d.estimate.mean, d.gain.mean);
    }
    Ok(())
}

#[derive(Serialize)]
struct ExploitSummary<'a> {
    format_version: u32,
    game: &'a str,
    strategy: &'a str,
    exploitability: f64,
    v_pi: f64,
    v_br: f64,
    grid: GridSummary,
}

fn cmd_exploit(a: ExploitArgs) -> CmdResult {
    let spec = load_checked(&a.game)?;
    let grid = build_grid(&spec, &a.grid)?;
    let pi = load_strategy(&spec, &a.strategy, &grid)?;
    let ex = exploitability(&spec, &pi, &grid)?;
    println!("{}", ex.value);
    if let Some(out) = &a.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let summary = ExploitSummary {
            format_version: FORMAT_VERSION,
            game: &spec.name,
            strategy: &a.strategy,
            exploitability: ex.value,
            v_pi: ex.v_pi,
            v_br: ex.v_br,
            grid: (&grid).into(),
        };
        write_json(create_file(out, "exploit.json")?, &summary)?;
        write_strategy(create_file(out, "best_response.csv")?, &ex.best_response)?;
        write_meta(out, "exploit")?;
    }
    Ok(())
}
