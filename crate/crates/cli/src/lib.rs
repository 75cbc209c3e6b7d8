//! The `spa` command line.
//!
//! Exit codes: 0 on success, 2 for bad input (arguments, model files,
//! unreachable targets, oracle budgets), 3 for numerical failures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use spa_core::fixtures;
use spa_core::learning::{run_learning, LearningConfig};
use spa_core::lp::Tolerances;
use spa_core::model::load_model;
use spa_core::oracle;
use spa_core::policy_forward::{rollout, CommitmentPolicy, DeviationPlan, PolicyHandle, StepDeviation};
use spa_core::valueset_dp::{build_with, max_principal_value_with, root_system, BuildOptions, PolytopeDump, PolytopeMap};
use spa_core::{Error, GameModel, History};

#[derive(Debug, Parser)]
#[command(name = "spa", version, about = "Optimal commitment in stochastic principal-agent games")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// LP feasibility tolerance.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol_feas: f64,
    /// LP optimality tolerance.
    #[arg(long, global = true, default_value_t = 1e-7)]
    pub tol_obj: f64,
    /// Suppress diagnostics on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the value polytopes and report the optimal principal value.
    Solve(SolveArgs),
    /// Query or simulate the optimal commitment policy.
    Policy(PolicyArgs),
    /// Exact checks on small instances.
    Oracle(OracleArgs),
    /// Explore, commit and measure regret.
    Learn(LearnArgs),
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Game file, or the name of a built-in fixture.
    #[arg(long)]
    pub model: String,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Approximation accuracy of the principal's value.
    #[arg(long)]
    pub epsilon: f64,
    /// Directory for `polytopes.json` and `summary.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PolicySource {
    /// Approximation accuracy used to build the polytopes.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Reuse polytopes written by `solve --out` instead of rebuilding.
    #[arg(long)]
    pub polytopes: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["history", "rollout"])))]
pub struct PolicyArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub source: PolicySource,
    /// JSON array of step interactions; prints the next action distribution.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Restrict the printed distribution to one principal observation.
    #[arg(long, requires = "history")]
    pub principal_obs: Option<usize>,
    /// Restrict the printed distribution to one reported observation.
    #[arg(long, requires = "history")]
    pub reported_obs: Option<usize>,
    /// Simulate this many episodes and print `episode,vP,vA` rows.
    #[arg(long)]
    pub rollout: Option<usize>,
    /// Agent deviation plan for rollouts: a JSON array of per-step rules.
    #[arg(long, requires = "rollout")]
    pub deviation: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("check").required(true).args(["check_ic", "exact_values", "h2_optimum"])))]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub source: PolicySource,
    /// Certify that the solver's policy is incentive compatible.
    #[arg(long)]
    pub check_ic: bool,
    /// Exact expected totals of the solver's policy.
    #[arg(long)]
    pub exact_values: bool,
    /// Exact optimum of a two-step game by brute force.
    #[arg(long)]
    pub h2_optimum: bool,
    /// Largest best-response gain that still passes.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Cap on enumerated tree nodes.
    #[arg(long, default_value_t = oracle::DEFAULT_BUDGET)]
    pub budget: u64,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Number of episodes T.
    #[arg(long)]
    pub episodes: usize,
    /// Failure probability.
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    /// Exploration episodes; defaults to c·ζ^{1/3}·T^{2/3} capped at T − 1.
    #[arg(long)]
    pub n0: Option<usize>,
    /// IC slack; defaults to (ζ/T)^{1/3}.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c_explore: f64,
    /// Let the agent best-respond during the commit phase.
    #[arg(long)]
    pub adversarial: bool,
    /// CSV report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: if e.is_input_error() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` and runs the command, returning the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return e.exit_code();
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult {
    let tol = Tolerances {
        feas: cli.tol_feas,
        obj: cli.tol_obj,
    };
    if !(tol.feas > 0.0 && tol.obj > 0.0) {
        return Err(CliError::input("tolerances must be positive"));
    }
    let mut diag = |msg: String| {
        if !cli.quiet {
            let _ = writeln!(err, "{msg}");
        }
    };
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, tol, out, &mut diag),
        Command::Policy(a) => cmd_policy(a, cli.seed, tol, out, &mut diag),
        Command::Oracle(a) => cmd_oracle(a, tol, out),
        Command::Learn(a) => cmd_learn(a, cli.seed, tol, out, &mut diag),
    }
}

/// Loads a model from a path, falling back to the fixture registry.
pub fn resolve_model(spec: &str) -> CliResult<GameModel> {
    let path = Path::new(spec);
    if path.exists() {
        let bytes = fs::read(path)?;
        return load_model(&bytes).map_err(|e| CliError::input(format!("{spec}: {e}")));
    }
    fixtures::by_name(spec).ok_or_else(|| {
        CliError::input(format!(
            "{spec}: no such file or fixture (fixtures: {})",
            fixtures::NAMES.join(", ")
        ))
    })
}

fn check_epsilon(epsilon: f64) -> CliResult {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(CliError::input(format!("--epsilon must be positive, got {epsilon}")))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write) -> CliResult {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    epsilon: f64,
    delta: f64,
    v_star: f64,
    argvec: Vec<f64>,
    wall_time_ms: u128,
}

pub fn cmd_solve(a: &SolveArgs, tol: Tolerances, out: &mut dyn Write, diag: &mut dyn FnMut(String)) -> CliResult {
    let m = resolve_model(&a.model.model)?;
    check_epsilon(a.epsilon)?;
    let start = Instant::now();
    let opts = BuildOptions {
        tol,
        include_root: a.out.is_some(),
        parallel: true,
    };
    let map = build_with(&m, a.epsilon, &opts)?;
    let sys = root_system(&m, &map)?;
    let (v_star, argvec) = max_principal_value_with(&sys, &[], &tol)?;
    let wall_time_ms = start.elapsed().as_millis();
    diag(format!("built {} polytopes in {wall_time_ms} ms", map.iter().count()));
    writeln!(out, "v_star={v_star:.6}")?;
    writeln!(out, "argvec={:.6},{:.6}", argvec[0], argvec[1])?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        let dump = serde_json::to_string_pretty(&map.to_dump()).expect("dump serializes");
        fs::write(dir.join("polytopes.json"), dump)?;
        let summary = SolveSummary {
            epsilon: a.epsilon,
            delta: map.delta,
            v_star,
            argvec,
            wall_time_ms,
        };
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    }
    Ok(())
}

fn load_handle(m: GameModel, src: &PolicySource, tol: Tolerances) -> CliResult<PolicyHandle> {
    let map = match &src.polytopes {
        Some(path) => PolytopeMap::from_dump(&m, read_json::<PolytopeDump>(path)?)?,
        None => {
            check_epsilon(src.epsilon)?;
            let opts = BuildOptions {
                tol,
                include_root: false,
                parallel: true,
            };
            build_with(&m, src.epsilon, &opts)?
        }
    };
    Ok(PolicyHandle::optimal(Arc::new(m), Arc::new(map), tol)?)
}

pub fn cmd_policy(a: &PolicyArgs, seed: u64, tol: Tolerances, out: &mut dyn Write, diag: &mut dyn FnMut(String)) -> CliResult {
    let m = resolve_model(&a.model.model)?;
    let dims = m.dims();
    let deviation = match &a.deviation {
        Some(path) => {
            let plan = DeviationPlan::Stepwise(read_json::<Vec<StepDeviation>>(path)?);
            plan.validate(&m)?;
            plan
        }
        None => DeviationPlan::Truthful,
    };
    if let Some(path) = &a.history {
        let history: History = read_json(path)?;
        if !m.check_history(&history) || history.len() >= m.horizon {
            return Err(CliError::input("history does not fit the model"));
        }
        for (flag, v, n) in [
            ("--principal-obs", a.principal_obs, dims.principal_obs),
            ("--reported-obs", a.reported_obs, dims.agent_obs),
        ] {
            if v.is_some_and(|v| v >= n) {
                return Err(CliError::input(format!("{flag} out of range")));
            }
        }
        let handle = load_handle(m.clone(), &a.source, tol)?;
        let joint_actions: Vec<_> = (0..dims.joint_actions())
            .map(|j| {
                let (p, g) = dims.split_joint(j);
                json!({"principal": m.principal_actions[p], "agent": m.agent_actions[g]})
            })
            .collect();
        let mut rows = Vec::new();
        for op in 0..dims.principal_obs {
            for or in 0..dims.agent_obs {
                if a.principal_obs.is_some_and(|x| x != op) || a.reported_obs.is_some_and(|x| x != or) {
                    continue;
                }
                let probs = handle.distribution(&history, op, or)?;
                rows.push(json!({
                    "principal_obs": m.principal_obs[op],
                    "reported_obs": m.agent_obs[or],
                    "probs": probs,
                }));
            }
        }
        let doc = json!({"step": history.len() + 1, "joint_actions": joint_actions, "rows": rows});
        let text = serde_json::to_string_pretty(&doc).expect("json") + "\n";
        return write_output(a.out.as_deref(), &text, out);
    }
    let n = a.rollout.expect("clap enforces a mode");
    let handle = load_handle(m, &a.source, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("episode,vP,vA\n");
    let mut sums = [0.0; 2];
    for ep in 1..=n {
        let (_, v) = rollout(&handle, &deviation, &mut rng)?;
        sums[0] += v[0];
        sums[1] += v[1];
        text.push_str(&format!("{ep},{},{}\n", v[0], v[1]));
    }
    if n > 0 {
        diag(format!("mean vP={:.6} vA={:.6}", sums[0] / n as f64, sums[1] / n as f64));
    }
    write_output(a.out.as_deref(), &text, out)
}

pub fn cmd_oracle(a: &OracleArgs, tol: Tolerances, out: &mut dyn Write) -> CliResult {
    let m = resolve_model(&a.model.model)?;
    let doc = if a.h2_optimum {
        let opt = oracle::brute_force_optimum_with(&m, &tol)?;
        json!({"v_star": opt.value, "argvec": opt.argvec, "table": opt.table})
    } else {
        let handle = load_handle(m, &a.source, tol)?;
        if a.check_ic {
            serde_json::to_value(oracle::ic_check_with(&handle, a.tol, a.budget)?).expect("json")
        } else {
            let v = oracle::exact_policy_values_with(&handle, a.budget)?;
            json!({"vP": v[0], "vA": v[1], "target": handle.target()})
        }
    };
    writeln!(out, "{}", serde_json::to_string(&doc).expect("json"))?;
    Ok(())
}

pub fn cmd_learn(a: &LearnArgs, seed: u64, tol: Tolerances, out: &mut dyn Write, diag: &mut dyn FnMut(String)) -> CliResult {
    let m = resolve_model(&a.model.model)?;
    let cfg = LearningConfig {
        episodes: a.episodes,
        failure_prob: a.q,
        seed,
        c_explore: a.c_explore,
        delta: a.delta,
        n0: a.n0,
        adversarial: a.adversarial,
        tol,
    };
    let report = run_learning(&m, &cfg)?;
    diag(format!(
        "delta={:.6} n0={} v_star={:.6} regP={:.6} regA={:.6}",
        report.delta,
        report.n0,
        report.v_star,
        report.reg_p.last().copied().unwrap_or(0.0),
        report.reg_a.last().copied().unwrap_or(0.0)
    ));
    write_output(a.out.as_deref(), &report.to_csv(), out)
}
