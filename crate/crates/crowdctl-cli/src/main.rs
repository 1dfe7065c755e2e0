//! Command-line front end for the source-selection toolkit.
//!
//! Subcommands: `solve` (backward-DP source selection), `oracle` (closed-form
//! unconstrained optimum), `regret` (realized regret plus its upper bound),
//! `simulate` (seeded rollouts of the solved behavior), `gridgen` (grid
//! scenario generator). Results are JSON on stdout unless `--out` redirects
//! the primary artifact; diagnostics and error reports go to stderr.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 validation/schema
//! failure (including malformed scenario files).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crowdctl::{
    compose_agent_behavior, cost, default_profiles, generate_grid_scenario, regret_and_bound,
    rollout_statistics, sample_rollouts, scenario_to_json, solve_oracle, solve_selection,
    validate_scenario, Error, GridSpec, RewardPreset, Scenario, SelectionPolicy,
};

#[derive(Parser)]
#[command(
    name = "crowdctl",
    version,
    about = "Per-stage source selection under KL control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the source-selection problem and report the policy and its cost.
    Solve(ScenarioArgs),
    /// Compute the oracle behavior and its optimal cost.
    Oracle(ScenarioArgs),
    /// Report realized regret and the per-stage bound constants.
    Regret(ScenarioArgs),
    /// Solve, then sample seeded rollouts of the composed behavior as CSV.
    Simulate(SimulateArgs),
    /// Generate a grid-navigation scenario file.
    Gridgen(GridgenArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file.
    scenario: PathBuf,
    /// Write the result JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON file.
    scenario: PathBuf,
    /// Number of rollouts; rollout i uses seed (--seed + i).
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    rollouts: u64,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the rollout CSV here (stats JSON then goes to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Prepend a column-name header line to the CSV.
    #[arg(long, default_value_t = false)]
    header: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Zero,
    Penalty,
}

#[derive(Args)]
struct GridgenArgs {
    #[arg(long, default_value_t = 5)]
    rows: usize,
    #[arg(long, default_value_t = 5)]
    cols: usize,
    #[arg(long, default_value_t = 8)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    start: usize,
    /// Defaults to the north-east corner (rows*cols - 1).
    #[arg(long)]
    goal: Option<usize>,
    /// Off-route mass of every generated kernel, in [0, 1).
    #[arg(long, default_value_t = 0.15)]
    noise: f64,
    /// Number of sources (source 1 always follows the target route).
    #[arg(long, default_value_t = 3)]
    sources: usize,
    /// Agent reward shape.
    #[arg(long, value_enum, default_value_t = Preset::Zero)]
    preset: Preset,
    /// Magnitude of the penalty-preset reward.
    #[arg(long, default_value_t = 5.0)]
    rho: f64,
    /// Seed for synthesized source routes beyond the built-in three.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the scenario here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::Regret(args) => cmd_regret(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Gridgen(args) => cmd_gridgen(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.report);
            ExitCode::from(err.code)
        }
    }
}

struct CliError {
    code: u8,
    /// Machine-readable JSON describing the failure.
    report: String,
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let (code, kind) = match &err {
            Error::InvalidScenario(report) => {
                return CliError {
                    code: 2,
                    report: json!({"error": "validation", "violations": report.violations})
                        .to_string(),
                }
            }
            Error::Parse { .. }
            | Error::SchemaVersion { .. }
            | Error::InfeasibleRoute { .. }
            | Error::DimensionMismatch(_) => (2, "schema"),
            Error::Io(_) => (1, "io"),
            _ => (1, "internal"),
        };
        CliError {
            code,
            report: json!({"error": kind, "message": err.to_string()}).to_string(),
        }
    }
}

/// Load a scenario, validating it fully (exit 2 with the report otherwise).
fn load_validated(path: &Path) -> Result<(Scenario, String), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::from(Error::Io(e)))?;
    let digest = format!("sha256:{:x}", Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|e| {
        CliError::from(Error::Parse {
            location: "document".into(),
            message: e.to_string(),
        })
    })?;
    let scenario = crowdctl::scenario_from_json(&text)?;
    let report = validate_scenario(&scenario);
    if !report.is_empty() {
        return Err(CliError::from(Error::InvalidScenario(report)));
    }
    Ok((scenario, digest))
}

/// JSON number, with infinities rendered as the strings "+inf"/"-inf".
fn num(v: f64) -> Value {
    if v == f64::INFINITY {
        Value::String("+inf".into())
    } else if v == f64::NEG_INFINITY {
        Value::String("-inf".into())
    } else {
        json!(v)
    }
}

fn emit(value: &Value, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("result serialization");
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::from(Error::Io(e)))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_solve(args: &ScenarioArgs) -> Result<(), CliError> {
    let (scenario, digest) = load_validated(&args.scenario)?;
    let started = Instant::now();
    let policy = solve_selection(&scenario)?;
    let composed = compose_agent_behavior(&scenario, &policy);
    let report = cost(&scenario, &composed)?;
    let wall = started.elapsed().as_secs_f64() * 1e3;
    let result = json!({
        "command": "solve",
        "scenario": args.scenario.display().to_string(),
        "digest": digest,
        "parameters": {},
        "wall_time_ms": wall,
        "choice": policy.choice,
        "scores": policy.scores.iter().map(|s| &s.a).collect::<Vec<_>>(),
        "r_bar": policy.cumulative.r_bar,
        "r_hat": policy.cumulative.r_hat,
        "cost": report,
    });
    emit(&result, args.out.as_deref())
}

fn cmd_oracle(args: &ScenarioArgs) -> Result<(), CliError> {
    let (scenario, digest) = load_validated(&args.scenario)?;
    let started = Instant::now();
    let oracle = solve_oracle(&scenario.target, &scenario.reward, &scenario.initial)?;
    let wall = started.elapsed().as_secs_f64() * 1e3;
    let kernels: Vec<_> = oracle.behavior.kernels.iter().map(|k| &k.rows).collect();
    let result = json!({
        "command": "oracle",
        "scenario": args.scenario.display().to_string(),
        "digest": digest,
        "parameters": {},
        "wall_time_ms": wall,
        "kernels": kernels,
        "optimal_cost": oracle.optimal_cost,
        "rho_bar": oracle.recursion.rho_bar,
        "rho_hat": oracle.recursion.rho_hat,
    });
    emit(&result, args.out.as_deref())
}

fn cmd_regret(args: &ScenarioArgs) -> Result<(), CliError> {
    let (scenario, digest) = load_validated(&args.scenario)?;
    let started = Instant::now();
    let policy = solve_selection(&scenario)?;
    let report = regret_and_bound(&scenario, &policy)?;
    let wall = started.elapsed().as_secs_f64() * 1e3;
    let per_stage: Vec<Value> = report
        .per_stage
        .iter()
        .map(|c| {
            json!({
                "log_ratio_min": num(c.log_ratio_min),
                "log_ratio_max": num(c.log_ratio_max),
                "reward_gap": num(c.reward_gap),
            })
        })
        .collect();
    let result = json!({
        "command": "regret",
        "scenario": args.scenario.display().to_string(),
        "digest": digest,
        "parameters": {},
        "wall_time_ms": wall,
        "regret": report.regret,
        "bound": num(report.bound),
        "per_stage": per_stage,
    });
    emit(&result, args.out.as_deref())
}

fn rollout_csv(rollouts: &[crowdctl::Rollout], header: bool) -> String {
    let mut csv = String::new();
    if header {
        if let Some(first) = rollouts.first() {
            csv.push_str("seed");
            for t in 0..first.states.len() {
                csv.push_str(&format!(",x{t}"));
            }
            if let Some(sources) = &first.chosen_sources {
                for k in 1..=sources.len() {
                    csv.push_str(&format!(",j{k}"));
                }
            }
            csv.push('\n');
        }
    }
    for r in rollouts {
        csv.push_str(&r.seed.to_string());
        for x in &r.states {
            csv.push_str(&format!(",{x}"));
        }
        if let Some(sources) = &r.chosen_sources {
            for j in sources {
                csv.push_str(&format!(",{j}"));
            }
        }
        csv.push('\n');
    }
    csv
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let (scenario, digest) = load_validated(&args.scenario)?;
    let started = Instant::now();
    let policy: SelectionPolicy = solve_selection(&scenario)?;
    let composed = compose_agent_behavior(&scenario, &policy);
    let rollouts = sample_rollouts(
        &scenario.initial,
        &composed,
        Some(&policy),
        args.seed,
        args.rollouts as usize,
    )?;
    let stats = rollout_statistics(&rollouts, scenario.num_states(), &scenario.reward);
    let wall = started.elapsed().as_secs_f64() * 1e3;

    let csv = rollout_csv(&rollouts, args.header);
    let stats_json = json!({
        "command": "simulate",
        "scenario": args.scenario.display().to_string(),
        "digest": digest,
        "parameters": {"rollouts": args.rollouts, "seed": args.seed},
        "wall_time_ms": wall,
        "csv": args.out.as_ref().map_or("stdout".to_string(), |p| p.display().to_string()),
        "frequencies": stats.frequencies,
        "mean_reward": stats.mean_reward,
    });
    match &args.out {
        Some(path) => {
            fs::write(path, csv).map_err(|e| CliError::from(Error::Io(e)))?;
            emit(&stats_json, None)?;
        }
        None => {
            // CSV is the primary artifact; stats become a diagnostic.
            print!("{csv}");
            let mut text = serde_json::to_string(&stats_json).expect("stats serialization");
            text.push('\n');
            let _ = std::io::stderr().write_all(text.as_bytes());
        }
    }
    Ok(())
}

fn cmd_gridgen(args: &GridgenArgs) -> Result<(), CliError> {
    let preset = match args.preset {
        Preset::Zero => RewardPreset::Zero,
        Preset::Penalty => RewardPreset::Penalty { rho: args.rho },
    };
    let mut spec = GridSpec {
        rows: args.rows,
        cols: args.cols,
        horizon: args.horizon,
        start: args.start,
        goal: args.goal.unwrap_or(args.rows * args.cols - 1),
        noise: args.noise,
        source_profiles: vec![],
        preset,
    };
    spec.source_profiles = default_profiles(&spec, args.sources, args.seed)?;
    let scenario = generate_grid_scenario(&spec, args.seed)?;
    let text = scenario_to_json(&scenario);
    match &args.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::from(Error::Io(e)))?,
        None => print!("{text}"),
    }
    Ok(())
}
