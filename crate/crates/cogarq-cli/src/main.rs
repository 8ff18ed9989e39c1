//! Command-line front end: solve policies, simulate them, regenerate figure
//! data and learn transition probabilities from ARQ traces.

mod config;
mod figures;
mod output;

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use cogarq::closedform::{evaluate_m_value, optimal_m, MPolicyParams};
use cogarq::dp::{self, ThresholdOutcome, ValueGrid};
use cogarq::hmm::{
    fit_transitions, generate_arq_trace, train_three_state_two_phase, HmmSpec, ObservationSequence,
    Regime, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use cogarq::sim::{simulate, Models, PolicySpec};

use config::{load_config, ExperimentConfig, ModelConfig};
use figures::{closedform_sweep_rows, default_config_doc, run_figure};
use output::{
    ensure_out_dir, write_csv, write_json, write_text, CLOSEDFORM_HEADER, SWEEP_HEADER,
    VERSION_STRING,
};

/// Errors mapped onto process exit codes: 2 for usage/config problems, 3 for
/// numerical failures.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl From<cogarq::Error> for CliError {
    fn from(err: cogarq::Error) -> Self {
        match err {
            cogarq::Error::Solver(_) | cogarq::Error::InvariantViolation(_) => {
                CliError::Numerical(err.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "cogarq", version, about = "Secondary-user policies for Markovian primary channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dotted-path config overrides, e.g. --set sim.horizon=50000.
    #[arg(long = "set")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Bellman equation and cache the policy grid.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Simulate the configured policies (or a cached policy file).
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Policy JSON produced by `solve`.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Generate a named figure dataset (fig4..fig13).
    Figure {
        /// fig4..fig13
        name: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Estimate transition probabilities from an ARQ trace.
    Learn {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Optimal burst length and analytic throughput across the weight grid.
    #[command(name = "optimal-m")]
    OptimalM {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Analytic primary/secondary rate region across the weight grid.
    #[command(name = "rate-region")]
    RateRegion {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { common } => cmd_solve(&common),
        Command::Simulate { common, policy } => cmd_simulate(&common, policy.as_deref()),
        Command::Figure { name, common } => cmd_figure(&name, &common),
        Command::Learn { common } => cmd_learn(&common),
        Command::OptimalM { common } => cmd_closedform(&common, "optimal_m.csv"),
        Command::RateRegion { common } => cmd_closedform(&common, "rate_region.csv"),
    }
}

fn required_config(common: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config is required for this command".into()))?;
    load_config(Some(path), json!({}), common.seed, &common.set)
}

fn cmd_solve(common: &CommonArgs) -> Result<(), CliError> {
    let config = required_config(common)?;
    let params = config.solver_params()?;
    let models = config.models()?;
    let (solution, threshold) = match &models {
        Models::Two(m1, m2) => (dp::solve_two_channel(m1, m2, &params)?, None),
        Models::Single(model) => match model.num_states() {
            3 => (dp::solve_three_state(model, &params)?, None),
            _ => {
                let solution = if model.success.silent_ack == [0.0, 1.0]
                    && model.success.transmit_ack == [0.0, 0.0]
                {
                    dp::solve_two_state(model, &params)?
                } else {
                    dp::solve_gilbert_elliot(model, &params)?
                };
                let threshold = dp::extract_threshold(&solution.grid, &params, model)?;
                (solution, Some(threshold))
            }
        },
    };
    match &threshold {
        Some(ThresholdOutcome::Threshold(report)) => println!(
            "threshold p_th = {} (analytic bracket [{}, {}])",
            report.p_th, report.lower_bound, report.upper_bound
        ),
        Some(ThresholdOutcome::AllSameAction(action)) => {
            println!("no threshold: policy always chooses {action:?}")
        }
        None => println!(
            "solved {:?} grid at resolution {} ({} iterations, residual {})",
            solution.grid.domain, solution.grid.resolution, solution.iterations, solution.residual
        ),
    }
    let doc = json!({
        "schema": "cogarq-policy-v1",
        "version": VERSION_STRING,
        "config": config.resolved_json(),
        "iterations": solution.iterations,
        "residual": solution.residual,
        "threshold": threshold,
        "grid": solution.grid,
    });
    let path = write_json(&common.out, "policy.json", &doc)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load_policy_grid(path: &std::path::Path) -> Result<ValueGrid, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read policy {}: {e}", path.display())))?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("policy file is not valid JSON: {e}")))?;
    let grid = doc
        .get("grid")
        .ok_or_else(|| CliError::Usage("policy file has no 'grid' field".into()))?;
    serde_json::from_value(grid.clone())
        .map_err(|e| CliError::Usage(format!("policy grid is malformed: {e}")))
}

fn cmd_simulate(common: &CommonArgs, policy_path: Option<&std::path::Path>) -> Result<(), CliError> {
    let config = required_config(common)?;
    let solver = config.solver_params()?;
    let objective = config.objective();
    let named_policies: Vec<(String, PolicySpec)> = match policy_path {
        Some(path) => {
            let grid = load_policy_grid(path)?;
            vec![("dp".to_string(), PolicySpec::Dp(Arc::new(grid)))]
        }
        None => {
            let kinds = config.policy_kinds()?;
            kinds
                .iter()
                .map(|&kind| {
                    cogarq::sim::instantiate_policy(kind, &config.models()?, &objective, &solver)
                        .map(|spec| (kind.name().to_string(), spec))
                        .map_err(CliError::from)
                })
                .collect::<Result<_, _>>()?
        }
    };
    let mut rows = Vec::new();
    let mut trace_lines: Option<Vec<String>> = None;
    for (name, policy) in named_policies {
        let sim_config = config.sim_config(policy)?;
        let stats = simulate(&sim_config)?;
        if let Some(trace) = &stats.trace {
            let lines = trace
                .iter()
                .map(|row| serde_json::to_string(row).expect("trace row serializes"))
                .collect();
            trace_lines = Some(lines);
        }
        rows.push(format!(
            "{},{},{},{},{},{},{},{},{},{}",
            objective.w,
            name,
            stats.r_p_hat,
            stats.r_s_hat,
            stats.r_hat,
            stats.stderr_r,
            sim_config.horizon,
            sim_config.replications,
            sim_config.seed,
            VERSION_STRING
        ));
    }
    let path = write_csv(
        &common.out,
        "simulate.csv",
        "cogarq-sweep-v1",
        &config.resolved_json(),
        SWEEP_HEADER,
        &rows,
    )?;
    println!("wrote {}", path.display());
    if let Some(lines) = trace_lines {
        let path = write_text(&common.out, "trace.ndjson", &(lines.join("\n") + "\n"))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_figure(name: &str, common: &CommonArgs) -> Result<(), CliError> {
    let defaults = default_config_doc(name)?;
    let config = load_config(common.config.as_deref(), defaults, common.seed, &common.set)?;
    ensure_out_dir(&common.out)?;
    let path = run_figure(name, &config, &common.out)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_learn(common: &CommonArgs) -> Result<(), CliError> {
    let config = required_config(common)?;
    let model = config.model.build()?;
    let spec = HmmSpec::new(model.success.clone());
    let three_state = model.num_states() == 3;
    let mut fits = Vec::new();
    match &config.training.trace_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read trace {path}: {e}")))?;
            let obs = ObservationSequence::from_text(&text)?;
            let fit = if three_state {
                let transmit_path = config.training.transmit_trace_file.as_ref().ok_or_else(|| {
                    CliError::Usage(
                        "three-state learning needs training.transmit_trace_file".into(),
                    )
                })?;
                let transmit_text = std::fs::read_to_string(transmit_path).map_err(|e| {
                    CliError::Usage(format!("cannot read trace {transmit_path}: {e}"))
                })?;
                let transmit_obs = ObservationSequence::from_text(&transmit_text)?;
                train_three_state_two_phase(
                    &obs,
                    &transmit_obs,
                    &spec,
                    DEFAULT_TOL,
                    DEFAULT_MAX_ITER,
                    config.seed,
                )?
            } else {
                fit_transitions(&obs, &spec, config.seed)?
            };
            fits.push((config.seed, fit));
        }
        None => {
            for seed in 0..config.training.seeds {
                let trace_seed = config.seed ^ seed.wrapping_mul(0x9e37_79b9);
                let silent = generate_arq_trace(
                    &model,
                    Regime::Silent,
                    config.training.length,
                    trace_seed,
                )?;
                let fit = if three_state {
                    let transmit = generate_arq_trace(
                        &model,
                        Regime::Transmitting,
                        config.training.transmit_length.unwrap_or(config.training.length),
                        trace_seed.wrapping_add(1),
                    )?;
                    train_three_state_two_phase(
                        &silent,
                        &transmit,
                        &spec,
                        DEFAULT_TOL,
                        DEFAULT_MAX_ITER,
                        trace_seed,
                    )?
                } else {
                    fit_transitions(&silent, &spec, trace_seed)?
                };
                fits.push((trace_seed, fit));
            }
        }
    }
    let fit_docs: Vec<serde_json::Value> = fits
        .iter()
        .map(|(seed, fit)| {
            json!({
                "seed": seed,
                "transitions_hat": fit.transitions_hat,
                "log_likelihood": fit.log_likelihood,
                "iterations": fit.iterations,
                "converged": fit.converged,
            })
        })
        .collect();
    let doc = json!({
        "schema": "cogarq-learn-v1",
        "version": VERSION_STRING,
        "config": config.resolved_json(),
        "fits": fit_docs,
    });
    let path = write_json(&common.out, "learn.json", &doc)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_closedform(common: &CommonArgs, file_name: &str) -> Result<(), CliError> {
    let config = required_config(common)?;
    let rows = closedform_sweep_rows(&config)?;
    if let ModelConfig::Erasure { p_ee, p_ne, r_p } = config.model {
        let params = MPolicyParams {
            p_ee,
            p_ne,
            w: config.objective.w,
            r_p,
            r_s: config.objective.r_s,
        };
        let m_star = optimal_m(&params)?;
        let (_, _, r) = evaluate_m_value(m_star, &params)?;
        println!(
            "w = {}: optimal M = {m_star}, weighted throughput R = {r}",
            config.objective.w
        );
    }
    let path = write_csv(
        &common.out,
        file_name,
        "cogarq-closedform-v1",
        &config.resolved_json(),
        CLOSEDFORM_HEADER,
        &rows,
    )?;
    println!("wrote {}", path.display());
    Ok(())
}
