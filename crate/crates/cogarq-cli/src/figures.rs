//! Named figure presets: each driver generates one CSV data series at desk
//! scale. Every driver writes one CSV; simulation budgets come from the
//! config and can be raised with `--set`.

use std::path::{Path, PathBuf};

use serde_json::json;

use cogarq::closedform::{evaluate_m_value, optimal_m, MPolicyParams};
use cogarq::hmm::{
    degradation_experiment, fit_transitions, generate_arq_trace, DegradationOptions, HmmSpec,
    Regime,
};
use cogarq::policies::greedy_effective_m;
use cogarq::sim::sweep_weights;

use crate::config::{ExperimentConfig, ModelConfig};
use crate::output::{
    write_csv, CLOSEDFORM_HEADER, DEGRADATION_HEADER, ESTIMATION_HEADER, M_VS_W_HEADER,
    SWEEP_HEADER, VERSION_STRING,
};
use crate::CliError;

pub const FIGURE_NAMES: [&str; 10] = [
    "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12", "fig13",
];

fn erasure_doc() -> serde_json::Value {
    json!({"model": {"preset": "erasure", "p_ee": 0.99, "p_ne": 0.01}})
}

fn ge_doc() -> serde_json::Value {
    json!({"model": {"preset": "gilbert_elliot", "p_bb": 0.8, "p_gb": 0.1,
                     "gamma": [0.2, 0.01, 0.95, 0.3]}})
}

fn three_state_doc() -> serde_json::Value {
    json!({"model": {"preset": "three_state",
                     "matrix": [[0.9, 0.005, 0.095], [0.005, 0.9, 0.095], [0.095, 0.005, 0.9]]}})
}

fn two_channel_doc() -> serde_json::Value {
    json!({"model": {"preset": "erasure", "p_ee": 0.99, "p_ne": 0.01},
           "model2": {"preset": "erasure", "p_ee": 0.99, "p_ne": 0.01}})
}

/// Built-in defaults per figure: the parameter set the figure uses plus a
/// desk-scale simulation budget.
pub fn default_config_doc(figure: &str) -> Result<serde_json::Value, CliError> {
    let mut doc = match figure {
        "fig4" | "fig5" | "fig6" | "fig10" | "fig11" | "fig12" => erasure_doc(),
        "fig7" => three_state_doc(),
        "fig8" => two_channel_doc(),
        "fig9" | "fig13" => ge_doc(),
        other => {
            return Err(CliError::Usage(format!(
                "unknown figure '{other}'; valid names: {}",
                FIGURE_NAMES.join(", ")
            )))
        }
    };
    let map = doc.as_object_mut().unwrap();
    let sim_budget = match figure {
        // The degradation figures run many training seeds per grid point.
        "fig11" | "fig12" => json!({"horizon": 20_000, "replications": 4}),
        _ => json!({"horizon": 100_000, "replications": 8}),
    };
    map.insert("sim".into(), sim_budget);
    match figure {
        // Planar solves at figure scale.
        "fig7" | "fig8" => {
            map.insert(
                "solver".into(),
                json!({"grid_resolution": 129, "tolerance": 1e-9}),
            );
        }
        // 1D solves stay cheap at a finer grid.
        "fig4" | "fig9" => {
            map.insert(
                "solver".into(),
                json!({"grid_resolution": 513, "tolerance": 1e-9}),
            );
        }
        _ => {}
    }
    if figure == "fig8" {
        map.insert("policies".into(), json!(["dp", "greedy"]));
    }
    if figure == "fig9" {
        map.insert("policies".into(), json!(["dp", "greedy"]));
    }
    if figure == "fig11" {
        map.insert("training".into(), json!({"lengths": [30, 100], "seeds": 32}));
    }
    if figure == "fig12" {
        map.insert(
            "training".into(),
            json!({"lengths": [30, 100, 300, 1000, 10000], "seeds": 32}),
        );
    }
    Ok(doc)
}

pub fn run_figure(
    figure: &str,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    match figure {
        "fig4" | "fig7" | "fig8" | "fig9" => sweep_figure(figure, config, out_dir),
        "fig5" => burst_length_figure(config, out_dir),
        "fig6" => rate_region_figure(config, out_dir),
        "fig10" | "fig13" => estimation_figure(figure, config, out_dir),
        "fig11" => degradation_vs_weight_figure(config, out_dir),
        "fig12" => degradation_vs_length_figure(config, out_dir),
        other => Err(CliError::Usage(format!(
            "unknown figure '{other}'; valid names: {}",
            FIGURE_NAMES.join(", ")
        ))),
    }
}

fn sweep_figure(
    figure: &str,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    let base = config.sim_config(cogarq::sim::PolicySpec::Greedy)?;
    let solver = config.solver_params()?;
    let kinds = config.policy_kinds()?;
    let rows = sweep_weights(&base, &solver, &config.w_grid, &kinds)?;
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{},{}",
                r.w,
                r.policy,
                r.r_p,
                r.r_s,
                r.r,
                r.stderr_r,
                r.horizon,
                r.replications,
                r.seed,
                VERSION_STRING
            )
        })
        .collect();
    write_csv(
        out_dir,
        &format!("{figure}.csv"),
        "cogarq-sweep-v1",
        &config.resolved_json(),
        SWEEP_HEADER,
        &lines,
    )
}

fn erasure_scalars(config: &ExperimentConfig) -> Result<(f64, f64, f64), CliError> {
    match &config.model {
        ModelConfig::Erasure { p_ee, p_ne, r_p } => Ok((*p_ee, *p_ne, *r_p)),
        _ => Err(CliError::Usage(
            "this figure runs on the erasure model".into(),
        )),
    }
}

fn burst_length_figure(config: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf, CliError> {
    let (p_ee, p_ne, r_p) = erasure_scalars(config)?;
    let r_s = config.objective.r_s;
    let mut lines = Vec::with_capacity(config.w_grid.len());
    for &w in &config.w_grid {
        let m_star = optimal_m(&MPolicyParams {
            p_ee,
            p_ne,
            w,
            r_p,
            r_s,
        })?;
        let m_greedy = greedy_effective_m(p_ee, p_ne, w, r_p, r_s, 1_000_000)?;
        lines.push(format!("{w},{m_star},{m_greedy}"));
    }
    write_csv(
        out_dir,
        "fig5.csv",
        "cogarq-burst-length-v1",
        &config.resolved_json(),
        M_VS_W_HEADER,
        &lines,
    )
}

fn rate_region_figure(config: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf, CliError> {
    let rows = closedform_sweep_rows(config)?;
    write_csv(
        out_dir,
        "fig6.csv",
        "cogarq-closedform-v1",
        &config.resolved_json(),
        CLOSEDFORM_HEADER,
        &rows,
    )
}

/// Shared by `optimal-m`, `rate-region` and the rate-region figure: per
/// weight, the optimal burst length and its analytic rate pair.
pub fn closedform_sweep_rows(config: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    let (p_ee, p_ne, r_p) = erasure_scalars(config)?;
    let r_s = config.objective.r_s;
    let mut lines = Vec::with_capacity(config.w_grid.len());
    for &w in &config.w_grid {
        let params = MPolicyParams {
            p_ee,
            p_ne,
            w,
            r_p,
            r_s,
        };
        let m_star = optimal_m(&params)?;
        let (rate_p, rate_s, rate) = evaluate_m_value(m_star, &params)?;
        lines.push(format!("{w},{m_star},{rate_p},{rate_s},{rate}"));
    }
    Ok(lines)
}

fn estimation_figure(
    figure: &str,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    let model = config.model.build()?;
    let spec = HmmSpec::new(model.success.clone());
    let mut lines = Vec::new();
    for &length in &config.training.lengths {
        for seed in 0..config.training.seeds {
            let trace_seed = config.seed ^ (seed.wrapping_mul(0x9e37_79b9));
            let obs = generate_arq_trace(&model, Regime::Silent, length, trace_seed)?;
            let fit = fit_transitions(&obs, &spec, trace_seed)?;
            lines.push(format!(
                "{length},{seed},{},{}",
                fit.transitions_hat.prob(0, 0),
                fit.transitions_hat.prob(1, 0)
            ));
        }
    }
    write_csv(
        out_dir,
        &format!("{figure}.csv"),
        "cogarq-estimation-v1",
        &config.resolved_json(),
        ESTIMATION_HEADER,
        &lines,
    )
}

fn degradation_rows(
    config: &ExperimentConfig,
    w_grid: &[f64],
    lengths: &[usize],
) -> Result<Vec<String>, CliError> {
    let model = config.model.build()?;
    let mut lines = Vec::new();
    for &length in lengths {
        for &w in w_grid {
            let mut sum_true = 0.0;
            let mut sum_est = 0.0;
            for seed in 0..config.training.seeds {
                let rows = degradation_experiment(
                    &model,
                    length,
                    &[w],
                    &DegradationOptions {
                        horizon: config.sim.horizon,
                        replications: config.sim.replications,
                        seed: config.seed ^ (seed.wrapping_mul(0x9e37_79b9)),
                    },
                )?;
                sum_true += rows[0].r_true_params;
                sum_est += rows[0].r_estimated_params;
            }
            let n = config.training.seeds as f64;
            let mean_true = sum_true / n;
            let mean_est = sum_est / n;
            lines.push(format!(
                "{w},{length},{mean_true},{mean_est},{}",
                mean_true - mean_est
            ));
        }
    }
    Ok(lines)
}

fn degradation_vs_weight_figure(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    let rows = degradation_rows(config, &config.w_grid, &config.training.lengths)?;
    write_csv(
        out_dir,
        "fig11.csv",
        "cogarq-degradation-v1",
        &config.resolved_json(),
        DEGRADATION_HEADER,
        &rows,
    )
}

fn degradation_vs_length_figure(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    let rows = degradation_rows(config, &[config.objective.w], &config.training.lengths)?;
    write_csv(
        out_dir,
        "fig12.csv",
        "cogarq-degradation-v1",
        &config.resolved_json(),
        DEGRADATION_HEADER,
        &rows,
    )
}
