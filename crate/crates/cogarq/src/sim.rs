//! Slot-level Monte Carlo simulation.
//!
//! Each slot: the channel(s) transition, the policy picks an action, ARQ
//! feedback is sampled from the success profile, rewards accrue (primary per
//! ACK, secondary per transmitted packet), and the policy observes. Episodes
//! draw their randomness from per-episode ChaCha streams derived from the
//! master seed, so a configuration reproduces bit-for-bit regardless of how
//! replications are scheduled.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{Belief, Observation, TwoChannelObservation};
use crate::channel::{episode_rng, ChannelModel, Feedback};
use crate::closedform::{optimal_m, MPolicyParams, MValue};
use crate::dp::{self, Domain, SolverParams, ValueGrid};
use crate::policies::{
    Action, Objective, PolicyHandle, TwoChannelAction, TwoChannelPolicyHandle,
};
use crate::{Error, Result};

/// How the policy's belief is initialized at the start of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefInit {
    /// Start at the stationary distribution (no burn-in needed).
    Stationary,
    /// Draw uniformly over the belief domain; pair with a burn-in window.
    RandomUniform,
}

/// Runtime policy selector for the simulator. DP policies carry their solved
/// grid so episodes never re-solve.
#[derive(Debug, Clone)]
pub enum PolicySpec {
    Dp(Arc<ValueGrid>),
    Greedy,
    MPolicy(MValue),
    Genie,
    AlwaysListen,
    AlwaysTransmit,
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Dp(_) => "dp",
            PolicySpec::Greedy => "greedy",
            PolicySpec::MPolicy(_) => "mpolicy",
            PolicySpec::Genie => "genie",
            PolicySpec::AlwaysListen => "always_listen",
            PolicySpec::AlwaysTransmit => "always_transmit",
        }
    }
}

/// One or two primary channels.
#[derive(Debug, Clone)]
pub enum Models {
    Single(ChannelModel),
    Two(ChannelModel, ChannelModel),
}

/// Full description of a simulation run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub models: Models,
    pub policy: PolicySpec,
    pub objective: Objective,
    pub horizon: u64,
    pub burn_in: u64,
    pub replications: u64,
    pub seed: u64,
    pub belief_init: BeliefInit,
    /// Record a per-slot trace (kept only for single-replication runs).
    pub record_trace: bool,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.horizon <= self.burn_in {
            return Err(Error::Precondition(format!(
                "horizon {} must exceed burn-in {}",
                self.horizon, self.burn_in
            )));
        }
        if self.replications < 1 {
            return Err(Error::Precondition("at least one replication required".into()));
        }
        Ok(())
    }
}

/// One slot of the optional debugging trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub slot: u64,
    pub states: Vec<usize>,
    pub action: String,
    pub feedback: Vec<String>,
}

/// Accumulated throughput statistics. For aggregated runs the standard
/// errors are sample errors across replications.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStats {
    pub r_p_hat: f64,
    pub r_s_hat: f64,
    pub r_hat: f64,
    pub stderr_r_p: f64,
    pub stderr_r_s: f64,
    pub stderr_r: f64,
    pub ack_count: u64,
    pub nack_count: u64,
    pub transmit_count: u64,
    /// Post-burn-in slots contributing to the averages (per episode, summed
    /// over replications).
    pub slots: u64,
    pub replications: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRow>>,
}

fn feedback_str(f: Feedback) -> String {
    match f {
        Feedback::Ack => "A".into(),
        Feedback::Nack => "N".into(),
    }
}

/// Runs a single episode with the episode's own random stream.
pub fn run_episode(config: &SimConfig, episode_index: u64) -> Result<RunStats> {
    config.validate()?;
    match &config.models {
        Models::Single(model) => run_single_episode(config, model, episode_index),
        Models::Two(m1, m2) => run_two_channel_episode(config, m1, m2, episode_index),
    }
}

fn random_simplex_belief<R: Rng + ?Sized>(s: usize, rng: &mut R) -> Belief {
    let mut raw: Vec<f64> = (0..s).map(|_| -(rng.random::<f64>().ln())).collect();
    let sum: f64 = raw.iter().sum();
    for x in &mut raw {
        *x /= sum;
    }
    let correction: f64 = 1.0 - raw.iter().sum::<f64>();
    raw[s - 1] += correction;
    Belief::new(raw).expect("normalized draw is a distribution")
}

fn run_single_episode(config: &SimConfig, model: &ChannelModel, episode: u64) -> Result<RunStats> {
    let mut rng = episode_rng(config.seed, episode);
    let mut policy = match &config.policy {
        PolicySpec::Dp(grid) => {
            let expected = if model.num_states() == 3 {
                Domain::Simplex
            } else {
                Domain::Interval
            };
            if grid.domain != expected {
                return Err(Error::Precondition(format!(
                    "policy grid domain {:?} does not match a {}-state model",
                    grid.domain,
                    model.num_states()
                )));
            }
            PolicyHandle::dp(grid.clone(), model)
        }
        PolicySpec::Greedy => PolicyHandle::greedy(model),
        PolicySpec::MPolicy(m) => PolicyHandle::m_policy(*m),
        PolicySpec::Genie => PolicyHandle::genie(),
        PolicySpec::AlwaysListen => PolicyHandle::always_listen(),
        PolicySpec::AlwaysTransmit => PolicyHandle::always_transmit(),
    };
    if config.belief_init == BeliefInit::RandomUniform {
        policy.set_belief(random_simplex_belief(model.num_states(), &mut rng));
    }
    let mut state = model.transitions.sample_stationary(&mut rng);
    policy.reveal_state(state);

    let mut acks = 0u64;
    let mut nacks = 0u64;
    let mut transmits = 0u64;
    let mut primary_sum = 0.0;
    let mut secondary_sum = 0.0;
    let mut trace = config.record_trace.then(Vec::new);
    for slot in 0..config.horizon {
        state = model.transitions.sample_transition(state, &mut rng);
        let action = policy.decide(model, &config.objective)?;
        let transmitting = action == Action::Transmit;
        let feedback = model.sample_ack(state, transmitting, &mut rng);
        if slot >= config.burn_in {
            match feedback {
                Feedback::Ack => {
                    acks += 1;
                    primary_sum += model.primary_reward;
                }
                Feedback::Nack => nacks += 1,
            }
            if transmitting {
                transmits += 1;
                secondary_sum += config.objective.r_s;
            }
        }
        policy.observe(&Observation::new(action, feedback), model)?;
        policy.reveal_state(state);
        if let Some(t) = trace.as_mut() {
            t.push(TraceRow {
                slot,
                states: vec![state.0],
                action: format!("{action:?}"),
                feedback: vec![feedback_str(feedback)],
            });
        }
    }
    let slots = config.horizon - config.burn_in;
    let r_p_hat = primary_sum / slots as f64;
    let r_s_hat = secondary_sum / slots as f64;
    Ok(RunStats {
        r_p_hat,
        r_s_hat,
        r_hat: config.objective.w * r_p_hat + (1.0 - config.objective.w) * r_s_hat,
        stderr_r_p: 0.0,
        stderr_r_s: 0.0,
        stderr_r: 0.0,
        ack_count: acks,
        nack_count: nacks,
        transmit_count: transmits,
        slots,
        replications: 1,
        trace,
    })
}

fn run_two_channel_episode(
    config: &SimConfig,
    model1: &ChannelModel,
    model2: &ChannelModel,
    episode: u64,
) -> Result<RunStats> {
    let mut rng = episode_rng(config.seed, episode);
    let mut policy = match &config.policy {
        PolicySpec::Dp(grid) => {
            if grid.domain != Domain::Square {
                return Err(Error::Precondition(
                    "two-channel policy grid must live on the unit square".into(),
                ));
            }
            TwoChannelPolicyHandle::dp(grid.clone(), model1, model2)
        }
        PolicySpec::Greedy => TwoChannelPolicyHandle::greedy(model1, model2),
        PolicySpec::AlwaysListen => TwoChannelPolicyHandle::always_listen(model1, model2),
        other => {
            return Err(Error::Precondition(format!(
                "policy {:?} is not defined for two channels",
                other.name()
            )))
        }
    };
    if config.belief_init == BeliefInit::RandomUniform {
        policy.set_beliefs((rng.random::<f64>(), rng.random::<f64>()));
    }
    let mut s1 = model1.transitions.sample_stationary(&mut rng);
    let mut s2 = model2.transitions.sample_stationary(&mut rng);

    let mut acks = 0u64;
    let mut nacks = 0u64;
    let mut transmits = 0u64;
    let mut primary_sum = 0.0;
    let mut secondary_sum = 0.0;
    let mut trace = config.record_trace.then(Vec::new);
    for slot in 0..config.horizon {
        s1 = model1.transitions.sample_transition(s1, &mut rng);
        s2 = model2.transitions.sample_transition(s2, &mut rng);
        let action = policy.decide(model1, model2, &config.objective)?;
        let (tx1, tx2) = match action {
            TwoChannelAction::ListenBoth => (false, false),
            TwoChannelAction::TxCh1 => (true, false),
            TwoChannelAction::TxCh2 => (false, true),
        };
        let f1 = model1.sample_ack(s1, tx1, &mut rng);
        let f2 = model2.sample_ack(s2, tx2, &mut rng);
        if slot >= config.burn_in {
            for (feedback, reward) in [(f1, model1.primary_reward), (f2, model2.primary_reward)] {
                match feedback {
                    Feedback::Ack => {
                        acks += 1;
                        primary_sum += reward;
                    }
                    Feedback::Nack => nacks += 1,
                }
            }
            if tx1 || tx2 {
                transmits += 1;
                secondary_sum += config.objective.r_s;
            }
        }
        policy.observe(
            &TwoChannelObservation {
                action,
                feedback: [f1, f2],
            },
            &model1.transitions,
            &model2.transitions,
        )?;
        if let Some(t) = trace.as_mut() {
            t.push(TraceRow {
                slot,
                states: vec![s1.0, s2.0],
                action: format!("{action:?}"),
                feedback: vec![feedback_str(f1), feedback_str(f2)],
            });
        }
    }
    let slots = config.horizon - config.burn_in;
    let r_p_hat = primary_sum / slots as f64;
    let r_s_hat = secondary_sum / slots as f64;
    Ok(RunStats {
        r_p_hat,
        r_s_hat,
        r_hat: config.objective.w * r_p_hat + (1.0 - config.objective.w) * r_s_hat,
        stderr_r_p: 0.0,
        stderr_r_s: 0.0,
        stderr_r: 0.0,
        ack_count: acks,
        nack_count: nacks,
        transmit_count: transmits,
        slots,
        replications: 1,
        trace,
    })
}

/// Sums with pairwise recursion so aggregation order cannot perturb results.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = pairwise_sum(samples) / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs all replications in parallel and aggregates their statistics.
pub fn simulate(config: &SimConfig) -> Result<RunStats> {
    config.validate()?;
    let episodes: Vec<RunStats> = (0..config.replications)
        .into_par_iter()
        .map(|episode| run_episode(config, episode))
        .collect::<Result<Vec<_>>>()?;
    let collect = |f: fn(&RunStats) -> f64| -> Vec<f64> { episodes.iter().map(f).collect() };
    let (r_p_hat, stderr_r_p) = mean_and_stderr(&collect(|e| e.r_p_hat));
    let (r_s_hat, stderr_r_s) = mean_and_stderr(&collect(|e| e.r_s_hat));
    let (_, stderr_r) = mean_and_stderr(&collect(|e| e.r_hat));
    let trace = if config.replications == 1 {
        episodes[0].trace.clone()
    } else {
        None
    };
    Ok(RunStats {
        r_p_hat,
        r_s_hat,
        r_hat: config.objective.w * r_p_hat + (1.0 - config.objective.w) * r_s_hat,
        stderr_r_p,
        stderr_r_s,
        stderr_r,
        ack_count: episodes.iter().map(|e| e.ack_count).sum(),
        nack_count: episodes.iter().map(|e| e.nack_count).sum(),
        transmit_count: episodes.iter().map(|e| e.transmit_count).sum(),
        slots: episodes.iter().map(|e| e.slots).sum(),
        replications: config.replications,
        trace,
    })
}

/// Named policy kinds accepted by the sweep drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Dp,
    Greedy,
    MPolicy,
    Genie,
    AlwaysListen,
    AlwaysTransmit,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Dp => "dp",
            PolicyKind::Greedy => "greedy",
            PolicyKind::MPolicy => "mpolicy",
            PolicyKind::Genie => "genie",
            PolicyKind::AlwaysListen => "always_listen",
            PolicyKind::AlwaysTransmit => "always_transmit",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "dp" => PolicyKind::Dp,
            "greedy" => PolicyKind::Greedy,
            "mpolicy" => PolicyKind::MPolicy,
            "genie" => PolicyKind::Genie,
            "always_listen" => PolicyKind::AlwaysListen,
            "always_transmit" => PolicyKind::AlwaysTransmit,
            other => {
                return Err(Error::Precondition(format!(
                    "unknown policy kind '{other}'"
                )))
            }
        })
    }
}

/// One row of a weight sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub w: f64,
    pub policy: String,
    pub r_p: f64,
    pub r_s: f64,
    pub r: f64,
    pub stderr_r: f64,
    pub horizon: u64,
    pub replications: u64,
    pub seed: u64,
}

fn erasure_scalars(model: &ChannelModel) -> Result<(f64, f64)> {
    if model.success.silent_ack != [0.0, 1.0] || model.success.transmit_ack != [0.0, 0.0] {
        return Err(Error::Precondition(
            "the M-policy is defined for the erasure model only".into(),
        ));
    }
    Ok((model.transitions.prob(0, 0), model.transitions.prob(1, 0)))
}

/// Builds the runtime policy for one weight, re-solving DP policies and
/// re-optimizing the burst length as the weight moves.
pub fn instantiate_policy(
    kind: PolicyKind,
    models: &Models,
    objective: &Objective,
    solver: &SolverParams,
) -> Result<PolicySpec> {
    let solver = SolverParams {
        objective: *objective,
        ..*solver
    };
    Ok(match (kind, models) {
        (PolicyKind::Dp, Models::Single(model)) => {
            let solution = match model.num_states() {
                3 => dp::solve_three_state(model, &solver)?,
                2 => {
                    if model.success.silent_ack == [0.0, 1.0]
                        && model.success.transmit_ack == [0.0, 0.0]
                    {
                        dp::solve_two_state(model, &solver)?
                    } else {
                        dp::solve_gilbert_elliot(model, &solver)?
                    }
                }
                s => {
                    return Err(Error::Precondition(format!(
                        "no DP solver for {s}-state models"
                    )))
                }
            };
            PolicySpec::Dp(Arc::new(solution.grid))
        }
        (PolicyKind::Dp, Models::Two(m1, m2)) => {
            let solution = dp::solve_two_channel(m1, m2, &solver)?;
            PolicySpec::Dp(Arc::new(solution.grid))
        }
        (PolicyKind::MPolicy, Models::Single(model)) => {
            let (p_ee, p_ne) = erasure_scalars(model)?;
            let m = optimal_m(&MPolicyParams {
                p_ee,
                p_ne,
                w: objective.w,
                r_p: model.primary_reward,
                r_s: objective.r_s,
            })?;
            PolicySpec::MPolicy(m)
        }
        (PolicyKind::Greedy, _) => PolicySpec::Greedy,
        (PolicyKind::Genie, Models::Single(_)) => PolicySpec::Genie,
        (PolicyKind::AlwaysListen, _) => PolicySpec::AlwaysListen,
        (PolicyKind::AlwaysTransmit, Models::Single(_)) => PolicySpec::AlwaysTransmit,
        (kind, Models::Two(..)) => {
            return Err(Error::Precondition(format!(
                "policy {} is not defined for two channels",
                kind.name()
            )))
        }
    })
}

/// Simulates every requested policy at every weight.
pub fn sweep_weights(
    base: &SimConfig,
    solver: &SolverParams,
    w_grid: &[f64],
    kinds: &[PolicyKind],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(w_grid.len() * kinds.len());
    for &w in w_grid {
        let objective = Objective::new(w, base.objective.r_s);
        for &kind in kinds {
            let policy = instantiate_policy(kind, &base.models, &objective, solver)?;
            let config = SimConfig {
                models: base.models.clone(),
                policy,
                objective,
                ..*base
            };
            let stats = simulate(&config)?;
            rows.push(SweepRow {
                w,
                policy: kind.name().to_string(),
                r_p: stats.r_p_hat,
                r_s: stats.r_s_hat,
                r: stats.r_hat,
                stderr_r: stats.stderr_r,
                horizon: base.horizon,
                replications: base.replications,
                seed: base.seed,
            });
        }
    }
    Ok(rows)
}

/// One point of the empirical rate region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRegionRow {
    pub w: f64,
    pub m_star: MValue,
    pub r_p: f64,
    pub r_s: f64,
}

/// Simulates the optimal burst policy across weights and reports the achieved
/// primary/secondary rate pairs.
pub fn empirical_rate_region(base: &SimConfig, w_grid: &[f64]) -> Result<Vec<RateRegionRow>> {
    let model = match &base.models {
        Models::Single(m) => m,
        Models::Two(..) => {
            return Err(Error::Precondition(
                "the rate region driver runs on a single erasure channel".into(),
            ))
        }
    };
    let (p_ee, p_ne) = erasure_scalars(model)?;
    let mut rows = Vec::with_capacity(w_grid.len());
    for &w in w_grid {
        let m_star = optimal_m(&MPolicyParams {
            p_ee,
            p_ne,
            w,
            r_p: model.primary_reward,
            r_s: base.objective.r_s,
        })?;
        let config = SimConfig {
            models: base.models.clone(),
            policy: PolicySpec::MPolicy(m_star),
            objective: Objective::new(w, base.objective.r_s),
            ..*base
        };
        let stats = simulate(&config)?;
        rows.push(RateRegionRow {
            w,
            m_star,
            r_p: stats.r_p_hat,
            r_s: stats.r_s_hat,
        });
    }
    Ok(rows)
}
