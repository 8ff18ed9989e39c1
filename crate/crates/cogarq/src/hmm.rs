//! Estimation of unknown transition probabilities from ARQ traces.
//!
//! The channel state is hidden; the overheard ACK/NACK sequence is a
//! probabilistic function of it through the known success profile, with the
//! emission column selected by the secondary user's activity during each
//! slot. Scaled forward-backward inference feeds Baum-Welch re-estimation of
//! the transition matrix; emissions stay fixed throughout. The three-state
//! procedure trains in two phases, silent then transmitting, because neither
//! activity alone can tell G from Vg (silence) or G from B (transmission).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{episode_rng, ChannelModel, Feedback, SuccessProfile, TransitionMatrix};
use crate::closedform::{optimal_m, MPolicyParams, MValue};
use crate::policies::Objective;
use crate::sim::{simulate, BeliefInit, Models, PolicySpec, SimConfig};
use crate::{Error, Result};

/// Boundary clamp for re-estimated transition probabilities.
pub const TRANSITION_CLAMP: f64 = 1e-6;
/// Default log-likelihood gain below which EM stops.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default EM iteration cap.
pub const DEFAULT_MAX_ITER: usize = 500;
/// Default number of jittered restarts.
pub const DEFAULT_STARTS: usize = 4;

/// Secondary-user activity during a training slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Silent,
    Transmitting,
}

impl Regime {
    fn label(self) -> &'static str {
        match self {
            Regime::Silent => "silent",
            Regime::Transmitting => "transmitting",
        }
    }
}

/// A feedback sequence with the activity regime of every slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSequence {
    pub symbols: Vec<Feedback>,
    pub regimes: Vec<Regime>,
}

impl ObservationSequence {
    pub fn new(symbols: Vec<Feedback>, regimes: Vec<Regime>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Precondition("empty observation sequence".into()));
        }
        if symbols.len() != regimes.len() {
            return Err(Error::Precondition(format!(
                "{} symbols but {} regime annotations",
                symbols.len(),
                regimes.len()
            )));
        }
        Ok(Self { symbols, regimes })
    }

    /// Sequence recorded under a single activity regime.
    pub fn uniform(symbols: Vec<Feedback>, regime: Regime) -> Result<Self> {
        let regimes = vec![regime; symbols.len()];
        Self::new(symbols, regimes)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Two-line text form: a header naming the regime, then the symbols over
    /// the alphabet {A, N}.
    pub fn to_text(&self) -> Result<String> {
        let regime = self.regimes[0];
        if self.regimes.iter().any(|&r| r != regime) {
            return Err(Error::Precondition(
                "text form requires a single regime for the whole sequence".into(),
            ));
        }
        let line: String = self
            .symbols
            .iter()
            .map(|f| match f {
                Feedback::Ack => 'A',
                Feedback::Nack => 'N',
            })
            .collect();
        Ok(format!("# regime={}\n{line}\n", regime.label()))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Precondition("empty trace file".into()))?;
        let regime = match header.trim() {
            "# regime=silent" => Regime::Silent,
            "# regime=transmitting" => Regime::Transmitting,
            other => {
                return Err(Error::Precondition(format!(
                    "unrecognized trace header '{other}'"
                )))
            }
        };
        let body = lines
            .next()
            .ok_or_else(|| Error::Precondition("trace file has no symbol line".into()))?;
        let symbols = body
            .trim()
            .chars()
            .map(|c| match c {
                'A' => Ok(Feedback::Ack),
                'N' => Ok(Feedback::Nack),
                other => Err(Error::Precondition(format!(
                    "invalid trace symbol '{other}'"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::uniform(symbols, regime)
    }
}

/// Fixed emission model: ACK probabilities per state and regime.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmmSpec {
    pub success: SuccessProfile,
}

impl HmmSpec {
    pub fn new(success: SuccessProfile) -> Self {
        Self { success }
    }

    pub fn n_states(&self) -> usize {
        self.success.silent_ack.len()
    }

    fn emission(&self, state: usize, regime: Regime, symbol: Feedback) -> f64 {
        let ack = self
            .success
            .ack_prob(state, regime == Regime::Transmitting);
        match symbol {
            Feedback::Ack => ack,
            Feedback::Nack => 1.0 - ack,
        }
    }
}

/// Posterior summaries from one forward-backward pass.
#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub log_likelihood: f64,
    /// Per-slot state posteriors, `posteriors[t][i] = P(state_t = i | obs)`.
    pub posteriors: Vec<Vec<f64>>,
    /// Pairwise transition posteriors summed over slots,
    /// `pairwise_sums[i][j] = Σ_t P(state_t = i, state_{t+1} = j | obs)`.
    pub pairwise_sums: Vec<Vec<f64>>,
}

/// Scaled forward-backward under the chain's stationary initial distribution.
pub fn forward_backward(
    obs: &ObservationSequence,
    spec: &HmmSpec,
    transitions: &TransitionMatrix,
) -> Result<ForwardBackward> {
    let s = spec.n_states();
    if transitions.num_states() != s {
        return Err(Error::Precondition(format!(
            "transition matrix has {} states, emissions have {s}",
            transitions.num_states()
        )));
    }
    let len = obs.len();
    let mut alphas = vec![vec![0.0; s]; len];
    let mut norms = vec![0.0; len];
    for t in 0..len {
        let mut norm = 0.0;
        for i in 0..s {
            let predicted = if t == 0 {
                transitions.stationary()[i]
            } else {
                (0..s).map(|k| alphas[t - 1][k] * transitions.prob(k, i)).sum()
            };
            let a = predicted * spec.emission(i, obs.regimes[t], obs.symbols[t]);
            alphas[t][i] = a;
            norm += a;
        }
        if norm <= 0.0 {
            return Err(Error::DegenerateObservation(format!(
                "observation at slot {t} has zero likelihood under the fixed emissions"
            )));
        }
        for a in &mut alphas[t] {
            *a /= norm;
        }
        norms[t] = norm;
    }
    let log_likelihood = norms.iter().map(|n| n.ln()).sum();

    let mut betas = vec![vec![0.0; s]; len];
    betas[len - 1] = vec![1.0; s];
    for t in (0..len - 1).rev() {
        for i in 0..s {
            betas[t][i] = (0..s)
                .map(|j| {
                    transitions.prob(i, j)
                        * spec.emission(j, obs.regimes[t + 1], obs.symbols[t + 1])
                        * betas[t + 1][j]
                })
                .sum();
        }
        // Rescale per slot to keep the recursion bounded.
        let norm: f64 = betas[t].iter().sum::<f64>();
        if norm > 0.0 {
            for b in &mut betas[t] {
                *b /= norm;
            }
        }
    }

    let mut posteriors = vec![vec![0.0; s]; len];
    for t in 0..len {
        let mut norm = 0.0;
        for i in 0..s {
            posteriors[t][i] = alphas[t][i] * betas[t][i];
            norm += posteriors[t][i];
        }
        for p in &mut posteriors[t] {
            *p /= norm;
        }
    }

    let mut pairwise_sums = vec![vec![0.0; s]; s];
    for t in 0..len - 1 {
        let mut slot = vec![vec![0.0; s]; s];
        let mut norm = 0.0;
        for i in 0..s {
            for j in 0..s {
                let x = alphas[t][i]
                    * transitions.prob(i, j)
                    * spec.emission(j, obs.regimes[t + 1], obs.symbols[t + 1])
                    * betas[t + 1][j];
                slot[i][j] = x;
                norm += x;
            }
        }
        for i in 0..s {
            for j in 0..s {
                pairwise_sums[i][j] += slot[i][j] / norm;
            }
        }
    }

    Ok(ForwardBackward {
        log_likelihood,
        posteriors,
        pairwise_sums,
    })
}

/// Result of an EM fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmmFit {
    pub transitions_hat: TransitionMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood of the iterate entering each EM step.
    pub log_likelihood_trace: Vec<f64>,
}

fn clamp_rows(rows: &mut [Vec<f64>]) {
    for row in rows.iter_mut() {
        for p in row.iter_mut() {
            *p = p.clamp(TRANSITION_CLAMP, 1.0 - TRANSITION_CLAMP);
        }
        let sum: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
}

/// Baum-Welch with fixed emissions: re-estimates transitions from the
/// pairwise posteriors until the log-likelihood gain drops below `tol`.
pub fn baum_welch(
    obs: &ObservationSequence,
    spec: &HmmSpec,
    init_transitions: Vec<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> Result<HmmFit> {
    let s = spec.n_states();
    for row in &init_transitions {
        for &p in row {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Precondition(format!(
                    "initial transition entry {p} must lie strictly inside (0,1)"
                )));
            }
        }
    }
    let mut transitions = TransitionMatrix::new(init_transitions)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        let fb = forward_backward(obs, spec, &transitions)?;
        if let Some(&prev) = trace.last() {
            if fb.log_likelihood - prev < tol {
                trace.push(fb.log_likelihood);
                converged = true;
                break;
            }
        }
        trace.push(fb.log_likelihood);
        iterations += 1;
        let mut rows = vec![vec![0.0; s]; s];
        for i in 0..s {
            let denom: f64 = fb.pairwise_sums[i].iter().sum();
            if denom > 0.0 {
                for j in 0..s {
                    rows[i][j] = fb.pairwise_sums[i][j] / denom;
                }
            } else {
                // State never visited: keep the current row.
                rows[i] = (0..s).map(|j| transitions.prob(i, j)).collect();
            }
        }
        clamp_rows(&mut rows);
        transitions = TransitionMatrix::new(rows)?;
    }
    let final_ll = forward_backward(obs, spec, &transitions)?.log_likelihood;
    Ok(HmmFit {
        transitions_hat: transitions,
        log_likelihood: final_ll,
        iterations,
        converged,
        log_likelihood_trace: trace,
    })
}

fn jittered_sticky_init<R: Rng + ?Sized>(s: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let off = 0.2 / (s - 1) as f64;
    let mut rows = vec![vec![0.0; s]; s];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, p) in row.iter_mut().enumerate() {
            let base = if i == j { 0.8 } else { off };
            *p = (base + rng.random_range(-0.05..0.05)).clamp(0.01, 0.99);
        }
        let sum: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
    rows
}

/// Multi-start Baum-Welch from jittered sticky initializations, keeping the
/// best final likelihood.
pub fn fit_transitions(
    obs: &ObservationSequence,
    spec: &HmmSpec,
    seed: u64,
) -> Result<HmmFit> {
    let mut best: Option<HmmFit> = None;
    for start in 0..DEFAULT_STARTS {
        let mut rng = episode_rng(seed, start as u64);
        let init = jittered_sticky_init(spec.n_states(), &mut rng);
        let fit = baum_welch(obs, spec, init, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        if best
            .as_ref()
            .map(|b| fit.log_likelihood > b.log_likelihood)
            .unwrap_or(true)
        {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Two-phase three-state training: fit on the silent trace, then refine from
/// that estimate on the transmitting trace, which breaks the G/Vg symmetry
/// left by silent observation.
pub fn train_three_state_two_phase(
    obs_silent: &ObservationSequence,
    obs_transmit: &ObservationSequence,
    spec: &HmmSpec,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<HmmFit> {
    if obs_silent.is_empty() || obs_transmit.is_empty() {
        return Err(Error::Precondition(
            "both training phases need a nonempty trace".into(),
        ));
    }
    let mut best: Option<HmmFit> = None;
    for start in 0..DEFAULT_STARTS {
        let mut rng = episode_rng(seed, start as u64);
        let init = jittered_sticky_init(spec.n_states(), &mut rng);
        let phase1 = baum_welch(obs_silent, spec, init, tol, max_iter)?;
        let phase1_rows: Vec<Vec<f64>> = (0..spec.n_states())
            .map(|i| {
                (0..spec.n_states())
                    .map(|j| phase1.transitions_hat.prob(i, j))
                    .collect()
            })
            .collect();
        let phase2 = baum_welch(obs_transmit, spec, phase1_rows, tol, max_iter)?;
        if best
            .as_ref()
            .map(|b| phase2.log_likelihood > b.log_likelihood)
            .unwrap_or(true)
        {
            best = Some(phase2);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Simulates an ARQ trace from the true model under a fixed activity regime.
pub fn generate_arq_trace(
    model: &ChannelModel,
    regime: Regime,
    length: usize,
    seed: u64,
) -> Result<ObservationSequence> {
    if length == 0 {
        return Err(Error::Precondition("trace length must be positive".into()));
    }
    let mut rng = episode_rng(seed, u64::MAX);
    let mut state = model.transitions.sample_stationary(&mut rng);
    let transmitting = regime == Regime::Transmitting;
    let mut symbols = Vec::with_capacity(length);
    for _ in 0..length {
        state = model.transitions.sample_transition(state, &mut rng);
        symbols.push(model.sample_ack(state, transmitting, &mut rng));
    }
    ObservationSequence::uniform(symbols, regime)
}

/// Best relabeling of estimated states onto true states: permutations must
/// preserve the fixed emission signature; among those the transition L1
/// error is minimized. Returns the permutation and the aligned L1 error.
pub fn align_to_truth(
    estimated: &TransitionMatrix,
    spec: &HmmSpec,
    truth: &TransitionMatrix,
) -> (Vec<usize>, f64) {
    let s = spec.n_states();
    let mut best_perm: Vec<usize> = (0..s).collect();
    let mut best_err = f64::INFINITY;
    let mut perm: Vec<usize> = (0..s).collect();
    permute_all(&mut perm, 0, &mut |p| {
        let emissions_match = (0..s).all(|i| {
            (spec.success.silent_ack[p[i]] - spec.success.silent_ack[i]).abs() < 1e-12
                && (spec.success.transmit_ack[p[i]] - spec.success.transmit_ack[i]).abs() < 1e-12
        });
        if !emissions_match {
            return;
        }
        let err: f64 = (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| (estimated.prob(p[i], p[j]) - truth.prob(i, j)).abs())
                    .sum::<f64>()
            })
            .sum();
        if err < best_err {
            best_err = err;
            best_perm = p.to_vec();
        }
    });
    (best_perm, best_err)
}

fn permute_all(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute_all(perm, k + 1, visit);
        perm.swap(k, i);
    }
}

/// One row of the throughput-degradation experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegradationRow {
    pub w: f64,
    pub m_true: MValue,
    pub m_estimated: MValue,
    pub r_true_params: f64,
    pub r_estimated_params: f64,
}

/// Simulation budget for the degradation experiment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DegradationOptions {
    pub horizon: u64,
    pub replications: u64,
    pub seed: u64,
}

impl Default for DegradationOptions {
    fn default() -> Self {
        Self {
            horizon: 100_000,
            replications: 4,
            seed: 1,
        }
    }
}

fn erasure_scalars(model: &ChannelModel) -> Result<(f64, f64)> {
    if model.success.silent_ack != [0.0, 1.0] || model.success.transmit_ack != [0.0, 0.0] {
        return Err(Error::Precondition(
            "degradation experiment runs on the erasure model".into(),
        ));
    }
    Ok((model.transitions.prob(0, 0), model.transitions.prob(1, 0)))
}

/// Picks the burst length for possibly ill-ordered estimates. Without
/// positive correlation the after-NACK burst has no informational basis, so
/// only the algebraic always/never regimes remain.
fn robust_optimal_m(p_ee: f64, p_ne: f64, w: f64, r_p: f64, r_s: f64) -> Result<MValue> {
    if p_ee > p_ne {
        optimal_m(&MPolicyParams {
            p_ee,
            p_ne,
            w,
            r_p,
            r_s,
        })
    } else if w * r_p < (1.0 - w) * r_s {
        Ok(MValue::Infinite)
    } else {
        Ok(MValue::Finite(0))
    }
}

/// Trains on a silent trace of the given length, designs the burst policy
/// under the estimated parameters, and simulates both the matched and the
/// mismatched designs under the true model.
pub fn degradation_experiment(
    true_model: &ChannelModel,
    training_length: usize,
    w_grid: &[f64],
    options: &DegradationOptions,
) -> Result<Vec<DegradationRow>> {
    if training_length < 2 {
        return Err(Error::Precondition(
            "training length must be at least 2".into(),
        ));
    }
    let (p_ee, p_ne) = erasure_scalars(true_model)?;
    let obs = generate_arq_trace(true_model, Regime::Silent, training_length, options.seed)?;
    let spec = HmmSpec::new(true_model.success.clone());
    let fit = fit_transitions(&obs, &spec, options.seed)?;
    let p_ee_hat = fit.transitions_hat.prob(0, 0);
    let p_ne_hat = fit.transitions_hat.prob(1, 0);

    let mut rows = Vec::with_capacity(w_grid.len());
    for &w in w_grid {
        let r_p = true_model.primary_reward;
        let m_true = robust_optimal_m(p_ee, p_ne, w, r_p, 1.0)?;
        let m_est = robust_optimal_m(p_ee_hat, p_ne_hat, w, r_p, 1.0)?;
        let run = |m: MValue| -> Result<f64> {
            let config = SimConfig {
                models: Models::Single(true_model.clone()),
                policy: PolicySpec::MPolicy(m),
                objective: Objective::new(w, 1.0),
                horizon: options.horizon,
                burn_in: 0,
                replications: options.replications,
                seed: options.seed,
                belief_init: BeliefInit::Stationary,
                record_trace: false,
            };
            Ok(simulate(&config)?.r_hat)
        };
        let r_true = run(m_true)?;
        let r_est = if m_est == m_true { r_true } else { run(m_est)? };
        rows.push(DegradationRow {
            w,
            m_true,
            m_estimated: m_est,
            r_true_params: r_true,
            r_estimated_params: r_est,
        });
    }
    Ok(rows)
}
