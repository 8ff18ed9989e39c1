//! Finite-state Markov models of the primary channel.
//!
//! A primary link occupies one of `S` states per slot and may switch states at
//! slot boundaries according to a row-stochastic transition matrix. Each state
//! carries two packet-success probabilities: one for slots in which the
//! secondary user stays silent and one for slots in which it transmits.
//! Named constructors cover the three models used throughout the crate:
//! the two-state erasure channel, the Gilbert-Elliot channel and the
//! three-state (Bad/Good/Very good) channel.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::{Error, Result};

/// Stationary residual required by the ergodicity check.
const ERGODICITY_RESIDUAL: f64 = 1e-10;
/// Row-sum tolerance for stochastic matrices.
const ROW_SUM_TOL: f64 = 1e-12;

/// ARQ feedback overheard from the primary receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feedback {
    Ack,
    Nack,
}

/// Index of a primary channel state, in `[0, S)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelState(pub usize);

/// Row-stochastic transition matrix of an ergodic primary-channel chain.
///
/// Construction rejects matrices that are not row-stochastic or whose power
/// iteration fails to reach a stationary distribution, so every instance has a
/// well-defined stationary distribution with strictly positive entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionMatrix {
    rows: Vec<Vec<f64>>,
    stationary: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let s = rows.len();
        if s < 2 {
            return Err(Error::Construction(format!(
                "transition matrix needs at least 2 states, got {s}"
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != s {
                return Err(Error::Construction(format!(
                    "row {i} has length {}, expected {s}",
                    row.len()
                )));
            }
            for (j, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                    return Err(Error::Construction(format!(
                        "entry ({i},{j}) = {p} outside [0,1]"
                    )));
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Construction(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        let stationary = power_iterate_stationary(&rows)?;
        Ok(Self { rows, stationary })
    }

    /// Number of states `S`.
    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    /// Transition probability from state `from` to state `to`.
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.rows[from][to]
    }

    /// Row `from` of the matrix, i.e. the distribution of the next state.
    pub fn row(&self, from: usize) -> &[f64] {
        &self.rows[from]
    }

    /// One-step propagation of a distribution: `out = dist · P`.
    pub fn propagate(&self, dist: &[f64]) -> Vec<f64> {
        let s = self.num_states();
        let mut out = vec![0.0; s];
        for (i, &d) in dist.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for j in 0..s {
                out[j] += d * self.rows[i][j];
            }
        }
        out
    }

    /// Cached stationary distribution computed at construction.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Samples the successor of `state` from its transition row.
    pub fn sample_transition<R: Rng + ?Sized>(&self, state: ChannelState, rng: &mut R) -> ChannelState {
        debug_assert!(state.0 < self.num_states());
        ChannelState(sample_index(&self.rows[state.0], rng))
    }

    /// Samples a state from the stationary distribution.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelState {
        ChannelState(sample_index(&self.stationary, rng))
    }
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Exact check on the sparsity pattern: the chain must be strongly connected
/// and the gcd of its cycle lengths must be one.
fn ergodic_structure_check(rows: &[Vec<f64>]) -> Result<()> {
    let s = rows.len();
    let reachable = |transpose: bool| -> Vec<bool> {
        let mut seen = vec![false; s];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..s {
                let edge = if transpose { rows[v][u] } else { rows[u][v] };
                if edge > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    };
    if !reachable(false).iter().all(|&r| r) || !reachable(true).iter().all(|&r| r) {
        return Err(Error::Construction(
            "chain is not irreducible: some state is unreachable".into(),
        ));
    }
    // Period = gcd over edges of level[u] + 1 - level[v], levels from a BFS.
    let mut level = vec![usize::MAX; s];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..s {
            if rows[u][v] > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let mut period = 0i64;
    for u in 0..s {
        for v in 0..s {
            if rows[u][v] > 0.0 {
                period = gcd(period, level[u] as i64 + 1 - level[v] as i64);
            }
        }
    }
    if period != 1 {
        return Err(Error::Construction(format!(
            "chain is periodic with period {period}"
        )));
    }
    Ok(())
}

/// Stationary distribution by repeated squaring of the matrix, which
/// converges quadratically even for nearly absorbing chains.
fn power_iterate_stationary(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    ergodic_structure_check(rows)?;
    let s = rows.len();
    let mut power: Vec<Vec<f64>> = rows.to_vec();
    for _ in 0..64 {
        let mut next = vec![vec![0.0; s]; s];
        for i in 0..s {
            for k in 0..s {
                let a = power[i][k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..s {
                    next[i][j] += a * power[k][j];
                }
            }
        }
        for row in &mut next {
            let sum: f64 = row.iter().sum();
            for p in row.iter_mut() {
                *p /= sum;
            }
        }
        let spread = (0..s)
            .map(|j| {
                let col: Vec<f64> = (0..s).map(|i| next[i][j]).collect();
                col.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
                    - col.iter().fold(f64::INFINITY, |m, &x| m.min(x))
            })
            .fold(0.0_f64, f64::max);
        power = next;
        if spread < 1e-15 {
            break;
        }
    }
    let mut dist: Vec<f64> = (0..s)
        .map(|j| (0..s).map(|i| power[i][j]).sum::<f64>() / s as f64)
        .collect();
    let norm: f64 = dist.iter().sum();
    for p in &mut dist {
        *p /= norm;
    }
    let propagated: Vec<f64> = (0..s)
        .map(|j| (0..s).map(|i| dist[i] * rows[i][j]).sum())
        .collect();
    let residual = propagated
        .iter()
        .zip(dist.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    if residual > ERGODICITY_RESIDUAL {
        return Err(Error::Construction(format!(
            "stationary iteration stalled at residual {residual} (> {ERGODICITY_RESIDUAL})"
        )));
    }
    if dist.iter().any(|&p| p <= 0.0) {
        return Err(Error::Construction(
            "chain is not irreducible: stationary distribution has zero entries".into(),
        ));
    }
    Ok(dist)
}

/// Per-state packet-success probabilities under both secondary activities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessProfile {
    /// P(ACK | state i, secondary silent), one entry per state.
    pub silent_ack: Vec<f64>,
    /// P(ACK | state i, secondary transmits), one entry per state.
    pub transmit_ack: Vec<f64>,
}

impl SuccessProfile {
    pub fn new(silent_ack: Vec<f64>, transmit_ack: Vec<f64>) -> Result<Self> {
        if silent_ack.len() != transmit_ack.len() {
            return Err(Error::Construction(format!(
                "success vectors have mismatched lengths {} and {}",
                silent_ack.len(),
                transmit_ack.len()
            )));
        }
        for &p in silent_ack.iter().chain(transmit_ack.iter()) {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Construction(format!(
                    "success probability {p} outside [0,1]"
                )));
            }
        }
        Ok(Self {
            silent_ack,
            transmit_ack,
        })
    }

    /// P(ACK | state, activity).
    pub fn ack_prob(&self, state: usize, transmitting: bool) -> f64 {
        if transmitting {
            self.transmit_ack[state]
        } else {
            self.silent_ack[state]
        }
    }
}

/// A complete primary-channel model: dynamics, success profile and the reward
/// earned per successfully delivered primary packet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelModel {
    pub transitions: TransitionMatrix,
    pub success: SuccessProfile,
    pub primary_reward: f64,
    pub labels: Option<Vec<String>>,
}

impl ChannelModel {
    pub fn new(
        transitions: TransitionMatrix,
        success: SuccessProfile,
        primary_reward: f64,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if success.silent_ack.len() != transitions.num_states() {
            return Err(Error::Construction(format!(
                "success profile has {} states, transitions have {}",
                success.silent_ack.len(),
                transitions.num_states()
            )));
        }
        if !(primary_reward >= 0.0) {
            return Err(Error::Construction(format!(
                "primary reward {primary_reward} must be nonnegative"
            )));
        }
        if let Some(ref l) = labels {
            if l.len() != transitions.num_states() {
                return Err(Error::Construction("label count mismatch".into()));
            }
        }
        Ok(Self {
            transitions,
            success,
            primary_reward,
            labels,
        })
    }

    pub fn num_states(&self) -> usize {
        self.transitions.num_states()
    }

    /// Stationary belief over the channel states.
    pub fn stationary_belief(&self) -> Belief {
        Belief::new(self.transitions.stationary().to_vec()).expect("stationary is a distribution")
    }

    /// Samples the ARQ feedback for a slot spent in `state`.
    pub fn sample_ack<R: Rng + ?Sized>(
        &self,
        state: ChannelState,
        secondary_transmits: bool,
        rng: &mut R,
    ) -> Feedback {
        let p = self.success.ack_prob(state.0, secondary_transmits);
        if rng.random::<f64>() < p {
            Feedback::Ack
        } else {
            Feedback::Nack
        }
    }
}

/// Stationary distribution of an ergodic transition matrix as a belief.
pub fn stationary_distribution(transitions: &TransitionMatrix) -> Belief {
    Belief::new(transitions.stationary().to_vec()).expect("stationary is a distribution")
}

/// Probability that the erasure channel is back in erasure when the secondary
/// user listens again after an M-packet burst triggered by an observed
/// erasure: `[P_NE + (P_EE−P_NE)^(M+1)·(1−P_EE)] / (1 + P_NE − P_EE)`.
///
/// The burst occupies M slots, so the first listening slot is M+1 chain steps
/// after the observed erasure and the value equals the (M+1)-step E→E
/// transition probability.
pub fn m_step_erasure_prob(m: u32, p_ee: f64, p_ne: f64) -> Result<f64> {
    check_positively_correlated(p_ee, p_ne)?;
    let lambda = p_ee - p_ne;
    Ok((p_ne + lambda.powi(m as i32 + 1) * (1.0 - p_ee)) / (1.0 + p_ne - p_ee))
}

pub(crate) fn check_positively_correlated(p_ee: f64, p_ne: f64) -> Result<()> {
    if !(p_ee > p_ne) {
        return Err(Error::Precondition(format!(
            "positively correlated channel required: P_EE = {p_ee} must exceed P_NE = {p_ne}"
        )));
    }
    if !(0.0..=1.0).contains(&p_ee) || !(0.0..=1.0).contains(&p_ne) {
        return Err(Error::Precondition(format!(
            "transition probabilities P_EE = {p_ee}, P_NE = {p_ne} must lie in [0,1]"
        )));
    }
    Ok(())
}

/// Parameters of the Gilbert-Elliot model: sticky Bad/Good dynamics plus the
/// four ACK probabilities (Bad/silent, Bad/transmit, Good/silent,
/// Good/transmit).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GilbertElliotParams {
    pub p_bb: f64,
    pub p_gb: f64,
    /// `[γ1, γ2, γ3, γ4]`.
    pub gamma: [f64; 4],
}

/// State order of the erasure preset.
pub const ERASURE_STATES: [&str; 2] = ["E", "N"];
/// State order of the Gilbert-Elliot preset.
pub const GILBERT_ELLIOT_STATES: [&str; 2] = ["B", "G"];
/// State order of the three-state preset.
pub const THREE_STATE_STATES: [&str; 3] = ["B", "G", "Vg"];

/// Two-state erasure/non-erasure channel, state order (E, N).
///
/// In E every primary packet is lost; in N it is delivered unless the
/// secondary transmits, in which case the collision erases it.
pub fn erasure(p_ee: f64, p_ne: f64, primary_reward: f64) -> Result<ChannelModel> {
    let transitions = TransitionMatrix::new(vec![
        vec![p_ee, 1.0 - p_ee],
        vec![p_ne, 1.0 - p_ne],
    ])?;
    let success = SuccessProfile::new(vec![0.0, 1.0], vec![0.0, 0.0])?;
    ChannelModel::new(
        transitions,
        success,
        primary_reward,
        Some(ERASURE_STATES.iter().map(|s| s.to_string()).collect()),
    )
}

/// Gilbert-Elliot channel, state order (B, G).
pub fn gilbert_elliot(params: &GilbertElliotParams, primary_reward: f64) -> Result<ChannelModel> {
    let [g1, g2, g3, g4] = params.gamma;
    let transitions = TransitionMatrix::new(vec![
        vec![params.p_bb, 1.0 - params.p_bb],
        vec![params.p_gb, 1.0 - params.p_gb],
    ])?;
    let success = SuccessProfile::new(vec![g1, g3], vec![g2, g4])?;
    ChannelModel::new(
        transitions,
        success,
        primary_reward,
        Some(GILBERT_ELLIOT_STATES.iter().map(|s| s.to_string()).collect()),
    )
}

/// Three-state channel, state order (B, G, Vg).
///
/// Primary delivery succeeds in G and Vg while the secondary is silent, and
/// only in Vg while it transmits.
pub fn three_state(rows: Vec<Vec<f64>>, primary_reward: f64) -> Result<ChannelModel> {
    if rows.len() != 3 {
        return Err(Error::Construction(format!(
            "three-state preset needs a 3x3 matrix, got {} rows",
            rows.len()
        )));
    }
    let transitions = TransitionMatrix::new(rows)?;
    let success = SuccessProfile::new(vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0])?;
    ChannelModel::new(
        transitions,
        success,
        primary_reward,
        Some(THREE_STATE_STATES.iter().map(|s| s.to_string()).collect()),
    )
}

/// Independent per-episode random stream derived from a master seed.
///
/// Episodes share the master key but occupy distinct ChaCha streams, so they
/// can run concurrently and reproduce bit-for-bit.
pub fn episode_rng(master_seed: u64, episode_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(episode_index);
    rng
}
