//! Bayesian belief tracking of the primary channel state.
//!
//! The secondary user never observes the channel state directly; it sees the
//! ARQ feedback generated under its own action. Each update conditions the
//! current belief on that feedback (Bayes step with the model's success
//! profile as likelihood) and then propagates one slot forward through the
//! transition matrix. Specialized closed-form updates are provided for the
//! erasure, Gilbert-Elliot, three-state and two-channel models; they agree
//! with the general update wherever the observation has positive probability.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, Feedback, GilbertElliotParams, TransitionMatrix};
use crate::policies::{Action, TwoChannelAction};
use crate::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-12;

/// Point on the probability simplex over the primary channel states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    probs: Vec<f64>,
}

impl Belief {
    /// Builds a belief from a probability vector, clamping entries within
    /// `1e-12` of the simplex boundary onto it.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Construction("empty belief vector".into()));
        }
        for p in &mut probs {
            if !p.is_finite() || *p < -SIMPLEX_TOL || *p > 1.0 + SIMPLEX_TOL {
                return Err(Error::Construction(format!(
                    "belief entry {p} outside [0,1]"
                )));
            }
            *p = p.clamp(0.0, 1.0);
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Construction(format!(
                "belief sums to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Uniform belief over `s` states.
    pub fn uniform(s: usize) -> Self {
        Self {
            probs: vec![1.0 / s as f64; s],
        }
    }

    /// Two-state belief from the free coordinate `p = P(state 0)`.
    pub fn from_two_state(p: f64) -> Result<Self> {
        Self::new(vec![p, 1.0 - p])
    }

    /// Three-state belief from the free pair `(p, q) = (P(G), P(Vg))`,
    /// state order (B, G, Vg).
    pub fn from_three_state(p: f64, q: f64) -> Result<Self> {
        Self::new(vec![1.0 - p - q, p, q])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probs[state]
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    /// Free coordinate of a two-state belief: `P(state 0)`.
    pub fn two_state_p(&self) -> f64 {
        debug_assert_eq!(self.probs.len(), 2);
        self.probs[0]
    }

    /// Free pair of a three-state belief: `(P(G), P(Vg))`.
    pub fn three_state_pq(&self) -> (f64, f64) {
        debug_assert_eq!(self.probs.len(), 3);
        (self.probs[1], self.probs[2])
    }
}

/// A secondary action together with the feedback it produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub action: Action,
    pub feedback: Feedback,
}

impl Observation {
    pub fn new(action: Action, feedback: Feedback) -> Self {
        Self { action, feedback }
    }
}

/// Action and per-channel feedback for the two-channel model. The occupied
/// channel's feedback is always present but carries no information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoChannelObservation {
    pub action: TwoChannelAction,
    pub feedback: [Feedback; 2],
}

/// Bayes-then-propagate update for an arbitrary finite-state model.
///
/// The likelihood of the feedback uses the silent column of the success
/// profile when the secondary listened and the transmit column when it
/// transmitted. Feedback with zero likelihood under the belief is rejected.
pub fn update_general(b: &Belief, obs: &Observation, model: &ChannelModel) -> Result<Belief> {
    let s = model.num_states();
    if b.num_states() != s {
        return Err(Error::Precondition(format!(
            "belief has {} states, model has {s}",
            b.num_states()
        )));
    }
    let transmitting = obs.action == Action::Transmit;
    let mut weights = vec![0.0; s];
    let mut total = 0.0;
    for i in 0..s {
        let ack = model.success.ack_prob(i, transmitting);
        let like = match obs.feedback {
            Feedback::Ack => ack,
            Feedback::Nack => 1.0 - ack,
        };
        weights[i] = like * b.prob(i);
        total += weights[i];
    }
    if total <= 0.0 {
        return Err(Error::DegenerateObservation(format!(
            "{:?} after {:?} has zero likelihood under the current belief",
            obs.feedback, obs.action
        )));
    }
    for w in &mut weights {
        *w /= total;
    }
    Belief::new(model.transitions.propagate(&weights))
}

/// Erasure-model update on the scalar belief `p = P(E)`.
///
/// While silent the feedback reveals the state exactly; while transmitting
/// the feedback is uninformative (a collision always produces a NACK) and the
/// belief propagates by the Markov property regardless of feedback.
pub fn update_two_state_erasure(p: f64, obs: &Observation, p_ee: f64, p_ne: f64) -> Result<f64> {
    match (obs.action, obs.feedback) {
        (Action::Listen, Feedback::Ack) => {
            if p >= 1.0 {
                return Err(Error::DegenerateObservation(
                    "ACK while silent is impossible when P(E) = 1".into(),
                ));
            }
            Ok(p_ne)
        }
        (Action::Listen, Feedback::Nack) => {
            if p <= 0.0 {
                return Err(Error::DegenerateObservation(
                    "NACK while silent is impossible when P(E) = 0".into(),
                ));
            }
            Ok(p_ee)
        }
        (Action::Transmit, _) => Ok(p * p_ee + (1.0 - p) * p_ne),
    }
}

/// Gilbert-Elliot update on the scalar belief `p = P(B)`.
pub fn update_gilbert_elliot(p: f64, obs: &Observation, params: &GilbertElliotParams) -> Result<f64> {
    let [g1, g2, g3, g4] = params.gamma;
    let (ack_bad, ack_good) = match obs.action {
        Action::Listen => (g1, g3),
        Action::Transmit => (g2, g4),
    };
    let (like_bad, like_good) = match obs.feedback {
        Feedback::Ack => (ack_bad, ack_good),
        Feedback::Nack => (1.0 - ack_bad, 1.0 - ack_good),
    };
    let denom = like_bad * p + like_good * (1.0 - p);
    if denom <= 0.0 {
        return Err(Error::DegenerateObservation(format!(
            "{:?} after {:?} has zero likelihood (p = {p})",
            obs.feedback, obs.action
        )));
    }
    let posterior_bad = like_bad * p / denom;
    Ok(posterior_bad * params.p_bb + (1.0 - posterior_bad) * params.p_gb)
}

/// Three-state update on the free pair `(p, q) = (P(G), P(Vg))`.
///
/// State order is (B, G, Vg): a NACK while silent pins the state to B, an ACK
/// while transmitting pins it to Vg, and the two remaining cases renormalize
/// over the compatible states before propagating.
pub fn update_three_state(
    pq: (f64, f64),
    obs: &Observation,
    transitions: &TransitionMatrix,
) -> Result<(f64, f64)> {
    let (p, q) = pq;
    if p < 0.0 || q < 0.0 || p + q > 1.0 + SIMPLEX_TOL {
        return Err(Error::Precondition(format!(
            "belief pair ({p}, {q}) outside the simplex"
        )));
    }
    let t = |i: usize, j: usize| transitions.prob(i, j);
    match (obs.action, obs.feedback) {
        // NACK while silent: state was B.
        (Action::Listen, Feedback::Nack) => {
            if 1.0 - p - q <= 0.0 {
                return Err(Error::DegenerateObservation(
                    "NACK while silent is impossible when P(B) = 0".into(),
                ));
            }
            Ok((t(0, 1), t(0, 2)))
        }
        // ACK while silent: state was G or Vg.
        (Action::Listen, Feedback::Ack) => {
            if p + q <= 0.0 {
                return Err(Error::DegenerateObservation(
                    "ACK while silent is impossible when P(G) + P(Vg) = 0".into(),
                ));
            }
            let wg = p / (p + q);
            let wv = q / (p + q);
            Ok((wg * t(1, 1) + wv * t(2, 1), wg * t(1, 2) + wv * t(2, 2)))
        }
        // ACK while transmitting: state was Vg.
        (Action::Transmit, Feedback::Ack) => {
            if q <= 0.0 {
                return Err(Error::DegenerateObservation(
                    "ACK while transmitting is impossible when P(Vg) = 0".into(),
                ));
            }
            Ok((t(2, 1), t(2, 2)))
        }
        // NACK while transmitting: state was G or B.
        (Action::Transmit, Feedback::Nack) => {
            if 1.0 - q <= 0.0 {
                return Err(Error::DegenerateObservation(
                    "NACK while transmitting is impossible when P(Vg) = 1".into(),
                ));
            }
            let wg = p / (1.0 - q);
            let wb = (1.0 - p - q) / (1.0 - q);
            Ok((wg * t(1, 1) + wb * t(0, 1), wg * t(1, 2) + wb * t(0, 2)))
        }
    }
}

/// Probability of overhearing an ACK given the belief and the chosen action.
pub fn observation_probability(b: &Belief, action: Action, model: &ChannelModel) -> f64 {
    let transmitting = action == Action::Transmit;
    b.probs()
        .iter()
        .enumerate()
        .map(|(i, &p)| p * model.success.ack_prob(i, transmitting))
        .sum()
}

/// Componentwise erasure update for two independent primary channels.
///
/// `pq` holds the erasure beliefs of channels 1 and 2. Each listened channel
/// updates from its own feedback; the occupied channel propagates by the
/// Markov property.
pub fn update_two_channel(
    pq: (f64, f64),
    obs: &TwoChannelObservation,
    p1: &TransitionMatrix,
    p2: &TransitionMatrix,
) -> Result<(f64, f64)> {
    let channel_action = |occupied: bool, feedback: Feedback| Observation {
        action: if occupied { Action::Transmit } else { Action::Listen },
        feedback,
    };
    let (tx1, tx2) = match obs.action {
        TwoChannelAction::ListenBoth => (false, false),
        TwoChannelAction::TxCh1 => (true, false),
        TwoChannelAction::TxCh2 => (false, true),
    };
    let p_next = update_two_state_erasure(
        pq.0,
        &channel_action(tx1, obs.feedback[0]),
        p1.prob(0, 0),
        p1.prob(1, 0),
    )?;
    let q_next = update_two_state_erasure(
        pq.1,
        &channel_action(tx2, obs.feedback[1]),
        p2.prob(0, 0),
        p2.prob(1, 0),
    )?;
    Ok((p_next, q_next))
}
