//! Secondary-user policies over a common decide/observe interface.
//!
//! All policies map the information state they maintain (a belief, a burst
//! counter, or the genie's revealed channel state) to an action each slot,
//! then fold the slot's observation back in. Handles are plain values:
//! cloning one forks its state, and identical observation sequences always
//! reproduce identical action sequences.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::belief::{observation_probability, update_general, update_two_channel, Belief, Observation, TwoChannelObservation};
use crate::channel::{ChannelModel, ChannelState, Feedback, TransitionMatrix};
use crate::closedform::MValue;
use crate::dp::ValueGrid;
use crate::{Error, Result};

/// Single-channel action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Listen,
    Transmit,
}

/// Two-channel action: listen to both feedbacks, or occupy one channel and
/// listen to the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TwoChannelAction {
    ListenBoth,
    TxCh1,
    TxCh2,
}

/// Objective parameters shared by all policies: the primary/secondary weight
/// and the per-packet secondary reward. The primary reward lives on the
/// channel model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Objective {
    pub w: f64,
    pub r_s: f64,
}

impl Objective {
    pub fn new(w: f64, r_s: f64) -> Self {
        Self { w, r_s }
    }
}

#[derive(Debug, Clone)]
enum PolicyKind {
    /// Follow the argmax actions of a solved value grid.
    Dp { grid: Arc<ValueGrid>, belief: Belief },
    /// Transmit whenever the immediate transmit gain beats the listen gain.
    Greedy { belief: Belief },
    /// Listen until a NACK, then transmit M consecutive packets.
    MPolicy { m: MValue, remaining: u64 },
    /// Upper bound: told the previous slot's true channel state.
    Genie { last_state: Option<ChannelState> },
    AlwaysListen,
    AlwaysTransmit,
}

/// A single-channel policy with its internal state.
#[derive(Debug, Clone)]
pub struct PolicyHandle {
    kind: PolicyKind,
    pending: Option<Action>,
}

impl PolicyHandle {
    /// DP policy; the belief starts at the model's stationary distribution.
    pub fn dp(grid: Arc<ValueGrid>, model: &ChannelModel) -> Self {
        Self::with_kind(PolicyKind::Dp {
            grid,
            belief: model.stationary_belief(),
        })
    }

    pub fn greedy(model: &ChannelModel) -> Self {
        Self::with_kind(PolicyKind::Greedy {
            belief: model.stationary_belief(),
        })
    }

    pub fn m_policy(m: MValue) -> Self {
        Self::with_kind(PolicyKind::MPolicy { m, remaining: 0 })
    }

    pub fn genie() -> Self {
        Self::with_kind(PolicyKind::Genie { last_state: None })
    }

    pub fn always_listen() -> Self {
        Self::with_kind(PolicyKind::AlwaysListen)
    }

    pub fn always_transmit() -> Self {
        Self::with_kind(PolicyKind::AlwaysTransmit)
    }

    fn with_kind(kind: PolicyKind) -> Self {
        Self {
            kind,
            pending: None,
        }
    }

    /// Replaces the tracked belief (used for randomized initialization).
    pub fn set_belief(&mut self, belief: Belief) {
        match &mut self.kind {
            PolicyKind::Dp { belief: b, .. } | PolicyKind::Greedy { belief: b } => *b = belief,
            _ => {}
        }
    }

    /// Current belief, for policies that track one.
    pub fn belief(&self) -> Option<&Belief> {
        match &self.kind {
            PolicyKind::Dp { belief, .. } | PolicyKind::Greedy { belief } => Some(belief),
            _ => None,
        }
    }

    /// Chooses this slot's action.
    pub fn decide(&mut self, model: &ChannelModel, objective: &Objective) -> Result<Action> {
        let action = match &self.kind {
            PolicyKind::Dp { grid, belief } => {
                let coords = grid_coords(belief);
                match grid.action_index_at(&coords) {
                    0 => Action::Listen,
                    _ => Action::Transmit,
                }
            }
            PolicyKind::Greedy { belief } => {
                let g1 = objective.w
                    * model.primary_reward
                    * observation_probability(belief, Action::Listen, model);
                let g2 = (1.0 - objective.w) * objective.r_s
                    + objective.w
                        * model.primary_reward
                        * observation_probability(belief, Action::Transmit, model);
                if g2 > g1 {
                    Action::Transmit
                } else {
                    Action::Listen
                }
            }
            PolicyKind::MPolicy { remaining, .. } => {
                if *remaining > 0 {
                    Action::Transmit
                } else {
                    Action::Listen
                }
            }
            PolicyKind::Genie { last_state } => {
                let state = last_state.ok_or_else(|| {
                    Error::State("genie has not been told any channel state yet".into())
                })?;
                genie_myopic_action(state, model, objective)
            }
            PolicyKind::AlwaysListen => Action::Listen,
            PolicyKind::AlwaysTransmit => Action::Transmit,
        };
        self.pending = Some(action);
        Ok(action)
    }

    /// Folds the slot's observation back into the policy state. The
    /// observation must carry the action returned by the preceding `decide`.
    pub fn observe(&mut self, obs: &Observation, model: &ChannelModel) -> Result<()> {
        match self.pending.take() {
            Some(action) if action == obs.action => {}
            Some(action) => {
                return Err(Error::State(format!(
                    "observation says {:?} but the policy chose {:?}",
                    obs.action, action
                )))
            }
            None => {
                return Err(Error::State(
                    "observe called without a preceding decide".into(),
                ))
            }
        }
        match &mut self.kind {
            PolicyKind::Dp { belief, .. } | PolicyKind::Greedy { belief } => {
                *belief = update_general(belief, obs, model)?;
            }
            PolicyKind::MPolicy { m, remaining } => match (obs.action, obs.feedback) {
                (Action::Listen, Feedback::Nack) => {
                    *remaining = match m {
                        MValue::Finite(m) => u64::from(*m),
                        MValue::Infinite => u64::MAX,
                    };
                }
                (Action::Transmit, _) => {
                    if matches!(m, MValue::Finite(_)) {
                        *remaining = remaining.saturating_sub(1);
                    }
                }
                (Action::Listen, Feedback::Ack) => {}
            },
            PolicyKind::Genie { .. } | PolicyKind::AlwaysListen | PolicyKind::AlwaysTransmit => {}
        }
        Ok(())
    }

    /// Tells the policy the true channel state of the slot that just ended.
    /// Only the genie uses it; for every other policy it is a no-op.
    pub fn reveal_state(&mut self, state: ChannelState) {
        if let PolicyKind::Genie { last_state } = &mut self.kind {
            *last_state = Some(state);
        }
    }
}

/// One-step lookahead from a known previous state: transmit when the expected
/// immediate reward of transmitting (secondary reward plus surviving primary
/// traffic) at least matches that of listening, under the known state's
/// transition row.
fn genie_myopic_action(prev: ChannelState, model: &ChannelModel, objective: &Objective) -> Action {
    let row = model.transitions.row(prev.0);
    let mut ack_listen = 0.0;
    let mut ack_transmit = 0.0;
    for (j, &p) in row.iter().enumerate() {
        ack_listen += p * model.success.ack_prob(j, false);
        ack_transmit += p * model.success.ack_prob(j, true);
    }
    let listen = objective.w * model.primary_reward * ack_listen;
    let transmit =
        (1.0 - objective.w) * objective.r_s + objective.w * model.primary_reward * ack_transmit;
    if transmit >= listen {
        Action::Transmit
    } else {
        Action::Listen
    }
}

/// Maps a belief to the coordinates of the solved grid: the free scalar for
/// two-state models, the (P(G), P(Vg)) pair for the three-state model.
fn grid_coords(belief: &Belief) -> Vec<f64> {
    match belief.num_states() {
        2 => vec![belief.two_state_p()],
        3 => {
            let (p, q) = belief.three_state_pq();
            vec![p, q]
        }
        s => panic!("no grid domain for {s}-state beliefs"),
    }
}

#[derive(Debug, Clone)]
enum TwoChannelKind {
    Dp { grid: Arc<ValueGrid> },
    Greedy,
    AlwaysListen,
}

/// Policy over two independent erasure channels, tracking one erasure belief
/// per channel.
#[derive(Debug, Clone)]
pub struct TwoChannelPolicyHandle {
    kind: TwoChannelKind,
    beliefs: (f64, f64),
    pending: Option<TwoChannelAction>,
}

impl TwoChannelPolicyHandle {
    pub fn dp(grid: Arc<ValueGrid>, model1: &ChannelModel, model2: &ChannelModel) -> Self {
        Self::with_kind(TwoChannelKind::Dp { grid }, model1, model2)
    }

    pub fn greedy(model1: &ChannelModel, model2: &ChannelModel) -> Self {
        Self::with_kind(TwoChannelKind::Greedy, model1, model2)
    }

    pub fn always_listen(model1: &ChannelModel, model2: &ChannelModel) -> Self {
        Self::with_kind(TwoChannelKind::AlwaysListen, model1, model2)
    }

    fn with_kind(kind: TwoChannelKind, model1: &ChannelModel, model2: &ChannelModel) -> Self {
        Self {
            kind,
            beliefs: (
                model1.transitions.stationary()[0],
                model2.transitions.stationary()[0],
            ),
            pending: None,
        }
    }

    pub fn beliefs(&self) -> (f64, f64) {
        self.beliefs
    }

    /// Replaces the per-channel erasure beliefs (used for randomized
    /// initialization).
    pub fn set_beliefs(&mut self, beliefs: (f64, f64)) {
        self.beliefs = beliefs;
    }

    pub fn decide(
        &mut self,
        model1: &ChannelModel,
        model2: &ChannelModel,
        objective: &Objective,
    ) -> Result<TwoChannelAction> {
        let (p, q) = self.beliefs;
        let action = match &self.kind {
            TwoChannelKind::Dp { grid } => match grid.action_index_at(&[p, q]) {
                0 => TwoChannelAction::ListenBoth,
                1 => TwoChannelAction::TxCh1,
                _ => TwoChannelAction::TxCh2,
            },
            TwoChannelKind::Greedy => {
                let w = objective.w;
                let (rp1, rp2) = (model1.primary_reward, model2.primary_reward);
                let g1 = w * (rp1 * (1.0 - p) + rp2 * (1.0 - q));
                let g2 = (1.0 - w) * objective.r_s + w * rp2 * (1.0 - q);
                let g3 = (1.0 - w) * objective.r_s + w * rp1 * (1.0 - p);
                if g2 > g1 && g2 >= g3 {
                    TwoChannelAction::TxCh1
                } else if g3 > g1 {
                    TwoChannelAction::TxCh2
                } else {
                    TwoChannelAction::ListenBoth
                }
            }
            TwoChannelKind::AlwaysListen => TwoChannelAction::ListenBoth,
        };
        self.pending = Some(action);
        Ok(action)
    }

    pub fn observe(
        &mut self,
        obs: &TwoChannelObservation,
        p1: &TransitionMatrix,
        p2: &TransitionMatrix,
    ) -> Result<()> {
        match self.pending.take() {
            Some(action) if action == obs.action => {}
            Some(action) => {
                return Err(Error::State(format!(
                    "observation says {:?} but the policy chose {:?}",
                    obs.action, action
                )))
            }
            None => {
                return Err(Error::State(
                    "observe called without a preceding decide".into(),
                ))
            }
        }
        self.beliefs = update_two_channel(self.beliefs, obs, p1, p2)?;
        Ok(())
    }
}

/// Exact test for the greedy policy transmitting forever once a NACK arrives
/// on an erasure channel.
///
/// Greedy transmits at belief `p` when `(1−w)·r_s > w·r_p·(1−p)`. After a
/// NACK the belief starts at `P_EE` and decays toward the stationary erasure
/// probability without reaching it, so the burst never ends exactly when the
/// stationary belief still satisfies the transmit condition (weakly).
pub fn greedy_transmits_forever(p_ee: f64, p_ne: f64, w: f64, r_p: f64, r_s: f64) -> Result<bool> {
    crate::channel::check_positively_correlated(p_ee, p_ne)?;
    let stationary_e = p_ne / (p_ne + 1.0 - p_ee);
    let starts = (1.0 - w) * r_s > w * r_p * (1.0 - p_ee);
    let never_stops = (1.0 - w) * r_s >= w * r_p * (1.0 - stationary_e);
    Ok(starts && never_stops)
}

/// Number of consecutive packets greedy sends after a NACK on an erasure
/// channel, found by iterating the belief drift.
pub fn greedy_effective_m(
    p_ee: f64,
    p_ne: f64,
    w: f64,
    r_p: f64,
    r_s: f64,
    cap: u32,
) -> Result<MValue> {
    if greedy_transmits_forever(p_ee, p_ne, w, r_p, r_s)? {
        return Ok(MValue::Infinite);
    }
    let transmits = |p: f64| (1.0 - w) * r_s > w * r_p * (1.0 - p);
    let mut p = p_ee;
    let mut m = 0u32;
    while transmits(p) && m < cap {
        m += 1;
        p = p * p_ee + (1.0 - p) * p_ne;
    }
    Ok(MValue::Finite(m))
}

/// Number of consecutive packets a solved DP policy sends after a NACK on an
/// erasure channel, found by iterating the belief drift through the grid.
pub fn dp_effective_m(grid: &ValueGrid, p_ee: f64, p_ne: f64, cap: u32) -> MValue {
    let mut p = p_ee;
    let mut m = 0u32;
    while grid.action_index_at(&[p]) == 1 {
        if m >= cap {
            return MValue::Infinite;
        }
        m += 1;
        p = p * p_ee + (1.0 - p) * p_ne;
    }
    MValue::Finite(m)
}
