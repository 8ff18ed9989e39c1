//! Secondary-user transmission strategies for Markovian primary channels.
//!
//! A secondary (cognitive) transmitter overhears the ACK/NACK feedback of a
//! primary link whose quality follows a finite-state Markov chain. From that
//! feedback it maintains a belief over the primary state and decides each slot
//! whether to stay silent or transmit, trading primary protection against its
//! own throughput through a weighted objective `w·R_p + (1−w)·R_s`.
//!
//! The crate provides:
//!
//! - [`channel`]: finite-state primary channel models (erasure, Gilbert-Elliot,
//!   three-state), stationary analysis and slot-level sampling;
//! - [`belief`]: exact Bayesian belief updates from actions and feedback;
//! - [`dp`]: grid-based discounted value iteration over belief space;
//! - [`closedform`]: the analytic transmit-M-packets-after-NACK policy for the
//!   two-state erasure channel and its throughput optimum;
//! - [`policies`]: a uniform policy abstraction (DP, greedy, M-policy, causal
//!   genie, constant baselines);
//! - [`sim`]: slot-level Monte Carlo simulation with replication statistics;
//! - [`hmm`]: Baum-Welch estimation of unknown transition probabilities from
//!   ARQ traces.

pub mod belief;
pub mod channel;
pub mod closedform;
pub mod dp;
mod error;
pub mod hmm;
pub mod policies;
pub mod sim;

pub use error::{Error, Result};
