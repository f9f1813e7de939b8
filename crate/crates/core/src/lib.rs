//! Distributed transmission control with independent deep Q-learning agents.
//!
//! A slotted shared medium admits at most `k` simultaneous transmissions per
//! step; if more agents transmit, every transmission in that step fails. Each
//! agent runs its own Q-network and only sees local features (whether it
//! transmitted, whether that succeeded, sensed interference, buffer level).
//!
//! Crate layout:
//! - [`env`]: the threshold-limited medium and buffer bookkeeping.
//! - [`action`]: the delayed-transmit action encoding and per-agent action clocks.
//! - [`dqn`]: the from-scratch Q-learning core (MLP, Adam, replay, agent).
//! - [`baselines`]: CSMA-style backoff policies used for comparison.
//! - [`analysis`]: miscoordination probabilities for uniformly random agents.
//! - [`metrics`]: smoothing, Jain fairness and run summaries.
//! - [`harness`]: experiment orchestration and artifact writers.

pub mod action;
pub mod analysis;
pub mod baselines;
pub mod dqn;
pub mod env;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod seed;

pub use error::{Error, Result};
