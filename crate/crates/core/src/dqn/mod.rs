//! Q-learning core: network, optimizer, replay memory and the per-agent learner.

mod adam;
mod agent;
mod checkpoint;
mod network;
mod replay;

pub use adam::{AdamConfig, AdamState};
pub use agent::{td_loss_and_gradients, DqnAgent};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_FORMAT_VERSION};
pub use network::{Dense, ForwardCache, MlpNetwork, WeightInit};
pub use replay::{ReplayMemory, Transition};

use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::{Error, Result};

/// Learner settings. Defaults are the reference configuration. Replay size,
/// Adam moments, init and the optional target network are configurable too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnHyperparams {
    pub hidden1: usize,
    pub hidden2: usize,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub init: WeightInit,
    /// When set, bootstrapped targets come from a frozen copy of the network
    /// refreshed every this many updates. `None` bootstraps from the online net.
    pub target_sync_period: Option<u64>,
}

impl Default for DqnHyperparams {
    fn default() -> Self {
        Self {
            hidden1: 128,
            hidden2: 256,
            epsilon_start: 1.0,
            epsilon_decay: 0.996,
            epsilon_min: 0.05,
            gamma: 0.99,
            learning_rate: 1e-4,
            batch_size: 64,
            replay_capacity: 10_000,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            init: WeightInit::GlorotUniform,
            target_sync_period: None,
        }
    }
}

impl DqnHyperparams {
    pub const INPUT_DIM: usize = Observation::DIM;

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.hidden1 == 0 || self.hidden2 == 0 {
            return fail("hidden layer widths must be positive");
        }
        if !(self.epsilon_min > 0.0 && self.epsilon_min <= self.epsilon_start && self.epsilon_start <= 1.0) {
            return fail("need 0 < epsilon_min <= epsilon_start <= 1");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay < 1.0) {
            return fail("epsilon_decay must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 {
            return fail("batch_size and replay_capacity must be positive");
        }
        if self.target_sync_period == Some(0) {
            return fail("target_sync_period must be positive when set");
        }
        Ok(())
    }

    pub fn layer_dims(&self, action_count: usize) -> Vec<usize> {
        vec![Self::INPUT_DIM, self.hidden1, self.hidden2, action_count]
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
            bias_correction: true,
        }
    }
}
