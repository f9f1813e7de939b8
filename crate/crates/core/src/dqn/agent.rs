use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AdamState, Dense, DqnHyperparams, MlpNetwork, ReplayMemory, Transition};
use crate::action::CompletedDecision;
use crate::env::Observation;
use crate::{Error, Result};

/// One independent learner: its own network, optimizer, memory and streams.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    hyper: DqnHyperparams,
    action_count: usize,
    online: MlpNetwork,
    target: Option<MlpNetwork>,
    optimizer: AdamState,
    memory: ReplayMemory,
    epsilon: f64,
    updates: u64,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
}

impl DqnAgent {
    pub fn new(
        hyper: DqnHyperparams,
        action_count: usize,
        init_rng: &mut ChaCha8Rng,
        explore_rng: ChaCha8Rng,
        replay_rng: ChaCha8Rng,
    ) -> Result<Self> {
        hyper.validate()?;
        if action_count < 2 {
            return Err(Error::Config(format!("action count must be at least 2, got {action_count}")));
        }
        let online = MlpNetwork::new(&hyper.layer_dims(action_count), hyper.init, init_rng)?;
        Ok(Self::with_network(hyper, online, explore_rng, replay_rng))
    }

    /// Wraps an existing network (e.g. one restored from a checkpoint).
    pub fn with_network(
        hyper: DqnHyperparams,
        online: MlpNetwork,
        explore_rng: ChaCha8Rng,
        replay_rng: ChaCha8Rng,
    ) -> Self {
        let shapes: Vec<usize> = online
            .layers()
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect();
        let optimizer = AdamState::new(hyper.adam(), &shapes);
        let target = hyper.target_sync_period.map(|_| online.clone());
        Self {
            action_count: online.output_dim(),
            memory: ReplayMemory::new(hyper.replay_capacity),
            epsilon: hyper.epsilon_start,
            online,
            target,
            optimizer,
            updates: 0,
            explore_rng,
            replay_rng,
            hyper,
        }
    }

    pub fn hyperparams(&self) -> &DqnHyperparams {
        &self.hyper
    }

    pub fn network(&self) -> &MlpNetwork {
        &self.online
    }

    pub fn network_mut(&mut self) -> &mut MlpNetwork {
        &mut self.online
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    /// Number of optimizer updates applied so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn q_values(&self, obs: &Observation) -> Result<Vec<f64>> {
        self.online.forward(&obs.to_array())
    }

    /// Highest-valued action; ties go to the lowest index.
    pub fn greedy_action(&self, obs: &Observation) -> Result<usize> {
        Ok(argmax(&self.q_values(obs)?))
    }

    /// Epsilon-greedy choice.
    pub fn select_action(&mut self, obs: &Observation) -> Result<usize> {
        if self.explore_rng.random::<f64>() < self.epsilon {
            Ok(self.explore_rng.random_range(0..self.action_count))
        } else {
            self.greedy_action(obs)
        }
    }

    pub fn decay_epsilon(&mut self) -> f64 {
        self.epsilon = (self.epsilon * self.hyper.epsilon_decay).max(self.hyper.epsilon_min);
        self.epsilon
    }

    pub fn remember(&mut self, decision: &CompletedDecision) {
        self.memory.push(Transition {
            start_state: decision.start_state.to_array(),
            action: decision.action,
            reward: decision.averaged_reward,
            end_state: decision.end_state.to_array(),
        });
    }

    pub fn push_transition(&mut self, t: Transition) {
        self.memory.push(t);
    }

    /// One minibatch update. Returns `None` while the memory holds fewer than
    /// `batch_size` transitions.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        if self.memory.len() < self.hyper.batch_size {
            return Ok(None);
        }
        let batch: Vec<Transition> = self
            .memory
            .sample(self.hyper.batch_size, &mut self.replay_rng)
            .into_iter()
            .copied()
            .collect();
        let bootstrap = self.target.as_ref().unwrap_or(&self.online);
        let (loss, grads) = td_loss_and_gradients(&self.online, bootstrap, &batch, self.hyper.gamma);
        if !loss.is_finite() {
            return Err(Error::Numeric {
                message: format!("non-finite TD loss after {} updates", self.updates),
                diagnostic: Some(batch_diagnostic(&self.online, &batch)),
            });
        }

        let grads: Vec<Dense> = grads.into_iter().map(standard_layout).collect();
        let grad_slices: Vec<&[f64]> = grads
            .iter()
            .flat_map(|g| [g.weights.as_slice().unwrap(), g.bias.as_slice().unwrap()])
            .collect();
        let mut param_slices: Vec<&mut [f64]> = self
            .online
            .layers_mut()
            .iter_mut()
            .flat_map(|l| {
                let Dense { weights, bias } = l;
                [
                    weights.as_slice_mut().expect("parameters are contiguous"),
                    bias.as_slice_mut().expect("parameters are contiguous"),
                ]
            })
            .collect();
        self.optimizer.step(&mut param_slices, &grad_slices);
        self.updates += 1;

        if let (Some(period), Some(target)) = (self.hyper.target_sync_period, self.target.as_mut()) {
            if self.updates.is_multiple_of(period) {
                target.clone_from(&self.online);
            }
        }
        Ok(Some(loss))
    }
}

/// Mean squared TD error over `batch` and its gradient with respect to
/// `online`'s parameters. Targets `r + gamma * max_a' Q_bootstrap(s', a')` are
/// constants; only the taken action's prediction receives gradient.
pub fn td_loss_and_gradients(
    online: &MlpNetwork,
    bootstrap: &MlpNetwork,
    batch: &[Transition],
    gamma: f64,
) -> (f64, Vec<Dense>) {
    let b = batch.len();
    let mut starts = Array2::zeros((b, 4));
    let mut ends = Array2::zeros((b, 4));
    for (i, t) in batch.iter().enumerate() {
        for j in 0..4 {
            starts[[i, j]] = t.start_state[j];
            ends[[i, j]] = t.end_state[j];
        }
    }
    let next_q = bootstrap.forward_batch(ends.view());
    let cache = online.forward_cached(starts.view());
    let q = cache.output();
    let mut grad_out = Array2::zeros(q.raw_dim());
    let mut loss = 0.0;
    for (i, t) in batch.iter().enumerate() {
        let best_next = next_q.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let target = t.reward + gamma * best_next;
        let diff = q[[i, t.action]] - target;
        loss += diff * diff;
        grad_out[[i, t.action]] = 2.0 * diff / b as f64;
    }
    loss /= b as f64;
    let grads = online.backward(&cache, grad_out);
    (loss, grads)
}

fn standard_layout(d: Dense) -> Dense {
    if d.weights.is_standard_layout() {
        d
    } else {
        Dense {
            weights: d.weights.as_standard_layout().into_owned(),
            bias: d.bias,
        }
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn batch_diagnostic(net: &MlpNetwork, batch: &[Transition]) -> String {
    let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
    let max_abs_param = net.flatten().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    format!(
        "params_finite={} max_abs_param={max_abs_param:e} batch_rewards={rewards:?} first_start={:?}",
        net.is_finite(),
        batch.first().map(|t| t.start_state)
    )
}
