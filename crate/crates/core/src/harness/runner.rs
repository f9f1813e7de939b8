//! The per-run step loop.
//!
//! Each step, in this order:
//! 1. every idle agent with a non-empty buffer picks a new action (DQN) or
//!    consults its backoff state (baselines);
//! 2. schedules are translated into transmit flags;
//! 3. the environment resolves the step;
//! 4. rewards are fed back: finished DQN actions become replay transitions,
//!    baselines update their backoff windows;
//! 5. every DQN agent trains once and decays its epsilon;
//! 6. metrics are recorded.

use std::path::Path;

use rand_chacha::ChaCha8Rng;

use super::config::ResolvedConfig;
use crate::action::{ActionSpace, AgentSchedule};
use crate::baselines::BackoffState;
use crate::dqn::{save_checkpoint, DqnAgent};
use crate::env::{Environment, Observation};
use crate::metrics::{MetricsRecorder, MetricsSeries, RunSummary};
use crate::seed::{agent_stream, run_seed, StreamPurpose};
use crate::{Error, Result};

/// One agent's view of one step, as written to the per-step CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentStepRecord {
    pub transmitted: bool,
    pub success: bool,
    pub reward: i8,
    pub buffer: u32,
    pub interference: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_index: usize,
    pub seed: u64,
    pub series: MetricsSeries,
    pub summary: RunSummary,
    pub num_agents: usize,
    /// Step-major: the record for `(step, agent)` is at `step * num_agents + agent`.
    pub trace: Vec<AgentStepRecord>,
    /// Mean training loss over agents that trained, per step (`NaN` if none did).
    pub losses: Vec<f64>,
    /// Action chosen by each agent at each step it made a decision.
    pub decisions: Vec<Vec<(usize, usize)>>,
    pub coerced: Vec<u64>,
}

#[allow(clippy::large_enum_variant)]
enum Policy {
    Dqn {
        agent: Box<DqnAgent>,
        schedule: AgentSchedule,
        last_obs: Observation,
    },
    Baseline {
        state: BackoffState,
        rng: ChaCha8Rng,
    },
}

/// Runs one seeded run. `diagnostics_dir` receives a checkpoint of the
/// failing agent if training hits a numeric error.
pub fn simulate_run(config: &ResolvedConfig, run_index: usize, diagnostics_dir: Option<&Path>) -> Result<RunResult> {
    let exp = &config.experiment;
    let seed = run_seed(exp.master_seed, run_index as u64);
    let n = config.env.num_agents;
    let space = ActionSpace::new(config.action_count)?;

    let mut policies = (0..n)
        .map(|agent| match exp.policy.baseline() {
            None => {
                let mut init = agent_stream(seed, agent, StreamPurpose::WeightInit);
                let dqn = DqnAgent::new(
                    exp.dqn.clone(),
                    config.action_count,
                    &mut init,
                    agent_stream(seed, agent, StreamPurpose::Exploration),
                    agent_stream(seed, agent, StreamPurpose::ReplaySampling),
                )?;
                Ok(Policy::Dqn {
                    agent: Box::new(dqn),
                    schedule: AgentSchedule::new(),
                    last_obs: Observation::default(),
                })
            }
            Some(variant) => Ok(Policy::Baseline {
                state: BackoffState::new(variant, config.action_count)?,
                rng: agent_stream(seed, agent, StreamPurpose::Backoff),
            }),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut env = Environment::reset(config.env.clone())?;
    let mut recorder = MetricsRecorder::with_capacity(n, exp.steps);
    let mut trace = Vec::with_capacity(exp.steps * n);
    let mut losses = Vec::with_capacity(exp.steps);
    let mut decisions = vec![Vec::new(); n];
    let mut channel_busy = false;
    let mut flags = vec![false; n];

    for step in 0..exp.steps {
        let buffers = env.buffers().to_vec();
        for (agent, policy) in policies.iter_mut().enumerate() {
            flags[agent] = match policy {
                Policy::Dqn {
                    agent: dqn,
                    schedule,
                    last_obs,
                } => {
                    if !schedule.is_active() && buffers[agent] > 0 {
                        let action = dqn.select_action(last_obs)?;
                        schedule.begin(&space, action, *last_obs)?;
                        decisions[agent].push((step, action));
                    }
                    schedule.is_active() && schedule.current_flag()?
                }
                Policy::Baseline { state, .. } => state.decide(buffers[agent], channel_busy),
            };
        }

        let outcome = env.step(&flags)?;

        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for (agent, policy) in policies.iter_mut().enumerate() {
            match policy {
                Policy::Dqn {
                    agent: dqn,
                    schedule,
                    last_obs,
                } => {
                    let obs = outcome.observations[agent];
                    if let Some(done) = schedule.advance(outcome.rewards[agent], obs) {
                        dqn.remember(&done);
                    }
                    *last_obs = obs;
                    match dqn.train_step() {
                        Ok(Some(loss)) => {
                            loss_sum += loss;
                            loss_count += 1;
                        }
                        Ok(None) => {}
                        Err(err) => {
                            if let (Some(dir), Error::Numeric { .. }) = (diagnostics_dir, &err) {
                                let path = dir.join(format!("run{run_index}_agent{agent}_diagnostic.ckpt"));
                                if let Err(e) = save_checkpoint(&path, dqn.network(), dqn.hyperparams(), step as u64, dqn.epsilon()) {
                                    log::error!("could not write diagnostic checkpoint: {e}");
                                } else {
                                    log::error!("numeric failure at step {step}, agent {agent}; checkpoint at {}", path.display());
                                }
                            }
                            return Err(err);
                        }
                    }
                    dqn.decay_epsilon();
                }
                Policy::Baseline { state, rng } => {
                    state.feedback(outcome.transmit_flags[agent], outcome.success_flags[agent], rng);
                }
            }
        }
        losses.push(if loss_count > 0 { loss_sum / loss_count as f64 } else { f64::NAN });

        channel_busy = outcome.any_transmission();
        recorder.record(&outcome.success_flags, env.buffers());
        trace.extend((0..n).map(|agent| AgentStepRecord {
            transmitted: outcome.transmit_flags[agent],
            success: outcome.success_flags[agent],
            reward: outcome.rewards[agent] as i8,
            buffer: env.buffers()[agent],
            interference: outcome.observations[agent].interference,
        }));
    }

    let series = recorder.finish(exp.smoothing_window);
    let mut summary = series.summarize(exp.tail, env.drops());
    summary.seed = Some(seed);
    Ok(RunResult {
        run_index,
        seed,
        num_agents: n,
        series,
        summary,
        trace,
        losses,
        decisions,
        coerced: env.coerced_counts().to_vec(),
    })
}

impl RunResult {
    /// All agents' records for one step.
    pub fn step_records(&self, step: usize) -> &[AgentStepRecord] {
        &self.trace[step * self.num_agents..(step + 1) * self.num_agents]
    }

    pub fn steps(&self) -> usize {
        self.trace.len() / self.num_agents.max(1)
    }
}
