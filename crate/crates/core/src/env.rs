//! The slotted, threshold-limited transmission medium.
//!
//! Each step every agent either transmits one packet or stays silent. If at
//! most `threshold` agents transmit, all of them succeed; otherwise every
//! transmission in that step fails. Buffers fill on a per-agent period and
//! drain only through successful deliveries (unless configured otherwise).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_MAX_BUFFER: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub num_agents: usize,
    pub threshold: usize,
    pub max_buffer: u32,
    /// Steps between buffer increments, one entry per agent. A period of 1
    /// adds a packet every step.
    pub buffer_periods: Vec<u32>,
    /// When set, a failed transmission also removes the packet from the
    /// buffer. Off by default: failed packets stay queued for retransmission.
    #[serde(default)]
    pub failed_transmission_consumes_packet: bool,
}

impl EnvConfig {
    /// Every agent's buffer is incremented on every step.
    pub fn saturated(num_agents: usize, threshold: usize) -> Self {
        Self {
            num_agents,
            threshold,
            max_buffer: DEFAULT_MAX_BUFFER,
            buffer_periods: vec![1; num_agents],
            failed_transmission_consumes_packet: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_agents == 0 {
            return Err(Error::Config("num_agents must be at least 1".into()));
        }
        if self.threshold == 0 {
            return Err(Error::Config("threshold must be at least 1".into()));
        }
        if self.max_buffer == 0 {
            return Err(Error::Config("max_buffer must be at least 1".into()));
        }
        if self.buffer_periods.len() != self.num_agents {
            return Err(Error::Config(format!(
                "buffer_periods has {} entries, expected one per agent ({})",
                self.buffer_periods.len(),
                self.num_agents
            )));
        }
        if let Some(pos) = self.buffer_periods.iter().position(|&p| p == 0) {
            return Err(Error::Config(format!("buffer period for agent {pos} must be at least 1")));
        }
        if self.threshold > self.num_agents {
            log::warn!(
                "threshold {} exceeds agent count {}: every transmission will succeed",
                self.threshold,
                self.num_agents
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvState {
    pub step_index: u64,
    pub buffers: Vec<u32>,
    pub last_transmit_flags: Vec<bool>,
    pub last_success_flags: Vec<bool>,
}

/// Local features an agent sees after a step: `(t, s, i, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Observation {
    pub transmitted: f64,
    pub success: f64,
    pub interference: f64,
    pub buffer_level: f64,
}

impl Observation {
    pub const DIM: usize = 4;

    pub fn to_array(self) -> [f64; 4] {
        [self.transmitted, self.success, self.interference, self.buffer_level]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub observations: Vec<Observation>,
    /// +1 for a success, -1 for a failed transmission, 0 when silent.
    pub rewards: Vec<f64>,
    pub network_successes: usize,
    /// Flags after coercion (agents with empty buffers cannot transmit).
    pub transmit_flags: Vec<bool>,
    pub success_flags: Vec<bool>,
    /// Agents whose transmit request was dropped because their buffer was empty.
    pub coerced: Vec<usize>,
    /// Agents that lost an arriving packet to a full buffer this step.
    pub dropped: Vec<usize>,
}

impl StepOutcome {
    pub fn any_transmission(&self) -> bool {
        self.transmit_flags.iter().any(|&f| f)
    }
}

/// Outcome of the threshold rule for one flag vector: per-agent success flags.
pub fn resolve_threshold(flags: &[bool], threshold: usize) -> Vec<bool> {
    let transmitters = flags.iter().filter(|&&f| f).count();
    let ok = transmitters <= threshold;
    flags.iter().map(|&f| f && ok).collect()
}

#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    state: EnvState,
    drops: Vec<u64>,
    coerced: Vec<u64>,
}

impl Environment {
    pub fn reset(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let n = config.num_agents;
        Ok(Self {
            state: EnvState {
                step_index: 0,
                buffers: vec![0; n],
                last_transmit_flags: vec![false; n],
                last_success_flags: vec![false; n],
            },
            drops: vec![0; n],
            coerced: vec![0; n],
            config,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn buffers(&self) -> &[u32] {
        &self.state.buffers
    }

    /// Packets lost to buffer overflow, per agent, since reset.
    pub fn drops(&self) -> &[u64] {
        &self.drops
    }

    /// Transmit requests ignored because the agent had nothing queued.
    pub fn coerced_counts(&self) -> &[u64] {
        &self.coerced
    }

    pub fn step(&mut self, requested: &[bool]) -> Result<StepOutcome> {
        let n = self.config.num_agents;
        if requested.len() != n {
            return Err(Error::Usage(format!(
                "expected {n} transmit flags, got {}",
                requested.len()
            )));
        }

        let mut coerced = Vec::new();
        let flags: Vec<bool> = requested
            .iter()
            .enumerate()
            .map(|(agent, &f)| {
                if f && self.state.buffers[agent] == 0 {
                    coerced.push(agent);
                    self.coerced[agent] += 1;
                    false
                } else {
                    f
                }
            })
            .collect();
        if !coerced.is_empty() {
            log::debug!("step {}: coerced empty-buffer transmit flags {:?}", self.state.step_index, coerced);
        }

        let successes = resolve_threshold(&flags, self.config.threshold);
        let transmitters = flags.iter().filter(|&&f| f).count();
        let network_successes = successes.iter().filter(|&&s| s).count();

        let rewards: Vec<f64> = flags
            .iter()
            .zip(&successes)
            .map(|(&t, &s)| match (t, s) {
                (true, true) => 1.0,
                (true, false) => -1.0,
                _ => 0.0,
            })
            .collect();

        for agent in 0..n {
            if successes[agent] || (flags[agent] && self.config.failed_transmission_consumes_packet) {
                self.state.buffers[agent] -= 1;
            }
        }

        self.state.step_index += 1;
        let step = self.state.step_index;
        let mut dropped = Vec::new();
        for agent in 0..n {
            if step.is_multiple_of(u64::from(self.config.buffer_periods[agent])) {
                if self.state.buffers[agent] < self.config.max_buffer {
                    self.state.buffers[agent] += 1;
                } else {
                    dropped.push(agent);
                    self.drops[agent] += 1;
                }
            }
        }

        let max_buffer = f64::from(self.config.max_buffer);
        let observations = (0..n)
            .map(|agent| {
                let interference = if flags[agent] || n == 1 {
                    0.0
                } else {
                    (transmitters as f64) / ((n - 1) as f64)
                };
                Observation {
                    transmitted: if flags[agent] { 1.0 } else { 0.0 },
                    success: if successes[agent] { 1.0 } else { 0.0 },
                    interference,
                    buffer_level: f64::from(self.state.buffers[agent]) / max_buffer,
                }
            })
            .collect();

        self.state.last_transmit_flags.clone_from(&flags);
        self.state.last_success_flags.clone_from(&successes);

        Ok(StepOutcome {
            observations,
            rewards,
            network_successes,
            transmit_flags: flags,
            success_flags: successes,
            coerced,
            dropped,
        })
    }
}
