//! Delayed-transmit action encoding.
//!
//! Action `0` means "stay silent for one step". Action `j >= 1` lasts `j`
//! steps and transmits exactly once, on its final step; `1` transmits
//! immediately and larger indices wait `j - 1` steps first. Agents decide
//! asynchronously, so each keeps its own [`AgentSchedule`].

use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpace {
    size: usize,
}

impl ActionSpace {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::Domain(format!("action space needs at least 2 actions, got {size}")));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn duration(&self, action: usize) -> usize {
        debug_assert!(action < self.size);
        action.max(1)
    }

    pub fn transmissions(&self, action: usize) -> usize {
        usize::from(action >= 1)
    }

    /// The action written out as per-step transmit flags.
    pub fn flag_pattern(&self, action: usize) -> Vec<bool> {
        let d = self.duration(action);
        (0..d).map(|i| action >= 1 && i == d - 1).collect()
    }
}

/// A decision that has run to completion, ready to be stored as a transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletedDecision {
    pub start_state: Observation,
    pub action: usize,
    /// Mean per-step reward over the action's duration.
    pub averaged_reward: f64,
    pub end_state: Observation,
    pub duration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ActiveAction {
    action: usize,
    duration: usize,
    steps_remaining: usize,
    decision_state: Observation,
    accumulated_reward: f64,
    accumulated_steps: usize,
}

/// Per-agent action clock.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentSchedule {
    active: Option<ActiveAction>,
}

impl AgentSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_active(&self) -> bool {
        self.active.is_some()
    }

    pub fn active_action(&self) -> Option<usize> {
        self.active.map(|a| a.action)
    }

    pub fn steps_remaining(&self) -> usize {
        self.active.map_or(0, |a| a.steps_remaining)
    }

    /// Starts `action`, remembering the observation it was chosen from.
    pub fn begin(&mut self, space: &ActionSpace, action: usize, decision_state: Observation) -> Result<()> {
        if self.active.is_some() {
            return Err(Error::Usage("schedule already has an active action".into()));
        }
        if action >= space.size() {
            return Err(Error::Usage(format!("action {action} outside action space of size {}", space.size())));
        }
        let duration = space.duration(action);
        self.active = Some(ActiveAction {
            action,
            duration,
            steps_remaining: duration,
            decision_state,
            accumulated_reward: 0.0,
            accumulated_steps: 0,
        });
        Ok(())
    }

    /// Transmit flag for the current step.
    pub fn current_flag(&self) -> Result<bool> {
        let active = self
            .active
            .ok_or_else(|| Error::Usage("no active action to translate into a flag".into()))?;
        Ok(active.action >= 1 && active.steps_remaining == 1)
    }

    /// Feeds back one step's reward. Returns the finished decision once the
    /// action's last step has been played, after which the schedule is idle.
    pub fn advance(&mut self, step_reward: f64, current_obs: Observation) -> Option<CompletedDecision> {
        let active = self.active.as_mut()?;
        active.accumulated_reward += step_reward;
        active.accumulated_steps += 1;
        active.steps_remaining -= 1;
        if active.steps_remaining > 0 {
            return None;
        }
        let done = *active;
        self.active = None;
        Some(CompletedDecision {
            start_state: done.decision_state,
            action: done.action,
            averaged_reward: done.accumulated_reward / done.duration as f64,
            end_state: current_obs,
            duration: done.duration,
        })
    }
}

/// Recommended action-space size: `n / k + 1`.
///
/// When `k` does not divide `n` the quotient is rounded up and a warning is
/// logged.
pub fn heuristic_action_count(num_agents: usize, threshold: usize) -> Result<usize> {
    if threshold == 0 {
        return Err(Error::Domain("threshold must be positive".into()));
    }
    if !num_agents.is_multiple_of(threshold) {
        log::warn!(
            "{num_agents} agents not divisible by threshold {threshold}; rounding n/k up for the action count"
        );
    }
    Ok(num_agents.div_ceil(threshold) + 1)
}
