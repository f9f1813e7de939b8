use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::action::heuristic_action_count;
use crate::baselines::BaselineVariant;
use crate::dqn::DqnHyperparams;
use crate::env::{EnvConfig, DEFAULT_MAX_BUFFER};
use crate::metrics::{DEFAULT_TAIL, DEFAULT_WINDOW};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Dqn,
    ExponentialCsma,
    PPersistentCsma,
    PPersistent,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Dqn,
        PolicyKind::ExponentialCsma,
        PolicyKind::PPersistentCsma,
        PolicyKind::PPersistent,
    ];

    pub fn baseline(self) -> Option<BaselineVariant> {
        match self {
            PolicyKind::Dqn => None,
            PolicyKind::ExponentialCsma => Some(BaselineVariant::ExponentialCsma),
            PolicyKind::PPersistentCsma => Some(BaselineVariant::PPersistentCsma),
            PolicyKind::PPersistent => Some(BaselineVariant::PPersistent),
        }
    }

    pub fn name(self) -> &'static str {
        match self.baseline() {
            None => "dqn",
            Some(v) => v.name(),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown policy '{s}'")))
    }
}

/// Action-space size: explicit, or `n / k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "ActionCountRepr", into = "ActionCountRepr")]
pub enum ActionCount {
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ActionCountRepr {
    Num(usize),
    Text(String),
}

impl TryFrom<ActionCountRepr> for ActionCount {
    type Error = Error;

    fn try_from(r: ActionCountRepr) -> Result<Self> {
        match r {
            ActionCountRepr::Num(n) => Ok(ActionCount::Fixed(n)),
            ActionCountRepr::Text(s) => s.parse(),
        }
    }
}

impl From<ActionCount> for ActionCountRepr {
    fn from(a: ActionCount) -> Self {
        match a {
            ActionCount::Auto => ActionCountRepr::Text("auto".into()),
            ActionCount::Fixed(n) => ActionCountRepr::Num(n),
        }
    }
}

impl FromStr for ActionCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(ActionCount::Auto);
        }
        s.trim()
            .parse()
            .map(ActionCount::Fixed)
            .map_err(|_| Error::Config(format!("action count must be an integer or 'auto', got '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub policy: PolicyKind,
    pub num_agents: usize,
    pub threshold: usize,
    pub actions: ActionCount,
    pub steps: usize,
    pub runs: usize,
    pub master_seed: u64,
    /// One period per agent; empty means every agent fills every step.
    pub buffer_periods: Vec<u32>,
    pub max_buffer: u32,
    pub smoothing_window: usize,
    pub tail: usize,
    pub failed_transmission_consumes_packet: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub dqn: DqnHyperparams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            policy: PolicyKind::Dqn,
            num_agents: 4,
            threshold: 2,
            actions: ActionCount::Auto,
            steps: 10_000,
            runs: 3,
            master_seed: 0,
            buffer_periods: Vec::new(),
            max_buffer: DEFAULT_MAX_BUFFER,
            smoothing_window: DEFAULT_WINDOW,
            tail: DEFAULT_TAIL,
            failed_transmission_consumes_packet: false,
            output_dir: None,
            dqn: DqnHyperparams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.steps < self.tail {
            return Err(Error::Config(format!(
                "steps ({}) must be at least the summary tail ({})",
                self.steps, self.tail
            )));
        }
        if self.smoothing_window == 0 {
            return Err(Error::Config("smoothing window must be at least 1".into()));
        }
        let action_count = match self.actions {
            ActionCount::Auto => heuristic_action_count(self.num_agents, self.threshold)?,
            ActionCount::Fixed(m) if m >= 2 => m,
            ActionCount::Fixed(m) => return Err(Error::Config(format!("action count must be at least 2, got {m}"))),
        };
        let buffer_periods = if self.buffer_periods.is_empty() {
            vec![1; self.num_agents]
        } else {
            self.buffer_periods.clone()
        };
        let env = EnvConfig {
            num_agents: self.num_agents,
            threshold: self.threshold,
            max_buffer: self.max_buffer,
            buffer_periods,
            failed_transmission_consumes_packet: self.failed_transmission_consumes_packet,
        };
        env.validate()?;
        if self.policy == PolicyKind::Dqn {
            self.dqn.validate()?;
        }
        Ok(ResolvedConfig {
            experiment: self.clone(),
            action_count,
            env,
        })
    }
}

/// A validated config with the action count and buffer periods filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub experiment: ExperimentConfig,
    pub action_count: usize,
    pub env: EnvConfig,
}
