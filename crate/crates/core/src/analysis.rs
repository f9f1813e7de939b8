//! Miscoordination probabilities for agents that pick actions uniformly at
//! random.
//!
//! Writing each action as its per-step flag list (`a_0 = (0)`, `a_1 = (1)`,
//! `a_j = (0, ..., 0, 1)`), `c0` and `c1` count zeros and ones across all `m`
//! lists. The long-run fraction of steps in which a uniformly random agent
//! transmits is `c1 / (c0 + c1)` (the renewal-reward rate); the literal ratio
//! `c1 / c0` is also available but is not a probability for small `m`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{ActionSpace, AgentSchedule};
use crate::env::Observation;
use crate::seed::{agent_stream, StreamPurpose};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilityMode {
    /// `c1 / (c0 + c1)`.
    #[default]
    Corrected,
    /// `c1 / c0` as originally written.
    Literal,
}

/// Exact binomial coefficient for `n <= 128`, floating point beyond.
pub fn binomial_coefficient(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if n <= 128 {
        let mut c: u128 = 1;
        for i in 0..k {
            // Exact at every step: c * (n - i) is divisible by (i + 1).
            c = c * u128::from(n - i) / u128::from(i + 1);
        }
        c as f64
    } else {
        (0..k).fold(1.0, |c, i| c * (n - i) as f64 / (i + 1) as f64)
    }
}

/// `P(X > k)` for `X ~ Binomial(n, p)`: the chance that more than `k` of `n`
/// independent agents transmit in the same step.
pub fn binomial_miscoordination(n: u64, k: u64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability must lie in [0, 1], got {p}")));
    }
    if k >= n {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let tail: f64 = (k + 1..=n)
        .map(|i| binomial_coefficient(n, i) * p.powi(i as i32) * q.powi((n - i) as i32))
        .sum();
    Ok(tail.clamp(0.0, 1.0))
}

/// The `m` actions as per-step transmit lists.
pub fn action_lists(m: usize) -> Result<Vec<Vec<u8>>> {
    let space = ActionSpace::new(m)?;
    Ok((0..m)
        .map(|a| space.flag_pattern(a).into_iter().map(u8::from).collect())
        .collect())
}

/// `(c0, c1)` from the closed forms `c0 = 1 + (m^2 - 3m + 2) / 2`, `c1 = m - 1`.
pub fn action_counts(m: usize) -> Result<(u64, u64)> {
    if m < 2 {
        return Err(Error::Domain(format!("action counts need m >= 2, got {m}")));
    }
    let m = m as u64;
    let c0 = 1 + (m - 1) * (m - 2) / 2;
    Ok((c0, m - 1))
}

pub fn transmission_probability(m: usize, mode: ProbabilityMode) -> Result<f64> {
    let (c0, c1) = action_counts(m)?;
    let p = match mode {
        ProbabilityMode::Corrected => c1 as f64 / (c0 + c1) as f64,
        ProbabilityMode::Literal => c1 as f64 / c0 as f64,
    };
    if p > 1.0 {
        log::warn!("literal transmission ratio for m = {m} is {p}, not a valid probability");
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiscoordinationEstimate {
    pub p_m: f64,
    /// `sum_{i=k+1}^{n} p_m^i`.
    pub power_sum: f64,
    /// Exact binomial tail with the same `p_m` (`None` when `p_m > 1`).
    pub binomial_tail: Option<f64>,
}

pub fn miscoordination_estimate(n: u64, k: u64, m: usize, mode: ProbabilityMode) -> Result<MiscoordinationEstimate> {
    let p_m = transmission_probability(m, mode)?;
    let power_sum = if k >= n {
        0.0
    } else {
        (k + 1..=n).map(|i| p_m.powi(i as i32)).sum()
    };
    let binomial_tail = if p_m <= 1.0 {
        Some(binomial_miscoordination(n, k, p_m)?)
    } else {
        None
    };
    Ok(MiscoordinationEstimate {
        p_m,
        power_sum,
        binomial_tail,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub steps: u64,
    /// Fraction of steps with more than `k` transmitters.
    pub miscoordination: f64,
    pub miscoordination_stderr: f64,
    /// Fraction of agent-steps that carried a transmission.
    pub transmit_frequency: f64,
    pub transmit_frequency_stderr: f64,
}

const MC_BATCHES: u64 = 100;

/// Simulates `n` agents drawing uniform actions through the action layer.
/// The first `m` steps are discarded as warm-up. Standard errors use 100
/// batch means, so they account for the serial correlation of multi-step
/// actions.
pub fn monte_carlo_miscoordination(n: usize, k: usize, m: usize, steps: u64, seed: u64) -> Result<MonteCarloResult> {
    if steps < 10_000 {
        return Err(Error::Domain(format!("monte carlo needs at least 10^4 steps, got {steps}")));
    }
    if n == 0 {
        return Err(Error::Domain("need at least one agent".into()));
    }
    let space = ActionSpace::new(m)?;
    let mut rngs: Vec<_> = (0..n).map(|a| agent_stream(seed, a, StreamPurpose::Oracle)).collect();
    let mut schedules = vec![AgentSchedule::new(); n];
    let idle = Observation::default();

    let batch_len = steps / MC_BATCHES;
    let mut misc_batches = Vec::with_capacity(MC_BATCHES as usize);
    let mut freq_batches = Vec::with_capacity(MC_BATCHES as usize);
    let (mut misc_total, mut tx_total) = (0u64, 0u64);
    let (mut misc_batch, mut tx_batch, mut in_batch) = (0u64, 0u64, 0u64);

    for step in 0..steps + m as u64 {
        let mut transmitters = 0usize;
        for (sched, rng) in schedules.iter_mut().zip(rngs.iter_mut()) {
            if !sched.is_active() {
                sched.begin(&space, rng.random_range(0..m), idle)?;
            }
            if sched.current_flag()? {
                transmitters += 1;
            }
            sched.advance(0.0, idle);
        }
        if step < m as u64 {
            continue;
        }
        let misc = u64::from(transmitters > k);
        misc_total += misc;
        tx_total += transmitters as u64;
        misc_batch += misc;
        tx_batch += transmitters as u64;
        in_batch += 1;
        if in_batch == batch_len && (misc_batches.len() as u64) < MC_BATCHES {
            misc_batches.push(misc_batch as f64 / in_batch as f64);
            freq_batches.push(tx_batch as f64 / (in_batch * n as u64) as f64);
            misc_batch = 0;
            tx_batch = 0;
            in_batch = 0;
        }
    }

    let batch_stderr = |xs: &[f64]| {
        let (_, sd) = crate::metrics::mean_std(xs);
        // Population sd -> sample sd, then divide by sqrt(batches).
        let b = xs.len() as f64;
        sd * (b / (b - 1.0)).sqrt() / b.sqrt()
    };
    Ok(MonteCarloResult {
        steps,
        miscoordination: misc_total as f64 / steps as f64,
        miscoordination_stderr: batch_stderr(&misc_batches),
        transmit_frequency: tx_total as f64 / (steps * n as u64) as f64,
        transmit_frequency_stderr: batch_stderr(&freq_batches),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiscoordinationReport {
    pub n: u64,
    pub k: u64,
    pub m: usize,
    pub mode: ProbabilityMode,
    pub c0: u64,
    pub c1: u64,
    pub p_m: f64,
    pub p_m_literal: f64,
    pub p_m_corrected: f64,
    /// Power-sum estimate with `p_m` from `mode`.
    pub p_misc_power_sum: f64,
    pub p_misc_binomial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloResult>,
    pub warnings: Vec<String>,
}

pub fn miscoordination_report(
    n: u64,
    k: u64,
    m: usize,
    mode: ProbabilityMode,
    monte_carlo: Option<(u64, u64)>,
) -> Result<MiscoordinationReport> {
    let (c0, c1) = action_counts(m)?;
    let est = miscoordination_estimate(n, k, m, mode)?;
    let p_m_literal = transmission_probability(m, ProbabilityMode::Literal)?;
    let mut warnings = Vec::new();
    if mode == ProbabilityMode::Literal && est.p_m >= 1.0 {
        warnings.push(format!("literal ratio c1/c0 = {} is not a valid transmission probability", est.p_m));
    }
    if k >= n {
        warnings.push("threshold is at least the agent count; miscoordination is impossible".into());
    }
    let monte_carlo = monte_carlo
        .map(|(steps, seed)| monte_carlo_miscoordination(n as usize, k as usize, m, steps, seed))
        .transpose()?;
    Ok(MiscoordinationReport {
        n,
        k,
        m,
        mode,
        c0,
        c1,
        p_m: est.p_m,
        p_m_literal,
        p_m_corrected: transmission_probability(m, ProbabilityMode::Corrected)?,
        p_misc_power_sum: est.power_sum,
        p_misc_binomial: est.binomial_tail,
        monte_carlo,
        warnings,
    })
}
