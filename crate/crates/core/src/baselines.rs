//! CSMA-style backoff policies used as benchmarks.
//!
//! All three variants wait a random backoff `x` drawn uniformly from
//! `0..X` before (re)transmitting:
//!
//! - exponential CSMA: `X` starts at 2, doubles on every failure and resets
//!   to 2 on success; requires a clear channel.
//! - p-persistent CSMA: `X` fixed to the RL agents' action-space size;
//!   requires a clear channel.
//! - p-persistent: as above but transmits regardless of channel state.
//!
//! "Clear" means no agent, including the deciding one, transmitted on the
//! previous step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Upper bound on the exponential backoff window.
pub const MAX_BACKOFF_BOUND: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineVariant {
    ExponentialCsma,
    PPersistentCsma,
    PPersistent,
}

impl BaselineVariant {
    pub const ALL: [BaselineVariant; 3] = [
        BaselineVariant::ExponentialCsma,
        BaselineVariant::PPersistentCsma,
        BaselineVariant::PPersistent,
    ];

    pub fn requires_clear_channel(self) -> bool {
        !matches!(self, BaselineVariant::PPersistent)
    }

    pub fn name(self) -> &'static str {
        match self {
            BaselineVariant::ExponentialCsma => "exponential_csma",
            BaselineVariant::PPersistentCsma => "p_persistent_csma",
            BaselineVariant::PPersistent => "p_persistent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackoffState {
    pub variant: BaselineVariant,
    /// Steps left to wait before the next attempt (`x`).
    pub backoff_timer: u64,
    /// Exclusive upper bound of the backoff draw (`X`).
    pub backoff_upper_bound: u64,
}

impl BackoffState {
    /// Fresh state. Persistent variants use `action_count` as their fixed
    /// window; the timer starts expired.
    pub fn new(variant: BaselineVariant, action_count: usize) -> Result<Self> {
        let upper = match variant {
            BaselineVariant::ExponentialCsma => 2,
            _ => {
                if action_count == 0 {
                    return Err(Error::Config("persistent backoff window must be positive".into()));
                }
                action_count as u64
            }
        };
        Ok(Self {
            variant,
            backoff_timer: 0,
            backoff_upper_bound: upper,
        })
    }

    pub fn requires_clear_channel(&self) -> bool {
        self.variant.requires_clear_channel()
    }

    /// Per-step transmit decision.
    pub fn decide(&mut self, buffer: u32, channel_busy_last_step: bool) -> bool {
        if buffer == 0 {
            return false;
        }
        if self.backoff_timer > 0 {
            self.backoff_timer -= 1;
            return false;
        }
        !(self.requires_clear_channel() && channel_busy_last_step)
    }

    /// Updates the backoff window after the step resolved.
    pub fn feedback<R: Rng + ?Sized>(&mut self, transmitted: bool, success: bool, rng: &mut R) {
        if !transmitted {
            return;
        }
        if self.variant == BaselineVariant::ExponentialCsma {
            self.backoff_upper_bound = if success {
                2
            } else {
                (self.backoff_upper_bound * 2).min(MAX_BACKOFF_BOUND)
            };
        }
        self.backoff_timer = rng.random_range(0..self.backoff_upper_bound);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn persistent_ignores_busy_channel() {
        let mut s = BackoffState::new(BaselineVariant::PPersistent, 3).unwrap();
        assert!(s.decide(3, true));
    }

    #[test]
    fn csma_waits_for_clear_channel_without_redraw() {
        let mut s = BackoffState::new(BaselineVariant::PPersistentCsma, 3).unwrap();
        assert!(!s.decide(3, true));
        assert_eq!(s.backoff_timer, 0);
        assert!(s.decide(3, false));
    }

    #[test]
    fn empty_buffer_never_transmits_and_freezes_timer() {
        for v in BaselineVariant::ALL {
            let mut s = BackoffState::new(v, 3).unwrap();
            s.backoff_timer = 2;
            assert!(!s.decide(0, false));
            assert_eq!(s.backoff_timer, 2);
        }
    }

    #[test]
    fn timer_counts_down() {
        let mut s = BackoffState::new(BaselineVariant::PPersistent, 5).unwrap();
        s.backoff_timer = 2;
        assert!(!s.decide(1, false));
        assert!(!s.decide(1, false));
        assert!(s.decide(1, false));
    }

    #[test]
    fn exponential_window_doubles_and_resets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = BackoffState::new(BaselineVariant::ExponentialCsma, 3).unwrap();
        s.feedback(true, false, &mut rng);
        assert_eq!(s.backoff_upper_bound, 4);
        assert!(s.backoff_timer < 4);
        for f in 2..=25u32 {
            s.feedback(true, false, &mut rng);
            assert_eq!(s.backoff_upper_bound, (1u64 << (1 + f)).min(MAX_BACKOFF_BOUND));
        }
        s.backoff_upper_bound = 64;
        s.feedback(true, true, &mut rng);
        assert_eq!(s.backoff_upper_bound, 2);
        assert!(s.backoff_timer < 2);
    }

    #[test]
    fn persistent_window_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for v in [BaselineVariant::PPersistentCsma, BaselineVariant::PPersistent] {
            let mut s = BackoffState::new(v, 3).unwrap();
            for i in 0..10_000 {
                s.feedback(i % 3 != 0, i % 2 == 0, &mut rng);
                assert_eq!(s.backoff_upper_bound, 3);
                assert!(s.backoff_timer < 3);
            }
        }
    }

    #[test]
    fn silent_step_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = BackoffState::new(BaselineVariant::ExponentialCsma, 3).unwrap();
        s.backoff_timer = 1;
        let before = s.clone();
        s.feedback(false, false, &mut rng);
        assert_eq!(s, before);
    }

    #[test]
    fn backoff_draws_are_uniform() {
        // Chi-squared goodness of fit over 10^5 draws from {0..7}; the 0.999
        // quantile of chi2 with 7 degrees of freedom is 24.32.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = BackoffState::new(BaselineVariant::PPersistent, 8).unwrap();
        let draws = 100_000;
        let mut counts = [0u64; 8];
        for _ in 0..draws {
            s.feedback(true, true, &mut rng);
            counts[s.backoff_timer as usize] += 1;
        }
        let expected = draws as f64 / 8.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 24.32, "chi2 = {chi2}, counts = {counts:?}");
    }
}
