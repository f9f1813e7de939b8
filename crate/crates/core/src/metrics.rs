//! Throughput smoothing, Jain fairness, and last-N-step summaries.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 100;
pub const DEFAULT_TAIL: usize = 1000;

/// Mean of the `window` values strictly before index `t` (fewer during
/// warm-up). `t = 0` has no history and returns `series[0]`; `t` may equal
/// `series.len()`.
pub fn trailing_mean(series: &[f64], window: usize, t: usize) -> f64 {
    assert!(window >= 1, "window must be at least 1");
    assert!(t <= series.len(), "index past end of series");
    if t == 0 {
        return series.first().copied().unwrap_or(0.0);
    }
    let lo = t.saturating_sub(window);
    let slice = &series[lo..t];
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// Trailing-window smoothing, same length as the input.
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    if series.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(series.len());
    out.push(series[0]);
    let mut sum = 0.0;
    for t in 1..series.len() {
        sum += series[t - 1];
        if t > window {
            sum -= series[t - 1 - window];
        }
        let n = t.min(window);
        out.push(sum / n as f64);
    }
    out
}

/// Jain's fairness index `(sum x)^2 / (n * sum x^2)`; an all-zero vector is
/// treated as perfectly fair.
pub fn jain_fairness(throughputs: &[f64]) -> Result<f64> {
    if throughputs.is_empty() {
        return Err(Error::Domain("fairness needs at least one agent".into()));
    }
    if let Some(x) = throughputs.iter().find(|x| x.is_nan() || **x < 0.0) {
        return Err(Error::Domain(format!("throughput must be non-negative, got {x}")));
    }
    let sum: f64 = throughputs.iter().sum();
    let sq: f64 = throughputs.iter().map(|x| x * x).sum();
    if sq == 0.0 {
        return Ok(1.0);
    }
    Ok(sum * sum / (throughputs.len() as f64 * sq))
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Raw per-step records collected during a run.
#[derive(Debug, Clone, Default)]
pub struct MetricsRecorder {
    num_agents: usize,
    network_successes: Vec<u32>,
    agent_successes: Vec<Vec<bool>>,
    buffers: Vec<Vec<u32>>,
}

impl MetricsRecorder {
    pub fn new(num_agents: usize) -> Self {
        Self::with_capacity(num_agents, 0)
    }

    /// Reserves room for `steps` records up front.
    pub fn with_capacity(num_agents: usize, steps: usize) -> Self {
        Self {
            num_agents,
            agent_successes: (0..num_agents).map(|_| Vec::with_capacity(steps)).collect(),
            buffers: (0..num_agents).map(|_| Vec::with_capacity(steps)).collect(),
            network_successes: Vec::with_capacity(steps),
        }
    }

    pub fn record(&mut self, success_flags: &[bool], buffers: &[u32]) {
        assert_eq!(success_flags.len(), self.num_agents);
        assert_eq!(buffers.len(), self.num_agents);
        self.network_successes
            .push(success_flags.iter().filter(|&&s| s).count() as u32);
        for (agent, (&s, &b)) in success_flags.iter().zip(buffers).enumerate() {
            self.agent_successes[agent].push(s);
            self.buffers[agent].push(b);
        }
    }

    pub fn len(&self) -> usize {
        self.network_successes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.network_successes.is_empty()
    }

    pub fn finish(self, window: usize) -> MetricsSeries {
        let agent_smoothed: Vec<Vec<f64>> = self
            .agent_successes
            .iter()
            .map(|s| {
                let raw: Vec<f64> = s.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
                smooth(&raw, window)
            })
            .collect();
        let steps = self.network_successes.len();
        let network_smoothed: Vec<f64> = (0..steps)
            .map(|t| agent_smoothed.iter().map(|a| a[t]).sum())
            .collect();
        let fairness: Vec<f64> = (0..steps)
            .map(|t| {
                let x: Vec<f64> = agent_smoothed.iter().map(|a| a[t]).collect();
                jain_fairness(&x).expect("smoothed throughputs are non-negative")
            })
            .collect();
        MetricsSeries {
            smoothing_window: window,
            per_step_network_successes: self.network_successes,
            per_agent_success_indicators: self.agent_successes,
            smoothed_network_throughput: network_smoothed,
            smoothed_agent_throughput: agent_smoothed,
            fairness,
            buffer_series: self.buffers,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSeries {
    pub smoothing_window: usize,
    pub per_step_network_successes: Vec<u32>,
    pub per_agent_success_indicators: Vec<Vec<bool>>,
    pub smoothed_network_throughput: Vec<f64>,
    pub smoothed_agent_throughput: Vec<Vec<f64>>,
    pub fairness: Vec<f64>,
    pub buffer_series: Vec<Vec<u32>>,
}

impl MetricsSeries {
    pub fn steps(&self) -> usize {
        self.per_step_network_successes.len()
    }

    pub fn num_agents(&self) -> usize {
        self.buffer_series.len()
    }

    /// Statistics over the final `tail` steps. `drops` are the
    /// per-agent overflow counts reported by the environment.
    pub fn summarize(&self, tail: usize, drops: &[u64]) -> RunSummary {
        let steps = self.steps();
        let tail = if steps < tail {
            log::warn!("series has {steps} steps, fewer than the {tail}-step tail; summarizing all of it");
            steps
        } else {
            tail
        };
        let from = steps - tail;
        let (throughput_mean, throughput_std) = mean_std(&self.smoothed_network_throughput[from..]);
        let (fairness_mean, fairness_std) = mean_std(&self.fairness[from..]);
        let buffer_tail_mean = self
            .buffer_series
            .iter()
            .map(|b| {
                let tail: Vec<f64> = b[from..].iter().map(|&v| f64::from(v)).collect();
                mean_std(&tail).0
            })
            .collect();
        RunSummary {
            seed: None,
            steps,
            tail,
            throughput_mean,
            throughput_std,
            fairness_mean,
            fairness_std,
            buffer_final: self.buffer_series.iter().map(|b| b.last().copied().unwrap_or(0)).collect(),
            buffer_tail_mean,
            drops: drops.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub steps: usize,
    pub tail: usize,
    pub throughput_mean: f64,
    pub throughput_std: f64,
    pub fairness_mean: f64,
    pub fairness_std: f64,
    pub buffer_final: Vec<u32>,
    pub buffer_tail_mean: Vec<f64>,
    pub drops: Vec<u64>,
}

/// Cross-run means of per-run statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub runs: usize,
    pub throughput_mean: f64,
    pub throughput_std: f64,
    pub fairness_mean: f64,
    pub fairness_std: f64,
    pub buffer_final: Vec<f64>,
    pub buffer_tail_mean: Vec<f64>,
    pub drops: Vec<f64>,
}

pub fn aggregate(runs: &[RunSummary]) -> AggregateSummary {
    let mean_of = |f: &dyn Fn(&RunSummary) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>()).0;
    let agents = runs.first().map_or(0, |r| r.buffer_final.len());
    let per_agent = |f: &dyn Fn(&RunSummary, usize) -> f64| -> Vec<f64> {
        (0..agents).map(|a| mean_of(&|r| f(r, a))).collect()
    };
    AggregateSummary {
        runs: runs.len(),
        throughput_mean: mean_of(&|r| r.throughput_mean),
        throughput_std: mean_of(&|r| r.throughput_std),
        fairness_mean: mean_of(&|r| r.fairness_mean),
        fairness_std: mean_of(&|r| r.fairness_std),
        buffer_final: per_agent(&|r, a| f64::from(r.buffer_final[a])),
        buffer_tail_mean: per_agent(&|r, a| r.buffer_tail_mean[a]),
        drops: per_agent(&|r, a| r.drops[a] as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smoothing_constant_series() {
        assert_eq!(smooth(&[2.5; 50], 10), vec![2.5; 50]);
        assert!(smooth(&[], 3).is_empty());
    }

    #[test]
    fn smoothing_step_series() {
        let mut s = vec![0.0; 100];
        s.extend(vec![1.0; 100]);
        assert_eq!(trailing_mean(&s, 100, 200), 1.0);
        assert_eq!(trailing_mean(&s, 100, 150), 0.5);
        let out = smooth(&s, 100);
        assert_eq!(out[150], 0.5);
        assert_eq!(out[199], 0.99);
    }

    #[test]
    fn window_one_lags_by_one() {
        let s = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(smooth(&s, 1), vec![3.0, 3.0, 1.0, 4.0, 1.0]);
    }

    #[test]
    fn smooth_matches_trailing_mean() {
        let s: Vec<f64> = (0..300).map(|i| ((i * 37) % 11) as f64).collect();
        let out = smooth(&s, 100);
        for (t, o) in out.iter().enumerate() {
            assert!((o - trailing_mean(&s, 100, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn fairness_examples() {
        assert_eq!(jain_fairness(&[0.5; 4]).unwrap(), 1.0);
        assert_eq!(jain_fairness(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.25);
        assert!((jain_fairness(&[2.0, 1.0, 1.0]).unwrap() - 16.0 / 18.0).abs() < 1e-15);
        assert_eq!(jain_fairness(&[0.0; 3]).unwrap(), 1.0);
        assert!(jain_fairness(&[1.0, -0.1]).is_err());
        assert!(jain_fairness(&[]).is_err());
    }

    #[test]
    fn summary_uses_tail() {
        let mut rec = MetricsRecorder::new(2);
        for t in 0..10_000 {
            let late = t >= 9000;
            rec.record(&[late, late], &[1, 2]);
        }
        let series = rec.finish(1);
        let s = series.summarize(1000, &[0, 3]);
        // Window 1 lags by one step, so step 9000 still sees the last zero.
        assert!((s.throughput_mean - 2.0 * 999.0 / 1000.0).abs() < 1e-12);
        assert_eq!(s.buffer_final, vec![1, 2]);
        assert_eq!(s.buffer_tail_mean, vec![1.0, 2.0]);
        assert_eq!(s.drops, vec![0, 3]);

        let mut rec = MetricsRecorder::new(2);
        for _ in 0..2000 {
            rec.record(&[true, true], &[0, 0]);
        }
        let s = rec.finish(100).summarize(1000, &[0, 0]);
        assert_eq!(s.throughput_mean, 2.0);
        assert_eq!(s.throughput_std, 0.0);
        assert_eq!(s.fairness_mean, 1.0);
    }

    #[test]
    fn short_series_uses_everything() {
        let mut rec = MetricsRecorder::new(1);
        for _ in 0..10 {
            rec.record(&[true], &[0]);
        }
        let s = rec.finish(100).summarize(1000, &[0]);
        assert_eq!(s.tail, 10);
    }

    #[test]
    fn aggregate_is_mean_of_means() {
        let mk = |tp: f64, fair: f64, buf: u32| RunSummary {
            seed: None,
            steps: 10,
            tail: 10,
            throughput_mean: tp,
            throughput_std: 0.1,
            fairness_mean: fair,
            fairness_std: 0.0,
            buffer_final: vec![buf],
            buffer_tail_mean: vec![f64::from(buf)],
            drops: vec![0],
        };
        let agg = aggregate(&[mk(1.0, 0.9, 10), mk(2.0, 0.8, 20), mk(3.0, 1.0, 30)]);
        assert_eq!(agg.throughput_mean, 2.0);
        assert!((agg.fairness_mean - 0.9).abs() < 1e-12);
        assert_eq!(agg.buffer_final, vec![20.0]);
    }

    proptest! {
        #[test]
        fn fairness_bounds_and_scale_invariance(
            xs in proptest::collection::vec(0.0f64..10.0, 1..12),
            scale in 0.01f64..100.0,
        ) {
            let f = jain_fairness(&xs).unwrap();
            let n = xs.len() as f64;
            if xs.iter().any(|&x| x > 0.0) {
                prop_assert!(f >= 1.0 / n - 1e-12 && f <= 1.0 + 1e-12);
                let scaled: Vec<f64> = xs.iter().map(|x| x * scale).collect();
                prop_assert!((jain_fairness(&scaled).unwrap() - f).abs() < 1e-9);
            }
        }

        #[test]
        fn agent_throughputs_sum_to_network(
            flags in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 3), 1..400),
            window in 1usize..120,
        ) {
            let mut rec = MetricsRecorder::new(3);
            for f in &flags {
                rec.record(f, &[0, 0, 0]);
            }
            let s = rec.finish(window);
            for t in 0..s.steps() {
                let sum: f64 = s.smoothed_agent_throughput.iter().map(|a| a[t]).sum();
                prop_assert!((sum - s.smoothed_network_throughput[t]).abs() < 1e-9);
                prop_assert!(s.smoothed_network_throughput[t] <= 3.0 + 1e-9);
            }
        }
    }
}
