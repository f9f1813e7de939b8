//! Experiment orchestration: seeded multi-run experiments, action-count
//! sweeps, policy benchmarks, buffer-rate presets, and their artifacts.
//!
//! Artifacts for one experiment (all under `output_dir`):
//!
//! | file | contents |
//! |------|----------|
//! | `run{r}_steps.csv` | `step,agent,transmitted,success,reward,buffer,interference` |
//! | `run{r}_network.csv` | `step,throughput_raw,throughput_smoothed,fairness` |
//! | `run{r}_buffers.csv` | `step,buffer_0,...` |
//! | `network_mean.csv` | cross-run mean of the network series |
//! | `buffers_mean.csv` | cross-run mean buffer levels |
//! | `summary.json` | `config`, `metadata`, `runs[]`, `aggregate` |
//!
//! Output is a pure function of the config (the output directory itself is
//! not echoed), so repeated executions produce byte-identical files.

mod config;
mod output;
mod runner;

pub use config::{ActionCount, ExperimentConfig, PolicyKind, ResolvedConfig};
pub use output::{format_g6, write_step_csv, ArtifactSet, NETWORK_CSV_HEADER, STEP_CSV_HEADER};
pub use runner::{simulate_run, AgentStepRecord, RunResult};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::{aggregate, AggregateSummary, RunSummary};
use crate::{Error, Result};

/// Paths written by [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub summary_json: PathBuf,
    pub network_mean_csv: PathBuf,
    pub buffers_mean_csv: PathBuf,
    pub step_csvs: Vec<PathBuf>,
    pub network_csvs: Vec<PathBuf>,
    pub buffer_csvs: Vec<PathBuf>,
}

/// Cross-run mean time series.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSeries {
    pub throughput_raw: Vec<f64>,
    pub throughput_smoothed: Vec<f64>,
    pub fairness: Vec<f64>,
    /// `buffers[agent][step]`.
    pub buffers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub resolved: ResolvedConfig,
    pub runs: Vec<RunResult>,
    pub aggregate: AggregateSummary,
    pub mean_series: MeanSeries,
    pub artifacts: Option<RunArtifacts>,
}

impl ExperimentOutcome {
    pub fn summaries(&self) -> Vec<RunSummary> {
        self.runs.iter().map(|r| r.summary.clone()).collect()
    }
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    #[serde(flatten)]
    experiment: ExperimentConfig,
    resolved_action_count: usize,
    resolved_buffer_periods: &'a [u32],
    run_seeds: Vec<u64>,
}

#[derive(Serialize)]
struct Metadata {
    generator: String,
    smoothing: &'static str,
    fairness_all_zero: &'static str,
    std: &'static str,
    seeding: &'static str,
    coerced_transmit_flags: Vec<Vec<u64>>,
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    config: ConfigEcho<'a>,
    metadata: Metadata,
    runs: &'a [RunSummary],
    aggregate: &'a AggregateSummary,
}

fn mean_over_runs(runs: &[RunResult], f: impl Fn(&RunResult) -> &[f64]) -> Vec<f64> {
    let steps = f(&runs[0]).len();
    let mut out = vec![0.0; steps];
    for r in runs {
        for (o, v) in out.iter_mut().zip(f(r)) {
            *o += v;
        }
    }
    let n = runs.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

fn mean_series(runs: &[RunResult]) -> MeanSeries {
    let raw: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.series.per_step_network_successes.iter().map(|&s| f64::from(s)).collect())
        .collect();
    let steps = raw[0].len();
    let agents = runs[0].series.num_agents();
    let throughput_raw = (0..steps)
        .map(|t| raw.iter().map(|r| r[t]).sum::<f64>() / runs.len() as f64)
        .collect();
    let buffers = (0..agents)
        .map(|a| {
            (0..steps)
                .map(|t| runs.iter().map(|r| f64::from(r.series.buffer_series[a][t])).sum::<f64>() / runs.len() as f64)
                .collect()
        })
        .collect();
    MeanSeries {
        throughput_raw,
        throughput_smoothed: mean_over_runs(runs, |r| &r.series.smoothed_network_throughput),
        fairness: mean_over_runs(runs, |r| &r.series.fairness),
        buffers,
    }
}

/// Runs `config.runs` independent seeded runs and, when `output_dir` is set,
/// writes per-run and cross-run artifacts. On a write failure every file
/// written by this call is removed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let resolved = config.resolve()?;
    if let Some(dir) = &config.output_dir {
        output::ensure_dir(dir)?;
    }
    log::info!(
        "{} agents, k={}, m={}, policy {}, {} runs x {} steps",
        resolved.env.num_agents,
        resolved.env.threshold,
        resolved.action_count,
        config.policy,
        config.runs,
        config.steps
    );
    let runs = (0..config.runs)
        .map(|r| {
            let result = simulate_run(&resolved, r, config.output_dir.as_deref());
            if let Ok(res) = &result {
                log::info!(
                    "run {r}: throughput {:.4} fairness {:.4}",
                    res.summary.throughput_mean,
                    res.summary.fairness_mean
                );
            }
            result
        })
        .collect::<Result<Vec<_>>>()?;
    let summaries: Vec<RunSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    let aggregate = aggregate(&summaries);
    let mean_series = mean_series(&runs);

    let mut outcome = ExperimentOutcome {
        resolved,
        runs,
        aggregate,
        mean_series,
        artifacts: None,
    };
    if let Some(dir) = config.output_dir.clone() {
        let mut set = ArtifactSet::new();
        match write_experiment(&dir, &outcome, &mut set) {
            Ok(a) => outcome.artifacts = Some(a),
            Err(e) => {
                set.remove_all();
                return Err(e);
            }
        }
    }
    Ok(outcome)
}

fn write_experiment(dir: &Path, outcome: &ExperimentOutcome, set: &mut ArtifactSet) -> Result<RunArtifacts> {
    let mut step_csvs = Vec::new();
    let mut network_csvs = Vec::new();
    let mut buffer_csvs = Vec::new();
    for run in &outcome.runs {
        let r = run.run_index;
        step_csvs.push(set.write_with(dir.join(format!("run{r}_steps.csv")), |w| output::write_step_csv(w, run))?);
        let raw: Vec<f64> = run.series.per_step_network_successes.iter().map(|&s| f64::from(s)).collect();
        network_csvs.push(set.write_with(dir.join(format!("run{r}_network.csv")), |w| {
            output::write_network_csv(w, &raw, &run.series.smoothed_network_throughput, &run.series.fairness)
        })?);
        let buffers: Vec<Vec<f64>> = run
            .series
            .buffer_series
            .iter()
            .map(|b| b.iter().map(|&v| f64::from(v)).collect())
            .collect();
        buffer_csvs.push(set.write_with(dir.join(format!("run{r}_buffers.csv")), |w| output::write_buffer_csv(w, &buffers))?);
    }
    let ms = &outcome.mean_series;
    let network_mean_csv = set.write_with(dir.join("network_mean.csv"), |w| {
        output::write_network_csv(w, &ms.throughput_raw, &ms.throughput_smoothed, &ms.fairness)
    })?;
    let buffers_mean_csv = set.write_with(dir.join("buffers_mean.csv"), |w| output::write_buffer_csv(w, &ms.buffers))?;

    let mut echo = outcome.resolved.experiment.clone();
    echo.output_dir = None;
    let summaries = outcome.summaries();
    let doc = SummaryDoc {
        config: ConfigEcho {
            experiment: echo,
            resolved_action_count: outcome.resolved.action_count,
            resolved_buffer_periods: &outcome.resolved.env.buffer_periods,
            run_seeds: outcome.runs.iter().map(|r| r.seed).collect(),
        },
        metadata: Metadata {
            generator: format!("txctl-core {}", env!("CARGO_PKG_VERSION")),
            smoothing: "trailing mean over the preceding window; warm-up steps average the available prefix",
            fairness_all_zero: "an all-zero throughput vector is reported as fairness 1.0",
            std: "population standard deviation over the summary tail",
            seeding: "every run derives its own seed from (master_seed, run); environment and all agent streams vary per run",
            coerced_transmit_flags: outcome.runs.iter().map(|r| r.coerced.clone()).collect(),
        },
        runs: &summaries,
        aggregate: &outcome.aggregate,
    };
    let summary_json = set.write_json(dir.join("summary.json"), &doc)?;
    Ok(RunArtifacts {
        summary_json,
        network_mean_csv,
        buffers_mean_csv,
        step_csvs,
        network_csvs,
        buffer_csvs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub actions: usize,
    pub throughput_mean: f64,
    pub throughput_std: f64,
    pub fairness_mean: f64,
    pub fairness_std: f64,
}

/// One experiment per action count; with an output directory, each lands in
/// `actions_{m}/` and the table in `sweep.csv`.
pub fn run_sweep(base: &ExperimentConfig, m_values: &[usize]) -> Result<Vec<SweepRow>> {
    if m_values.is_empty() {
        return Err(Error::Config("sweep needs at least one action count".into()));
    }
    if let Some(m) = m_values.iter().find(|&&m| m < 2) {
        return Err(Error::Config(format!("sweep action counts must be at least 2, got {m}")));
    }
    let mut rows = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let mut cfg = base.clone();
        cfg.actions = ActionCount::Fixed(m);
        cfg.output_dir = base.output_dir.as_ref().map(|d| d.join(format!("actions_{m}")));
        let out = run_experiment(&cfg)?;
        rows.push(SweepRow {
            actions: m,
            throughput_mean: out.aggregate.throughput_mean,
            throughput_std: out.aggregate.throughput_std,
            fairness_mean: out.aggregate.fairness_mean,
            fairness_std: out.aggregate.fairness_std,
        });
    }
    if let Some(dir) = &base.output_dir {
        let mut set = ArtifactSet::new();
        let written = set.write_with(dir.join("sweep.csv"), |w| {
            writeln!(w, "actions,throughput_mean,throughput_std,fairness_mean,fairness_std")?;
            for r in &rows {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    r.actions,
                    format_g6(r.throughput_mean),
                    format_g6(r.throughput_std),
                    format_g6(r.fairness_mean),
                    format_g6(r.fairness_std)
                )?;
            }
            Ok(())
        });
        if let Err(e) = written {
            set.remove_all();
            return Err(e);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub action_count: usize,
    pub policies: Vec<(PolicyKind, ExperimentOutcome)>,
}

impl BenchmarkOutcome {
    pub fn get(&self, policy: PolicyKind) -> Option<&ExperimentOutcome> {
        self.policies.iter().find(|(p, _)| *p == policy).map(|(_, o)| o)
    }
}

/// DQN and all three baselines under identical settings; baselines use the
/// resolved action count as their backoff window.
pub fn run_benchmark(base: &ExperimentConfig) -> Result<BenchmarkOutcome> {
    let action_count = base.resolve()?.action_count;
    let mut policies = Vec::new();
    for policy in PolicyKind::ALL {
        let mut cfg = base.clone();
        cfg.policy = policy;
        cfg.actions = ActionCount::Fixed(action_count);
        cfg.output_dir = base.output_dir.as_ref().map(|d| d.join(policy.name()));
        policies.push((policy, run_experiment(&cfg)?));
    }
    let outcome = BenchmarkOutcome { action_count, policies };
    if let Some(dir) = &base.output_dir {
        let names: Vec<&str> = outcome.policies.iter().map(|(p, _)| p.name()).collect();
        let throughput: Vec<Vec<f64>> = outcome
            .policies
            .iter()
            .map(|(_, o)| o.mean_series.throughput_smoothed.clone())
            .collect();
        let fairness: Vec<Vec<f64>> = outcome.policies.iter().map(|(_, o)| o.mean_series.fairness.clone()).collect();
        let summary: BTreeMap<&str, &AggregateSummary> =
            outcome.policies.iter().map(|(p, o)| (p.name(), &o.aggregate)).collect();
        let mut set = ArtifactSet::new();
        let result = (|| -> Result<()> {
            set.write_with(dir.join("benchmark_throughput.csv"), |w| output::write_columns_csv(w, &names, &throughput))?;
            set.write_with(dir.join("benchmark_fairness.csv"), |w| output::write_columns_csv(w, &names, &fairness))?;
            set.write_json(dir.join("benchmark_summary.json"), &summary)?;
            Ok(())
        })();
        if let Err(e) = result {
            set.remove_all();
            return Err(e);
        }
    }
    Ok(outcome)
}

/// The two buffer-rate settings: every agent fills every 8 steps, or agents
/// fill every 2, 5, 8 and 10 steps respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferPreset {
    Homogeneous,
    Heterogeneous,
}

impl BufferPreset {
    pub fn periods(self) -> Vec<u32> {
        match self {
            BufferPreset::Homogeneous => vec![8; 4],
            BufferPreset::Heterogeneous => vec![2, 5, 8, 10],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BufferPreset::Homogeneous => "homogeneous",
            BufferPreset::Heterogeneous => "heterogeneous",
        }
    }

    /// 4 agents, `k = 1`, 5 actions, buffers capped at 100; `steps`, `runs`,
    /// seed, window, tail and learner settings come from `base`.
    pub fn config(self, base: &ExperimentConfig, policy: PolicyKind) -> ExperimentConfig {
        ExperimentConfig {
            policy,
            num_agents: 4,
            threshold: 1,
            actions: ActionCount::Fixed(5),
            buffer_periods: self.periods(),
            max_buffer: 100,
            output_dir: base
                .output_dir
                .as_ref()
                .map(|d| d.join(self.name()).join(policy.name())),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct BufferExperimentOutcome {
    pub preset: BufferPreset,
    pub dqn: ExperimentOutcome,
    pub p_persistent: ExperimentOutcome,
}

pub fn run_buffer_experiment(base: &ExperimentConfig, preset: BufferPreset) -> Result<BufferExperimentOutcome> {
    let dqn = run_experiment(&preset.config(base, PolicyKind::Dqn))?;
    let p_persistent = run_experiment(&preset.config(base, PolicyKind::PPersistent))?;
    Ok(BufferExperimentOutcome {
        preset,
        dqn,
        p_persistent,
    })
}
