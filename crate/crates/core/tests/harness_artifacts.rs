//! End-to-end checks of the experiment harness and its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use txctl_core::harness::{
    run_benchmark, run_experiment, run_sweep, simulate_run, write_step_csv, ActionCount, ExperimentConfig, PolicyKind,
    NETWORK_CSV_HEADER, STEP_CSV_HEADER,
};

fn small(policy: PolicyKind, steps: usize, runs: usize) -> ExperimentConfig {
    ExperimentConfig {
        policy,
        num_agents: 3,
        threshold: 1,
        actions: ActionCount::Fixed(3),
        steps,
        runs,
        master_seed: 42,
        tail: steps.min(100),
        smoothing_window: 10,
        ..ExperimentConfig::default()
    }
}

fn with_dir(mut cfg: ExperimentConfig, dir: &Path) -> ExperimentConfig {
    cfg.output_dir = Some(dir.to_path_buf());
    cfg
}

fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn smoke_run_writes_every_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_dir(small(PolicyKind::Dqn, 500, 1), dir.path());
    let out = run_experiment(&cfg).unwrap();
    let art = out.artifacts.as_ref().unwrap();

    let steps = fs::read_to_string(&art.step_csvs[0]).unwrap();
    let mut lines = steps.lines();
    assert_eq!(lines.next(), Some(STEP_CSV_HEADER));
    assert_eq!(lines.clone().count(), 500 * 3);
    for line in lines {
        assert_eq!(line.split(',').count(), 7, "{line}");
    }

    let network = fs::read_to_string(&art.network_csvs[0]).unwrap();
    assert_eq!(network.lines().next(), Some(NETWORK_CSV_HEADER));
    assert_eq!(network.lines().count(), 501);

    let buffers = fs::read_to_string(&art.buffer_csvs[0]).unwrap();
    assert_eq!(buffers.lines().next(), Some("step,buffer_0,buffer_1,buffer_2"));
    assert_eq!(buffers.lines().count(), 501);

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&art.summary_json).unwrap()).unwrap();
    assert_eq!(summary["config"]["resolved_action_count"], 3);
    assert_eq!(summary["runs"].as_array().unwrap().len(), 1);
    for key in ["throughput_mean", "throughput_std", "fairness_mean", "fairness_std"] {
        assert!(summary["aggregate"][key].is_number(), "{key}");
    }
    assert!(summary["config"].get("output_dir").is_none());
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let base = small(PolicyKind::Dqn, 300, 2);
    run_experiment(&with_dir(base.clone(), a.path())).unwrap();
    run_experiment(&with_dir(base, b.path())).unwrap();
    let fa = sorted_files(a.path());
    let fb = sorted_files(b.path());
    assert_eq!(fa.len(), fb.len());
    assert!(!fa.is_empty());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn runs_use_distinct_seeds_and_differ() {
    let out = run_experiment(&small(PolicyKind::PPersistent, 400, 3)).unwrap();
    let seeds: Vec<u64> = out.runs.iter().map(|r| r.seed).collect();
    assert_ne!(seeds[0], seeds[1]);
    assert_ne!(seeds[1], seeds[2]);
    assert_ne!(out.runs[0].trace, out.runs[1].trace);

    let other_master = ExperimentConfig {
        master_seed: 43,
        ..small(PolicyKind::PPersistent, 400, 3)
    };
    let other = run_experiment(&other_master).unwrap();
    assert_ne!(other.runs[0].seed, out.runs[0].seed);
}

#[test]
fn cross_run_series_are_step_wise_means() {
    let out = run_experiment(&small(PolicyKind::ExponentialCsma, 400, 3)).unwrap();
    let n = out.runs.len() as f64;
    for t in [0, 1, 57, 399] {
        let want: f64 = out.runs.iter().map(|r| r.series.smoothed_network_throughput[t]).sum::<f64>() / n;
        assert!((out.mean_series.throughput_smoothed[t] - want).abs() < 1e-12);
        let want: f64 = out.runs.iter().map(|r| r.series.fairness[t]).sum::<f64>() / n;
        assert!((out.mean_series.fairness[t] - want).abs() < 1e-12);
    }
    let want: f64 = out.runs.iter().map(|r| r.summary.throughput_mean).sum::<f64>() / n;
    assert!((out.aggregate.throughput_mean - want).abs() < 1e-12);
}

#[test]
fn single_run_is_reproducible_in_isolation() {
    // Run 2 of a three-run experiment equals run 2 simulated alone.
    let cfg = small(PolicyKind::Dqn, 200, 3);
    let all = run_experiment(&cfg).unwrap();
    let alone = simulate_run(&cfg.resolve().unwrap(), 2, None).unwrap();
    assert_eq!(all.runs[2].trace, alone.trace);
}

#[test]
fn invalid_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = with_dir(small(PolicyKind::Dqn, 100, 1), dir.path());
    cfg.buffer_periods = vec![1, 2];
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.kind(), "config");
    assert!(sorted_files(dir.path()).is_empty());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("not_a_dir");
    fs::write(&blocker, b"x").unwrap();
    let cfg = with_dir(small(PolicyKind::PPersistent, 100, 1), &blocker);
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.kind(), "io");
}

#[test]
fn sweep_and_benchmark_tables() {
    let dir = tempfile::tempdir().unwrap();
    let base = with_dir(small(PolicyKind::Dqn, 150, 1), dir.path());
    let rows = run_sweep(&base, &[2, 3]).unwrap();
    assert_eq!(rows.iter().map(|r| r.actions).collect::<Vec<_>>(), vec![2, 3]);
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(dir.path().join("actions_2").join("summary.json").exists());

    let bdir = tempfile::tempdir().unwrap();
    let bench = run_benchmark(&with_dir(small(PolicyKind::Dqn, 150, 1), bdir.path())).unwrap();
    assert_eq!(bench.policies.len(), PolicyKind::ALL.len());
    for p in PolicyKind::ALL {
        assert!(bench.get(p).is_some());
        assert!(bdir.path().join(p.name()).join("summary.json").exists());
    }
    let throughput = fs::read_to_string(bdir.path().join("benchmark_throughput.csv")).unwrap();
    assert_eq!(throughput.lines().count(), 151);
}

const GOLDEN: &str = "tests/data/golden_trace.csv";

/// The first 50 steps of a seeded learning run. Regenerate with
/// `TXCTL_BLESS=1 cargo test --test harness_artifacts golden` after an
/// intentional behaviour change.
#[test]
fn golden_trace_first_fifty_steps() {
    let cfg = ExperimentConfig {
        dqn: txctl_core::dqn::DqnHyperparams {
            batch_size: 4,
            ..Default::default()
        },
        ..small(PolicyKind::Dqn, 50, 1)
    };
    let run = simulate_run(&cfg.resolve().unwrap(), 0, None).unwrap();
    let mut bytes = Vec::new();
    write_step_csv(&mut bytes, &run).unwrap();
    let text = String::from_utf8(bytes).unwrap();

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(GOLDEN);
    if std::env::var_os("TXCTL_BLESS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, &text).unwrap();
    }
    let want = fs::read_to_string(&path).expect("golden trace fixture");
    assert_eq!(text, want);

    // Step 0 starts with empty buffers, so nothing can be sent.
    assert!(run.step_records(0).iter().all(|r| !r.transmitted));
}
