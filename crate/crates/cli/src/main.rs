//! `txctl`: run transmission-control experiments from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use txctl_core::analysis::{miscoordination_report, ProbabilityMode};
use txctl_core::harness::{
    run_benchmark, run_buffer_experiment, run_experiment, run_sweep, ActionCount, ArtifactSet, BufferPreset,
    ExperimentConfig, PolicyKind,
};

#[derive(Parser)]
#[command(name = "txctl", version, about = "Multi-agent DQN transmission control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (several seeded runs of one policy).
    Run(CommonArgs),
    /// Run one experiment per action-space size and tabulate the results.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Action counts to test, e.g. `2,3,4` or `2..8` (inclusive).
        #[arg(long = "m-values", default_value = "2..8")]
        m_values: String,
    },
    /// Run DQN and the three backoff baselines under identical settings.
    Benchmark(CommonArgs),
    /// Buffer-rate experiments: 4 agents, k = 1, 5 actions, DQN vs p-persistent.
    BufferExp {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = PresetArg::Both)]
        preset: PresetArg,
    },
    /// Miscoordination probabilities for uniformly random agents.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Homogeneous,
    Heterogeneous,
    Both,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    threshold: Option<usize>,
    /// Action-space size, or `auto` for n/k + 1.
    #[arg(long)]
    actions: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated per-agent buffer periods.
    #[arg(long = "buffer-periods")]
    buffer_periods: Option<String>,
    #[arg(long = "max-buffer")]
    max_buffer: Option<u32>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    tail: Option<usize>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Learner override as `field=value`, e.g. `--dqn learning_rate=0.001`. Repeatable.
    #[arg(long = "dqn", value_name = "FIELD=VALUE")]
    dqn: Vec<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    agents: u64,
    #[arg(long)]
    threshold: u64,
    #[arg(long)]
    actions: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Corrected)]
    mode: ModeArg,
    /// Monte Carlo steps (0 disables the simulation).
    #[arg(long = "mc-steps", default_value_t = 0)]
    mc_steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also tabulate every m from 2 up to this value.
    #[arg(long = "sweep-max")]
    sweep_max: Option<usize>,
    /// Directory for `report.json` and `sweep.csv`; stdout only when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Corrected,
    Literal,
}

impl From<ModeArg> for ProbabilityMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Corrected => ProbabilityMode::Corrected,
            ModeArg::Literal => ProbabilityMode::Literal,
        }
    }
}

fn load_config(args: &CommonArgs) -> anyhow::Result<ExperimentConfig> {
    let mut value: Value = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => json!({}),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| anyhow::anyhow!("config file must contain a JSON object"))?;
    if !args.dqn.is_empty() {
        let dqn = obj.entry("dqn").or_insert_with(|| json!({}));
        let dqn = dqn
            .as_object_mut()
            .ok_or_else(|| anyhow::anyhow!("config field 'dqn' must be an object"))?;
        for kv in &args.dqn {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow::anyhow!("--dqn expects FIELD=VALUE, got '{kv}'"))?;
            let parsed = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            dqn.insert(k.trim().to_string(), parsed);
        }
    }
    let mut cfg: ExperimentConfig = serde_json::from_value(value).context("invalid experiment config")?;

    if let Some(p) = &args.policy {
        cfg.policy = p.parse::<PolicyKind>()?;
    }
    if let Some(v) = args.agents {
        cfg.num_agents = v;
    }
    if let Some(v) = args.threshold {
        cfg.threshold = v;
    }
    if let Some(a) = &args.actions {
        cfg.actions = a.parse::<ActionCount>()?;
    }
    if let Some(v) = args.steps {
        cfg.steps = v;
    }
    if let Some(v) = args.runs {
        cfg.runs = v;
    }
    if let Some(v) = args.seed {
        cfg.master_seed = v;
    }
    if let Some(p) = &args.buffer_periods {
        cfg.buffer_periods = parse_list(p)?;
    }
    if let Some(v) = args.max_buffer {
        cfg.max_buffer = v;
    }
    if let Some(v) = args.window {
        cfg.smoothing_window = v;
    }
    if let Some(v) = args.tail {
        cfg.tail = v;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    if cfg.buffer_periods.len() == 1 && cfg.num_agents > 1 {
        cfg.buffer_periods = vec![cfg.buffer_periods[0]; cfg.num_agents];
    }
    Ok(cfg)
}

fn parse_list<T: std::str::FromStr>(text: &str) -> anyhow::Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| anyhow::anyhow!("bad list entry '{s}' in '{text}'")))
        .collect()
}

fn parse_m_values(text: &str) -> anyhow::Result<Vec<usize>> {
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = lo.trim().parse()?;
        let hi: usize = hi.trim().trim_start_matches('=').parse()?;
        anyhow::ensure!(lo <= hi, "empty range '{text}'");
        Ok((lo..=hi).collect())
    } else {
        parse_list(text)
    }
}

fn print_json(v: &Value) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> anyhow::Result<()> {
    let mode = ProbabilityMode::from(args.mode);
    let mc = (args.mc_steps > 0).then_some((args.mc_steps, args.seed));
    let report = miscoordination_report(args.agents, args.threshold, args.actions, mode, mc)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let report_json = serde_json::to_value(&report)?;

    let mut sweep_rows = Vec::new();
    if let Some(max) = args.sweep_max {
        for m in 2..=max {
            sweep_rows.push(miscoordination_report(args.agents, args.threshold, m, mode, mc)?);
        }
    }

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut set = ArtifactSet::new();
        let res = write_analysis(dir, &mut set, &report_json, &sweep_rows);
        if let Err(e) = res {
            set.remove_all();
            return Err(e);
        }
    }
    print_json(&report_json)
}

fn write_analysis(
    dir: &Path,
    set: &mut ArtifactSet,
    report: &Value,
    rows: &[txctl_core::analysis::MiscoordinationReport],
) -> anyhow::Result<()> {
    set.write_json(dir.join("report.json"), report)?;
    if !rows.is_empty() {
        use txctl_core::harness::format_g6 as g;
        set.write_with(dir.join("sweep.csv"), |w| {
            writeln!(w, "m,c0,c1,p_m,p_misc_power_sum,p_misc_binomial,p_misc_montecarlo,p_misc_montecarlo_stderr")?;
            for r in rows {
                let (mc, se) = r
                    .monte_carlo
                    .map(|m| (g(m.miscoordination), g(m.miscoordination_stderr)))
                    .unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    r.m,
                    r.c0,
                    r.c1,
                    g(r.p_m),
                    g(r.p_misc_power_sum),
                    r.p_misc_binomial.map(g).unwrap_or_default(),
                    mc,
                    se
                )?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load_config(&args)?;
            let out = run_experiment(&cfg)?;
            print_json(&json!({
                "resolved_action_count": out.resolved.action_count,
                "runs": out.summaries(),
                "aggregate": out.aggregate,
            }))
        }
        Command::Sweep { common, m_values } => {
            let cfg = load_config(&common)?;
            let rows = run_sweep(&cfg, &parse_m_values(&m_values)?)?;
            print_json(&serde_json::to_value(rows)?)
        }
        Command::Benchmark(args) => {
            let cfg = load_config(&args)?;
            let out = run_benchmark(&cfg)?;
            let table: serde_json::Map<String, Value> = out
                .policies
                .iter()
                .map(|(p, o)| Ok((p.name().to_string(), serde_json::to_value(&o.aggregate)?)))
                .collect::<anyhow::Result<_>>()?;
            print_json(&json!({ "action_count": out.action_count, "policies": table }))
        }
        Command::BufferExp { common, preset } => {
            let cfg = load_config(&common)?;
            let presets = match preset {
                PresetArg::Homogeneous => vec![BufferPreset::Homogeneous],
                PresetArg::Heterogeneous => vec![BufferPreset::Heterogeneous],
                PresetArg::Both => vec![BufferPreset::Homogeneous, BufferPreset::Heterogeneous],
            };
            let mut report = serde_json::Map::new();
            for p in presets {
                let out = run_buffer_experiment(&cfg, p)?;
                report.insert(
                    p.name().to_string(),
                    json!({ "dqn": out.dqn.aggregate, "p_persistent": out.p_persistent.aggregate }),
                );
            }
            print_json(&Value::Object(report))
        }
        Command::Analyze(args) => analyze(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err
                .downcast_ref::<txctl_core::Error>()
                .map_or("error", txctl_core::Error::kind);
            let body = json!({ "error": { "kind": kind, "message": format!("{err:#}") } });
            eprintln!("{body}");
            ExitCode::from(if matches!(kind, "config" | "usage" | "domain") { 2 } else { 1 })
        }
    }
}
