//! Command-line runner for the convergecast simulator.
//!
//! Subcommands: `run` one seeded simulation, `sweep` a parameter
//! cross-product, `verify` the distance-2 oracle over an existing trace,
//! and `compare` two run reports. Exit code is nonzero on any failure or
//! invariant violation.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use harvest_core::analysis::{
    compare, parse_report_csv, render_report_text, verify_d2_coloring_with_window,
    write_report_csv, RELAY_WINDOW_MS,
};
use harvest_core::harness::{parse_topology, render_topology, run, sweep, RunConfig, SweepAxis};
use harvest_core::simnet::{parse_trace_csv, write_trace_csv};

#[derive(Parser)]
#[command(
    name = "harvest-sim",
    about = "Deterministic simulator for pipelined tree convergecast and its one-node-at-a-time baseline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write trace, report, and topology files.
    Run(RunArgs),
    /// Run a parameter sweep and emit aggregate tables.
    Sweep(SweepArgs),
    /// Check a trace against the distance-2 coloring oracle.
    Verify(VerifyArgs),
    /// Compare a tree-protocol report with a baseline report.
    Compare(CompareArgs),
}

/// Config file plus per-field overrides. Flag names mirror the config keys.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML config file; defaults apply for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "protocol")]
    protocol: Option<String>,
    #[arg(long = "topology")]
    topology: Option<String>,
    #[arg(long = "rows")]
    rows: Option<String>,
    #[arg(long = "cols")]
    cols: Option<String>,
    #[arg(long = "node_count")]
    node_count: Option<String>,
    #[arg(long = "spacing_ft")]
    spacing_ft: Option<String>,
    #[arg(long = "topology_file")]
    topology_file: Option<String>,
    #[arg(long = "packets_per_node")]
    packets_per_node: Option<String>,
    #[arg(long = "slot_ms")]
    slot_ms: Option<String>,
    #[arg(long = "colors")]
    colors: Option<String>,
    #[arg(long = "concurrency")]
    concurrency: Option<String>,
    #[arg(long = "buffers")]
    buffers: Option<String>,
    #[arg(long = "seed")]
    seed: Option<String>,
    #[arg(long = "loss")]
    loss: Option<String>,
    #[arg(long = "retry_cap")]
    retry_cap: Option<String>,
    #[arg(long = "soft_ttl_periods")]
    soft_ttl_periods: Option<String>,
    #[arg(long = "duty_cycle")]
    duty_cycle: Option<String>,
    #[arg(long = "backoff_min_ms")]
    backoff_min_ms: Option<String>,
    #[arg(long = "backoff_max_ms")]
    backoff_max_ms: Option<String>,
    #[arg(long = "timeout_periods")]
    timeout_periods: Option<String>,
    #[arg(long = "quality_full_ft")]
    quality_full_ft: Option<String>,
    #[arg(long = "quality_edge_ft")]
    quality_edge_ft: Option<String>,
}

impl ConfigArgs {
    fn build(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                RunConfig::parse(&text).context("parsing config")?
            }
            None => RunConfig::default(),
        };
        let overrides: [(&str, &Option<String>); 22] = [
            ("protocol", &self.protocol),
            ("topology", &self.topology),
            ("rows", &self.rows),
            ("cols", &self.cols),
            ("node_count", &self.node_count),
            ("spacing_ft", &self.spacing_ft),
            ("topology_file", &self.topology_file),
            ("packets_per_node", &self.packets_per_node),
            ("slot_ms", &self.slot_ms),
            ("colors", &self.colors),
            ("concurrency", &self.concurrency),
            ("buffers", &self.buffers),
            ("seed", &self.seed),
            ("loss", &self.loss),
            ("retry_cap", &self.retry_cap),
            ("soft_ttl_periods", &self.soft_ttl_periods),
            ("duty_cycle", &self.duty_cycle),
            ("backoff_min_ms", &self.backoff_min_ms),
            ("backoff_max_ms", &self.backoff_max_ms),
            ("timeout_periods", &self.timeout_periods),
            ("quality_full_ft", &self.quality_full_ft),
            ("quality_edge_ft", &self.quality_edge_ft),
        ];
        for (key, value) in overrides {
            if let Some(value) = value {
                cfg.set_field(key, value)
                    .with_context(|| format!("applying --{key}"))?;
            }
        }
        cfg.validate().context("validating config")?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory for trace.csv, report.csv, report.txt, topology.txt.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Sweep axis as key=value1,value2,...; repeatable.
    #[arg(long = "vary")]
    vary: Vec<String>,
    /// Seeds per configuration, consecutive from the base seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Trace CSV produced by `run`.
    #[arg(long)]
    trace: PathBuf,
    /// Topology file produced by `run` (or handwritten).
    #[arg(long)]
    topology: PathBuf,
    /// Relayed-awareness window in ms; default matches the standard slot grid.
    #[arg(long, default_value_t = RELAY_WINDOW_MS)]
    relay_window_ms: u64,
}

#[derive(Args)]
struct CompareArgs {
    /// Report CSV of the tree-protocol run.
    #[arg(long)]
    harvest: PathBuf,
    /// Report CSV of the baseline run.
    #[arg(long)]
    straw: PathBuf,
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = args.config.build()?;
    let out = run(&cfg)?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let protocol = out.report.protocol.clone();
    fs::write(args.out_dir.join("trace.csv"), write_trace_csv(&out.trace, &protocol))?;
    fs::write(args.out_dir.join("report.csv"), write_report_csv(&out.report))?;
    fs::write(args.out_dir.join("report.txt"), render_report_text(&out.report))?;
    fs::write(args.out_dir.join("topology.txt"), render_topology(&out.topology))?;
    fs::write(args.out_dir.join("config.toml"), cfg.render())?;
    print!("{}", render_report_text(&out.report));
    println!("outputs in {}", args.out_dir.display());
    if out.censored {
        bail!("run hit the timeout before completing");
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = args.config.build()?;
    let mut axes = Vec::new();
    for spec in &args.vary {
        let (key, values) = spec
            .split_once('=')
            .with_context(|| format!("--vary {spec}: expected key=v1,v2,..."))?;
        axes.push(SweepAxis {
            key: key.to_string(),
            values: values.split(',').map(str::to_string).collect(),
        });
    }
    let outcome = sweep(&cfg, &axes, args.seeds)?;
    fs::create_dir_all(&args.out_dir)?;
    fs::write(args.out_dir.join("sweep.csv"), outcome.to_csv())?;
    let tables = outcome.render_tables();
    fs::write(args.out_dir.join("sweep.txt"), &tables)?;
    print!("{tables}");
    println!("{} runs; outputs in {}", outcome.rows.len(), args.out_dir.display());
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<()> {
    let trace_text = fs::read_to_string(&args.trace)
        .with_context(|| format!("reading {}", args.trace.display()))?;
    let (trace, protocol) = parse_trace_csv(&trace_text).context("parsing trace")?;
    let topo_text = fs::read_to_string(&args.topology)
        .with_context(|| format!("reading {}", args.topology.display()))?;
    let topology = parse_topology(&topo_text)?;
    let violations = verify_d2_coloring_with_window(&trace, &topology, args.relay_window_ms);
    if violations.is_empty() {
        println!(
            "ok: no distance-2 violations in {} records ({protocol} run)",
            trace.len()
        );
        Ok(())
    } else {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        bail!("{} distance-2 violation(s)", violations.len());
    }
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let load = |path: &PathBuf| -> Result<_> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        parse_report_csv(&text).map_err(|e| anyhow::anyhow!("parsing {}: {e}", path.display()))
    };
    let harvest = load(&args.harvest)?;
    let straw = load(&args.straw)?;
    let summary = compare(&harvest, &straw)?;
    println!("latency gain          {:.2}%", 100.0 * summary.latency_gain);
    println!(
        "per-packet time       {:.2} ms vs {:.2} ms",
        summary.per_packet_ms_harvest, summary.per_packet_ms_straw
    );
    println!(
        "steady rates          {:.3} per period vs {:.3} per 3 slots",
        summary.rate_harvest, summary.rate_straw
    );
    println!("control tx saved      {}", summary.control_tx_delta);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
