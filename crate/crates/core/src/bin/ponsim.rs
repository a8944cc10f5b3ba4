use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use ponsim::bench::{run_cache_bench, write_bench_csv, write_decision_log, BenchSettings, DEFAULT_STORE1_FRACTION};
use ponsim::cllid::fuzz::{random_ops, read_script, replay, write_script, FuzzShape};
use ponsim::config::{describe_keys, RunConfig};
use ponsim::netsim::{run_experiment, SimError};
use ponsim::segment_cache::Policy;
use ponsim::workload::{generate_trace, load_trace, save_trace, TraceRecord, WorkloadConfig};

/// EPON IPTV simulator with bi-level segment caches and channel-LLID multicast.
#[derive(Parser)]
#[command(name = "ponsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the network simulation and write metrics.csv (and metrics.json, packets.csv).
    Simulate(SimulateArgs),
    /// Compare cache policies on a trace without the network.
    CacheBench(BenchArgs),
    /// Write a synthetic trace.
    GenTrace(GenTraceArgs),
    /// Replay random control-plane operations and check every invariant.
    ProtocolCheck(ProtocolArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides workload.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run seeds A..B (inclusive) in parallel, one subdirectory each.
    #[arg(long, value_name = "A..B", conflicts_with = "seed")]
    seeds: Option<String>,
    /// Replay this trace instead of generating one.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also write packets.csv.
    #[arg(long)]
    packets: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Trace to replay.
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    trace: Option<PathBuf>,
    /// Generate the workload from the configuration instead.
    #[arg(long)]
    gen: bool,
    /// Workload parameters and segment layout; without it the default
    /// benchmark workload is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "bilevel,lru,lfu")]
    policies: String,
    /// Segments per cache; defaults to 2% of the catalogue.
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_STORE1_FRACTION)]
    store1_fraction: f64,
    #[arg(long, default_value_t = 0)]
    warmup_passes: u32,
    /// Also write decisions-<policy>.csv.
    #[arg(long)]
    decisions: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GenTraceArgs {
    /// TOML configuration; only the workload and topology sections matter.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides workload.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trace CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProtocolArgs {
    #[arg(long, default_value_t = 100_000)]
    ops: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Replay this op,arg1,arg2 script instead of generating one.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Save the generated script.
    #[arg(long)]
    save_script: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    onus: usize,
    #[arg(long, default_value_t = 4)]
    users_per_onu: usize,
    #[arg(long, default_value_t = 32)]
    channels: usize,
}

enum Failure {
    /// Bad configuration or arguments: exit 2.
    Usage(String),
    /// Anything that went wrong while running: exit 1.
    Runtime(String),
}

type Outcome = Result<(), Failure>;

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            ponsim::config::ConfigError::Io { .. } => Failure::Runtime(e.to_string()),
            ponsim::config::ConfigError::Invalid(_) => Failure::Usage(e.to_string()),
        }),
        None => Ok(RunConfig::default()),
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Usage(format!("--seeds: expected A..B, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn simulate_one(cfg: &RunConfig, trace: Option<&[TraceRecord]>, packets: bool, out: &Path) -> Outcome {
    let generated;
    let trace = match trace {
        Some(t) => t,
        None => {
            generated = generate_trace(&cfg.sim.workload).map_err(runtime)?;
            &generated
        }
    };
    let result = run_experiment(&cfg.sim, trace).map_err(|e| match e {
        SimError::InvalidConfig(_) => Failure::Usage(e.to_string()),
        other => runtime(other),
    })?;
    fs::create_dir_all(out).map_err(runtime)?;
    result.report.export_csv(out.join("metrics.csv")).map_err(runtime)?;
    if cfg.output.json {
        result.report.export_json(out.join("metrics.json")).map_err(runtime)?;
    }
    if packets || cfg.output.packets_csv {
        let f = File::create(out.join("packets.csv")).map_err(runtime)?;
        result.write_packet_log(BufWriter::new(f)).map_err(runtime)?;
    }
    let r = &result.report;
    println!(
        "seed {}: onu hit ratio {:.4}, olt hit ratio {:.4}, vod delay {:.6} s, loss {:.6}, event hash {:016x}",
        cfg.sim.workload.seed,
        r.get_f64("cache.onu", "hit_ratio").unwrap_or(0.0),
        r.get_f64("cache.olt", "hit_ratio").unwrap_or(0.0),
        r.get_f64("flow.vod", "delay_mean_s").unwrap_or(0.0),
        r.get_f64("totals", "loss_ratio").unwrap_or(0.0),
        result.event_hash
    );
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Outcome {
    let base = load_config(a.config.as_deref())?;
    let trace = match &a.trace {
        Some(p) => Some(load_trace(p).map_err(runtime)?),
        None => None,
    };
    match &a.seeds {
        None => {
            let cfg = match a.seed {
                Some(s) => base.with_seed(s),
                None => base,
            };
            simulate_one(&cfg, trace.as_deref(), a.packets, &a.out)
        }
        Some(range) => {
            let seeds = parse_seeds(range)?;
            let results: Vec<Outcome> = std::thread::scope(|scope| {
                let handles: Vec<_> = seeds
                    .iter()
                    .map(|&s| {
                        let cfg = base.clone().with_seed(s);
                        let dir = a.out.join(format!("seed-{s}"));
                        let trace = trace.as_deref();
                        scope.spawn(move || simulate_one(&cfg, trace, a.packets, &dir))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("simulation thread panicked"))
                    .collect()
            });
            results.into_iter().collect()
        }
    }
}

fn cmd_cache_bench(a: BenchArgs) -> Outcome {
    let policies = a
        .policies
        .split(',')
        .map(|p| p.parse::<Policy>().map_err(|e| Failure::Usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut workload = match &a.config {
        Some(_) => load_config(a.config.as_deref())?.sim.workload,
        None => WorkloadConfig::default(),
    };
    if let Some(s) = a.seed {
        workload.seed = s;
    }
    if !(0.0..=1.0).contains(&a.store1_fraction) {
        return Err(Failure::Usage("--store1-fraction must be in [0, 1]".into()));
    }
    let trace = match &a.trace {
        Some(p) => load_trace(p).map_err(runtime)?,
        None => generate_trace(&workload).map_err(|e| Failure::Usage(e.to_string()))?,
    };
    let capacity = a
        .capacity
        .unwrap_or_else(|| ((workload.total_segments() as f64) * 0.02).ceil() as usize)
        .max(1);
    let settings = BenchSettings {
        store1_fraction: a.store1_fraction,
        warmup_passes: a.warmup_passes,
        ..BenchSettings::new(capacity, workload.layout())
    };
    let rows = run_cache_bench(&trace, &policies, &settings, a.decisions).map_err(runtime)?;
    fs::create_dir_all(&a.out).map_err(runtime)?;
    let f = File::create(a.out.join("bench.csv")).map_err(runtime)?;
    write_bench_csv(BufWriter::new(f), &rows).map_err(runtime)?;
    for r in &rows {
        println!(
            "{:8} capacity {} hit ratio {:.4} byte hit ratio {:.4}",
            r.policy.as_str(),
            r.capacity,
            r.counters.hit_ratio(),
            r.counters.byte_hit_ratio()
        );
        if a.decisions {
            let f = File::create(a.out.join(format!("decisions-{}.csv", r.policy))).map_err(runtime)?;
            write_decision_log(BufWriter::new(f), &r.decisions).map_err(runtime)?;
        }
    }
    Ok(())
}

fn cmd_gen_trace(a: GenTraceArgs) -> Outcome {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg = cfg.with_seed(s);
    }
    let trace = generate_trace(&cfg.sim.workload).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(runtime)?;
    }
    save_trace(&a.out, &trace).map_err(runtime)?;
    println!("{} records written to {}", trace.len(), a.out.display());
    Ok(())
}

fn cmd_protocol_check(a: ProtocolArgs) -> Outcome {
    let shape = FuzzShape {
        n_onus: a.onus,
        users_per_onu: a.users_per_onu,
        n_channels: a.channels,
    };
    let ops = match &a.script {
        Some(p) => read_script(File::open(p).map_err(runtime)?).map_err(|e| Failure::Usage(e.to_string()))?,
        None => random_ops(a.seed, a.ops, shape),
    };
    if let Some(p) = &a.save_script {
        write_script(BufWriter::new(File::create(p).map_err(runtime)?), &ops).map_err(runtime)?;
    }
    match replay(&ops, shape) {
        Ok(s) => {
            println!(
                "ok: {} steps, {} rejected, {} denied, peak {} LLIDs",
                s.steps, s.rejected, s.denied, s.peak_llids
            );
            Ok(())
        }
        Err(f) => Err(Failure::Runtime(format!("invariant violated at {f}"))),
    }
}

fn main() -> ExitCode {
    let help = format!("Configuration keys (TOML, all optional):\n{}", describe_keys());
    let mut cmd = Cli::command().after_help(help.clone());
    for sub in ["simulate", "gen-trace", "cache-bench"] {
        cmd = cmd.mut_subcommand(sub, |c| c.after_help(help.clone()));
    }
    let matches = cmd.get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::CacheBench(a) => cmd_cache_bench(a),
        Command::GenTrace(a) => cmd_gen_trace(a),
        Command::ProtocolCheck(a) => cmd_protocol_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
