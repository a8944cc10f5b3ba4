//! Trace-driven, cache-only comparison of replacement policies.

use std::io::Write;

use crate::metrics::CacheCounters;
use crate::segment_cache::{build_cache, CacheConfig, CacheError, Policy, Request, SegmentDecision, SegmentLayout};
use crate::workload::{RecordKind, TraceRecord};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchSettings {
    /// Total segments per cache. The bi-level cache splits it between stores.
    pub capacity: usize,
    pub store1_fraction: f64,
    /// Bi-level parameters; capacities inside are overwritten.
    pub cache: CacheConfig,
    /// Replays of the trace before the measured pass.
    pub warmup_passes: u32,
}

impl BenchSettings {
    pub fn new(capacity: usize, layout: SegmentLayout) -> Self {
        Self {
            capacity,
            store1_fraction: DEFAULT_STORE1_FRACTION,
            cache: CacheConfig {
                layout,
                ..CacheConfig::default()
            },
            warmup_passes: 0,
        }
    }

    pub fn cache_config(&self) -> CacheConfig {
        self.cache.with_total_capacity(self.capacity, self.store1_fraction)
    }
}

/// Share of a bi-level cache given to store 1 when only a total is known.
pub const DEFAULT_STORE1_FRACTION: f64 = 0.25;

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub policy: Policy,
    pub capacity: usize,
    pub counters: CacheCounters,
    /// `(time_s, decision)` of the measured pass, when requested.
    pub decisions: Vec<(f64, SegmentDecision)>,
}

pub fn vod_requests(trace: &[TraceRecord]) -> Vec<Request> {
    trace
        .iter()
        .filter(|r| r.kind == RecordKind::Vod)
        .map(|r| {
            Request::new(
                r.object_id.expect("validated vod record"),
                r.start_payload.expect("validated vod record"),
                r.n_payloads.expect("validated vod record"),
                r.time_s,
            )
        })
        .collect()
}

/// Replays the VOD part of `trace` through one fresh cache per policy.
pub fn run_cache_bench(
    trace: &[TraceRecord],
    policies: &[Policy],
    settings: &BenchSettings,
    keep_decisions: bool,
) -> Result<Vec<BenchRow>, CacheError> {
    let requests = vod_requests(trace);
    let span = requests.last().map_or(0.0, |r| r.arrival_time) + 1.0;
    let cfg = settings.cache_config();
    policies
        .iter()
        .map(|&policy| {
            let mut cache = build_cache(policy, cfg)?;
            for pass in 0..settings.warmup_passes {
                let shift = span * f64::from(pass);
                for r in &requests {
                    let req = Request {
                        arrival_time: r.arrival_time + shift,
                        ..*r
                    };
                    cache.handle_request(&req)?;
                }
            }
            let shift = span * f64::from(settings.warmup_passes);
            let mut counters = CacheCounters::default();
            let mut decisions = Vec::new();
            for r in &requests {
                let req = Request {
                    arrival_time: r.arrival_time + shift,
                    ..*r
                };
                for d in cache.handle_request(&req)? {
                    counters.record(&d);
                    if keep_decisions {
                        decisions.push((req.arrival_time, d));
                    }
                }
            }
            Ok(BenchRow {
                policy,
                capacity: settings.capacity,
                counters,
                decisions,
            })
        })
        .collect()
}

pub const BENCH_HEADER: [&str; 9] = [
    "policy",
    "capacity",
    "requests",
    "hits1",
    "hits2",
    "misses",
    "drops",
    "hit_ratio",
    "byte_hit_ratio",
];

pub fn write_bench_csv<W: Write>(out: W, rows: &[BenchRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCH_HEADER)?;
    for r in rows {
        let c = &r.counters;
        w.write_record([
            r.policy.to_string(),
            r.capacity.to_string(),
            c.requests.to_string(),
            c.hits1.to_string(),
            c.hits2.to_string(),
            c.misses.to_string(),
            c.drops.to_string(),
            c.hit_ratio().to_string(),
            c.byte_hit_ratio().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Decision log: `time_s,object_id,segment_index,decision`.
pub fn write_decision_log<W: Write>(out: W, decisions: &[(f64, SegmentDecision)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "object_id", "segment_index", "decision"])?;
    for (t, d) in decisions {
        w.write_record([
            t.to_string(),
            d.segment.object_id.to_string(),
            d.segment.segment_index.to_string(),
            d.decision.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
