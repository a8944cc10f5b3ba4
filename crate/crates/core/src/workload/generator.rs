use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::zipf::{aged_popularity, Zipf};
use super::{RecordKind, TraceRecord, WorkloadError};
use crate::segment_cache::SegmentLayout;

/// Knobs of the synthetic workload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub n_objects: u32,
    pub segments_per_object: u32,
    pub payloads_per_segment: u32,
    pub payload_bytes: u32,
    pub payload_playback_time: f64,
    pub zipf_s: f64,
    /// Enables popularity ageing with staggered object releases.
    pub aging: bool,
    /// Popularity half-life in seconds; `None` means `duration / 4`.
    pub aging_tau: Option<f64>,
    pub rewatch_prob: f64,
    pub skip_prob: f64,
    pub hot_segment_fraction: f64,
    /// VOD requests per second.
    pub request_rate: f64,
    pub duration: f64,
    pub seed: u64,
    /// Fraction of users that only watch VOD; the rest also zap live channels.
    pub arrival_mix: f64,
    pub n_channels: u32,
    pub channel_zipf_s: f64,
    /// Channel changes per live user per second.
    pub zap_rate: f64,
    pub n_users: u32,
}

impl Default for WorkloadConfig {
    /// The cache-benchmark workload: 1000 objects of 20 segments and about
    /// 10^5 VOD requests, no live traffic.
    fn default() -> Self {
        Self {
            n_objects: 1000,
            segments_per_object: 20,
            payloads_per_segment: 100,
            payload_bytes: 1316,
            payload_playback_time: 0.01,
            zipf_s: 0.8,
            aging: true,
            aging_tau: None,
            rewatch_prob: 0.1,
            skip_prob: 0.2,
            hot_segment_fraction: 0.2,
            request_rate: 0.1,
            duration: 1.0e6,
            seed: 1,
            arrival_mix: 1.0,
            n_channels: 32,
            channel_zipf_s: 0.8,
            zap_rate: 0.001,
            n_users: 32,
        }
    }
}

impl WorkloadConfig {
    pub fn layout(&self) -> SegmentLayout {
        SegmentLayout {
            segments_per_object: self.segments_per_object,
            payloads_per_segment: self.payloads_per_segment,
            payload_playback_time: self.payload_playback_time,
        }
    }

    pub fn effective_aging_tau(&self) -> f64 {
        self.aging_tau.unwrap_or(self.duration / 4.0)
    }

    pub fn total_segments(&self) -> u64 {
        u64::from(self.n_objects) * u64::from(self.segments_per_object)
    }

    /// Every violated constraint, as `(key, message)`.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut check = |ok: bool, key: &'static str, msg: &str| {
            if !ok {
                v.push((key, msg.to_string()));
            }
        };
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        check(self.n_objects >= 1, "n_objects", "must be >= 1");
        check(self.segments_per_object >= 1, "segments_per_object", "must be >= 1");
        check(self.payloads_per_segment >= 1, "payloads_per_segment", "must be >= 1");
        check(self.payload_bytes >= 1, "payload_bytes", "must be >= 1");
        check(
            self.payload_playback_time > 0.0 && self.payload_playback_time.is_finite(),
            "payload_playback_time",
            "must be > 0",
        );
        check(self.zipf_s >= 0.0 && self.zipf_s.is_finite(), "zipf_s", "must be >= 0");
        check(
            self.aging_tau.is_none_or(|t| t > 0.0 && t.is_finite()),
            "aging_tau",
            "must be > 0",
        );
        check(prob(self.rewatch_prob), "rewatch_prob", "must be in [0, 1]");
        check(prob(self.skip_prob), "skip_prob", "must be in [0, 1]");
        check(
            self.hot_segment_fraction > 0.0 && self.hot_segment_fraction <= 1.0,
            "hot_segment_fraction",
            "must be in (0, 1]",
        );
        check(
            self.request_rate >= 0.0 && self.request_rate.is_finite(),
            "request_rate",
            "must be >= 0",
        );
        check(
            self.duration > 0.0 && self.duration.is_finite(),
            "duration",
            "must be > 0",
        );
        check(prob(self.arrival_mix), "arrival_mix", "must be in [0, 1]");
        check(self.n_channels >= 1, "n_channels", "must be >= 1");
        check(
            self.channel_zipf_s >= 0.0 && self.channel_zipf_s.is_finite(),
            "channel_zipf_s",
            "must be >= 0",
        );
        check(
            self.zap_rate >= 0.0 && self.zap_rate.is_finite(),
            "zap_rate",
            "must be >= 0",
        );
        check(self.n_users >= 1, "n_users", "must be >= 1");
        v
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(WorkloadError::InvalidConfig(
                v.into_iter().map(|(k, m)| format!("{k}: {m}")).collect(),
            ))
        }
    }

    pub fn n_live_users(&self) -> u32 {
        ((1.0 - self.arrival_mix) * f64::from(self.n_users)).round() as u32
    }
}

pub fn channel_name(index: u32) -> String {
    format!("ch{index}")
}

const STREAM_RELEASE: u64 = 1;
const STREAM_HOT: u64 = 2;
const STREAM_VOD: u64 = 3;
const STREAM_LIVE: u64 = 4;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Object popularity over time.
///
/// Object `o` has Zipf base weight `(o + 1)^-s`. With ageing, each object is
/// released at a random instant in `[-duration, duration)` and its weight at
/// time `t` is the aged weight `t - release` after release (zero before). The
/// ageing factor shared by all released objects cancels, so sampling uses
/// weights aged relative to the latest release and a prefix of the objects
/// sorted by release time.
#[derive(Clone, Debug)]
pub struct PopularityModel {
    by_release: Vec<u32>,
    release: Vec<f64>,
    cumulative: Vec<f64>,
}

impl PopularityModel {
    pub fn new(cfg: &WorkloadConfig) -> Self {
        let n = cfg.n_objects as usize;
        let base: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-cfg.zipf_s)).collect();
        let mut releases: Vec<(f64, u32)> = if cfg.aging {
            let mut r = rng(cfg.seed, STREAM_RELEASE);
            (0..n as u32)
                .map(|o| (r.random_range(-cfg.duration..cfg.duration), o))
                .collect()
        } else {
            (0..n as u32).map(|o| (0.0, o)).collect()
        };
        releases.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let latest = releases.last().map_or(0.0, |r| r.0);
        let tau = cfg.effective_aging_tau();
        let mut acc = 0.0;
        let cumulative = releases
            .iter()
            .map(|&(rel, o)| {
                let w = base[o as usize];
                acc += if cfg.aging {
                    aged_popularity(w, latest - rel, tau)
                } else {
                    w
                };
                acc
            })
            .collect();
        Self {
            by_release: releases.iter().map(|r| r.1).collect(),
            release: releases.iter().map(|r| r.0).collect(),
            cumulative,
        }
    }

    /// Draws an object for a request at time `t` from `u` in `[0, 1)`.
    pub fn sample(&self, t: f64, u: f64) -> u32 {
        let released = self.release.partition_point(|&r| r <= t).max(1);
        let total = self.cumulative[released - 1];
        let idx = self.cumulative[..released].partition_point(|&c| c <= u * total);
        self.by_release[idx.min(released - 1)]
    }
}

/// Produces a time-ordered trace, fully determined by `cfg` (including its seed).
pub fn generate_trace(cfg: &WorkloadConfig) -> Result<Vec<TraceRecord>, WorkloadError> {
    cfg.validate()?;
    let mut records = generate_vod(cfg);
    records.extend(generate_live(cfg));
    // Stable: VOD records precede live ones at equal times.
    records.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    Ok(records)
}

fn generate_vod(cfg: &WorkloadConfig) -> Vec<TraceRecord> {
    if cfg.request_rate <= 0.0 {
        return Vec::new();
    }
    let popularity = PopularityModel::new(cfg);
    let segs = cfg.segments_per_object;
    let pps = u64::from(cfg.payloads_per_segment);
    let total_payloads = u64::from(segs) * pps;
    let n_hot = ((cfg.hot_segment_fraction * f64::from(segs)).ceil() as usize).clamp(1, segs as usize);

    // Per-object hot segments: the first n_hot entries of a seeded permutation.
    let mut hot_rng = rng(cfg.seed, STREAM_HOT);
    let hot: Vec<Vec<u32>> = (0..cfg.n_objects)
        .map(|_| {
            let mut p: Vec<u32> = (0..segs).collect();
            p.shuffle(&mut hot_rng);
            p.truncate(n_hot);
            p
        })
        .collect();

    let mut r = rng(cfg.seed, STREAM_VOD);
    let gaps = Exp::new(cfg.request_rate).expect("positive rate");
    let mut last_object: Vec<Option<u32>> = vec![None; cfg.n_users as usize];
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += gaps.sample(&mut r);
        if t >= cfg.duration {
            break;
        }
        let user = r.random_range(0..cfg.n_users);
        let object = match last_object[user as usize] {
            Some(prev) if r.random::<f64>() < cfg.rewatch_prob => prev,
            _ => popularity.sample(t, r.random()),
        };
        last_object[user as usize] = Some(object);
        let start = if r.random::<f64>() < cfg.skip_prob {
            let seg = hot[object as usize][r.random_range(0..n_hot)];
            u64::from(seg) * pps
        } else {
            0
        };
        let remaining = total_payloads - start;
        let n = r.random_range(1..=remaining);
        out.push(TraceRecord::vod(t, user, object, start, n as u32));
    }
    out
}

fn generate_live(cfg: &WorkloadConfig) -> Vec<TraceRecord> {
    let n_live = cfg.n_live_users();
    if n_live == 0 || cfg.zap_rate <= 0.0 {
        return Vec::new();
    }
    let channels = Zipf::new(cfg.n_channels as usize, cfg.channel_zipf_s);
    let gaps = Exp::new(cfg.zap_rate).expect("positive rate");
    let mut r = rng(cfg.seed, STREAM_LIVE);
    let mut out = Vec::new();
    // Live viewers are the highest-numbered users.
    for user in cfg.n_users - n_live..cfg.n_users {
        let mut current: Option<u32> = None;
        let mut t = 0.0;
        loop {
            t += gaps.sample(&mut r);
            if t >= cfg.duration {
                break;
            }
            let mut next = channels.sample(r.random()) as u32 - 1;
            if cfg.n_channels > 1 && Some(next) == current {
                next = (next + 1) % cfg.n_channels;
            }
            if let Some(c) = current {
                out.push(TraceRecord::live(t, user, RecordKind::Leave, channel_name(c)));
            }
            out.push(TraceRecord::live(t, user, RecordKind::Join, channel_name(next)));
            current = Some(next);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> WorkloadConfig {
        WorkloadConfig {
            n_objects: 50,
            duration: 1000.0,
            request_rate: 1.0,
            ..WorkloadConfig::default()
        }
    }

    #[test]
    fn sequential_viewing_starts_at_zero() {
        let cfg = WorkloadConfig {
            skip_prob: 0.0,
            rewatch_prob: 0.0,
            ..small()
        };
        let trace = generate_trace(&cfg).unwrap();
        assert!(!trace.is_empty());
        assert!(trace.iter().all(|r| r.start_payload == Some(0)));
    }

    #[test]
    fn records_are_ordered_and_in_range() {
        let cfg = WorkloadConfig {
            arrival_mix: 0.5,
            zap_rate: 0.05,
            ..small()
        };
        let trace = generate_trace(&cfg).unwrap();
        let layout = cfg.layout();
        assert!(trace.windows(2).all(|w| w[0].time_s <= w[1].time_s));
        for r in &trace {
            assert!(r.user_id < cfg.n_users);
            if r.kind == RecordKind::Vod {
                let end = r.start_payload.unwrap() + u64::from(r.n_payloads.unwrap());
                assert!(end <= layout.payloads_per_object());
                assert!(r.object_id.unwrap() < cfg.n_objects);
            }
        }
        assert!(trace.iter().any(|r| r.kind == RecordKind::Join));
    }

    #[test]
    fn skipped_viewing_hits_hot_segments() {
        let cfg = WorkloadConfig {
            skip_prob: 1.0,
            rewatch_prob: 0.0,
            hot_segment_fraction: 0.1,
            ..small()
        };
        let trace = generate_trace(&cfg).unwrap();
        let pps = u64::from(cfg.payloads_per_segment);
        let mut starts: std::collections::HashMap<u32, std::collections::HashSet<u64>> = Default::default();
        for r in &trace {
            assert_eq!(r.start_payload.unwrap() % pps, 0);
            starts
                .entry(r.object_id.unwrap())
                .or_default()
                .insert(r.start_payload.unwrap() / pps);
        }
        // ceil(0.1 * 20) = 2 hot segments per object
        assert!(starts.values().all(|s| s.len() <= 2));
    }

    #[test]
    fn live_users_alternate_leave_join() {
        let cfg = WorkloadConfig {
            request_rate: 0.0,
            arrival_mix: 0.0,
            zap_rate: 0.1,
            n_users: 3,
            ..small()
        };
        let trace = generate_trace(&cfg).unwrap();
        for user in 0..3 {
            let mine: Vec<_> = trace.iter().filter(|r| r.user_id == user).collect();
            assert_eq!(mine[0].kind, RecordKind::Join);
            let mut joined: Option<&str> = None;
            for r in mine {
                match r.kind {
                    RecordKind::Join => {
                        assert!(joined.is_none());
                        joined = r.channel_name.as_deref();
                    }
                    RecordKind::Leave => {
                        assert_eq!(joined, r.channel_name.as_deref());
                        joined = None;
                    }
                    RecordKind::Vod => unreachable!(),
                }
            }
        }
    }

    #[test]
    fn invalid_config_lists_every_key() {
        let cfg = WorkloadConfig {
            n_objects: 0,
            skip_prob: 2.0,
            ..small()
        };
        match cfg.validate() {
            Err(WorkloadError::InvalidConfig(v)) => {
                assert_eq!(v.len(), 2);
                assert!(v[0].starts_with("n_objects"));
                assert!(v[1].starts_with("skip_prob"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ageless_model_uses_base_weights() {
        let cfg = WorkloadConfig {
            aging: false,
            n_objects: 3,
            zipf_s: 1.0,
            ..small()
        };
        let m = PopularityModel::new(&cfg);
        assert_eq!(m.sample(0.0, 0.0), 0);
        assert_eq!(m.sample(0.0, 0.55), 1);
        assert_eq!(m.sample(0.0, 0.9), 2);
    }
}
