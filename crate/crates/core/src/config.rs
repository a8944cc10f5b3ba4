//! Run configuration: a TOML file with sections `topology`, `cache.onu`,
//! `cache.olt`, `workload`, `live` and `output`. Every key is optional and
//! falls back to the default listed in [`KEYS`].

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use toml::{Table, Value};

use crate::netsim::{secs_to_nanos, CacheSpec, LinkConfig, LiveConfig, SimConfig, TopologyConfig};
use crate::segment_cache::{CacheConfig, Policy};
use crate::workload::WorkloadConfig;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KeyDefault {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(&'static str),
    /// Optional float; the text says what an absent key means.
    Unset(&'static str),
}

impl fmt::Display for KeyDefault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyDefault::Int(v) => write!(f, "{v}"),
            KeyDefault::Float(v) => write!(f, "{v:?}"),
            KeyDefault::Bool(v) => write!(f, "{v}"),
            KeyDefault::Str(v) => write!(f, "{v:?}"),
            KeyDefault::Unset(v) => write!(f, "unset ({v})"),
        }
    }
}

pub struct KeySpec {
    pub path: &'static str,
    pub default: KeyDefault,
    pub doc: &'static str,
}

const fn key(path: &'static str, default: KeyDefault, doc: &'static str) -> KeySpec {
    KeySpec { path, default, doc }
}

use KeyDefault::{Bool, Float, Int, Str, Unset};

pub const SECTIONS: [&str; 6] = ["topology", "cache.onu", "cache.olt", "workload", "live", "output"];

pub const KEYS: &[KeySpec] = &[
    key("topology.n_onus", Int(4), "ONUs behind the splitter"),
    key("topology.users_per_onu", Int(4), "users per ONU"),
    key("topology.feeder_rate_bps", Int(1_000_000_000), "feeder line rate"),
    key("topology.feeder_propagation_s", Float(1e-4), "feeder propagation delay"),
    key("topology.feeder_queue_packets", Int(256), "feeder queue limit"),
    key("topology.drop_rate_bps", Int(100_000_000), "ONU-to-user link rate"),
    key(
        "topology.drop_propagation_s",
        Float(1e-6),
        "ONU-to-user propagation delay",
    ),
    key("topology.drop_queue_packets", Int(64), "ONU-to-user queue limit"),
    key(
        "topology.head_office_latency_s",
        Float(0.02),
        "extra latency of a fetch from the head office",
    ),
    key(
        "topology.upstream_latency_s",
        Float(0.001),
        "request and control latency towards the OLT",
    ),
    key(
        "topology.metadata_latency_s",
        Float(0.002),
        "OLT processing of a channel join",
    ),
    key(
        "topology.drain_s",
        Float(30.0),
        "simulated time after the workload ends",
    ),
    key("cache.onu.policy", Str("bilevel"), "bilevel, lru, lfu or none"),
    key(
        "cache.onu.capacity1",
        Int(10),
        "store 1 segments (whole cache for lru/lfu: capacity1 + capacity2)",
    ),
    key("cache.onu.capacity2", Int(30), "store 2 segments"),
    key("cache.onu.threshold", Float(0.5), "promotion threshold"),
    key("cache.onu.beta", Float(100.0), "recency constant, seconds"),
    key("cache.onu.demote", Bool(false), "demote stale store-2 segments"),
    key("cache.onu.t_low", Float(0.05), "demotion level"),
    key("cache.olt.policy", Str("bilevel"), "bilevel, lru, lfu or none"),
    key("cache.olt.capacity1", Int(40), "store 1 segments"),
    key("cache.olt.capacity2", Int(120), "store 2 segments"),
    key("cache.olt.threshold", Float(0.5), "promotion threshold"),
    key("cache.olt.beta", Float(100.0), "recency constant, seconds"),
    key("cache.olt.demote", Bool(false), "demote stale store-2 segments"),
    key("cache.olt.t_low", Float(0.05), "demotion level"),
    key("workload.n_objects", Int(100), "VOD catalogue size"),
    key("workload.segments_per_object", Int(10), "segments per object"),
    key("workload.payloads_per_segment", Int(100), "payloads per segment"),
    key("workload.payload_bytes", Int(1316), "bytes per payload packet"),
    key(
        "workload.payload_playback_time",
        Float(0.01),
        "seconds of video per payload",
    ),
    key("workload.zipf_s", Float(0.8), "object popularity exponent"),
    key(
        "workload.aging",
        Bool(true),
        "popularity ageing with staggered releases",
    ),
    key(
        "workload.aging_tau",
        Unset("duration / 4"),
        "popularity half-life, seconds",
    ),
    key(
        "workload.rewatch_prob",
        Float(0.1),
        "chance a user repeats its previous object",
    ),
    key(
        "workload.skip_prob",
        Float(0.2),
        "chance a request starts at a hot segment",
    ),
    key(
        "workload.hot_segment_fraction",
        Float(0.2),
        "share of segments that are hot",
    ),
    key("workload.request_rate", Float(2.0), "VOD requests per second"),
    key("workload.duration", Float(60.0), "workload length, seconds"),
    key("workload.seed", Int(1), "random seed"),
    key("workload.arrival_mix", Float(0.5), "share of users that only watch VOD"),
    key("workload.n_channels", Int(8), "live channels"),
    key("workload.channel_zipf_s", Float(0.8), "channel popularity exponent"),
    key(
        "workload.zap_rate",
        Float(0.05),
        "channel changes per live user per second",
    ),
    key("live.packet_bytes", Int(1316), "bytes per live packet"),
    key("live.packet_interval_s", Float(0.01), "live packet spacing per channel"),
    key("output.packets_csv", Bool(false), "also write packets.csv"),
    key("output.json", Bool(true), "also write metrics.json"),
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputConfig {
    pub packets_csv: bool,
    pub json: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub output: OutputConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_table(&Table::new()).expect("defaults are valid")
    }
}

/// Every key with its default and a short description, one per line.
pub fn describe_keys() -> String {
    let mut s = String::new();
    let mut section = "";
    for k in KEYS {
        let (sec, name) = k.path.rsplit_once('.').expect("dotted");
        if sec != section {
            let _ = writeln!(s, "[{sec}]");
            section = sec;
        }
        let _ = writeln!(s, "  {name} = {}  # {}", k.default, k.doc);
    }
    s
}

fn flatten(prefix: &str, table: &Table, out: &mut BTreeMap<String, Value>, errors: &mut Vec<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        let is_section =
            SECTIONS.contains(&path.as_str()) || SECTIONS.iter().any(|s| s.starts_with(&format!("{path}.")));
        match v {
            Value::Table(t) if is_section => flatten(&path, t, out, errors),
            _ if is_section => errors.push(format!("{path}: expected a table")),
            _ if KEYS.iter().any(|s| s.path == path) => {
                out.insert(path, v.clone());
            }
            _ => errors.push(format!("{path}: unknown key")),
        }
    }
}

struct Values {
    set: BTreeMap<String, Value>,
    errors: Vec<String>,
}

impl Values {
    fn spec(path: &str) -> &'static KeySpec {
        KEYS.iter().find(|k| k.path == path).expect("known key")
    }

    fn float(&mut self, path: &str) -> f64 {
        let fallback = match Self::spec(path).default {
            Float(v) => v,
            Int(v) => v as f64,
            _ => f64::NAN,
        };
        match self.set.get(path) {
            None => fallback,
            Some(Value::Float(v)) => *v,
            Some(Value::Integer(v)) => *v as f64,
            Some(other) => {
                self.errors
                    .push(format!("{path}: expected a number, got {}", other.type_str()));
                fallback
            }
        }
    }

    fn opt_float(&mut self, path: &str) -> Option<f64> {
        match self.set.get(path) {
            None => None,
            Some(Value::Float(v)) => Some(*v),
            Some(Value::Integer(v)) => Some(*v as f64),
            Some(other) => {
                self.errors
                    .push(format!("{path}: expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn int(&mut self, path: &str) -> i64 {
        let Int(fallback) = Self::spec(path).default else {
            unreachable!("{path} is not an integer key")
        };
        match self.set.get(path) {
            None => fallback,
            Some(Value::Integer(v)) => *v,
            Some(other) => {
                self.errors
                    .push(format!("{path}: expected an integer, got {}", other.type_str()));
                fallback
            }
        }
    }

    fn uint<T: TryFrom<i64>>(&mut self, path: &str) -> T {
        let v = self.int(path);
        T::try_from(v).unwrap_or_else(|_| {
            self.errors.push(format!("{path}: {v} is out of range"));
            let Int(d) = Self::spec(path).default else {
                unreachable!()
            };
            T::try_from(d).ok().expect("default in range")
        })
    }

    fn boolean(&mut self, path: &str) -> bool {
        let Bool(fallback) = Self::spec(path).default else {
            unreachable!("{path} is not a boolean key")
        };
        match self.set.get(path) {
            None => fallback,
            Some(Value::Boolean(v)) => *v,
            Some(other) => {
                self.errors
                    .push(format!("{path}: expected a boolean, got {}", other.type_str()));
                fallback
            }
        }
    }

    fn string(&mut self, path: &str) -> String {
        let Str(fallback) = Self::spec(path).default else {
            unreachable!("{path} is not a string key")
        };
        match self.set.get(path) {
            None => fallback.to_string(),
            Some(Value::String(v)) => v.clone(),
            Some(other) => {
                self.errors
                    .push(format!("{path}: expected a string, got {}", other.type_str()));
                fallback.to_string()
            }
        }
    }

    fn seconds(&mut self, path: &str) -> u64 {
        let s = self.float(path);
        if !(s >= 0.0 && s.is_finite()) {
            self.errors.push(format!("{path}: must be finite and >= 0"));
            return 0;
        }
        secs_to_nanos(s)
    }

    fn cache(&mut self, section: &str, layout: crate::segment_cache::SegmentLayout) -> CacheSpec {
        let p = |k: &str| format!("{section}.{k}");
        let policy_name = self.string(&p("policy"));
        let policy = policy_name.parse().unwrap_or_else(|_| {
            self.errors.push(format!(
                "{}: unknown policy {policy_name:?} (bilevel, lru, lfu, none)",
                p("policy")
            ));
            Policy::BiLevel
        });
        CacheSpec {
            policy,
            config: CacheConfig {
                capacity1: self.uint(&p("capacity1")),
                capacity2: self.uint(&p("capacity2")),
                threshold: self.float(&p("threshold")),
                beta: self.float(&p("beta")),
                layout,
                demote_enabled: self.boolean(&p("demote")),
                t_low: self.float(&p("t_low")),
            },
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(vec![e.to_string().trim().to_string()]))?;
        Self::from_table(&table)
    }

    pub fn from_table(table: &Table) -> Result<Self, ConfigError> {
        let mut errors = Vec::new();
        let mut set = BTreeMap::new();
        flatten("", table, &mut set, &mut errors);
        let mut v = Values { set, errors };

        let n_onus: u32 = v.uint("topology.n_onus");
        let users_per_onu: u32 = v.uint("topology.users_per_onu");
        let topology = TopologyConfig {
            n_onus,
            users_per_onu,
            feeder: LinkConfig {
                rate_bps: v.uint("topology.feeder_rate_bps"),
                propagation_ns: v.seconds("topology.feeder_propagation_s"),
                queue_packets: v.uint("topology.feeder_queue_packets"),
            },
            drop: LinkConfig {
                rate_bps: v.uint("topology.drop_rate_bps"),
                propagation_ns: v.seconds("topology.drop_propagation_s"),
                queue_packets: v.uint("topology.drop_queue_packets"),
            },
            head_office_latency_ns: v.seconds("topology.head_office_latency_s"),
            upstream_latency_ns: v.seconds("topology.upstream_latency_s"),
            metadata_latency_ns: v.seconds("topology.metadata_latency_s"),
            drain_ns: v.seconds("topology.drain_s"),
        };
        let workload = WorkloadConfig {
            n_objects: v.uint("workload.n_objects"),
            segments_per_object: v.uint("workload.segments_per_object"),
            payloads_per_segment: v.uint("workload.payloads_per_segment"),
            payload_bytes: v.uint("workload.payload_bytes"),
            payload_playback_time: v.float("workload.payload_playback_time"),
            zipf_s: v.float("workload.zipf_s"),
            aging: v.boolean("workload.aging"),
            aging_tau: v.opt_float("workload.aging_tau"),
            rewatch_prob: v.float("workload.rewatch_prob"),
            skip_prob: v.float("workload.skip_prob"),
            hot_segment_fraction: v.float("workload.hot_segment_fraction"),
            request_rate: v.float("workload.request_rate"),
            duration: v.float("workload.duration"),
            seed: v.uint("workload.seed"),
            arrival_mix: v.float("workload.arrival_mix"),
            n_channels: v.uint("workload.n_channels"),
            channel_zipf_s: v.float("workload.channel_zipf_s"),
            zap_rate: v.float("workload.zap_rate"),
            n_users: n_onus.saturating_mul(users_per_onu),
        };
        let layout = workload.layout();
        let onu_cache = v.cache("cache.onu", layout);
        let olt_cache = v.cache("cache.olt", layout);
        let live = LiveConfig {
            packet_bytes: v.uint("live.packet_bytes"),
            packet_interval_ns: v.seconds("live.packet_interval_s"),
        };
        let output = OutputConfig {
            packets_csv: v.boolean("output.packets_csv"),
            json: v.boolean("output.json"),
        };
        let sim = SimConfig {
            topology,
            onu_cache,
            olt_cache,
            workload,
            live,
        };
        let mut errors = v.errors;
        // A key that failed to parse holds its default; don't judge it twice.
        let bad: Vec<String> = errors
            .iter()
            .filter_map(|e| e.split(':').next().map(String::from))
            .collect();
        errors.extend(
            sim.violations()
                .into_iter()
                .filter(|m| !bad.iter().any(|k| m.starts_with(&format!("{k}:")))),
        );
        if errors.is_empty() {
            Ok(Self { sim, output })
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.workload.seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.sim.topology.n_onus, 4);
        assert_eq!(c.sim.workload.n_users, 16);
        assert_eq!(c.sim.topology.feeder.propagation_ns, 100_000);
        assert_eq!(c.sim.onu_cache.config.capacity2, 30);
        assert_eq!(c.sim.workload.aging_tau, None);
    }

    #[test]
    fn values_override_defaults() {
        let c = RunConfig::parse(
            "[topology]\nn_onus = 2\nfeeder_propagation_s = 5e-6\n[cache.olt]\npolicy = \"lru\"\n[workload]\naging_tau = 10\nrequest_rate = 1\n",
        )
        .unwrap();
        assert_eq!(c.sim.topology.n_onus, 2);
        assert_eq!(c.sim.workload.n_users, 8);
        assert_eq!(c.sim.topology.feeder.propagation_ns, 5_000);
        assert_eq!(c.sim.olt_cache.policy, Policy::Lru);
        assert_eq!(c.sim.workload.aging_tau, Some(10.0));
        assert_eq!(c.sim.workload.request_rate, 1.0);
    }

    #[test]
    fn every_error_reported_with_path() {
        let err = RunConfig::parse(
            "bogus = 1\n[topology]\nn_onus = \"x\"\ncolour = 3\n[cache.onu]\npolicy = \"fifo\"\n[cache.nope]\na = 1\n[workload]\nzipf_s = true\n",
        )
        .unwrap_err();
        let ConfigError::Invalid(errs) = err else { panic!() };
        let joined = errs.join("\n");
        for path in [
            "bogus",
            "topology.n_onus",
            "topology.colour",
            "cache.onu.policy",
            "cache.nope",
            "workload.zipf_s",
        ] {
            assert!(joined.contains(path), "{path} missing from\n{joined}");
        }
    }

    #[test]
    fn semantic_errors_use_key_paths() {
        let err =
            RunConfig::parse("[workload]\nskip_prob = 2.0\nn_objects = 0\n[live]\npacket_bytes = 0\n").unwrap_err();
        let ConfigError::Invalid(errs) = err else { panic!() };
        assert!(errs.iter().any(|e| e.starts_with("workload.skip_prob")));
        assert!(errs.iter().any(|e| e.starts_with("workload.n_objects")));
        assert!(errs.iter().any(|e| e.starts_with("live.packet_bytes")));
    }

    #[test]
    fn negative_counts_rejected() {
        let err = RunConfig::parse("[topology]\nusers_per_onu = -1\n").unwrap_err();
        assert!(err.to_string().contains("topology.users_per_onu"));
    }

    #[test]
    fn syntax_error_reported() {
        assert!(matches!(RunConfig::parse("[topology\n"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn help_lists_every_key() {
        let text = describe_keys();
        for k in KEYS {
            let name = k.path.rsplit_once('.').unwrap().1;
            assert!(text.contains(&format!("{name} = {}", k.default)), "{}", k.path);
        }
        assert!(text.contains("[cache.olt]"));
    }

    #[test]
    fn seed_override_changes_hash() {
        let a = RunConfig::default();
        let b = RunConfig::default().with_seed(7);
        assert_eq!(b.sim.workload.seed, 7);
        assert_ne!(a.sim.config_hash(), b.sim.config_hash());
    }
}
