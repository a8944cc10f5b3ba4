//! Deterministic discrete-event model of an EPON tree: OLT, shared feeder
//! through a passive splitter, ONUs with their user-side drop links, a
//! segment cache at the OLT and in every ONU, and channel-LLID multicast for
//! live channels.
//!
//! Time is kept in integer nanoseconds so link arithmetic is exact.

mod engine;
mod link;
mod sim;

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

pub use engine::EventQueue;
pub use link::{Link, LinkConfig};
pub use sim::{run_experiment, FlowClass, PacketFate, PacketRecord, PacketSource, SimOutput};

use crate::cllid::ProtocolError;
use crate::segment_cache::{CacheConfig, CacheError, Policy};
use crate::workload::WorkloadConfig;

pub type Nanos = u64;

pub fn secs_to_nanos(s: f64) -> Nanos {
    (s * 1e9).round() as Nanos
}

pub fn nanos_to_secs(n: Nanos) -> f64 {
    n as f64 / 1e9
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("event scheduled at {time} ns, before the clock at {now} ns")]
    PastEvent { time: Nanos, now: Nanos },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),
    #[error("trace record {index}: {reason}")]
    InvalidTrace { index: usize, reason: String },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("packet conservation broken: {0}")]
    Conservation(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub n_onus: u32,
    pub users_per_onu: u32,
    /// OLT to ONUs through the splitter; every ONU sees every frame.
    pub feeder: LinkConfig,
    /// ONU to its users; one per ONU.
    pub drop: LinkConfig,
    pub head_office_latency_ns: Nanos,
    /// Fixed latency of the upstream control path (requests, joins).
    pub upstream_latency_ns: Nanos,
    /// Extra OLT processing for a channel join that reaches it.
    pub metadata_latency_ns: Nanos,
    /// Time simulated past the end of the workload.
    pub drain_ns: Nanos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    pub packet_bytes: u32,
    pub packet_interval_ns: Nanos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheSpec {
    pub policy: Policy,
    pub config: CacheConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub topology: TopologyConfig,
    pub onu_cache: CacheSpec,
    pub olt_cache: CacheSpec,
    pub workload: WorkloadConfig,
    pub live: LiveConfig,
}

impl SimConfig {
    pub fn n_users(&self) -> u32 {
        self.topology.n_onus.saturating_mul(self.topology.users_per_onu)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let t = &self.topology;
        if t.n_onus < 1 {
            v.push("topology.n_onus: must be >= 1".into());
        }
        if t.users_per_onu < 1 {
            v.push("topology.users_per_onu: must be >= 1".into());
        }
        for (name, l) in [("feeder", &t.feeder), ("drop", &t.drop)] {
            if l.rate_bps == 0 {
                v.push(format!("topology.{name}_rate_bps: must be > 0"));
            }
            if l.queue_packets == 0 {
                v.push(format!("topology.{name}_queue_packets: must be >= 1"));
            }
        }
        for (name, c) in [("cache.onu", &self.onu_cache), ("cache.olt", &self.olt_cache)] {
            if let Err(CacheError::InvalidConfig(msg)) = c.config.validate() {
                v.push(format!("{name}.{msg}"));
            }
        }
        for (key, msg) in self.workload.violations() {
            v.push(format!("workload.{key}: {msg}"));
        }
        if self.workload.n_users != self.n_users() {
            v.push("workload.n_users: must equal n_onus * users_per_onu".into());
        }
        if self.live.packet_bytes == 0 {
            v.push("live.packet_bytes: must be >= 1".into());
        }
        if self.live.packet_interval_ns == 0 {
            v.push("live.packet_interval_s: must be > 0".into());
        }
        v
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(v))
        }
    }

    /// FNV-1a digest of the canonical JSON form.
    pub fn config_hash(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write(serde_json::to_string(self).expect("config serializes").as_bytes());
        h.finish()
    }
}
