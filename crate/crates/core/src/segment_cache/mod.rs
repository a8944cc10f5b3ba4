//! Segment-level caching for VOD content.
//!
//! [`BiLevelCache`] keeps newly seen segments in a probationary partition
//! (store 1) ranked by a recency-weighted play utility, and moves segments
//! whose utility crosses a threshold into a protected partition (store 2)
//! ranked by the probability of a next request. Each partition evicts the
//! smallest-utility segment that is neither playing nor, in store 1, inside
//! its minimum residency window.
//!
//! [`LruCache`], [`LfuCache`] and [`NoCache`] are comparison baselines with
//! the same [`SegmentCache`] surface.

mod baseline;
mod bilevel;
mod types;
pub mod utility;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baseline::{LfuCache, LruCache, NoCache};
pub use bilevel::{AuditEvent, BiLevelCache};
pub use types::{CacheDecision, Partition, Request, SegmentDecision, SegmentId, SegmentLayout, SegmentStats, SimTime};
pub use utility::{next_request_probability, recency_factor, utility1, utility2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CacheError {
    #[error("invalid cache configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("malformed request for object {object_id}: {reason}")]
    MalformedRequest { object_id: u32, reason: String },
    #[error("request at t={now} precedes cache clock t={clock}")]
    TimeWentBackwards { now: SimTime, clock: SimTime },
    #[error("segment {0} is not cached")]
    NotCached(SegmentId),
    #[error("end_play on segment {0} which is not playing")]
    NotPlaying(SegmentId),
    #[error("unknown cache policy {0:?}")]
    UnknownPolicy(String),
}

/// Parameters of the bi-level cache.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    /// Store 1 (probationary) capacity, in segments.
    pub capacity1: usize,
    /// Store 2 (protected) capacity, in segments.
    pub capacity2: usize,
    /// Utility-1 level above which a store-1 hit is promoted.
    pub threshold: f64,
    /// Recency smoothing constant, seconds.
    pub beta: f64,
    pub layout: SegmentLayout,
    /// Move stale store-2 segments back to store 1 (upper/lower limit variant).
    pub demote_enabled: bool,
    /// Utility-2 level below which a store-2 segment is demoted.
    pub t_low: f64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            capacity1: 100,
            capacity2: 300,
            threshold: 0.5,
            beta: 100.0,
            layout: SegmentLayout {
                segments_per_object: 20,
                payloads_per_segment: 100,
                payload_playback_time: 0.01,
            },
            demote_enabled: false,
            t_low: 0.05,
        }
    }
}

impl CacheConfig {
    pub fn validate(&self) -> Result<(), CacheError> {
        self.layout.validate()?;
        if self.capacity1 < 1 {
            return Err(CacheError::InvalidConfig("capacity1 must be >= 1"));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(CacheError::InvalidConfig("threshold must be > 0"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(CacheError::InvalidConfig("beta must be > 0"));
        }
        if self.demote_enabled && !(self.t_low > 0.0 && self.t_low < self.threshold) {
            return Err(CacheError::InvalidConfig("t_low must satisfy 0 < t_low < threshold"));
        }
        Ok(())
    }

    /// Splits a total capacity between the two stores; store 1 gets
    /// `ceil(store1_fraction * total)`, at least one slot.
    pub fn with_total_capacity(mut self, total: usize, store1_fraction: f64) -> Self {
        let c1 = ((total as f64) * store1_fraction).ceil() as usize;
        self.capacity1 = c1.clamp(1, total.max(1));
        self.capacity2 = total.saturating_sub(self.capacity1);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    #[serde(rename = "bilevel")]
    BiLevel,
    Lru,
    Lfu,
    None,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::BiLevel, Policy::Lru, Policy::Lfu, Policy::None];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::BiLevel => "bilevel",
            Policy::Lru => "lru",
            Policy::Lfu => "lfu",
            Policy::None => "none",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = CacheError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bilevel" | "bi-level" => Ok(Policy::BiLevel),
            "lru" => Ok(Policy::Lru),
            "lfu" => Ok(Policy::Lfu),
            "none" => Ok(Policy::None),
            other => Err(CacheError::UnknownPolicy(other.to_string())),
        }
    }
}

/// Common surface of every cache policy.
pub trait SegmentCache {
    /// Splits `req` into segments and decides each one at `req.arrival_time`.
    fn handle_request(&mut self, req: &Request) -> Result<Vec<SegmentDecision>, CacheError>;

    fn start_play(&mut self, seg: SegmentId) -> Result<(), CacheError>;

    fn end_play(&mut self, seg: SegmentId) -> Result<(), CacheError>;

    fn contains(&self, seg: SegmentId) -> bool;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn policy(&self) -> Policy;
}

/// Builds a cache of the given policy. For [`Policy::BiLevel`] the partition
/// capacities come from `cfg`; baselines use `capacity1 + capacity2` as their
/// single capacity.
pub fn build_cache(policy: Policy, cfg: CacheConfig) -> Result<Box<dyn SegmentCache + Send>, CacheError> {
    cfg.layout.validate()?;
    let total = cfg.capacity1 + cfg.capacity2;
    Ok(match policy {
        Policy::BiLevel => Box::new(BiLevelCache::new(cfg)?),
        Policy::Lru => Box::new(LruCache::new(total, cfg.layout)),
        Policy::Lfu => Box::new(LfuCache::new(total, cfg.layout)),
        Policy::None => Box::new(NoCache::new(cfg.layout)),
    })
}

/// Baseline cache of a single capacity with the shared request surface.
pub fn baseline_cache(
    policy: Policy,
    capacity: usize,
    layout: SegmentLayout,
) -> Result<Box<dyn SegmentCache + Send>, CacheError> {
    layout.validate()?;
    match policy {
        Policy::Lru => Ok(Box::new(LruCache::new(capacity, layout))),
        Policy::Lfu => Ok(Box::new(LfuCache::new(capacity, layout))),
        Policy::None => Ok(Box::new(NoCache::new(layout))),
        Policy::BiLevel => Err(CacheError::InvalidConfig("bilevel is not a baseline policy")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_parse() {
        assert_eq!("LRU".parse::<Policy>().unwrap(), Policy::Lru);
        assert_eq!("bilevel".parse::<Policy>().unwrap(), Policy::BiLevel);
        assert!(matches!("arc".parse::<Policy>(), Err(CacheError::UnknownPolicy(_))));
    }

    #[test]
    fn config_validation() {
        assert!(CacheConfig::default().validate().is_ok());
        let bad = CacheConfig {
            capacity1: 0,
            ..CacheConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = CacheConfig {
            demote_enabled: true,
            t_low: 0.6,
            ..CacheConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn total_capacity_split() {
        let c = CacheConfig::default().with_total_capacity(400, 0.25);
        assert_eq!((c.capacity1, c.capacity2), (100, 300));
        let c = CacheConfig::default().with_total_capacity(3, 0.1);
        assert_eq!((c.capacity1, c.capacity2), (1, 2));
    }
}
