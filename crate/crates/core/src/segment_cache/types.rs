use std::fmt;

use serde::{Deserialize, Serialize};

use super::CacheError;

/// Simulation time in seconds.
pub type SimTime = f64;

/// A fixed-size content segment of a video object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SegmentId {
    pub object_id: u32,
    pub segment_index: u32,
}

impl SegmentId {
    pub const fn new(object_id: u32, segment_index: u32) -> Self {
        Self {
            object_id,
            segment_index,
        }
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.object_id, self.segment_index)
    }
}

/// How objects are cut into segments and payloads. Every object has the same
/// number of equally sized segments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentLayout {
    pub segments_per_object: u32,
    pub payloads_per_segment: u32,
    /// Seconds of playback carried by one payload.
    pub payload_playback_time: f64,
}

impl SegmentLayout {
    pub fn payloads_per_object(&self) -> u64 {
        u64::from(self.segments_per_object) * u64::from(self.payloads_per_segment)
    }

    pub fn segment_playback_time(&self) -> f64 {
        f64::from(self.payloads_per_segment) * self.payload_playback_time
    }

    pub fn validate(&self) -> Result<(), CacheError> {
        if self.segments_per_object == 0 {
            return Err(CacheError::InvalidConfig("segments_per_object must be >= 1"));
        }
        if self.payloads_per_segment == 0 {
            return Err(CacheError::InvalidConfig("payloads_per_segment must be >= 1"));
        }
        if !(self.payload_playback_time >= 0.0 && self.payload_playback_time.is_finite()) {
            return Err(CacheError::InvalidConfig(
                "payload_playback_time must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// Splits a request into the segments it touches, with the number of the
    /// request's payloads that fall inside each one.
    pub fn split(&self, req: &Request) -> Result<Vec<(SegmentId, u32)>, CacheError> {
        req.validate(self)?;
        let pps = u64::from(self.payloads_per_segment);
        let start = req.start_payload;
        let end = start + u64::from(req.n_payloads);
        let first = start / pps;
        let last = (end - 1) / pps;
        Ok((first..=last)
            .map(|seg| {
                let lo = start.max(seg * pps);
                let hi = end.min((seg + 1) * pps);
                (SegmentId::new(req.object_id, seg as u32), (hi - lo) as u32)
            })
            .collect())
    }
}

/// A playback request: an object, a starting payload and a number of payloads.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub object_id: u32,
    pub start_payload: u64,
    pub n_payloads: u32,
    pub arrival_time: SimTime,
}

impl Request {
    pub fn new(object_id: u32, start_payload: u64, n_payloads: u32, arrival_time: SimTime) -> Self {
        Self {
            object_id,
            start_payload,
            n_payloads,
            arrival_time,
        }
    }

    pub fn validate(&self, layout: &SegmentLayout) -> Result<(), CacheError> {
        if self.n_payloads == 0 {
            return Err(CacheError::MalformedRequest {
                object_id: self.object_id,
                reason: "n_payloads must be >= 1".into(),
            });
        }
        let end = self.start_payload + u64::from(self.n_payloads);
        if end > layout.payloads_per_object() {
            return Err(CacheError::MalformedRequest {
                object_id: self.object_id,
                reason: format!(
                    "payload range [{}, {}) exceeds object length {}",
                    self.start_payload,
                    end,
                    layout.payloads_per_object()
                ),
            });
        }
        if !self.arrival_time.is_finite() {
            return Err(CacheError::MalformedRequest {
                object_id: self.object_id,
                reason: "arrival_time must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn playback_time(&self, layout: &SegmentLayout) -> f64 {
        f64::from(self.n_payloads) * layout.payload_playback_time
    }
}

/// Per-segment bookkeeping that feeds the utility functions.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentStats {
    pub n_requests: u64,
    /// Cumulative payloads of this segment played across all requests.
    pub n_payloads_played: u64,
    pub t_last_accessed: SimTime,
    pub t_inserted: SimTime,
    /// Running mean of request inter-arrival gaps; `None` until a positive
    /// mean exists.
    pub mean_interarrival: Option<f64>,
    gap_sum: f64,
    pub playing_count: u32,
    pub min_residency_until: SimTime,
}

impl SegmentStats {
    /// Stats for a segment seen for the first time at `now`.
    pub fn first_access(payloads: u32, now: SimTime, min_residency_until: SimTime) -> Self {
        Self {
            n_requests: 1,
            n_payloads_played: u64::from(payloads),
            t_last_accessed: now,
            t_inserted: now,
            mean_interarrival: None,
            gap_sum: 0.0,
            playing_count: 0,
            min_residency_until,
        }
    }

    /// Folds one more access into the counters.
    pub fn record_access(&mut self, payloads: u32, now: SimTime) {
        let gap = now - self.t_last_accessed;
        debug_assert!(gap >= 0.0, "access in the past");
        self.n_requests += 1;
        self.n_payloads_played += u64::from(payloads);
        self.gap_sum += gap;
        let mean = self.gap_sum / (self.n_requests - 1) as f64;
        self.mean_interarrival = (mean > 0.0).then_some(mean);
        self.t_last_accessed = now;
    }

    pub fn is_playing(&self) -> bool {
        self.playing_count > 0
    }
}

/// Outcome of one per-segment sub-request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CacheDecision {
    Hit2,
    Hit1,
    Hit1Promoted,
    MissInserted,
    MissDropped,
}

impl CacheDecision {
    pub fn is_hit(self) -> bool {
        matches!(self, Self::Hit1 | Self::Hit1Promoted | Self::Hit2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hit2 => "hit2",
            Self::Hit1 => "hit1",
            Self::Hit1Promoted => "hit1_promoted",
            Self::MissInserted => "miss_inserted",
            Self::MissDropped => "miss_dropped",
        }
    }
}

impl fmt::Display for CacheDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SegmentDecision {
    pub segment: SegmentId,
    /// Payloads of the request that fell inside this segment.
    pub payloads: u32,
    pub decision: CacheDecision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Partition {
    P1,
    P2,
}
