//! QoS and cache accounting: hit ratios, one-way delay percentiles, jitter as
//! consecutive-packet delay variation, and loss.

mod report;

pub use report::{MetricValue, MetricsReport, ReportError};

use serde::{Deserialize, Serialize};

use crate::segment_cache::{CacheDecision, SegmentDecision};

/// Per-cache request accounting. Every per-segment sub-request lands in
/// exactly one of hits1, hits2, misses or drops.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheCounters {
    pub requests: u64,
    pub hits1: u64,
    pub hits2: u64,
    pub misses: u64,
    pub drops: u64,
    pub promotions: u64,
    pub requested_payloads: u64,
    pub hit_payloads: u64,
}

impl CacheCounters {
    pub fn record(&mut self, d: &SegmentDecision) {
        self.requests += 1;
        self.requested_payloads += u64::from(d.payloads);
        match d.decision {
            CacheDecision::Hit2 => self.hits2 += 1,
            CacheDecision::Hit1 => self.hits1 += 1,
            CacheDecision::Hit1Promoted => {
                self.hits1 += 1;
                self.promotions += 1;
            }
            CacheDecision::MissInserted => self.misses += 1,
            CacheDecision::MissDropped => self.drops += 1,
        }
        if d.decision.is_hit() {
            self.hit_payloads += u64::from(d.payloads);
        }
    }

    pub fn merge(&mut self, other: &CacheCounters) {
        self.requests += other.requests;
        self.hits1 += other.hits1;
        self.hits2 += other.hits2;
        self.misses += other.misses;
        self.drops += other.drops;
        self.promotions += other.promotions;
        self.requested_payloads += other.requested_payloads;
        self.hit_payloads += other.hit_payloads;
    }

    pub fn hit_ratio(&self) -> f64 {
        hit_ratio(self.hits1 + self.hits2, self.requests)
    }

    /// Payloads are fixed-size, so the payload ratio is the byte ratio.
    pub fn byte_hit_ratio(&self) -> f64 {
        byte_hit_ratio(self.hit_payloads, self.requested_payloads)
    }
}

/// `hits / requests`, or 0 when there were no requests.
pub fn hit_ratio(hits: u64, requests: u64) -> f64 {
    if requests == 0 {
        0.0
    } else {
        hits as f64 / requests as f64
    }
}

pub fn byte_hit_ratio(hit_bytes: u64, requested_bytes: u64) -> f64 {
    hit_ratio(hit_bytes, requested_bytes)
}

/// Delay differences between consecutive packets of one flow.
///
/// `delays` is in sending order with `None` for lost packets; pairs that
/// touch a lost packet are skipped.
pub fn ipdv_series(delays: &[Option<f64>]) -> Vec<f64> {
    delays
        .windows(2)
        .filter_map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        })
        .collect()
}

/// Nearest-rank percentile of an ascending slice: element `ceil(p/100 * n)`.
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    debug_assert!((0.0..=100.0).contains(&p));
    let n = sorted.len();
    let rank = (p * n as f64 / 100.0).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub count: u64,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
}

pub fn delay_stats(delays: &[f64]) -> DelayStats {
    if delays.is_empty() {
        return DelayStats::default();
    }
    let mut sorted = delays.to_vec();
    sorted.sort_by(f64::total_cmp);
    DelayStats {
        count: sorted.len() as u64,
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        p50: percentile_nearest_rank(&sorted, 50.0),
        p95: percentile_nearest_rank(&sorted, 95.0),
        p99: percentile_nearest_rank(&sorted, 99.0),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JitterStats {
    pub pairs: u64,
    pub mean_abs: f64,
    pub stddev: f64,
    pub p99_abs: f64,
}

pub fn jitter_stats(ipdv: &[f64]) -> JitterStats {
    if ipdv.is_empty() {
        return JitterStats::default();
    }
    let n = ipdv.len() as f64;
    let mut abs: Vec<f64> = ipdv.iter().map(|d| d.abs()).collect();
    let mean_abs = abs.iter().sum::<f64>() / n;
    let mean = ipdv.iter().sum::<f64>() / n;
    let var = ipdv.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    abs.sort_by(f64::total_cmp);
    JitterStats {
        pairs: ipdv.len() as u64,
        mean_abs,
        stddev: var.sqrt(),
        p99_abs: percentile_nearest_rank(&abs, 99.0),
    }
}

pub fn loss_ratio(lost: u64, created: u64) -> f64 {
    hit_ratio(lost, created)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment_cache::SegmentId;

    #[test]
    fn ratios() {
        assert_eq!(hit_ratio(0, 0), 0.0);
        assert_eq!(hit_ratio(3, 4), 0.75);
        assert_eq!(hit_ratio(4, 4), 1.0);
        assert_eq!(loss_ratio(0, 10), 0.0);
        assert_eq!(loss_ratio(1, 4), 0.25);
    }

    #[test]
    fn ipdv_hand_example() {
        let s = ipdv_series(&[Some(10.0), Some(12.0), Some(11.0)]);
        assert_eq!(s, vec![2.0, -1.0]);
        assert_eq!(jitter_stats(&s).mean_abs, 1.5);
    }

    #[test]
    fn ipdv_edge_cases() {
        assert!(ipdv_series(&[Some(3.0)]).is_empty());
        assert!(ipdv_series(&[]).is_empty());
        assert!(ipdv_series(&[Some(5.0); 6]).iter().all(|&d| d == 0.0));
        // pairs spanning the loss are skipped
        assert_eq!(ipdv_series(&[Some(1.0), None, Some(4.0), Some(6.0)]), vec![2.0]);
    }

    #[test]
    fn nearest_rank() {
        let d = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile_nearest_rank(&d, 50.0), 2.0);
        assert_eq!(percentile_nearest_rank(&d, 75.0), 3.0);
        assert_eq!(percentile_nearest_rank(&d, 99.0), 4.0);
        assert_eq!(percentile_nearest_rank(&d, 0.0), 1.0);
        let s = delay_stats(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!((s.mean, s.p50), (2.5, 2.0));
    }

    #[test]
    fn counters_partition_requests() {
        let mut c = CacheCounters::default();
        let seg = SegmentId::new(0, 0);
        for (decision, payloads) in [
            (CacheDecision::MissInserted, 10),
            (CacheDecision::Hit1Promoted, 5),
            (CacheDecision::Hit2, 5),
            (CacheDecision::MissDropped, 20),
        ] {
            c.record(&SegmentDecision {
                segment: seg,
                payloads,
                decision,
            });
        }
        assert_eq!(c.requests, c.hits1 + c.hits2 + c.misses + c.drops);
        assert_eq!(c.hit_ratio(), 0.5);
        assert_eq!(c.byte_hit_ratio(), 0.25);
        assert_eq!(c.promotions, 1);
    }
}
