//! Utility scores used to rank segments in the two cache partitions.
//!
//! Both scores are evaluated lazily, at comparison time, from the segment's
//! counters and the current clock.

use super::{CacheConfig, SegmentStats, SimTime};

/// Smoothed recency in `(0, 1]`: `1 / (1 + elapsed / beta)`.
pub fn recency_factor(now: SimTime, t_last: SimTime, beta: f64) -> f64 {
    assert!(beta > 0.0, "beta must be positive");
    assert!(now >= t_last, "now ({now}) precedes last access ({t_last})");
    1.0 / (1.0 + (now - t_last) / beta)
}

/// Score for the probationary partition.
///
/// Payloads played, scaled by recency, over `payloads_per_segment + n_requests`.
pub fn utility1(stats: &SegmentStats, now: SimTime, cfg: &CacheConfig) -> f64 {
    debug_assert!(stats.n_requests >= 1);
    let played = stats.n_payloads_played as f64;
    let recency = recency_factor(now, stats.t_last_accessed, cfg.beta);
    let denom = f64::from(cfg.layout.payloads_per_segment) + stats.n_requests as f64;
    played * recency / denom
}

/// Probability that another request follows, from the mean inter-arrival
/// time and the time since the last request.
pub fn next_request_probability(mean_interarrival: f64, t_since_last: f64) -> f64 {
    assert!(mean_interarrival > 0.0, "mean inter-arrival must be positive");
    assert!(t_since_last >= 0.0, "negative time since last request");
    mean_interarrival / mean_interarrival.max(t_since_last)
}

/// Score for the protected partition.
///
/// With fewer than two distinct request instants there is no inter-arrival
/// estimate and the next-request probability is taken as 1.
pub fn utility2(stats: &SegmentStats, now: SimTime, cfg: &CacheConfig) -> f64 {
    debug_assert!(stats.n_requests >= 1);
    let p_next = match stats.mean_interarrival {
        Some(mean) => next_request_probability(mean, now - stats.t_last_accessed),
        None => 1.0,
    };
    let played = stats.n_payloads_played as f64;
    let denom = f64::from(cfg.layout.payloads_per_segment) * stats.n_requests as f64;
    played * p_next / denom
}
