mod common;

use common::lockstep;
use common::{ref_utility1, ref_utility2, RefBiLevel, RefPool};
use ponsim::cllid::{Llid, LlidPool};
use ponsim::segment_cache::{
    next_request_probability, recency_factor, utility1, utility2, CacheConfig, CacheDecision, Request, SegmentId,
    SegmentLayout, SegmentStats,
};
use proptest::prelude::*;

fn layout(pps: u32) -> SegmentLayout {
    SegmentLayout {
        segments_per_object: 4,
        payloads_per_segment: pps,
        payload_playback_time: 0.01,
    }
}

fn stats(n_req: u64, played: u64, t_last: f64, mean: Option<f64>) -> SegmentStats {
    let mut s = SegmentStats::first_access(0, 0.0, 0.0);
    s.n_requests = n_req;
    s.n_payloads_played = played;
    s.t_last_accessed = t_last;
    s.mean_interarrival = mean;
    s
}

#[test]
fn utility_tables() {
    let cfg = CacheConfig {
        layout: layout(100),
        beta: 100.0,
        ..CacheConfig::default()
    };
    let cases = [
        (stats(1, 100, 0.0, None), 0.0, 100.0 / 101.0, 1.0),
        (stats(2, 150, 0.0, None), 0.0, 150.0 / 102.0, 0.75),
        (stats(2, 150, 0.0, Some(10.0)), 100.0, 150.0 / 102.0 * 0.5, 0.75 * 0.1),
        (stats(4, 40, 5.0, Some(5.0)), 10.0, 40.0 / 104.0 * (1.0 / 1.05), 0.1),
    ];
    for (s, now, u1, u2) in cases {
        assert!((utility1(&s, now, &cfg) - u1).abs() <= 1e-12 * u1.abs().max(1.0));
        assert!((utility2(&s, now, &cfg) - u2).abs() <= 1e-12 * u2.abs().max(1.0));
    }
    assert_eq!(recency_factor(5.0, 5.0, 1.0), 1.0);
    assert_eq!(next_request_probability(2.0, 1.0), 1.0);
    assert_eq!(next_request_probability(2.0, 8.0), 0.25);
}

#[test]
fn reference_agrees_on_a_small_scenario() {
    let cfg = CacheConfig {
        capacity1: 2,
        capacity2: 1,
        threshold: 0.5,
        beta: 10.0,
        layout: SegmentLayout {
            segments_per_object: 4,
            payloads_per_segment: 10,
            payload_playback_time: 0.1,
        },
        demote_enabled: false,
        t_low: 0.05,
    };
    let mut r = RefBiLevel::new(cfg);
    let whole = |o: u32, s: u64, t: f64| Request::new(o, s * 10, 10, t);
    assert_eq!(
        r.request(&whole(0, 0, 0.0)),
        vec![(SegmentId::new(0, 0), CacheDecision::MissInserted)]
    );
    let one = |t: f64| Request::new(0, 10, 1, t);
    assert_eq!(r.request(&one(0.0))[0].1, CacheDecision::MissInserted);
    // 2 payloads over 12 stays below the threshold.
    assert_eq!(r.request(&one(0.5))[0].1, CacheDecision::Hit1);
    // 20 payloads over 12, decayed by 1/1.1.
    assert_eq!(r.request(&whole(0, 0, 1.0))[0].1, CacheDecision::Hit1Promoted);
    assert_eq!(r.request(&whole(0, 0, 1.0))[0].1, CacheDecision::Hit2);
    assert_eq!(r.request(&whole(1, 0, 1.0))[0].1, CacheDecision::MissInserted);
    // 0/1 left its residency window at t = 1 and is the only victim.
    assert_eq!(r.request(&whole(2, 0, 1.0))[0].1, CacheDecision::MissInserted);
    assert_eq!(r.sorted_ids(false), vec![SegmentId::new(1, 0), SegmentId::new(2, 0)]);
    assert_eq!(r.request(&whole(3, 0, 1.5))[0].1, CacheDecision::MissDropped);
}

#[test]
fn lockstep_long_runs() {
    for seed in 100..104 {
        let tally = lockstep::run(seed, 5_000).unwrap();
        assert_eq!(tally.steps, 5_000);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn utilities_match_reference(
        n_req in 1u64..1_000,
        played in 0u64..100_000,
        t_last in 0.0f64..1e6,
        dt in 0.0f64..1e4,
        pps in 1u32..500,
        beta in 1e-3f64..1e4,
        mean in proptest::option::of(1e-3f64..1e4),
    ) {
        let cfg = CacheConfig { layout: layout(pps), beta, ..CacheConfig::default() };
        let s = stats(n_req, played, t_last, mean);
        let now = t_last + dt;
        let a = utility1(&s, now, &cfg);
        let b = ref_utility1(played, n_req, t_last, now, pps, beta);
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE));
        let a = utility2(&s, now, &cfg);
        let b = ref_utility2(played, n_req, t_last, now, pps, mean);
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn lockstep_with_reference(seed in any::<u64>()) {
        let r = lockstep::run(seed, 400);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }

    #[test]
    fn pool_matches_free_list(ops in proptest::collection::vec((any::<bool>(), 0u16..64), 1..400)) {
        let mut pool = LlidPool::default();
        let mut model = RefPool::new(Llid::POOL_SIZE);
        let mut held: Vec<u16> = Vec::new();
        for (take, pick) in ops {
            if take || held.is_empty() {
                let got = pool.allocate().unwrap().value();
                prop_assert_eq!(Some(got), model.take());
                held.push(got);
            } else {
                let v = held.swap_remove(pick as usize % held.len());
                pool.release(Llid::new(v).unwrap());
                prop_assert!(model.give(v));
            }
            prop_assert_eq!(pool.allocated(), model.in_use());
        }
    }
}

#[test]
fn pool_exhaust_free_exhaust() {
    let mut pool = LlidPool::default();
    let mut model = RefPool::new(Llid::POOL_SIZE);
    for _ in 0..Llid::POOL_SIZE {
        assert_eq!(Some(pool.allocate().unwrap().value()), model.take());
    }
    assert!(pool.allocate().is_err());
    assert_eq!(model.take(), None);
    for v in [7u16, 3, 30_000] {
        pool.release(Llid::new(v).unwrap());
        model.give(v);
    }
    for _ in 0..3 {
        assert_eq!(Some(pool.allocate().unwrap().value()), model.take());
    }
    assert!(pool.allocate().is_err());
}
