#![allow(dead_code)]

//! Straightforward reference models used to cross-check the library.
//!
//! Everything here favours obviousness over speed: stores are plain vectors,
//! every decision rescans every entry.

use ponsim::segment_cache::{CacheConfig, CacheDecision, Request, SegmentId};

/// `played * F / (pps + N)` with `F = 1 / (1 + (now - t_last) / beta)`.
pub fn ref_utility1(played: u64, n_req: u64, t_last: f64, now: f64, pps: u32, beta: f64) -> f64 {
    let f = 1.0 / (1.0 + (now - t_last) / beta);
    played as f64 * f / (f64::from(pps) + n_req as f64)
}

/// `played * P / (pps * N)` with `P = mean / max(mean, now - t_last)`, or 1
/// without a mean.
pub fn ref_utility2(played: u64, n_req: u64, t_last: f64, now: f64, pps: u32, mean: Option<f64>) -> f64 {
    let p = match mean {
        Some(m) => {
            let since = now - t_last;
            if since > m {
                m / since
            } else {
                1.0
            }
        }
        None => 1.0,
    };
    played as f64 * p / (f64::from(pps) * n_req as f64)
}

#[derive(Clone, Debug)]
pub struct RefEntry {
    pub id: SegmentId,
    pub n_req: u64,
    pub played: u64,
    pub t_last: f64,
    gap_sum: f64,
    pub plays: u32,
    pub resident_until: f64,
}

impl RefEntry {
    fn mean(&self) -> Option<f64> {
        if self.n_req < 2 {
            return None;
        }
        let m = self.gap_sum / (self.n_req - 1) as f64;
        if m > 0.0 {
            Some(m)
        } else {
            None
        }
    }

    fn touch(&mut self, payloads: u32, now: f64) {
        self.gap_sum += now - self.t_last;
        self.n_req += 1;
        self.played += u64::from(payloads);
        self.t_last = now;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RefEvent {
    Evicted { seg: SegmentId, from_store2: bool },
    Promoted(SegmentId),
    Demoted(SegmentId),
    Dropped(SegmentId),
}

/// Two-store cache with brute-force victim selection.
#[derive(Clone, Debug)]
pub struct RefBiLevel {
    pub cfg: CacheConfig,
    pub s1: Vec<RefEntry>,
    pub s2: Vec<RefEntry>,
    pub events: Vec<RefEvent>,
}

impl RefBiLevel {
    pub fn new(cfg: CacheConfig) -> Self {
        Self {
            cfg,
            s1: Vec::new(),
            s2: Vec::new(),
            events: Vec::new(),
        }
    }

    fn u1(&self, e: &RefEntry, now: f64) -> f64 {
        ref_utility1(
            e.played,
            e.n_req,
            e.t_last,
            now,
            self.cfg.layout.payloads_per_segment,
            self.cfg.beta,
        )
    }

    fn u2(&self, e: &RefEntry, now: f64) -> f64 {
        ref_utility2(
            e.played,
            e.n_req,
            e.t_last,
            now,
            self.cfg.layout.payloads_per_segment,
            e.mean(),
        )
    }

    /// Index of the victim in the chosen store, scanning every entry.
    pub fn victim(&self, store2: bool, now: f64) -> Option<usize> {
        let store = if store2 { &self.s2 } else { &self.s1 };
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in store.iter().enumerate() {
            if e.plays > 0 {
                continue;
            }
            if !store2 && now < e.resident_until {
                continue;
            }
            let u = if store2 { self.u2(e, now) } else { self.u1(e, now) };
            let better = match best {
                None => true,
                Some((j, bu)) => {
                    let b = &store[j];
                    u < bu || (u == bu && (e.t_last < b.t_last || (e.t_last == b.t_last && e.id < b.id)))
                }
            };
            if better {
                best = Some((i, u));
            }
        }
        best.map(|(i, _)| i)
    }

    fn evict(&mut self, store2: bool, now: f64) -> bool {
        match self.victim(store2, now) {
            Some(i) => {
                let e = if store2 { self.s2.remove(i) } else { self.s1.remove(i) };
                self.events.push(RefEvent::Evicted {
                    seg: e.id,
                    from_store2: store2,
                });
                true
            }
            None => false,
        }
    }

    fn demote(&mut self, now: f64) {
        let mut stale: Vec<(f64, SegmentId)> = self
            .s2
            .iter()
            .filter(|e| e.plays == 0)
            .map(|e| (self.u2(e, now), e.id))
            .filter(|(u, _)| *u < self.cfg.t_low)
            .collect();
        stale.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for (_, id) in stale {
            if self.s1.len() >= self.cfg.capacity1 && !self.evict(false, now) {
                break;
            }
            let i = self.s2.iter().position(|e| e.id == id).unwrap();
            let e = self.s2.remove(i);
            self.s1.push(e);
            self.events.push(RefEvent::Demoted(id));
        }
    }

    pub fn request(&mut self, req: &Request) -> Vec<(SegmentId, CacheDecision)> {
        let now = req.arrival_time;
        if self.cfg.demote_enabled {
            self.demote(now);
        }
        let pps = u64::from(self.cfg.layout.payloads_per_segment);
        let end = req.start_payload + u64::from(req.n_payloads);
        let mut out = Vec::new();
        let mut p = req.start_payload;
        while p < end {
            let idx = p / pps;
            let seg_end = ((idx + 1) * pps).min(end);
            let payloads = (seg_end - p) as u32;
            let id = SegmentId::new(req.object_id, idx as u32);
            out.push((id, self.one(id, payloads, req)));
            p = seg_end;
        }
        out
    }

    fn one(&mut self, id: SegmentId, payloads: u32, req: &Request) -> CacheDecision {
        let now = req.arrival_time;
        if let Some(e) = self.s2.iter_mut().find(|e| e.id == id) {
            e.touch(payloads, now);
            return CacheDecision::Hit2;
        }
        if let Some(i) = self.s1.iter().position(|e| e.id == id) {
            self.s1[i].touch(payloads, now);
            if self.u1(&self.s1[i], now) <= self.cfg.threshold || self.s1[i].plays > 0 {
                return CacheDecision::Hit1;
            }
            if self.s2.len() >= self.cfg.capacity2 && !self.evict(true, now) {
                return CacheDecision::Hit1;
            }
            let e = self.s1.remove(i);
            self.s2.push(e);
            self.events.push(RefEvent::Promoted(id));
            return CacheDecision::Hit1Promoted;
        }
        if self.s1.len() >= self.cfg.capacity1 && !self.evict(false, now) {
            self.events.push(RefEvent::Dropped(id));
            return CacheDecision::MissDropped;
        }
        let pt = self.cfg.layout.payload_playback_time;
        let hold = (f64::from(self.cfg.layout.payloads_per_segment) * pt).max(f64::from(req.n_payloads) * pt);
        self.s1.push(RefEntry {
            id,
            n_req: 1,
            played: u64::from(payloads),
            t_last: now,
            gap_sum: 0.0,
            plays: 0,
            resident_until: now + hold,
        });
        CacheDecision::MissInserted
    }

    fn entry_mut(&mut self, id: SegmentId) -> Option<&mut RefEntry> {
        self.s1.iter_mut().chain(self.s2.iter_mut()).find(|e| e.id == id)
    }

    pub fn start_play(&mut self, id: SegmentId) {
        self.entry_mut(id).expect("cached").plays += 1;
    }

    pub fn end_play(&mut self, id: SegmentId) {
        self.entry_mut(id).expect("cached").plays -= 1;
    }

    pub fn sorted_ids(&self, store2: bool) -> Vec<SegmentId> {
        let mut v: Vec<SegmentId> = if store2 { &self.s2 } else { &self.s1 }.iter().map(|e| e.id).collect();
        v.sort();
        v
    }
}

/// Free-list model of the 15-bit identifier pool: lowest free value first.
#[derive(Clone, Debug)]
pub struct RefPool {
    used: Vec<bool>,
}

impl RefPool {
    pub fn new(size: usize) -> Self {
        Self {
            used: vec![false; size],
        }
    }

    pub fn take(&mut self) -> Option<u16> {
        let i = self.used.iter().position(|u| !u)?;
        self.used[i] = true;
        Some(i as u16)
    }

    pub fn give(&mut self, v: u16) -> bool {
        let slot = &mut self.used[v as usize];
        let was = *slot;
        *slot = false;
        was
    }

    pub fn in_use(&self) -> usize {
        self.used.iter().filter(|u| **u).count()
    }
}

pub mod lockstep {
    use ponsim::segment_cache::{
        AuditEvent, BiLevelCache, CacheConfig, Partition, Request, SegmentCache, SegmentId, SegmentLayout,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::{RefBiLevel, RefEvent};

    #[derive(Debug, Default)]
    pub struct Tally {
        pub steps: usize,
        pub evictions: usize,
        pub promotions: usize,
        pub drops: usize,
        pub demotions: usize,
    }

    fn to_ref(ev: AuditEvent) -> Option<RefEvent> {
        match ev {
            AuditEvent::Evicted { seg, from, .. } => Some(RefEvent::Evicted {
                seg,
                from_store2: from == Partition::P2,
            }),
            AuditEvent::Promoted { seg, .. } => Some(RefEvent::Promoted(seg)),
            AuditEvent::Demoted { seg, .. } => Some(RefEvent::Demoted(seg)),
            AuditEvent::Dropped { seg, .. } => Some(RefEvent::Dropped(seg)),
            AuditEvent::Inserted { .. } | AuditEvent::PromotionBlocked { .. } => None,
        }
    }

    pub fn random_config(rng: &mut ChaCha8Rng) -> CacheConfig {
        let threshold = [0.3, 0.5, 0.8][rng.random_range(0..3)];
        CacheConfig {
            capacity1: rng.random_range(1..=8),
            capacity2: rng.random_range(0..=8),
            threshold,
            beta: [0.5, 2.0, 10.0][rng.random_range(0..3)],
            layout: SegmentLayout {
                segments_per_object: 4,
                payloads_per_segment: 10,
                payload_playback_time: 0.05,
            },
            demote_enabled: rng.random_bool(0.5),
            t_low: threshold / 4.0,
        }
    }

    /// Drives the library cache and the reference side by side. Any
    /// disagreement in decisions, victims, promotions or contents is an error
    /// naming the step.
    pub fn run(seed: u64, steps: usize) -> Result<Tally, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_config(&mut rng);
        let mut lib = BiLevelCache::new(cfg).map_err(|e| e.to_string())?.with_audit();
        let mut oracle = RefBiLevel::new(cfg);
        let mut pins: Vec<SegmentId> = Vec::new();
        let mut tally = Tally::default();
        let mut t = 0.0;
        let span = u64::from(cfg.layout.segments_per_object * cfg.layout.payloads_per_segment);
        for step in 0..steps {
            let roll: f64 = rng.random();
            if roll < 0.12 && !pins.is_empty() {
                let seg = pins.swap_remove(rng.random_range(0..pins.len()));
                lib.end_play(seg).map_err(|e| format!("step {step}: {e}"))?;
                oracle.end_play(seg);
            } else if roll < 0.25 {
                let cached: Vec<SegmentId> = oracle
                    .sorted_ids(false)
                    .into_iter()
                    .chain(oracle.sorted_ids(true))
                    .collect();
                if !cached.is_empty() {
                    let seg = cached[rng.random_range(0..cached.len())];
                    lib.start_play(seg).map_err(|e| format!("step {step}: {e}"))?;
                    oracle.start_play(seg);
                    pins.push(seg);
                }
            } else {
                t += [0.0, 0.1, 0.25, 1.0, 3.0][rng.random_range(0..5)];
                let start = rng.random_range(0..span);
                let n = rng.random_range(1..=(span - start).min(15)) as u32;
                let req = Request::new(rng.random_range(0..5), start, n, t);
                let got: Vec<_> = lib
                    .handle_request(&req)
                    .map_err(|e| format!("step {step}: {e}"))?
                    .into_iter()
                    .map(|d| (d.segment, d.decision))
                    .collect();
                let want = oracle.request(&req);
                if got != want {
                    return Err(format!("step {step}: decisions {got:?}, reference {want:?}"));
                }
            }
            let got_ev: Vec<RefEvent> = lib.take_audit().into_iter().filter_map(to_ref).collect();
            let want_ev = std::mem::take(&mut oracle.events);
            if got_ev != want_ev {
                return Err(format!("step {step}: events {got_ev:?}, reference {want_ev:?}"));
            }
            for ev in &got_ev {
                match ev {
                    RefEvent::Evicted { .. } => tally.evictions += 1,
                    RefEvent::Promoted(_) => tally.promotions += 1,
                    RefEvent::Demoted(_) => tally.demotions += 1,
                    RefEvent::Dropped(_) => tally.drops += 1,
                }
            }
            for (part, store2) in [(Partition::P1, false), (Partition::P2, true)] {
                let got = lib.evict_candidate(part, t);
                let want = oracle
                    .victim(store2, t)
                    .map(|i| if store2 { oracle.s2[i].id } else { oracle.s1[i].id });
                if got != want {
                    return Err(format!("step {step}: {part:?} candidate {got:?}, reference {want:?}"));
                }
                let mut ids: Vec<SegmentId> = if store2 { lib.store2() } else { lib.store1() }
                    .keys()
                    .copied()
                    .collect();
                ids.sort();
                if ids != oracle.sorted_ids(store2) {
                    return Err(format!("step {step}: {part:?} contents differ"));
                }
            }
            lib.check_invariants().map_err(|e| format!("step {step}: {e}"))?;
            tally.steps += 1;
        }
        Ok(tally)
    }
}
