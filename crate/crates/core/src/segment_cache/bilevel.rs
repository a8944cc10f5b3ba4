use std::cmp::Ordering;
use std::collections::HashMap;

use super::utility::{utility1, utility2};
use super::{
    CacheConfig, CacheDecision, CacheError, Partition, Policy, Request, SegmentCache, SegmentDecision, SegmentId,
    SegmentStats, SimTime,
};

/// State transitions recorded when auditing is enabled.
#[derive(Clone, Debug, PartialEq)]
pub enum AuditEvent {
    Inserted {
        seg: SegmentId,
        at: SimTime,
    },
    Evicted {
        seg: SegmentId,
        from: Partition,
        utility: f64,
        at: SimTime,
    },
    Promoted {
        seg: SegmentId,
        utility1: f64,
        at: SimTime,
    },
    PromotionBlocked {
        seg: SegmentId,
        utility1: f64,
        at: SimTime,
    },
    Demoted {
        seg: SegmentId,
        utility2: f64,
        at: SimTime,
    },
    Dropped {
        seg: SegmentId,
        at: SimTime,
    },
}

/// Two-partition segment cache.
#[derive(Clone, Debug)]
pub struct BiLevelCache {
    config: CacheConfig,
    store1: HashMap<SegmentId, SegmentStats>,
    store2: HashMap<SegmentId, SegmentStats>,
    clock: SimTime,
    audit: Option<Vec<AuditEvent>>,
}

impl BiLevelCache {
    pub fn new(config: CacheConfig) -> Result<Self, CacheError> {
        config.validate()?;
        Ok(Self {
            config,
            store1: HashMap::with_capacity(config.capacity1),
            store2: HashMap::with_capacity(config.capacity2),
            clock: f64::NEG_INFINITY,
            audit: None,
        })
    }

    pub fn with_audit(mut self) -> Self {
        self.audit = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn take_audit(&mut self) -> Vec<AuditEvent> {
        self.audit.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn store1(&self) -> &HashMap<SegmentId, SegmentStats> {
        &self.store1
    }

    pub fn store2(&self) -> &HashMap<SegmentId, SegmentStats> {
        &self.store2
    }

    pub fn locate(&self, seg: SegmentId) -> Option<(Partition, &SegmentStats)> {
        if let Some(s) = self.store2.get(&seg) {
            Some((Partition::P2, s))
        } else {
            self.store1.get(&seg).map(|s| (Partition::P1, s))
        }
    }

    fn log(&mut self, ev: AuditEvent) {
        if let Some(log) = self.audit.as_mut() {
            log.push(ev);
        }
    }

    fn advance_clock(&mut self, now: SimTime) -> Result<(), CacheError> {
        if now < self.clock {
            return Err(CacheError::TimeWentBackwards { now, clock: self.clock });
        }
        self.clock = now;
        Ok(())
    }

    fn utility(&self, partition: Partition, stats: &SegmentStats, now: SimTime) -> f64 {
        match partition {
            Partition::P1 => utility1(stats, now, &self.config),
            Partition::P2 => utility2(stats, now, &self.config),
        }
    }

    /// The segment to evict from `partition` at `now`, if any is evictable.
    ///
    /// Minimum utility wins; ties go to the oldest last access, then the
    /// smallest id. Playing segments are skipped, as are store-1 segments still
    /// inside their minimum residency window.
    pub fn evict_candidate(&self, partition: Partition, now: SimTime) -> Option<SegmentId> {
        self.evict_candidate_scored(partition, now).map(|(seg, _)| seg)
    }

    fn evict_candidate_scored(&self, partition: Partition, now: SimTime) -> Option<(SegmentId, f64)> {
        let store = match partition {
            Partition::P1 => &self.store1,
            Partition::P2 => &self.store2,
        };
        store
            .iter()
            .filter(|(_, s)| !s.is_playing())
            .filter(|(_, s)| partition == Partition::P2 || now >= s.min_residency_until)
            .map(|(id, s)| (*id, self.utility(partition, s, now), s.t_last_accessed))
            .min_by(|a, b| eviction_order((a.1, a.2, a.0), (b.1, b.2, b.0)))
            .map(|(id, u, _)| (id, u))
    }

    fn evict(&mut self, partition: Partition, now: SimTime) -> bool {
        match self.evict_candidate_scored(partition, now) {
            Some((seg, utility)) => {
                match partition {
                    Partition::P1 => self.store1.remove(&seg),
                    Partition::P2 => self.store2.remove(&seg),
                };
                self.log(AuditEvent::Evicted {
                    seg,
                    from: partition,
                    utility,
                    at: now,
                });
                true
            }
            None => false,
        }
    }

    fn access_segment(&mut self, seg: SegmentId, payloads: u32, req: &Request) -> CacheDecision {
        let now = req.arrival_time;
        if let Some(stats) = self.store2.get_mut(&seg) {
            stats.record_access(payloads, now);
            return CacheDecision::Hit2;
        }
        if let Some(stats) = self.store1.get_mut(&seg) {
            stats.record_access(payloads, now);
            let u1 = utility1(stats, now, &self.config);
            if u1 <= self.config.threshold {
                return CacheDecision::Hit1;
            }
            let playing = stats.is_playing();
            if !playing && (self.store2.len() < self.config.capacity2 || self.evict(Partition::P2, now)) {
                let stats = self.store1.remove(&seg).expect("present in store1");
                self.store2.insert(seg, stats);
                self.log(AuditEvent::Promoted {
                    seg,
                    utility1: u1,
                    at: now,
                });
                return CacheDecision::Hit1Promoted;
            }
            self.log(AuditEvent::PromotionBlocked {
                seg,
                utility1: u1,
                at: now,
            });
            return CacheDecision::Hit1;
        }
        if self.store1.len() >= self.config.capacity1 && !self.evict(Partition::P1, now) {
            self.log(AuditEvent::Dropped { seg, at: now });
            return CacheDecision::MissDropped;
        }
        let residency = self
            .config
            .layout
            .segment_playback_time()
            .max(req.playback_time(&self.config.layout));
        self.store1
            .insert(seg, SegmentStats::first_access(payloads, now, now + residency));
        self.log(AuditEvent::Inserted { seg, at: now });
        CacheDecision::MissInserted
    }

    /// Moves store-2 segments whose utility 2 fell below `t_low` back into
    /// store 1. No-op unless demotion is enabled.
    pub fn demote_if_stale(&mut self, now: SimTime) -> Result<Vec<SegmentId>, CacheError> {
        if !self.config.demote_enabled {
            return Ok(Vec::new());
        }
        self.advance_clock(now)?;
        let mut stale: Vec<(SegmentId, f64)> = self
            .store2
            .iter()
            .filter(|(_, s)| !s.is_playing())
            .map(|(id, s)| (*id, utility2(s, now, &self.config)))
            .filter(|(_, u)| *u < self.config.t_low)
            .collect();
        stale.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

        let mut demoted = Vec::new();
        for (seg, u2) in stale {
            if self.store1.len() >= self.config.capacity1 && !self.evict(Partition::P1, now) {
                break;
            }
            let stats = self.store2.remove(&seg).expect("present in store2");
            self.store1.insert(seg, stats);
            self.log(AuditEvent::Demoted {
                seg,
                utility2: u2,
                at: now,
            });
            demoted.push(seg);
        }
        Ok(demoted)
    }

    fn stats_mut(&mut self, seg: SegmentId) -> Option<&mut SegmentStats> {
        match self.store2.get_mut(&seg) {
            Some(s) => Some(s),
            None => self.store1.get_mut(&seg),
        }
    }

    /// Checks partition disjointness, capacity bounds and counter sanity.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.store1.len() > self.config.capacity1 {
            return Err(format!(
                "store1 holds {} > {}",
                self.store1.len(),
                self.config.capacity1
            ));
        }
        if self.store2.len() > self.config.capacity2 {
            return Err(format!(
                "store2 holds {} > {}",
                self.store2.len(),
                self.config.capacity2
            ));
        }
        if let Some(seg) = self.store1.keys().find(|k| self.store2.contains_key(k)) {
            return Err(format!("segment {seg} is in both partitions"));
        }
        for (seg, s) in self.store1.iter().chain(self.store2.iter()) {
            if s.n_requests < 1 {
                return Err(format!("segment {seg} has no requests"));
            }
            if s.t_last_accessed > self.clock {
                return Err(format!("segment {seg} accessed in the future"));
            }
            if matches!(s.mean_interarrival, Some(m) if m <= 0.0) {
                return Err(format!("segment {seg} has non-positive mean inter-arrival"));
            }
        }
        Ok(())
    }
}

impl SegmentCache for BiLevelCache {
    fn handle_request(&mut self, req: &Request) -> Result<Vec<SegmentDecision>, CacheError> {
        let parts = self.config.layout.split(req)?;
        self.advance_clock(req.arrival_time)?;
        if self.config.demote_enabled {
            self.demote_if_stale(req.arrival_time)?;
        }
        Ok(parts
            .into_iter()
            .map(|(segment, payloads)| SegmentDecision {
                segment,
                payloads,
                decision: self.access_segment(segment, payloads, req),
            })
            .collect())
    }

    fn start_play(&mut self, seg: SegmentId) -> Result<(), CacheError> {
        let stats = self.stats_mut(seg).ok_or(CacheError::NotCached(seg))?;
        stats.playing_count += 1;
        Ok(())
    }

    fn end_play(&mut self, seg: SegmentId) -> Result<(), CacheError> {
        let stats = self.stats_mut(seg).ok_or(CacheError::NotCached(seg))?;
        if stats.playing_count == 0 {
            return Err(CacheError::NotPlaying(seg));
        }
        stats.playing_count -= 1;
        Ok(())
    }

    fn contains(&self, seg: SegmentId) -> bool {
        self.store1.contains_key(&seg) || self.store2.contains_key(&seg)
    }

    fn len(&self) -> usize {
        self.store1.len() + self.store2.len()
    }

    fn policy(&self) -> Policy {
        Policy::BiLevel
    }
}

/// Ordering used for eviction: `(utility, t_last_accessed, id)` ascending.
pub(crate) fn eviction_order(a: (f64, f64, SegmentId), b: (f64, f64, SegmentId)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| a.1.total_cmp(&b.1))
        .then_with(|| a.2.cmp(&b.2))
}
