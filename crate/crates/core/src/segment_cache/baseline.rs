use std::collections::{BTreeSet, HashMap};

use super::{CacheDecision, CacheError, Policy, Request, SegmentCache, SegmentDecision, SegmentId, SegmentLayout};

/// Least-recently-used over segments. Hits report [`CacheDecision::Hit1`].
#[derive(Clone, Debug)]
pub struct LruCache {
    capacity: usize,
    layout: SegmentLayout,
    tick: u64,
    last_use: HashMap<SegmentId, u64>,
    order: BTreeSet<(u64, SegmentId)>,
}

impl LruCache {
    pub fn new(capacity: usize, layout: SegmentLayout) -> Self {
        Self {
            capacity,
            layout,
            tick: 0,
            last_use: HashMap::with_capacity(capacity),
            order: BTreeSet::new(),
        }
    }

    fn access(&mut self, seg: SegmentId) -> CacheDecision {
        self.tick += 1;
        if let Some(prev) = self.last_use.insert(seg, self.tick) {
            self.order.remove(&(prev, seg));
            self.order.insert((self.tick, seg));
            return CacheDecision::Hit1;
        }
        if self.capacity == 0 {
            self.last_use.remove(&seg);
            return CacheDecision::MissDropped;
        }
        if self.last_use.len() > self.capacity {
            let (_, victim) = self.order.pop_first().expect("non-empty");
            self.last_use.remove(&victim);
        }
        self.order.insert((self.tick, seg));
        CacheDecision::MissInserted
    }
}

impl SegmentCache for LruCache {
    fn handle_request(&mut self, req: &Request) -> Result<Vec<SegmentDecision>, CacheError> {
        let parts = self.layout.split(req)?;
        Ok(parts
            .into_iter()
            .map(|(segment, payloads)| SegmentDecision {
                segment,
                payloads,
                decision: self.access(segment),
            })
            .collect())
    }

    fn start_play(&mut self, _seg: SegmentId) -> Result<(), CacheError> {
        Ok(())
    }

    fn end_play(&mut self, _seg: SegmentId) -> Result<(), CacheError> {
        Ok(())
    }

    fn contains(&self, seg: SegmentId) -> bool {
        self.last_use.contains_key(&seg)
    }

    fn len(&self) -> usize {
        self.last_use.len()
    }

    fn policy(&self) -> Policy {
        Policy::Lru
    }
}

/// In-cache least-frequently-used; frequency ties evict the oldest access.
/// Counts are forgotten on eviction.
#[derive(Clone, Debug)]
pub struct LfuCache {
    capacity: usize,
    layout: SegmentLayout,
    tick: u64,
    entries: HashMap<SegmentId, (u64, u64)>,
    order: BTreeSet<(u64, u64, SegmentId)>,
}

impl LfuCache {
    pub fn new(capacity: usize, layout: SegmentLayout) -> Self {
        Self {
            capacity,
            layout,
            tick: 0,
            entries: HashMap::with_capacity(capacity),
            order: BTreeSet::new(),
        }
    }

    fn access(&mut self, seg: SegmentId) -> CacheDecision {
        self.tick += 1;
        if let Some(entry) = self.entries.get_mut(&seg) {
            self.order.remove(&(entry.0, entry.1, seg));
            entry.0 += 1;
            entry.1 = self.tick;
            self.order.insert((entry.0, entry.1, seg));
            return CacheDecision::Hit1;
        }
        if self.capacity == 0 {
            return CacheDecision::MissDropped;
        }
        if self.entries.len() >= self.capacity {
            let (_, _, victim) = self.order.pop_first().expect("non-empty");
            self.entries.remove(&victim);
        }
        self.entries.insert(seg, (1, self.tick));
        self.order.insert((1, self.tick, seg));
        CacheDecision::MissInserted
    }
}

impl SegmentCache for LfuCache {
    fn handle_request(&mut self, req: &Request) -> Result<Vec<SegmentDecision>, CacheError> {
        let parts = self.layout.split(req)?;
        Ok(parts
            .into_iter()
            .map(|(segment, payloads)| SegmentDecision {
                segment,
                payloads,
                decision: self.access(segment),
            })
            .collect())
    }

    fn start_play(&mut self, _seg: SegmentId) -> Result<(), CacheError> {
        Ok(())
    }

    fn end_play(&mut self, _seg: SegmentId) -> Result<(), CacheError> {
        Ok(())
    }

    fn contains(&self, seg: SegmentId) -> bool {
        self.entries.contains_key(&seg)
    }

    fn len(&self) -> usize {
        self.entries.len()
    }

    fn policy(&self) -> Policy {
        Policy::Lfu
    }
}

/// Never caches; every segment is served pass-through.
#[derive(Clone, Debug)]
pub struct NoCache {
    layout: SegmentLayout,
}

impl NoCache {
    pub fn new(layout: SegmentLayout) -> Self {
        Self { layout }
    }
}

impl SegmentCache for NoCache {
    fn handle_request(&mut self, req: &Request) -> Result<Vec<SegmentDecision>, CacheError> {
        Ok(self
            .layout
            .split(req)?
            .into_iter()
            .map(|(segment, payloads)| SegmentDecision {
                segment,
                payloads,
                decision: CacheDecision::MissDropped,
            })
            .collect())
    }

    fn start_play(&mut self, seg: SegmentId) -> Result<(), CacheError> {
        Err(CacheError::NotCached(seg))
    }

    fn end_play(&mut self, seg: SegmentId) -> Result<(), CacheError> {
        Err(CacheError::NotCached(seg))
    }

    fn contains(&self, _seg: SegmentId) -> bool {
        false
    }

    fn len(&self) -> usize {
        0
    }

    fn policy(&self) -> Policy {
        Policy::None
    }
}
