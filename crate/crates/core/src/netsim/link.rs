use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Nanos;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkConfig {
    pub rate_bps: u64,
    pub propagation_ns: Nanos,
    /// Packets in the system, including the one being serialized.
    pub queue_packets: usize,
}

impl LinkConfig {
    /// Serialization time, rounded up to the next nanosecond.
    pub fn serialization(&self, size_bytes: u32) -> Nanos {
        let bits = u128::from(size_bytes) * 8 * 1_000_000_000;
        bits.div_ceil(u128::from(self.rate_bps)) as Nanos
    }
}

/// FIFO, tail-drop, store-and-forward link.
#[derive(Clone, Debug)]
pub struct Link {
    cfg: LinkConfig,
    /// Serialization finish times of queued packets, ascending.
    backlog: VecDeque<Nanos>,
    sent: u64,
    dropped: u64,
}

impl Link {
    pub fn new(cfg: LinkConfig) -> Self {
        assert!(cfg.rate_bps > 0, "link rate must be positive");
        Self {
            cfg,
            backlog: VecDeque::new(),
            sent: 0,
            dropped: 0,
        }
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    /// Arrival time at the far end, or `None` when the queue is full.
    /// Calls must come in non-decreasing `now`.
    pub fn transmit(&mut self, now: Nanos, size_bytes: u32) -> Option<Nanos> {
        debug_assert!(size_bytes > 0);
        while self.backlog.front().is_some_and(|&f| f <= now) {
            self.backlog.pop_front();
        }
        if self.backlog.len() >= self.cfg.queue_packets {
            self.dropped += 1;
            return None;
        }
        let start = self.backlog.back().map_or(now, |&f| f.max(now));
        let finish = start + self.cfg.serialization(size_bytes);
        self.backlog.push_back(finish);
        self.sent += 1;
        Some(finish + self.cfg.propagation_ns)
    }

    pub fn occupancy(&self) -> usize {
        self.backlog.len()
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
