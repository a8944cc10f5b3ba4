use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::hash::{Hash, Hasher};

use fnv::FnvHasher;

use super::Nanos;
use super::SimError;

struct Scheduled<E> {
    time: Nanos,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// Future event list ordered by `(time, sequence)`. Every processed event is
/// folded into a running FNV-1a digest so two runs can be compared cheaply.
pub struct EventQueue<E> {
    heap: BinaryHeap<Scheduled<E>>,
    now: Nanos,
    next_seq: u64,
    processed: u64,
    digest: FnvHasher,
}

impl<E: Hash> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Hash> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            now: 0,
            next_seq: 0,
            processed: 0,
            digest: FnvHasher::default(),
        }
    }

    pub fn now(&self) -> Nanos {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn digest(&self) -> u64 {
        self.digest.finish()
    }

    pub fn schedule(&mut self, time: Nanos, event: E) -> Result<u64, SimError> {
        if time < self.now {
            return Err(SimError::PastEvent { time, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { time, seq, event });
        Ok(seq)
    }

    /// Removes the next event if it is due no later than `t_end`.
    pub fn pop_until(&mut self, t_end: Nanos) -> Option<(Nanos, E)> {
        if self.heap.peek()?.time > t_end {
            return None;
        }
        let s = self.heap.pop()?;
        self.now = s.time;
        self.processed += 1;
        self.digest.write_u64(s.time);
        self.digest.write_u64(s.seq);
        s.event.hash(&mut self.digest);
        Some((s.time, s.event))
    }

    /// Processes every event due by `t_end` and returns how many ran.
    pub fn run_until<F, Er>(&mut self, t_end: Nanos, mut handler: F) -> Result<u64, Er>
    where
        F: FnMut(&mut Self, Nanos, E) -> Result<(), Er>,
    {
        let start = self.processed;
        while let Some((t, e)) = self.pop_until(t_end) {
            handler(self, t, e)?;
        }
        Ok(self.processed - start)
    }
}
