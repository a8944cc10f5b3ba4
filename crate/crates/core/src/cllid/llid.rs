use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// 15-bit logical link identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Llid(u16);

impl Llid {
    /// All-ones 15-bit value; never allocated.
    pub const BROADCAST: Llid = Llid(0x7FFF);
    /// Number of allocatable values, `0..=0x7FFE`.
    pub const POOL_SIZE: usize = 0x7FFF;

    pub fn new(value: u16) -> Option<Llid> {
        (value <= 0x7FFF).then_some(Llid(value))
    }

    pub fn value(self) -> u16 {
        self.0
    }

    pub fn is_broadcast(self) -> bool {
        self == Self::BROADCAST
    }
}

impl fmt::Display for Llid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#06x}", self.0)
    }
}

/// Emulation mode carried in the preamble's top bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Bit 0.
    PointToPoint,
    /// Bit 1.
    SharedMedium,
}

/// 16-bit preamble tag: one mode bit followed by a 15-bit LLID.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FramePreamble {
    pub mode: Mode,
    pub llid: Llid,
}

impl FramePreamble {
    pub fn point_to_point(llid: Llid) -> Self {
        Self {
            mode: Mode::PointToPoint,
            llid,
        }
    }

    pub fn to_bits(self) -> u16 {
        let mode = match self.mode {
            Mode::PointToPoint => 0,
            Mode::SharedMedium => 0x8000,
        };
        mode | self.llid.0
    }

    pub fn from_bits(bits: u16) -> Self {
        Self {
            mode: if bits & 0x8000 != 0 {
                Mode::SharedMedium
            } else {
                Mode::PointToPoint
            },
            llid: Llid(bits & 0x7FFF),
        }
    }
}

/// Shared allocator for ONU LLIDs and channel LLIDs. Always hands out the
/// lowest free value.
#[derive(Clone, Debug)]
pub struct LlidPool {
    free: BTreeSet<u16>,
}

impl Default for LlidPool {
    fn default() -> Self {
        Self {
            free: (0..Llid::POOL_SIZE as u16).collect(),
        }
    }
}

impl LlidPool {
    pub fn allocate(&mut self) -> Result<Llid, ProtocolError> {
        self.free.pop_first().map(Llid).ok_or(ProtocolError::PoolExhausted)
    }

    pub fn release(&mut self, llid: Llid) {
        debug_assert!(!llid.is_broadcast());
        let fresh = self.free.insert(llid.0);
        debug_assert!(fresh, "double release of {llid}");
    }

    pub fn allocated(&self) -> usize {
        Llid::POOL_SIZE - self.free.len()
    }

    pub fn is_allocated(&self, llid: Llid) -> bool {
        !llid.is_broadcast() && !self.free.contains(&llid.0)
    }
}
