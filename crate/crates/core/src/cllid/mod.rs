//! Channel-LLID multicast control plane for an EPON.
//!
//! One channel LLID (CLLID) is allocated per live channel from the same pool
//! as ONU LLIDs. Every subscribed ONU accepts frames tagged with it, so a
//! channel is sent once on the feeder regardless of viewer count.

pub mod fuzz;
mod llid;
mod network;
mod olt;
mod onu;

use std::fmt;

pub use llid::{FramePreamble, Llid, LlidPool, Mode};
pub use network::{
    AccessList, AuthDecision, Invariant, InvariantViolation, IptvNetwork, JoinOutcome, LeaveOutcome, UserInfo,
};
pub use olt::{Olt, OltTableRow};
pub use onu::{Onu, OnuTableRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacAddr(pub u64);

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0.to_be_bytes();
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[2], b[3], b[4], b[5], b[6], b[7]
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("LLID pool exhausted")]
    PoolExhausted,
    #[error("ONU {0} already registered")]
    DuplicateMac(MacAddr),
    #[error("no registered ONU has LLID {0}")]
    UnknownOnu(Llid),
    #[error("no ONU with index {0}")]
    UnknownOnuIndex(usize),
    #[error("ONU {0} is not registered")]
    NotRegistered(usize),
    #[error("no user with index {0}")]
    UnknownUser(usize),
    #[error("channel {0} already has a CLLID")]
    ChannelExists(String),
    #[error("channel {0} is not in the OLT table")]
    UnknownChannel(String),
    #[error("ONU {onu} is not subscribed to {channel}")]
    OnuNotSubscribed { channel: String, onu: Llid },
    #[error("CLLID {0} is not assigned")]
    UnknownCllid(Llid),
    #[error("channel {0} still has subscribers")]
    ChannelHasSubscribers(String),
    #[error("user {user} already has a row for {channel}")]
    DuplicateRow { channel: String, user: MacAddr },
    #[error("channel {channel} uses CLLID {expected}, got {got}")]
    CllidMismatch { channel: String, expected: Llid, got: Llid },
    #[error("no row for user {user} on {channel}")]
    MissingRow { channel: String, user: MacAddr },
    #[error("user {user} already watches {channel}")]
    AlreadyJoined { user: usize, channel: String },
    #[error("user {user} does not watch {channel}")]
    NotJoined { user: usize, channel: String },
}
