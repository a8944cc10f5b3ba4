//! Bi-level segment caching and channel-LLID multicast for EPON IPTV access
//! networks, with a deterministic discrete-event simulator to evaluate them.

pub mod bench;
pub mod cllid;
pub mod config;
pub mod metrics;
pub mod netsim;
pub mod segment_cache;
pub mod workload;
