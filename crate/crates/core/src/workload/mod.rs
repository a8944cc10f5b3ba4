//! Synthetic request traces and trace file I/O.
//!
//! VOD requests follow a Zipf popularity over objects, optionally aged with
//! staggered releases so the popular set churns over the run. Within an
//! object, viewers either start from the beginning or skip to one of a few
//! hot segments, and sometimes re-watch their previous object. Live-channel
//! viewers zap between channels drawn from a channel-level Zipf.

mod generator;
mod trace;
mod zipf;

pub use generator::{channel_name, generate_trace, PopularityModel, WorkloadConfig};
pub use trace::{load_trace, read_trace, save_trace, write_trace, RecordKind, TraceRecord, TRACE_HEADER};
pub use zipf::{aged_popularity, zipf_sample, Zipf};

#[derive(Debug, thiserror::Error)]
pub enum WorkloadError {
    #[error("invalid workload configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("trace line {line}: {reason}")]
    Trace { line: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
