use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::WorkloadError;

pub const TRACE_HEADER: [&str; 7] = [
    "time_s",
    "user_id",
    "kind",
    "object_id",
    "start_payload",
    "n_payloads",
    "channel_name",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Vod,
    Join,
    Leave,
}

/// One line of a trace file. VOD records carry the object fields, join and
/// leave records carry the channel name; inapplicable fields are empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_s: f64,
    pub user_id: u32,
    pub kind: RecordKind,
    pub object_id: Option<u32>,
    pub start_payload: Option<u64>,
    pub n_payloads: Option<u32>,
    pub channel_name: Option<String>,
}

impl TraceRecord {
    pub fn vod(time_s: f64, user_id: u32, object_id: u32, start_payload: u64, n_payloads: u32) -> Self {
        Self {
            time_s,
            user_id,
            kind: RecordKind::Vod,
            object_id: Some(object_id),
            start_payload: Some(start_payload),
            n_payloads: Some(n_payloads),
            channel_name: None,
        }
    }

    pub fn live(time_s: f64, user_id: u32, kind: RecordKind, channel: impl Into<String>) -> Self {
        debug_assert!(kind != RecordKind::Vod);
        Self {
            time_s,
            user_id,
            kind,
            object_id: None,
            start_payload: None,
            n_payloads: None,
            channel_name: Some(channel.into()),
        }
    }

    fn check_shape(&self) -> Result<(), String> {
        if !(self.time_s.is_finite() && self.time_s >= 0.0) {
            return Err(format!("time_s must be finite and >= 0, got {}", self.time_s));
        }
        match self.kind {
            RecordKind::Vod => {
                if self.object_id.is_none() || self.start_payload.is_none() || self.n_payloads.is_none() {
                    return Err("vod record needs object_id, start_payload and n_payloads".into());
                }
                if self.n_payloads == Some(0) {
                    return Err("n_payloads must be >= 1".into());
                }
                if self.channel_name.is_some() {
                    return Err("vod record must not carry channel_name".into());
                }
            }
            RecordKind::Join | RecordKind::Leave => {
                if self.channel_name.as_deref().is_none_or(str::is_empty) {
                    return Err("join/leave record needs channel_name".into());
                }
                if self.object_id.is_some() || self.start_payload.is_some() || self.n_payloads.is_some() {
                    return Err("join/leave record must not carry object fields".into());
                }
            }
        }
        Ok(())
    }
}

pub fn write_trace<W: Write>(out: W, records: &[TraceRecord]) -> Result<(), WorkloadError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<(), WorkloadError> {
    write_trace(File::create(path)?, records)
}

/// Parses and validates a trace; errors name the 1-based line.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>, WorkloadError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    if headers.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(WorkloadError::Trace {
            line: 1,
            reason: format!("expected header {:?}", TRACE_HEADER.join(",")),
        });
    }
    let mut out: Vec<TraceRecord> = Vec::new();
    for row in rdr.deserialize::<TraceRecord>() {
        let record = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(WorkloadError::Trace {
                    line,
                    reason: e.to_string(),
                });
            }
        };
        let line = out.len() as u64 + 2;
        record
            .check_shape()
            .map_err(|reason| WorkloadError::Trace { line, reason })?;
        if let Some(prev) = out.last() {
            if record.time_s < prev.time_s {
                return Err(WorkloadError::Trace {
                    line,
                    reason: format!("time {} precedes previous time {}", record.time_s, prev.time_s),
                });
            }
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>, WorkloadError> {
    read_trace(File::open(path)?)
}
