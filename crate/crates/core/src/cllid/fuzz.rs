//! Random operation scripts for the control plane, replayed with an
//! invariant check after every step.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AccessList, InvariantViolation, IptvNetwork};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    Register { onu: usize },
    Join { user: usize, channel: String },
    Leave { user: usize, channel: String },
    Revoke { user: usize, channel: String },
    Grant { user: usize, channel: String },
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Register { onu } => write!(f, "register {onu}"),
            Op::Join { user, channel } => write!(f, "join {user} {channel}"),
            Op::Leave { user, channel } => write!(f, "leave {user} {channel}"),
            Op::Revoke { user, channel } => write!(f, "revoke {user} {channel}"),
            Op::Grant { user, channel } => write!(f, "grant {user} {channel}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FuzzShape {
    pub n_onus: usize,
    pub users_per_onu: usize,
    pub n_channels: usize,
}

impl Default for FuzzShape {
    fn default() -> Self {
        Self {
            n_onus: 8,
            users_per_onu: 4,
            n_channels: 32,
        }
    }
}

/// Seeded script. Registrations come first with a small chance of repeats
/// later; the rest is mostly joins and leaves with some ACL churn. Most
/// leaves name a channel the script has already joined for that user, so
/// channels keep being torn down and their LLIDs recycled.
pub fn random_ops(seed: u64, n_ops: usize, shape: FuzzShape) -> Vec<Op> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_users = shape.n_onus * shape.users_per_onu;
    let n_channels = shape.n_channels.max(1);
    let mut joined: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    let mut ops = Vec::with_capacity(n_ops);
    for onu in 0..shape.n_onus.min(n_ops) {
        ops.push(Op::Register { onu });
    }
    while ops.len() < n_ops {
        let user = rng.random_range(0..n_users.max(1));
        let mut ch = rng.random_range(0..n_channels);
        let roll: f64 = rng.random();
        let mine = joined.get_mut(user);
        ops.push(if roll < 0.45 {
            if let Some(m) = mine.filter(|m| !m.contains(&ch)) {
                m.push(ch);
            }
            Op::Join {
                user,
                channel: format!("ch{ch}"),
            }
        } else if roll < 0.85 {
            if let Some(m) = mine.filter(|m| !m.is_empty() && rng.random_bool(0.8)) {
                ch = m.swap_remove(rng.random_range(0..m.len()));
            }
            Op::Leave {
                user,
                channel: format!("ch{ch}"),
            }
        } else if roll < 0.92 {
            if let Some(m) = mine {
                m.retain(|&c| c != ch);
            }
            Op::Revoke {
                user,
                channel: format!("ch{ch}"),
            }
        } else if roll < 0.99 {
            Op::Grant {
                user,
                channel: format!("ch{ch}"),
            }
        } else {
            Op::Register {
                onu: rng.random_range(0..shape.n_onus.max(1)),
            }
        });
    }
    ops
}

pub fn write_script<W: Write>(out: W, ops: &[Op]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["op", "arg1", "arg2"])?;
    for op in ops {
        let rec: [String; 3] = match op {
            Op::Register { onu } => ["register".into(), onu.to_string(), String::new()],
            Op::Join { user, channel } => ["join".into(), user.to_string(), channel.clone()],
            Op::Leave { user, channel } => ["leave".into(), user.to_string(), channel.clone()],
            Op::Revoke { user, channel } => ["revoke".into(), user.to_string(), channel.clone()],
            Op::Grant { user, channel } => ["grant".into(), user.to_string(), channel.clone()],
        };
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_script<R: Read>(input: R) -> Result<Vec<Op>, ScriptError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["op", "arg1", "arg2"] {
        return Err(ScriptError::Parse {
            line: 1,
            reason: "expected header op,arg1,arg2".into(),
        });
    }
    let mut ops = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let err = |reason: String| ScriptError::Parse { line, reason };
        let arg1 = usize::from_str(rec.get(1).unwrap_or("")).map_err(|e| err(format!("arg1: {e}")))?;
        let channel = rec.get(2).unwrap_or("").to_string();
        let needs_channel = |op: Op| {
            if channel.is_empty() {
                Err(err("missing channel".into()))
            } else {
                Ok(op)
            }
        };
        ops.push(match rec.get(0).unwrap_or("") {
            "register" => Op::Register { onu: arg1 },
            "join" => needs_channel(Op::Join {
                user: arg1,
                channel: channel.clone(),
            })?,
            "leave" => needs_channel(Op::Leave {
                user: arg1,
                channel: channel.clone(),
            })?,
            "revoke" => needs_channel(Op::Revoke {
                user: arg1,
                channel: channel.clone(),
            })?,
            "grant" => needs_channel(Op::Grant {
                user: arg1,
                channel: channel.clone(),
            })?,
            other => return Err(err(format!("unknown op {other:?}"))),
        });
    }
    Ok(ops)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReplaySummary {
    pub steps: usize,
    /// Operations refused by the protocol (not failures).
    pub rejected: usize,
    pub denied: usize,
    pub peak_llids: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("step {step} ({op}): {violation}")]
pub struct ReplayFailure {
    pub step: usize,
    pub op: Op,
    pub violation: InvariantViolation,
}

pub fn apply(net: &mut IptvNetwork, op: &Op) -> Result<bool, super::ProtocolError> {
    use super::JoinOutcome;
    match op {
        Op::Register { onu } => net.register(*onu).map(|_| false),
        Op::Join { user, channel } => net.join_channel(*user, channel).map(|o| o == JoinOutcome::Denied),
        Op::Leave { user, channel } => net.leave_channel(*user, channel).map(|_| false),
        Op::Revoke { user, channel } => net.revoke(*user, channel).map(|_| false),
        Op::Grant { user, channel } => net.grant(*user, channel).map(|_| false),
    }
}

/// Runs `ops` on a fresh allow-all network and checks every invariant after
/// each step. Stops at the first violation.
pub fn replay(ops: &[Op], shape: FuzzShape) -> Result<ReplaySummary, ReplayFailure> {
    let mut net = IptvNetwork::new(shape.n_onus, shape.users_per_onu, AccessList::allow_all());
    let mut summary = ReplaySummary::default();
    for (step, op) in ops.iter().enumerate() {
        match apply(&mut net, op) {
            Ok(true) => summary.denied += 1,
            Ok(false) => {}
            Err(_) => summary.rejected += 1,
        }
        net.check_invariants().map_err(|violation| ReplayFailure {
            step,
            op: op.clone(),
            violation,
        })?;
        summary.steps += 1;
        summary.peak_llids = summary.peak_llids.max(net.olt().pool().allocated());
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_round_trip() {
        let ops = random_ops(3, 200, FuzzShape::default());
        let mut buf = Vec::new();
        write_script(&mut buf, &ops).unwrap();
        assert_eq!(read_script(buf.as_slice()).unwrap(), ops);
    }

    #[test]
    fn bad_script_lines() {
        let err = read_script("op,arg1,arg2\njoin,1,ch0\nfly,1,ch0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 3, .. }), "{err}");
        let err = read_script("op,arg1,arg2\njoin,1,\n".as_bytes()).unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 2, .. }));
        assert!(read_script("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn random_replay_holds() {
        let s = replay(&random_ops(11, 5000, FuzzShape::default()), FuzzShape::default()).unwrap();
        assert_eq!(s.steps, 5000);
        assert!(s.rejected > 0);
        assert!(s.peak_llids > 8);
    }

    #[test]
    fn same_seed_same_script() {
        assert_eq!(
            random_ops(5, 300, FuzzShape::default()),
            random_ops(5, 300, FuzzShape::default())
        );
        assert_ne!(
            random_ops(5, 300, FuzzShape::default()),
            random_ops(6, 300, FuzzShape::default())
        );
    }
}
