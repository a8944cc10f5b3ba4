use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;

use super::{FramePreamble, Llid, MacAddr, Olt, OltTableRow, Onu, ProtocolError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuthDecision {
    Allow,
    Deny,
}

/// Static authorization: a default plus per-(user, channel) exceptions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AccessList {
    deny_by_default: bool,
    exceptions: BTreeMap<MacAddr, BTreeSet<String>>,
}

impl AccessList {
    pub fn allow_all() -> Self {
        Self::default()
    }

    /// Only the listed pairs are allowed.
    pub fn allow_only<I: IntoIterator<Item = (MacAddr, String)>>(pairs: I) -> Self {
        let mut acl = Self {
            deny_by_default: true,
            exceptions: BTreeMap::new(),
        };
        for (mac, channel) in pairs {
            acl.exceptions.entry(mac).or_default().insert(channel);
        }
        acl
    }

    pub fn authenticate(&self, channel_name: &str, user: MacAddr) -> AuthDecision {
        let listed = self.exceptions.get(&user).is_some_and(|c| c.contains(channel_name));
        if listed == self.deny_by_default {
            AuthDecision::Allow
        } else {
            AuthDecision::Deny
        }
    }

    pub fn set(&mut self, channel_name: &str, user: MacAddr, decision: AuthDecision) {
        let listed = (decision == AuthDecision::Allow) == self.deny_by_default;
        if listed {
            self.exceptions
                .entry(user)
                .or_default()
                .insert(channel_name.to_string());
        } else if let Some(c) = self.exceptions.get_mut(&user) {
            c.remove(channel_name);
            if c.is_empty() {
                self.exceptions.remove(&user);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JoinOutcome {
    /// The ONU already carried the channel; only its table changed.
    LocalJoin {
        cllid: Llid,
    },
    /// The request went to the OLT; `new_channel` when a CLLID was allocated.
    OltJoin {
        cllid: Llid,
        new_channel: bool,
    },
    Denied,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeaveOutcome {
    /// Other users on the ONU still watch the channel.
    Local,
    /// The ONU left the channel at the OLT; `stopped` when that ended the
    /// multicast.
    OnuRemoved { stopped: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UserInfo {
    pub mac: MacAddr,
    pub ip: Ipv4Addr,
    pub onu: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Invariant {
    LlidUniqueness,
    TableConsistency,
    MulticastIffSubscribed,
    DeliveryCorrectness,
    LlidBudget,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Invariant::LlidUniqueness => "llid-uniqueness",
            Invariant::TableConsistency => "table-consistency",
            Invariant::MulticastIffSubscribed => "multicast-iff-subscribed",
            Invariant::DeliveryCorrectness => "delivery-correctness",
            Invariant::LlidBudget => "llid-budget",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{invariant} violated: {detail}")]
pub struct InvariantViolation {
    pub invariant: Invariant,
    pub detail: String,
}

fn violation(invariant: Invariant, detail: impl Into<String>) -> InvariantViolation {
    InvariantViolation {
        invariant,
        detail: detail.into(),
    }
}

/// One OLT, its ONUs and their users, with channel join/leave orchestrated
/// across the ONU controller and the OLT engine.
#[derive(Clone, Debug)]
pub struct IptvNetwork {
    olt: Olt,
    onu_macs: Vec<MacAddr>,
    onus: Vec<Option<Onu>>,
    users: Vec<UserInfo>,
    acl: AccessList,
    /// Ground truth of who watches what, kept independently of the tables.
    /// Keyed (onu, channel, user) so it walks in the same order as the ONU
    /// tables.
    memberships: BTreeSet<(usize, String, usize)>,
}

impl IptvNetwork {
    pub fn new(n_onus: usize, users_per_onu: usize, acl: AccessList) -> Self {
        let onu_macs = (0..n_onus).map(|i| MacAddr(0x02_00_00_00_00_00 | i as u64)).collect();
        let users = (0..n_onus * users_per_onu)
            .map(|u| UserInfo {
                mac: MacAddr(0x02_00_01_00_00_00 | u as u64),
                ip: Ipv4Addr::new(10, (u >> 16) as u8, (u >> 8) as u8, u as u8),
                onu: u / users_per_onu.max(1),
            })
            .collect();
        Self {
            olt: Olt::new(),
            onu_macs,
            onus: vec![None; n_onus],
            users,
            acl,
            memberships: BTreeSet::new(),
        }
    }

    pub fn olt(&self) -> &Olt {
        &self.olt
    }

    pub fn onu(&self, index: usize) -> Option<&Onu> {
        self.onus.get(index).and_then(Option::as_ref)
    }

    pub fn n_onus(&self) -> usize {
        self.onus.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn user(&self, user: usize) -> Result<UserInfo, ProtocolError> {
        self.users.get(user).copied().ok_or(ProtocolError::UnknownUser(user))
    }

    pub fn acl_mut(&mut self) -> &mut AccessList {
        &mut self.acl
    }

    pub fn is_joined(&self, user: usize, channel_name: &str) -> bool {
        self.users
            .get(user)
            .is_some_and(|u| self.memberships.contains(&(u.onu, channel_name.to_string(), user)))
    }

    pub fn memberships(&self) -> impl Iterator<Item = (usize, &str)> {
        self.memberships.iter().map(|(_, c, u)| (*u, c.as_str()))
    }

    pub fn register(&mut self, onu: usize) -> Result<Llid, ProtocolError> {
        let mac = *self.onu_macs.get(onu).ok_or(ProtocolError::UnknownOnuIndex(onu))?;
        let llid = self.olt.register_onu(mac)?;
        self.onus[onu] = Some(Onu::new(mac, llid));
        Ok(llid)
    }

    pub fn is_registered(&self, onu: usize) -> bool {
        self.onu(onu).is_some()
    }

    pub fn join_channel(&mut self, user: usize, channel_name: &str) -> Result<JoinOutcome, ProtocolError> {
        let info = self.user(user)?;
        if self.onu(info.onu).is_none() {
            return Err(ProtocolError::NotRegistered(info.onu));
        }
        if self.acl.authenticate(channel_name, info.mac) == AuthDecision::Deny {
            return Ok(JoinOutcome::Denied);
        }
        if self.is_joined(user, channel_name) {
            return Err(ProtocolError::AlreadyJoined {
                user,
                channel: channel_name.to_string(),
            });
        }
        let onu = self.onus[info.onu].as_mut().expect("registered");
        let outcome = if let Some(cllid) = onu.channel_llid(channel_name) {
            onu.add_table(cllid, channel_name, info.mac, info.ip)?;
            JoinOutcome::LocalJoin { cllid }
        } else {
            let (cllid, new_channel) = match self.olt.request_llid(channel_name) {
                Some(c) => (c, false),
                None => (self.olt.add_llid(channel_name)?, true),
            };
            self.olt.add_onu(channel_name, onu.llid())?;
            onu.add_table(cllid, channel_name, info.mac, info.ip)?;
            JoinOutcome::OltJoin { cllid, new_channel }
        };
        self.memberships.insert((info.onu, channel_name.to_string(), user));
        Ok(outcome)
    }

    pub fn leave_channel(&mut self, user: usize, channel_name: &str) -> Result<LeaveOutcome, ProtocolError> {
        let info = self.user(user)?;
        if !self.is_joined(user, channel_name) {
            return Err(ProtocolError::NotJoined {
                user,
                channel: channel_name.to_string(),
            });
        }
        let onu = self.onus[info.onu]
            .as_mut()
            .ok_or(ProtocolError::NotRegistered(info.onu))?;
        let cllid = onu
            .channel_llid(channel_name)
            .ok_or_else(|| ProtocolError::MissingRow {
                channel: channel_name.to_string(),
                user: info.mac,
            })?;
        let last = onu.remove_table(cllid, channel_name, info.mac)?;
        self.memberships.remove(&(info.onu, channel_name.to_string(), user));
        if last {
            let stopped = self.olt.delete_onu(channel_name, onu.llid())?;
            Ok(LeaveOutcome::OnuRemoved { stopped })
        } else {
            Ok(LeaveOutcome::Local)
        }
    }

    /// Withdraws authorization; a user currently watching is cut off.
    /// Returns the teardown when the user was joined.
    pub fn revoke(&mut self, user: usize, channel_name: &str) -> Result<Option<LeaveOutcome>, ProtocolError> {
        let info = self.user(user)?;
        self.acl.set(channel_name, info.mac, AuthDecision::Deny);
        if self.is_joined(user, channel_name) {
            self.leave_channel(user, channel_name).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn grant(&mut self, user: usize, channel_name: &str) -> Result<(), ProtocolError> {
        let info = self.user(user)?;
        self.acl.set(channel_name, info.mac, AuthDecision::Allow);
        Ok(())
    }

    /// ONU indices whose filter accepts a frame tagged for `cllid`.
    pub fn accepting_onus(&self, preamble: FramePreamble) -> Vec<usize> {
        self.onus
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.as_ref().filter(|o| o.frame_accept(preamble)).map(|_| i))
            .collect()
    }

    /// Users on `onu` that currently watch `channel_name`.
    pub fn viewers_on(&self, onu: usize, channel_name: &str) -> Vec<usize> {
        let Some(o) = self.onu(onu) else {
            return Vec::new();
        };
        let macs: BTreeSet<MacAddr> = o.users_of(channel_name).collect();
        self.users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.onu == onu && macs.contains(&u.mac))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn check_invariants(&self) -> Result<(), InvariantViolation> {
        let olt = &self.olt;

        let mut all: Vec<Llid> = Vec::with_capacity(self.onus.len() + olt.table().len());
        all.extend(olt.registered_onus().map(|(_, l)| l));
        all.extend(olt.table().map(|r| r.channel_llid));
        if all.len() > Llid::POOL_SIZE {
            return Err(violation(
                Invariant::LlidBudget,
                format!("{} LLIDs allocated", all.len()),
            ));
        }
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(violation(Invariant::LlidUniqueness, "duplicate LLID in use"));
        }
        if all.contains(&Llid::BROADCAST) {
            return Err(violation(Invariant::LlidUniqueness, "broadcast LLID allocated"));
        }
        if olt.pool().allocated() != all.len() || !all.iter().all(|l| olt.pool().is_allocated(*l)) {
            return Err(violation(
                Invariant::LlidUniqueness,
                format!(
                    "pool says {} allocated, tables hold {}",
                    olt.pool().allocated(),
                    all.len()
                ),
            ));
        }

        // Row level: ONU rows and memberships walk in the same (onu, channel,
        // user) order, so they must match pairwise.
        let mut viewers = self.memberships.iter();
        let mut by_cllid: Vec<(Llid, &OltTableRow)> = olt.table().map(|r| (r.channel_llid, r)).collect();
        by_cllid.sort_unstable_by_key(|(l, _)| *l);
        let mut by_llid: BTreeMap<Llid, usize> = BTreeMap::new();
        let mut subscriptions = 0usize;
        for (i, onu) in self.onus.iter().enumerate() {
            let Some(onu) = onu else { continue };
            by_llid.insert(onu.llid(), i);
            if olt.onu_llid(onu.mac()) != Some(onu.llid()) {
                return Err(violation(
                    Invariant::TableConsistency,
                    format!("onu {i} LLID unknown to OLT"),
                ));
            }
            let mut derived: Vec<Llid> = Vec::with_capacity(onu.assigned_cllids().len());
            let mut last: Option<(&str, Llid)> = None;
            for r in onu.rows() {
                let m = viewers.next();
                let expected = m.map(|(o, ch, u)| (*o, ch.as_str(), self.users[*u].mac));
                if expected != Some((i, r.channel_name.as_str(), r.user_mac)) {
                    return Err(violation(
                        Invariant::TableConsistency,
                        format!(
                            "onu {i} row ({}, {}) vs membership {expected:?}",
                            r.channel_name, r.user_mac
                        ),
                    ));
                }
                if let Some((name, cllid)) = last {
                    if name == r.channel_name {
                        if cllid != r.channel_llid {
                            return Err(violation(
                                Invariant::TableConsistency,
                                format!("onu {i} channel {name} rows disagree on CLLID"),
                            ));
                        }
                        continue;
                    }
                }
                last = Some((&r.channel_name, r.channel_llid));
                derived.push(r.channel_llid);
                subscriptions += 1;
                let ok = by_cllid
                    .binary_search_by_key(&r.channel_llid, |(l, _)| *l)
                    .is_ok_and(|k| {
                        by_cllid[k].1.channel_name == r.channel_name && by_cllid[k].1.onu_llids.contains(&onu.llid())
                    });
                if !ok {
                    return Err(violation(
                        Invariant::TableConsistency,
                        format!(
                            "onu {i} has channel {} on {}, olt disagrees",
                            r.channel_name, r.channel_llid
                        ),
                    ));
                }
            }
            derived.sort_unstable();
            if !derived.iter().eq(onu.assigned_cllids().iter()) {
                return Err(violation(
                    Invariant::TableConsistency,
                    format!("onu {i} assigned CLLIDs stale"),
                ));
            }
        }
        if let Some((o, ch, u)) = viewers.next() {
            return Err(violation(
                Invariant::TableConsistency,
                format!("membership ({o}, {ch}, {u}) has no onu row"),
            ));
        }

        // Channel level: every OLT subscription was matched by an ONU above.
        let mut olt_subscriptions = 0usize;
        for r in olt.table() {
            if let Some(l) = r.onu_llids.iter().find(|l| !by_llid.contains_key(l)) {
                return Err(violation(
                    Invariant::TableConsistency,
                    format!("channel {} lists unknown ONU {l}", r.channel_name),
                ));
            }
            olt_subscriptions += r.onu_llids.len();
        }
        if olt_subscriptions != subscriptions {
            return Err(violation(
                Invariant::TableConsistency,
                format!("olt holds {olt_subscriptions} subscriptions, onu tables {subscriptions}"),
            ));
        }

        for r in olt.table() {
            if olt.is_streaming(r.channel_llid) == r.onu_llids.is_empty() {
                return Err(violation(
                    Invariant::MulticastIffSubscribed,
                    format!(
                        "channel {} streaming={} subscribers={}",
                        r.channel_name,
                        olt.is_streaming(r.channel_llid),
                        r.onu_llids.len()
                    ),
                ));
            }
        }
        if let Some(c) = olt
            .streaming()
            .find(|c| by_cllid.binary_search_by_key(c, |(l, _)| *l).is_err())
        {
            return Err(violation(
                Invariant::MulticastIffSubscribed,
                format!("streaming unknown CLLID {c}"),
            ));
        }

        for r in olt.table() {
            let preamble = FramePreamble::point_to_point(r.channel_llid);
            for (i, onu) in self.onus.iter().enumerate() {
                let Some(onu) = onu else { continue };
                let accepted = onu.frame_accept(preamble);
                if accepted != r.onu_llids.contains(&onu.llid()) {
                    return Err(violation(
                        Invariant::DeliveryCorrectness,
                        format!("channel {}: onu {i} accepted={accepted}", r.channel_name),
                    ));
                }
            }
        }
        Ok(())
    }
}
