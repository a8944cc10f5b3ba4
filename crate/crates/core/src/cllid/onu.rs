use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use super::{FramePreamble, Llid, MacAddr, Mode, ProtocolError};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct OnuTableRow {
    pub channel_name: String,
    pub channel_llid: Llid,
    pub user_mac: MacAddr,
    /// Kept for completeness; nothing reads it.
    pub user_ip: Ipv4Addr,
}

/// ONU side of the control plane: its own LLID, the per-user channel table
/// and the channel LLIDs derived from it.
#[derive(Clone, Debug)]
pub struct Onu {
    mac: MacAddr,
    llid: Llid,
    /// channel name -> user -> row
    table: BTreeMap<String, BTreeMap<MacAddr, OnuTableRow>>,
    assigned_cllids: BTreeSet<Llid>,
}

impl Onu {
    pub fn new(mac: MacAddr, llid: Llid) -> Self {
        Self {
            mac,
            llid,
            table: BTreeMap::new(),
            assigned_cllids: BTreeSet::new(),
        }
    }

    pub fn mac(&self) -> MacAddr {
        self.mac
    }

    pub fn llid(&self) -> Llid {
        self.llid
    }

    pub fn assigned_cllids(&self) -> &BTreeSet<Llid> {
        &self.assigned_cllids
    }

    pub fn rows(&self) -> impl Iterator<Item = &OnuTableRow> {
        self.table.values().flat_map(|users| users.values())
    }

    /// True when the channel is already delivered to this ONU, so a join can
    /// be served locally.
    pub fn check_local(&self, channel_name: &str) -> bool {
        self.channel_llid(channel_name).is_some()
    }

    pub fn channel_llid(&self, channel_name: &str) -> Option<Llid> {
        self.table
            .get(channel_name)
            .and_then(|users| users.values().next())
            .map(|r| r.channel_llid)
    }

    pub fn users_of(&self, channel_name: &str) -> impl Iterator<Item = MacAddr> + '_ {
        self.table
            .get(channel_name)
            .into_iter()
            .flat_map(|users| users.keys().copied())
    }

    pub fn has_row(&self, channel_name: &str, user_mac: MacAddr) -> bool {
        self.table
            .get(channel_name)
            .is_some_and(|users| users.contains_key(&user_mac))
    }

    pub fn add_table(
        &mut self,
        cllid: Llid,
        channel_name: &str,
        user_mac: MacAddr,
        user_ip: Ipv4Addr,
    ) -> Result<(), ProtocolError> {
        if self.has_row(channel_name, user_mac) {
            return Err(ProtocolError::DuplicateRow {
                channel: channel_name.to_string(),
                user: user_mac,
            });
        }
        if let Some(existing) = self.channel_llid(channel_name) {
            if existing != cllid {
                return Err(ProtocolError::CllidMismatch {
                    channel: channel_name.to_string(),
                    expected: existing,
                    got: cllid,
                });
            }
        }
        self.table.entry(channel_name.to_string()).or_default().insert(
            user_mac,
            OnuTableRow {
                channel_name: channel_name.to_string(),
                channel_llid: cllid,
                user_mac,
                user_ip,
            },
        );
        self.recompute_cllids();
        Ok(())
    }

    /// Removes a user's row. Returns `true` when it was the channel's last
    /// user on this ONU, in which case the OLT should drop the ONU from the
    /// channel.
    pub fn remove_table(&mut self, cllid: Llid, channel_name: &str, user_mac: MacAddr) -> Result<bool, ProtocolError> {
        let users = self.table.get_mut(channel_name);
        match users.as_ref().and_then(|u| u.get(&user_mac)) {
            Some(row) if row.channel_llid == cllid => {}
            _ => {
                return Err(ProtocolError::MissingRow {
                    channel: channel_name.to_string(),
                    user: user_mac,
                })
            }
        }
        let users = users.expect("row exists");
        users.remove(&user_mac);
        if users.is_empty() {
            self.table.remove(channel_name);
        }
        self.recompute_cllids();
        Ok(!self.check_local(channel_name))
    }

    fn recompute_cllids(&mut self) {
        self.assigned_cllids = self.rows().map(|r| r.channel_llid).collect();
    }

    /// Preamble filter: point-to-point frames must carry this ONU's LLID or
    /// one of its channel LLIDs; shared-medium and broadcast frames pass.
    pub fn frame_accept(&self, p: FramePreamble) -> bool {
        match p.mode {
            Mode::SharedMedium => true,
            Mode::PointToPoint => {
                p.llid == self.llid || p.llid.is_broadcast() || self.assigned_cllids.contains(&p.llid)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn llid(v: u16) -> Llid {
        Llid::new(v).unwrap()
    }

    fn ip() -> Ipv4Addr {
        Ipv4Addr::new(10, 0, 0, 1)
    }

    #[test]
    fn local_check_follows_table() {
        let mut onu = Onu::new(MacAddr(1), llid(3));
        assert!(!onu.check_local("news"));
        onu.add_table(llid(9), "news", MacAddr(100), ip()).unwrap();
        onu.add_table(llid(9), "news", MacAddr(101), ip()).unwrap();
        assert!(onu.check_local("news"));
        assert_eq!(onu.rows().count(), 2);
        assert_eq!(onu.assigned_cllids().len(), 1);
        assert!(!onu.remove_table(llid(9), "news", MacAddr(100)).unwrap());
        assert!(onu.remove_table(llid(9), "news", MacAddr(101)).unwrap());
        assert!(!onu.check_local("news"));
        assert!(onu.assigned_cllids().is_empty());
    }

    #[test]
    fn table_errors() {
        let mut onu = Onu::new(MacAddr(1), llid(3));
        onu.add_table(llid(9), "news", MacAddr(100), ip()).unwrap();
        assert!(matches!(
            onu.add_table(llid(9), "news", MacAddr(100), ip()),
            Err(ProtocolError::DuplicateRow { .. })
        ));
        assert!(matches!(
            onu.add_table(llid(8), "news", MacAddr(102), ip()),
            Err(ProtocolError::CllidMismatch { .. })
        ));
        assert!(matches!(
            onu.remove_table(llid(9), "news", MacAddr(555)),
            Err(ProtocolError::MissingRow { .. })
        ));
    }

    #[test]
    fn users_of_prefix_only() {
        let mut onu = Onu::new(MacAddr(1), llid(3));
        onu.add_table(llid(9), "ch1", MacAddr(5), ip()).unwrap();
        onu.add_table(llid(10), "ch10", MacAddr(6), ip()).unwrap();
        assert_eq!(onu.users_of("ch1").collect::<Vec<_>>(), vec![MacAddr(5)]);
        assert_eq!(onu.channel_llid("ch1"), Some(llid(9)));
        assert_eq!(onu.channel_llid("ch"), None);
    }

    #[test]
    fn filtering_rules() {
        let mut onu = Onu::new(MacAddr(1), llid(3));
        onu.add_table(llid(9), "news", MacAddr(100), ip()).unwrap();
        assert!(onu.frame_accept(FramePreamble::point_to_point(llid(3))));
        assert!(onu.frame_accept(FramePreamble::point_to_point(llid(9))));
        assert!(!onu.frame_accept(FramePreamble::point_to_point(llid(4))));
        assert!(onu.frame_accept(FramePreamble::point_to_point(Llid::BROADCAST)));
        assert!(onu.frame_accept(FramePreamble {
            mode: Mode::SharedMedium,
            llid: llid(1234),
        }));
    }
}
