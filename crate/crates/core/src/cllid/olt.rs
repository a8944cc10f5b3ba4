use std::collections::{BTreeMap, BTreeSet};

use super::{Llid, LlidPool, MacAddr, ProtocolError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OltTableRow {
    pub channel_llid: Llid,
    pub channel_name: String,
    pub onu_llids: BTreeSet<Llid>,
}

/// OLT side of the control plane: ONU registration, the channel table and
/// the set of channels currently being multicast.
#[derive(Clone, Debug, Default)]
pub struct Olt {
    pool: LlidPool,
    onus: BTreeMap<MacAddr, Llid>,
    channels: BTreeMap<String, OltTableRow>,
    by_cllid: BTreeMap<Llid, String>,
    streaming: BTreeSet<Llid>,
}

impl Olt {
    pub fn new() -> Self {
        Self::default()
    }

    /// REGISTER / REGISTER_ACK: binds a fresh LLID to the ONU's MAC.
    pub fn register_onu(&mut self, onu_mac: MacAddr) -> Result<Llid, ProtocolError> {
        if self.onus.contains_key(&onu_mac) {
            return Err(ProtocolError::DuplicateMac(onu_mac));
        }
        let llid = self.pool.allocate()?;
        self.onus.insert(onu_mac, llid);
        Ok(llid)
    }

    pub fn onu_llid(&self, onu_mac: MacAddr) -> Option<Llid> {
        self.onus.get(&onu_mac).copied()
    }

    pub fn registered_onus(&self) -> impl Iterator<Item = (MacAddr, Llid)> + '_ {
        self.onus.iter().map(|(m, l)| (*m, *l))
    }

    /// The channel's CLLID if it is already multicast.
    pub fn request_llid(&self, channel_name: &str) -> Option<Llid> {
        self.channels.get(channel_name).map(|r| r.channel_llid)
    }

    pub fn add_llid(&mut self, channel_name: &str) -> Result<Llid, ProtocolError> {
        if self.channels.contains_key(channel_name) {
            return Err(ProtocolError::ChannelExists(channel_name.to_string()));
        }
        let cllid = self.pool.allocate()?;
        self.channels.insert(
            channel_name.to_string(),
            OltTableRow {
                channel_llid: cllid,
                channel_name: channel_name.to_string(),
                onu_llids: BTreeSet::new(),
            },
        );
        self.by_cllid.insert(cllid, channel_name.to_string());
        Ok(cllid)
    }

    /// Subscribes an ONU to a channel and starts multicasting it. Adding an
    /// ONU that is already subscribed is a no-op.
    pub fn add_onu(&mut self, channel_name: &str, onu_llid: Llid) -> Result<(), ProtocolError> {
        if !self.onus.values().any(|l| *l == onu_llid) {
            return Err(ProtocolError::UnknownOnu(onu_llid));
        }
        let row = self
            .channels
            .get_mut(channel_name)
            .ok_or_else(|| ProtocolError::UnknownChannel(channel_name.to_string()))?;
        row.onu_llids.insert(onu_llid);
        self.streaming.insert(row.channel_llid);
        Ok(())
    }

    /// Unsubscribes an ONU. Returns `true` when that emptied the row and the
    /// channel was stopped.
    pub fn delete_onu(&mut self, channel_name: &str, onu_llid: Llid) -> Result<bool, ProtocolError> {
        let row = self
            .channels
            .get_mut(channel_name)
            .ok_or_else(|| ProtocolError::UnknownChannel(channel_name.to_string()))?;
        if !row.onu_llids.remove(&onu_llid) {
            return Err(ProtocolError::OnuNotSubscribed {
                channel: channel_name.to_string(),
                onu: onu_llid,
            });
        }
        if row.onu_llids.is_empty() {
            let cllid = row.channel_llid;
            self.stop_channel(cllid)?;
            return Ok(true);
        }
        Ok(false)
    }

    /// Stops multicasting, removes the row and frees the CLLID.
    pub fn stop_channel(&mut self, cllid: Llid) -> Result<(), ProtocolError> {
        let name = self
            .by_cllid
            .get(&cllid)
            .cloned()
            .ok_or(ProtocolError::UnknownCllid(cllid))?;
        if !self.channels[&name].onu_llids.is_empty() {
            return Err(ProtocolError::ChannelHasSubscribers(name));
        }
        self.streaming.remove(&cllid);
        self.channels.remove(&name);
        self.by_cllid.remove(&cllid);
        self.pool.release(cllid);
        Ok(())
    }

    pub fn is_streaming(&self, cllid: Llid) -> bool {
        self.streaming.contains(&cllid)
    }

    pub fn streaming(&self) -> impl Iterator<Item = Llid> + '_ {
        self.streaming.iter().copied()
    }

    pub fn channel(&self, channel_name: &str) -> Option<&OltTableRow> {
        self.channels.get(channel_name)
    }

    pub fn channel_by_cllid(&self, cllid: Llid) -> Option<&OltTableRow> {
        self.by_cllid.get(&cllid).and_then(|n| self.channels.get(n))
    }

    pub fn table(&self) -> impl ExactSizeIterator<Item = &OltTableRow> {
        self.channels.values()
    }

    pub fn pool(&self) -> &LlidPool {
        &self.pool
    }
}
