use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use super::{nanos_to_secs, secs_to_nanos, EventQueue, Link, Nanos, SimConfig, SimError};
use crate::cllid::{AccessList, FramePreamble, IptvNetwork, JoinOutcome};
use crate::metrics::{delay_stats, ipdv_series, jitter_stats, CacheCounters, MetricsReport};
use crate::segment_cache::{build_cache, Request, SegmentCache, SegmentId};
use crate::workload::{RecordKind, TraceRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlowClass {
    Vod,
    Live,
}

/// Where a packet entered the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PacketSource {
    OnuCache,
    OltCache,
    HeadOffice,
    Channel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PacketFate {
    InFlight,
    Delivered(Nanos),
    Lost,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PacketRecord {
    pub class: FlowClass,
    pub flow: u32,
    /// Position within the flow in sending order.
    pub seq: u32,
    pub user: u32,
    pub source: PacketSource,
    pub size: u32,
    pub created_at: Nanos,
    pub fate: PacketFate,
}

impl PacketRecord {
    pub fn delay(&self) -> Option<Nanos> {
        match self.fate {
            PacketFate::Delivered(t) => Some(t - self.created_at),
            _ => None,
        }
    }

    pub fn flow_label(&self) -> String {
        match self.class {
            FlowClass::Vod => format!("vod-{}", self.flow),
            FlowClass::Live => format!("live-{}", self.flow),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub report: MetricsReport,
    pub packets: Vec<PacketRecord>,
    pub event_hash: u64,
    pub events: u64,
}

impl SimOutput {
    /// Per-packet log: `flow_id,created_at,delivered_at`, with `LOST` for
    /// dropped packets and an empty field for packets still in flight.
    pub fn write_packet_log<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["flow_id", "created_at", "delivered_at"])?;
        for p in &self.packets {
            let delivered = match p.fate {
                PacketFate::Delivered(t) => nanos_to_secs(t).to_string(),
                PacketFate::Lost => "LOST".to_string(),
                PacketFate::InFlight => String::new(),
            };
            w.write_record([p.flow_label(), nanos_to_secs(p.created_at).to_string(), delivered])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Level {
    Onu(u32),
    Olt,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Event {
    /// VOD request reaches the user's ONU.
    Request(u32),
    /// Live join or leave reaches the user's ONU.
    Zap(u32),
    /// Missed run forwarded upstream to the OLT.
    OltFetch {
        flow: u32,
        onu: u32,
        user: u32,
        object_id: u32,
        start_payload: u64,
        n_payloads: u32,
        /// Offset of `start_payload` within the flow.
        offset: u32,
        /// Request arrival at the ONU.
        base: Nanos,
    },
    /// Join that had to go to the OLT.
    JoinAtOlt {
        user: u32,
        channel: u32,
    },
    FeederIn(u32),
    OnuIn(u32),
    DropIn(u32),
    Deliver(u32),
    PlayEnd {
        level: Level,
        seg: SegmentId,
    },
    ChannelTick {
        channel: u32,
        generation: u32,
    },
}

#[derive(Clone, Debug)]
struct Frame {
    preamble: FramePreamble,
    size: u32,
    first: u32,
    count: u32,
}

#[derive(Default)]
struct Totals {
    vod_requests: u64,
    olt_fetches: u64,
    head_office_segments: u64,
    joins_local: u64,
    joins_olt: u64,
    joins_denied: u64,
    joins_cancelled: u64,
    leaves: u64,
    control_rejected: u64,
    live_frames: u64,
    onu_filter_rejects: u64,
    filtered_copies: u64,
    peak_llids: u64,
}

#[derive(Default, Clone, Copy)]
struct ClassCount {
    created: u64,
    delivered: u64,
    lost: u64,
}

struct World<'a> {
    cfg: &'a SimConfig,
    trace: &'a [TraceRecord],
    ppt_ns: Nanos,
    live_end: Nanos,
    net: IptvNetwork,
    onu_caches: Vec<Box<dyn SegmentCache + Send>>,
    olt_cache: Box<dyn SegmentCache + Send>,
    onu_counters: Vec<CacheCounters>,
    olt_counters: CacheCounters,
    feeder: Link,
    drops: Vec<Link>,
    frames: Vec<Frame>,
    packets: Vec<PacketRecord>,
    counts: [ClassCount; 2],
    totals: Totals,
    next_vod_flow: u32,
    channel_ids: Vec<u32>,
    channel_names: Vec<String>,
    channel_active: Vec<bool>,
    channel_generation: Vec<u32>,
    channel_viewers: Vec<BTreeSet<u32>>,
    pending_joins: BTreeSet<(u32, u32)>,
    sessions: BTreeMap<(u32, u32), (u32, u32)>,
    next_live_flow: u32,
}

type Queue = EventQueue<Event>;

fn class_index(c: FlowClass) -> usize {
    match c {
        FlowClass::Vod => 0,
        FlowClass::Live => 1,
    }
}

impl<'a> World<'a> {
    fn new(cfg: &'a SimConfig, trace: &'a [TraceRecord]) -> Result<Self, SimError> {
        let t = &cfg.topology;
        let layout = cfg.workload.layout();
        let mut net = IptvNetwork::new(t.n_onus as usize, t.users_per_onu as usize, AccessList::allow_all());
        for onu in 0..t.n_onus as usize {
            net.register(onu)?;
        }
        let mut onu_caches = Vec::new();
        for _ in 0..t.n_onus {
            onu_caches.push(build_cache(cfg.onu_cache.policy, cfg.onu_cache.config)?);
        }

        let mut by_name: HashMap<&str, u32> = HashMap::new();
        let mut channel_names = Vec::new();
        let mut channel_ids = vec![u32::MAX; trace.len()];
        for (i, r) in trace.iter().enumerate() {
            if let Some(name) = r.channel_name.as_deref() {
                let id = *by_name.entry(name).or_insert_with(|| {
                    channel_names.push(name.to_string());
                    channel_names.len() as u32 - 1
                });
                channel_ids[i] = id;
            }
        }
        let n_channels = channel_names.len();

        Ok(Self {
            cfg,
            trace,
            ppt_ns: secs_to_nanos(layout.payload_playback_time),
            live_end: secs_to_nanos(cfg.workload.duration),
            net,
            onu_caches,
            olt_cache: build_cache(cfg.olt_cache.policy, cfg.olt_cache.config)?,
            onu_counters: vec![CacheCounters::default(); t.n_onus as usize],
            olt_counters: CacheCounters::default(),
            feeder: Link::new(t.feeder),
            drops: (0..t.n_onus).map(|_| Link::new(t.drop)).collect(),
            frames: Vec::new(),
            packets: Vec::new(),
            counts: [ClassCount::default(); 2],
            totals: Totals::default(),
            next_vod_flow: 0,
            channel_ids,
            channel_names,
            channel_active: vec![false; n_channels],
            channel_generation: vec![0; n_channels],
            channel_viewers: vec![BTreeSet::new(); n_channels],
            pending_joins: BTreeSet::new(),
            sessions: BTreeMap::new(),
            next_live_flow: 0,
        })
    }

    fn onu_of(&self, user: u32) -> u32 {
        user / self.cfg.topology.users_per_onu
    }

    fn new_packet(&mut self, p: PacketRecord) -> u32 {
        self.counts[class_index(p.class)].created += 1;
        self.packets.push(p);
        self.packets.len() as u32 - 1
    }

    fn lose(&mut self, pkt: u32) {
        let p = &mut self.packets[pkt as usize];
        debug_assert_eq!(p.fate, PacketFate::InFlight);
        p.fate = PacketFate::Lost;
        self.counts[class_index(p.class)].lost += 1;
    }

    fn handle(&mut self, q: &mut Queue, now: Nanos, ev: Event) -> Result<(), SimError> {
        match ev {
            Event::Request(i) => self.on_request(q, now, i),
            Event::Zap(i) => self.on_zap(q, now, i),
            Event::OltFetch {
                flow,
                onu,
                user,
                object_id,
                start_payload,
                n_payloads,
                offset,
                base,
            } => self.on_olt_fetch(
                q,
                now,
                flow,
                onu,
                user,
                Request::new(object_id, start_payload, n_payloads, nanos_to_secs(now)),
                offset,
                base,
            ),
            Event::JoinAtOlt { user, channel } => {
                if self.pending_joins.remove(&(user, channel)) {
                    self.do_join(q, now, user, channel)?;
                }
                Ok(())
            }
            Event::FeederIn(frame) => {
                let f = &self.frames[frame as usize];
                match self.feeder.transmit(now, f.size) {
                    Some(at) => {
                        q.schedule(at, Event::OnuIn(frame))?;
                    }
                    None => {
                        let (first, count) = (f.first, f.count);
                        for p in first..first + count {
                            self.lose(p);
                        }
                    }
                }
                Ok(())
            }
            Event::OnuIn(frame) => self.on_onu_in(q, now, frame),
            Event::DropIn(pkt) => self.drop_transmit(q, now, pkt),
            Event::Deliver(pkt) => {
                let p = &mut self.packets[pkt as usize];
                debug_assert_eq!(p.fate, PacketFate::InFlight);
                p.fate = PacketFate::Delivered(now);
                self.counts[class_index(p.class)].delivered += 1;
                Ok(())
            }
            Event::PlayEnd { level, seg } => {
                match level {
                    Level::Onu(o) => self.onu_caches[o as usize].end_play(seg)?,
                    Level::Olt => self.olt_cache.end_play(seg)?,
                }
                Ok(())
            }
            Event::ChannelTick { channel, generation } => self.on_tick(q, now, channel, generation),
        }
    }

    fn on_request(&mut self, q: &mut Queue, now: Nanos, i: u32) -> Result<(), SimError> {
        let r = &self.trace[i as usize];
        let user = r.user_id;
        let onu = self.onu_of(user);
        let (object_id, start) = (r.object_id.unwrap_or(0), r.start_payload.unwrap_or(0));
        let req = Request::new(object_id, start, r.n_payloads.unwrap_or(0), nanos_to_secs(now));
        let flow = self.next_vod_flow;
        self.next_vod_flow += 1;
        self.totals.vod_requests += 1;

        let decisions = self.onu_caches[onu as usize].handle_request(&req)?;
        let mut offset = 0u32;
        let mut run: Option<(u32, u32)> = None;
        let mut runs = Vec::new();
        for d in &decisions {
            self.onu_counters[onu as usize].record(d);
            let end = offset + d.payloads;
            self.pin(q, Level::Onu(onu), d.segment, now + Nanos::from(end) * self.ppt_ns)?;
            if d.decision.is_hit() {
                for j in offset..end {
                    let created = now + Nanos::from(j) * self.ppt_ns;
                    let pkt = self.new_packet(PacketRecord {
                        class: FlowClass::Vod,
                        flow,
                        seq: j,
                        user,
                        source: PacketSource::OnuCache,
                        size: self.cfg.workload.payload_bytes,
                        created_at: created,
                        fate: PacketFate::InFlight,
                    });
                    q.schedule(created, Event::DropIn(pkt))?;
                }
                if let Some(r) = run.take() {
                    runs.push(r);
                }
            } else {
                let r = run.get_or_insert((offset, 0));
                r.1 += d.payloads;
            }
            offset = end;
        }
        runs.extend(run);
        for (off, n) in runs {
            self.totals.olt_fetches += 1;
            q.schedule(
                now + self.cfg.topology.upstream_latency_ns,
                Event::OltFetch {
                    flow,
                    onu,
                    user,
                    object_id,
                    start_payload: start + u64::from(off),
                    n_payloads: n,
                    offset: off,
                    base: now,
                },
            )?;
        }
        Ok(())
    }

    /// Pins a segment the level holds until its playback from there ends.
    fn pin(&mut self, q: &mut Queue, level: Level, seg: SegmentId, until: Nanos) -> Result<(), SimError> {
        let cache = match level {
            Level::Onu(o) => &mut self.onu_caches[o as usize],
            Level::Olt => &mut self.olt_cache,
        };
        if cache.contains(seg) {
            cache.start_play(seg)?;
            q.schedule(until, Event::PlayEnd { level, seg })?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn on_olt_fetch(
        &mut self,
        q: &mut Queue,
        now: Nanos,
        flow: u32,
        onu: u32,
        user: u32,
        req: Request,
        offset: u32,
        base: Nanos,
    ) -> Result<(), SimError> {
        let decisions = self.olt_cache.handle_request(&req)?;
        let shift = now - base;
        let llid = self.net.onu(onu as usize).expect("registered at start").llid();
        let mut j0 = offset;
        for d in &decisions {
            self.olt_counters.record(d);
            let end = j0 + d.payloads;
            self.pin(q, Level::Olt, d.segment, base + shift + Nanos::from(end) * self.ppt_ns)?;
            let (source, hop) = if d.decision.is_hit() {
                (PacketSource::OltCache, 0)
            } else {
                self.totals.head_office_segments += 1;
                (PacketSource::HeadOffice, self.cfg.topology.head_office_latency_ns)
            };
            for j in j0..end {
                let created = base + shift + Nanos::from(j) * self.ppt_ns;
                let pkt = self.new_packet(PacketRecord {
                    class: FlowClass::Vod,
                    flow,
                    seq: j,
                    user,
                    source,
                    size: self.cfg.workload.payload_bytes,
                    created_at: created,
                    fate: PacketFate::InFlight,
                });
                self.frames.push(Frame {
                    preamble: FramePreamble::point_to_point(llid),
                    size: self.cfg.workload.payload_bytes,
                    first: pkt,
                    count: 1,
                });
                q.schedule(created + hop, Event::FeederIn(self.frames.len() as u32 - 1))?;
            }
            j0 = end;
        }
        Ok(())
    }

    fn on_onu_in(&mut self, q: &mut Queue, now: Nanos, frame: u32) -> Result<(), SimError> {
        let f = self.frames[frame as usize].clone();
        // The splitter hands every ONU a copy; each filters on the preamble.
        let accepting: Vec<bool> = (0..self.cfg.topology.n_onus as usize)
            .map(|o| self.net.onu(o).is_some_and(|onu| onu.frame_accept(f.preamble)))
            .collect();
        self.totals.onu_filter_rejects += accepting.iter().filter(|a| !**a).count() as u64;
        for pkt in f.first..f.first + f.count {
            let onu = self.onu_of(self.packets[pkt as usize].user);
            if accepting[onu as usize] {
                self.drop_transmit(q, now, pkt)?;
            } else {
                self.totals.filtered_copies += 1;
                self.lose(pkt);
            }
        }
        Ok(())
    }

    fn drop_transmit(&mut self, q: &mut Queue, now: Nanos, pkt: u32) -> Result<(), SimError> {
        let p = &self.packets[pkt as usize];
        let onu = self.onu_of(p.user);
        match self.drops[onu as usize].transmit(now, p.size) {
            Some(at) => {
                q.schedule(at, Event::Deliver(pkt))?;
            }
            None => self.lose(pkt),
        }
        Ok(())
    }

    fn on_zap(&mut self, q: &mut Queue, now: Nanos, i: u32) -> Result<(), SimError> {
        let r = &self.trace[i as usize];
        let user = r.user_id;
        let channel = self.channel_ids[i as usize];
        let name = self.channel_names[channel as usize].clone();
        match r.kind {
            RecordKind::Join => {
                if self.pending_joins.contains(&(user, channel)) || self.net.is_joined(user as usize, &name) {
                    self.totals.control_rejected += 1;
                    return Ok(());
                }
                let onu = self.onu_of(user) as usize;
                if self.net.onu(onu).is_some_and(|o| o.check_local(&name)) {
                    self.do_join(q, now, user, channel)?;
                } else {
                    self.pending_joins.insert((user, channel));
                    let t = &self.cfg.topology;
                    q.schedule(
                        now + t.upstream_latency_ns + t.metadata_latency_ns,
                        Event::JoinAtOlt { user, channel },
                    )?;
                }
            }
            RecordKind::Leave => {
                if self.pending_joins.remove(&(user, channel)) {
                    self.totals.joins_cancelled += 1;
                    self.totals.leaves += 1;
                } else if self.net.leave_channel(user as usize, &name).is_ok() {
                    self.totals.leaves += 1;
                    self.channel_viewers[channel as usize].remove(&user);
                    self.sessions.remove(&(user, channel));
                    self.sync_channel(q, now, channel)?;
                } else {
                    self.totals.control_rejected += 1;
                }
            }
            RecordKind::Vod => unreachable!("vod records are scheduled as requests"),
        }
        Ok(())
    }

    fn do_join(&mut self, q: &mut Queue, now: Nanos, user: u32, channel: u32) -> Result<(), SimError> {
        let name = self.channel_names[channel as usize].clone();
        match self.net.join_channel(user as usize, &name) {
            Ok(JoinOutcome::Denied) => self.totals.joins_denied += 1,
            Ok(outcome) => {
                match outcome {
                    JoinOutcome::LocalJoin { .. } => self.totals.joins_local += 1,
                    _ => self.totals.joins_olt += 1,
                }
                self.channel_viewers[channel as usize].insert(user);
                self.sessions.insert((user, channel), (self.next_live_flow, 0));
                self.next_live_flow += 1;
                self.totals.peak_llids = self.totals.peak_llids.max(self.net.olt().pool().allocated() as u64);
                self.sync_channel(q, now, channel)?;
            }
            Err(_) => self.totals.control_rejected += 1,
        }
        debug_assert!(self.net.check_invariants().is_ok());
        Ok(())
    }

    /// Starts or stops the channel's tick chain to match the OLT state.
    fn sync_channel(&mut self, q: &mut Queue, now: Nanos, channel: u32) -> Result<(), SimError> {
        let c = channel as usize;
        let streaming = self
            .net
            .olt()
            .request_llid(&self.channel_names[c])
            .is_some_and(|l| self.net.olt().is_streaming(l));
        if streaming && !self.channel_active[c] {
            self.channel_active[c] = true;
            self.channel_generation[c] += 1;
            if now <= self.live_end {
                q.schedule(
                    now,
                    Event::ChannelTick {
                        channel,
                        generation: self.channel_generation[c],
                    },
                )?;
            }
        } else if !streaming {
            self.channel_active[c] = false;
        }
        Ok(())
    }

    fn on_tick(&mut self, q: &mut Queue, now: Nanos, channel: u32, generation: u32) -> Result<(), SimError> {
        let c = channel as usize;
        if !self.channel_active[c] || self.channel_generation[c] != generation {
            return Ok(());
        }
        let Some(cllid) = self.net.olt().request_llid(&self.channel_names[c]) else {
            return Ok(());
        };
        let viewers: Vec<u32> = self.channel_viewers[c].iter().copied().collect();
        if !viewers.is_empty() {
            let size = self.cfg.live.packet_bytes;
            let first = self.packets.len() as u32;
            for &user in &viewers {
                let session = self.sessions.get_mut(&(user, channel)).expect("viewer has a session");
                let (flow, seq) = *session;
                session.1 += 1;
                self.new_packet(PacketRecord {
                    class: FlowClass::Live,
                    flow,
                    seq,
                    user,
                    source: PacketSource::Channel,
                    size,
                    created_at: now,
                    fate: PacketFate::InFlight,
                });
            }
            self.frames.push(Frame {
                preamble: FramePreamble::point_to_point(cllid),
                size,
                first,
                count: viewers.len() as u32,
            });
            self.totals.live_frames += 1;
            q.schedule(now, Event::FeederIn(self.frames.len() as u32 - 1))?;
        }
        let next = now + self.cfg.live.packet_interval_ns;
        if next <= self.live_end {
            q.schedule(next, Event::ChannelTick { channel, generation })?;
        }
        Ok(())
    }
}

fn validate_trace(cfg: &SimConfig, trace: &[TraceRecord]) -> Result<(), SimError> {
    let layout = cfg.workload.layout();
    let n_users = cfg.n_users();
    let mut last = f64::NEG_INFINITY;
    for (index, r) in trace.iter().enumerate() {
        let bad = |reason: String| SimError::InvalidTrace { index, reason };
        if !(r.time_s >= 0.0 && r.time_s.is_finite()) {
            return Err(bad(format!("time {} must be finite and >= 0", r.time_s)));
        }
        if r.time_s < last {
            return Err(bad("times must be non-decreasing".into()));
        }
        last = r.time_s;
        if r.user_id >= n_users {
            return Err(bad(format!(
                "user {} outside the topology's {n_users} users",
                r.user_id
            )));
        }
        match r.kind {
            RecordKind::Vod => {
                let (Some(o), Some(s), Some(n)) = (r.object_id, r.start_payload, r.n_payloads) else {
                    return Err(bad("vod record needs object_id, start_payload and n_payloads".into()));
                };
                if o >= cfg.workload.n_objects {
                    return Err(bad(format!("object {o} outside the catalogue")));
                }
                Request::new(o, s, n, r.time_s)
                    .validate(&layout)
                    .map_err(|e| bad(e.to_string()))?;
            }
            RecordKind::Join | RecordKind::Leave => {
                if r.channel_name.as_deref().is_none_or(str::is_empty) {
                    return Err(bad("live record needs channel_name".into()));
                }
            }
        }
    }
    Ok(())
}

/// Replays `trace` through the network and returns the metrics report, the
/// packet records and the event-log digest.
pub fn run_experiment(cfg: &SimConfig, trace: &[TraceRecord]) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    validate_trace(cfg, trace)?;
    let mut world = World::new(cfg, trace)?;
    let mut q: Queue = EventQueue::new();
    for (i, r) in trace.iter().enumerate() {
        let ev = match r.kind {
            RecordKind::Vod => Event::Request(i as u32),
            _ => Event::Zap(i as u32),
        };
        q.schedule(secs_to_nanos(r.time_s), ev)?;
    }
    let t_end = secs_to_nanos(cfg.workload.duration) + cfg.topology.drain_ns;
    let events = q.run_until(t_end, |q, now, ev| world.handle(q, now, ev))?;
    let event_hash = q.digest();
    let end = q.now();
    let report = build_report(cfg, &world, event_hash, events, end)?;
    Ok(SimOutput {
        report,
        packets: world.packets,
        event_hash,
        events,
    })
}

fn build_report(
    cfg: &SimConfig,
    w: &World<'_>,
    event_hash: u64,
    events: u64,
    end: Nanos,
) -> Result<MetricsReport, SimError> {
    let mut r = MetricsReport::new();
    r.push("meta", "seed", cfg.workload.seed);
    r.push("meta", "config_hash", format!("{:016x}", cfg.config_hash()));
    r.push("meta", "event_hash", format!("{event_hash:016x}"));
    r.push("meta", "events", events);
    r.push("meta", "sim_end_s", nanos_to_secs(end));
    r.push("meta", "onu_policy", cfg.onu_cache.policy.as_str());
    r.push("meta", "olt_policy", cfg.olt_cache.policy.as_str());

    let mut all_onu = CacheCounters::default();
    for c in &w.onu_counters {
        all_onu.merge(c);
    }
    r.push_cache("cache.onu", &all_onu);
    r.push_cache("cache.olt", &w.olt_counters);
    for (i, c) in w.onu_counters.iter().enumerate() {
        r.push_cache(&format!("cache.onu{i}"), c);
    }

    let mut in_flight_total = 0;
    for class in [FlowClass::Vod, FlowClass::Live] {
        let mut rows: Vec<(u32, u32, PacketFate, Nanos)> = w
            .packets
            .iter()
            .filter(|p| p.class == class)
            .map(|p| (p.flow, p.seq, p.fate, p.created_at))
            .collect();
        rows.sort_by_key(|r| (r.0, r.1));
        let in_flight = rows.iter().filter(|r| r.2 == PacketFate::InFlight).count() as u64;
        let counted = w.counts[class_index(class)];
        if counted.created != rows.len() as u64 || counted.created != counted.delivered + counted.lost + in_flight {
            return Err(SimError::Conservation(format!(
                "{class:?}: created {} records {} delivered {} lost {} in flight {in_flight}",
                counted.created,
                rows.len(),
                counted.delivered,
                counted.lost
            )));
        }
        in_flight_total += in_flight;

        let mut delays = Vec::new();
        let mut ipdv = Vec::new();
        for flow in rows.chunk_by(|a, b| a.0 == b.0) {
            let d: Vec<Option<f64>> = flow
                .iter()
                .map(|&(_, _, fate, created)| match fate {
                    PacketFate::Delivered(t) => Some(nanos_to_secs(t - created)),
                    _ => None,
                })
                .collect();
            delays.extend(d.iter().flatten());
            ipdv.extend(ipdv_series(&d));
        }
        let scope = match class {
            FlowClass::Vod => "flow.vod",
            FlowClass::Live => "flow.live",
        };
        r.push_flow_class(
            scope,
            counted.created,
            counted.delivered,
            counted.lost,
            &delay_stats(&delays),
            &jitter_stats(&ipdv),
        );
        r.push(scope, "packets_in_flight", in_flight);
    }

    let created: u64 = w.counts.iter().map(|c| c.created).sum();
    let delivered: u64 = w.counts.iter().map(|c| c.delivered).sum();
    let lost: u64 = w.counts.iter().map(|c| c.lost).sum();
    let t = &w.totals;
    r.push("totals", "packets_created", created);
    r.push("totals", "packets_delivered", delivered);
    r.push("totals", "packets_lost", lost);
    r.push("totals", "packets_in_flight", in_flight_total);
    r.push("totals", "loss_ratio", crate::metrics::loss_ratio(lost, created));
    r.push("totals", "feeder_drops", w.feeder.dropped());
    r.push(
        "totals",
        "drop_link_drops",
        w.drops.iter().map(Link::dropped).sum::<u64>(),
    );
    r.push("totals", "filtered_copies", t.filtered_copies);
    r.push("totals", "onu_filter_rejects", t.onu_filter_rejects);
    r.push("totals", "vod_requests", t.vod_requests);
    r.push("totals", "olt_fetches", t.olt_fetches);
    r.push("totals", "head_office_segments", t.head_office_segments);
    r.push("totals", "live_frames", t.live_frames);
    r.push("totals", "joins_local", t.joins_local);
    r.push("totals", "joins_olt", t.joins_olt);
    r.push("totals", "joins_denied", t.joins_denied);
    r.push("totals", "joins_cancelled", t.joins_cancelled);
    r.push("totals", "leaves", t.leaves);
    r.push("totals", "control_rejected", t.control_rejected);
    r.push("totals", "peak_llids", t.peak_llids);
    Ok(r)
}
