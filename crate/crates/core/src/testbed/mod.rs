// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! One simulated deployment: fabric, switches, hosts, controller, broker and
//! external apps on a single event queue.
//!
//! The switch-to-controller hop is instantaneous; all control-path cost
//! comes from the latency model and the broker delay. Everything is
//! single-threaded and deterministic.

mod trace;

use std::collections::{BTreeMap, BTreeSet};

pub use trace::{FrameKind, RuleKey, Trace, TraceEntry, TraceEvent};

use crate::broker::Broker;
use crate::controller::{Controller, ControllerError, InternalProcessor, NbLatencyModel, PacketInOutcome, PipelineMode, SbCommand};
use crate::extapps::{shortest_path, AppRunner, DiscoveredTopology, ExternalApp};
use crate::fabric::{
    flood_ports, tcp_probe_frame, transmit, BulkFlow, BulkFlowReport, Endpoint, EventQueue, FabricError, FlowRemoved, LookupResult,
    PingOutcome, PingSession, PortPeer, PortRef, SwitchState, TopologyGraph, PROBE_DST_PORT, PROBE_SRC_PORT_BASE,
};
use crate::netproto::{
    Action, ArpOp, ArpPacket, EthernetFrame, EventType, FlowModOp, IcmpEcho, IcmpKind, OfMessage, OutPortSpec, ETHERTYPE_ARP,
    ETHERTYPE_IPV4, NO_BUFFER,
};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestbedConfig {
    pub mode: PipelineMode,
    pub latency: NbLatencyModel,
    pub broker_delay: SimTime,
    pub partitions: u32,
    /// Time an external app spends on each event.
    pub app_processing: SimTime,
}

impl Default for TestbedConfig {
    fn default() -> Self {
        TestbedConfig {
            mode: PipelineMode::Internal,
            latency: NbLatencyModel::default(),
            broker_delay: SimTime::from_millis(3),
            partitions: 1,
            app_processing: SimTime::ZERO,
        }
    }
}

/// Frame bookkeeping. At every instant
/// `injected + replicated == delivered + punted + dropped + in_flight`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameCounters {
    /// Frames sent by hosts, packet-outs and probe injections.
    pub injected: u64,
    /// Extra copies made by multi-output actions and floods.
    pub replicated: u64,
    pub delivered: u64,
    pub punted: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

impl FrameCounters {
    pub fn balanced(&self) -> bool {
        self.injected + self.replicated == self.delivered + self.punted + self.dropped + self.in_flight
    }
}

#[derive(Debug, Clone)]
enum Event {
    Arrive { to: Endpoint, frame: EthernetFrame },
    Sb(OfMessage),
    Expire { device: u64 },
    Poll,
    AppTimer { app: usize },
    PingSend { session: usize, seq: u16 },
    PingTimeout { session: usize, seq: u16 },
    HostSend { host: usize, frame: EthernetFrame },
    ProbeInject { flow: usize },
}

#[derive(Debug, Clone)]
struct BulkState {
    flow: BulkFlow,
    probes: Vec<EthernetFrame>,
    reverse: EthernetFrame,
    ingress: PortRef,
    egress: PortRef,
}

pub struct Testbed {
    graph: TopologyGraph,
    switches: BTreeMap<u64, SwitchState>,
    ctl: Controller,
    apps: Vec<AppRunner>,
    queue: EventQueue<Event>,
    trace: Trace,
    counters: FrameCounters,
    pings: Vec<PingSession>,
    flows: Vec<BulkState>,
    broker_delay: SimTime,
    app_processing: SimTime,
    polls: BTreeSet<SimTime>,
    expiries: BTreeSet<(SimTime, u64)>,
    started: bool,
}

impl std::fmt::Debug for Testbed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Testbed")
            .field("now", &self.queue.now())
            .field("switches", &self.switches.len())
            .field("apps", &self.apps.len())
            .field("counters", &self.counters)
            .finish_non_exhaustive()
    }
}

impl Testbed {
    /// Registers every switch of `graph` with a fresh controller.
    pub fn new(graph: TopologyGraph, cfg: &TestbedConfig) -> Result<Self, ControllerError> {
        let mut ctl = Controller::new(cfg.mode, cfg.latency, Broker::new(cfg.broker_delay), cfg.partitions)?;
        let mut switches = BTreeMap::new();
        for &id in graph.switches.keys() {
            ctl.register_device(id, graph.ports(id));
            switches.insert(id, SwitchState::new(id));
        }
        Ok(Testbed {
            graph,
            switches,
            ctl,
            apps: Vec::new(),
            queue: EventQueue::new(),
            trace: Trace::default(),
            counters: FrameCounters::default(),
            pings: Vec::new(),
            flows: Vec::new(),
            broker_delay: cfg.broker_delay,
            app_processing: cfg.app_processing,
            polls: BTreeSet::new(),
            expiries: BTreeSet::new(),
            started: false,
        })
    }

    pub fn graph(&self) -> &TopologyGraph {
        &self.graph
    }

    pub fn ground_truth(&self) -> DiscoveredTopology {
        DiscoveredTopology::from_graph(&self.graph)
    }

    pub fn controller(&self) -> &Controller {
        &self.ctl
    }

    pub fn switch(&self, device: u64) -> Option<&SwitchState> {
        self.switches.get(&device)
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn counters(&self) -> FrameCounters {
        self.counters
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn apps(&self) -> &[AppRunner] {
        &self.apps
    }

    pub fn app<T: 'static>(&self) -> Option<&T> {
        self.apps.iter().find_map(|r| r.app().as_any().downcast_ref())
    }

    pub fn add_internal_processor(&mut self, p: Box<dyn InternalProcessor>) -> Result<(), ControllerError> {
        self.ctl.register_internal_processor(p)
    }

    /// The app subscribes when the run starts.
    pub fn add_app(&mut self, app: Box<dyn ExternalApp>) {
        self.apps.push(AppRunner::new(app));
    }

    pub fn clear_flow_tables(&mut self) {
        for s in self.switches.values_mut() {
            s.clear();
        }
        self.expiries.clear();
    }

    /// `count` echo requests from `src` to the host owning `dst_ip`,
    /// starting at `start`. Returns the session index.
    pub fn ping(&mut self, src: usize, dst_ip: u32, count: u16, interval: SimTime, timeout: SimTime, start: SimTime) -> Result<usize, FabricError> {
        if src >= self.graph.hosts.len() {
            return Err(FabricError::UnknownHost(src));
        }
        let dst = self.graph.host_by_ip(dst_ip).ok_or(FabricError::UnknownDestination(dst_ip))?;
        let idx = self.pings.len();
        let s = PingSession::new(src, dst, idx as u16 + 1, count, interval, timeout);
        for seq in 1..=count {
            self.queue.schedule(start + s.send_offset(seq), Event::PingSend { session: idx, seq });
        }
        self.pings.push(s);
        Ok(idx)
    }

    pub fn ping_results(&self, session: usize) -> Vec<PingOutcome> {
        self.pings.get(session).map(PingSession::results).unwrap_or_default()
    }

    pub fn ping_session(&self, session: usize) -> Option<&PingSession> {
        self.pings.get(session)
    }

    /// `host` broadcasts an ARP request for `target_ip` at `at`.
    pub fn arp_request(&mut self, host: usize, target_ip: u32, at: SimTime) -> Result<(), FabricError> {
        let h = self.graph.hosts.get(host).ok_or(FabricError::UnknownHost(host))?;
        let frame = ArpPacket::request(h.mac, h.ip, target_ip).to_frame();
        self.queue.schedule(at, Event::HostSend { host, frame });
        Ok(())
    }

    /// `n_conns` fluid connections from `src` to `dst` over
    /// `[start, start + duration)`. Returns the flow index.
    pub fn bulk_flows(&mut self, src: usize, dst: usize, n_conns: u32, start: SimTime, duration: SimTime) -> Result<usize, FabricError> {
        if n_conns == 0 || duration.is_zero() {
            return Err(FabricError::InvalidParam("bulk flow needs n_conns >= 1 and a positive duration".into()));
        }
        let (s, d) = match (self.graph.hosts.get(src), self.graph.hosts.get(dst)) {
            (Some(s), Some(d)) => (s.clone(), d.clone()),
            (None, _) => return Err(FabricError::UnknownHost(src)),
            (_, None) => return Err(FabricError::UnknownHost(dst)),
        };
        let path = shortest_path(&self.ground_truth(), s.attached.device, d.attached).ok_or(FabricError::NoPath(src, dst))?;
        let mut cap = s.capacity_bps.min(d.capacity_bps);
        for &(dev, port) in &path {
            if let Some(a) = self.graph.attachment(PortRef::new(dev, port)) {
                cap = cap.min(a.capacity_bps);
            }
        }
        let probes: Vec<EthernetFrame> = (0..n_conns)
            .map(|i| {
                let sport = PROBE_SRC_PORT_BASE.wrapping_add(i as u16);
                tcp_probe_frame(s.mac, d.mac, s.ip, d.ip, sport, PROBE_DST_PORT)
            })
            .collect();
        let reverse = tcp_probe_frame(d.mac, s.mac, d.ip, s.ip, PROBE_DST_PORT, PROBE_SRC_PORT_BASE);
        let idx = self.flows.len();
        for p in &probes {
            self.queue.schedule(start, Event::HostSend { host: src, frame: p.clone() });
        }
        self.flows.push(BulkState {
            flow: BulkFlow::new(src, dst, n_conns, start, duration, cap),
            probes,
            reverse,
            ingress: s.attached,
            egress: d.attached,
        });
        Ok(idx)
    }

    pub fn bulk_report(&self, flow: usize) -> Option<BulkFlowReport> {
        self.flows.get(flow).map(|f| f.flow.report())
    }

    fn start(&mut self) -> Result<(), ControllerError> {
        if self.started {
            return Ok(());
        }
        self.started = true;
        let now = self.queue.now();
        for i in 0..self.apps.len() {
            if let Some(t) = self.apps[i].start(now, &mut self.ctl)? {
                self.queue.schedule(t.max(now), Event::AppTimer { app: i });
            }
        }
        self.flush_outbox();
        Ok(())
    }

    /// Runs until no events remain. Periodic apps never quiesce; use
    /// [`run_until`](Self::run_until) for those.
    pub fn run(&mut self) -> Result<(), ControllerError> {
        self.run_until(SimTime::MAX)
    }

    /// Processes every event at or before `horizon`.
    pub fn run_until(&mut self, horizon: SimTime) -> Result<(), ControllerError> {
        self.start()?;
        while let Some((at, ev)) = self.queue.pop_until(horizon) {
            self.handle(at, ev)?;
        }
        Ok(())
    }

    fn handle(&mut self, now: SimTime, ev: Event) -> Result<(), ControllerError> {
        match ev {
            Event::Arrive { to, frame } => {
                self.counters.in_flight -= 1;
                match to {
                    Endpoint::Host(h) => self.host_rx(h, frame, now),
                    Endpoint::Switch(p) => self.switch_rx(p, frame, now)?,
                }
            }
            Event::Sb(msg) => self.apply_sb(msg, now)?,
            Event::Expire { device } => {
                self.expiries.remove(&(now, device));
                let removed = match self.switches.get_mut(&device) {
                    Some(s) => {
                        let mut r = s.take_removed();
                        r.extend(s.expire_entries(now));
                        r
                    }
                    None => Vec::new(),
                };
                self.on_removed(removed, now)?;
                self.schedule_expiry(device);
            }
            Event::Poll => {
                self.polls.remove(&now);
                for i in 0..self.apps.len() {
                    self.apps[i].poll(now, self.app_processing, &mut self.ctl)?;
                }
                self.flush_outbox();
            }
            Event::AppTimer { app } => {
                if let Some(t) = self.apps[app].timer(now, &mut self.ctl) {
                    self.queue.schedule(t.max(now), Event::AppTimer { app });
                }
                self.flush_outbox();
            }
            Event::PingSend { session, seq } => {
                let s = &mut self.pings[session];
                s.record_sent(seq, now);
                let (src, dst, ident, timeout) = (s.src_host, s.dst_host, s.ident, s.timeout);
                self.queue.schedule(now + timeout, Event::PingTimeout { session, seq });
                let (sh, dh) = (&self.graph.hosts[src], &self.graph.hosts[dst]);
                let frame = IcmpEcho {
                    kind: IcmpKind::Request,
                    ident,
                    seq,
                    src_ip: sh.ip,
                    dst_ip: dh.ip,
                }
                .to_frame(sh.mac, dh.mac);
                self.host_tx(src, frame, now);
            }
            Event::PingTimeout { session, seq } => {
                if self.pings[session].record_timeout(seq) {
                    self.trace.push(now, TraceEvent::PingLost { session, seq });
                }
            }
            Event::HostSend { host, frame } => self.host_tx(host, frame, now),
            Event::ProbeInject { flow } => {
                let f = &self.flows[flow];
                let (at, probes) = (f.ingress, f.probes.clone());
                for p in probes {
                    self.counters.injected += 1;
                    self.switch_rx(at, p, now)?;
                }
            }
        }
        Ok(())
    }

    fn send(&mut self, from: Endpoint, frame: EthernetFrame, now: SimTime) {
        match transmit(&self.graph, from, frame, now) {
            Some(d) => {
                self.counters.in_flight += 1;
                self.queue.schedule(
                    d.at,
                    Event::Arrive {
                        to: d.to,
                        frame: d.frame,
                    },
                );
            }
            None => {
                self.counters.dropped += 1;
                let device = match from {
                    Endpoint::Switch(p) => p.device,
                    Endpoint::Host(_) => 0,
                };
                self.trace.push(now, TraceEvent::Dropped { device, why: "unconnected port" });
            }
        }
    }

    fn host_tx(&mut self, host: usize, frame: EthernetFrame, now: SimTime) {
        self.counters.injected += 1;
        self.trace.push(
            now,
            TraceEvent::HostTx {
                host,
                kind: FrameKind::of(&frame),
            },
        );
        self.send(Endpoint::Host(host), frame, now);
    }

    fn host_rx(&mut self, host: usize, frame: EthernetFrame, now: SimTime) {
        self.counters.delivered += 1;
        let kind = FrameKind::of(&frame);
        self.trace.push(now, TraceEvent::HostRx { host, kind });
        let me = &self.graph.hosts[host];
        if frame.dst != me.mac && !frame.dst.is_broadcast() {
            return;
        }
        let (mac, ip) = (me.mac, me.ip);
        match frame.ethertype {
            ETHERTYPE_ARP => {
                if let Ok(a) = ArpPacket::from_frame(&frame) {
                    if a.op == ArpOp::Request && a.target_ip == ip {
                        self.host_tx(host, a.reply(mac).to_frame(), now);
                    }
                }
            }
            ETHERTYPE_IPV4 => {
                let Ok(e) = IcmpEcho::from_frame(&frame) else { return };
                if e.dst_ip != ip {
                    return;
                }
                match e.kind {
                    IcmpKind::Request => self.host_tx(host, e.reply().to_frame(mac, frame.src), now),
                    IcmpKind::Reply => {
                        let session = usize::from(e.ident).wrapping_sub(1);
                        if let Some(s) = self.pings.get_mut(session).filter(|s| s.src_host == host) {
                            if let Some(rtt) = s.record_reply(e.seq, now) {
                                self.trace.push(now, TraceEvent::PingReply { session, seq: e.seq, rtt });
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }

    fn switch_rx(&mut self, at: PortRef, frame: EthernetFrame, now: SimTime) -> Result<(), ControllerError> {
        let Some(sw) = self.switches.get_mut(&at.device) else {
            self.counters.dropped += 1;
            return Ok(());
        };
        let res = sw.lookup(&frame, at.port, now);
        let removed = sw.take_removed();
        self.on_removed(removed, now)?;
        match res {
            LookupResult::Hit(entry) => self.apply_actions(at, &entry.actions, frame, now),
            LookupResult::Miss => {
                self.counters.punted += 1;
                self.trace.push(
                    now,
                    TraceEvent::PacketIn {
                        device: at.device,
                        in_port: at.port,
                        event_type: EventType::from_ethertype(frame.ethertype),
                    },
                );
                let out = self.ctl.on_packet_in(at.device, at.port, NO_BUFFER, &frame, now)?;
                match out {
                    PacketInOutcome::Published {
                        topic,
                        partition,
                        offset,
                    } => {
                        self.trace.push(now, TraceEvent::Published { topic, partition, offset });
                        let t = now + self.broker_delay;
                        if self.polls.insert(t) {
                            self.queue.schedule(t, Event::Poll);
                        }
                    }
                    PacketInOutcome::ServerFiltered { topic } => self.trace.push(now, TraceEvent::ServerFiltered { topic }),
                    PacketInOutcome::ControllerFiltered => {
                        self.trace.push(now, TraceEvent::ControllerFiltered { device: at.device })
                    }
                    PacketInOutcome::Dispatched { .. } => {}
                }
                self.flush_outbox();
            }
        }
        Ok(())
    }

    /// Resolves one frame at `at` into its output copies.
    fn apply_actions(&mut self, at: PortRef, actions: &[Action], frame: EthernetFrame, now: SimTime) {
        let mut ports = Vec::new();
        for a in actions {
            match *a {
                Action::Output(p) => ports.push(p),
                Action::Flood => ports.extend(flood_ports(&self.graph, at.device, at.port)),
                Action::Drop => {}
            }
        }
        self.emit(at, ports, frame, now);
    }

    fn emit(&mut self, at: PortRef, ports: Vec<u32>, frame: EthernetFrame, now: SimTime) {
        if ports.is_empty() {
            self.counters.dropped += 1;
            self.trace.push(now, TraceEvent::Dropped { device: at.device, why: "no output" });
            return;
        }
        self.counters.replicated += ports.len() as u64 - 1;
        self.note_egress(at.device, &frame, now);
        for p in ports {
            self.send(Endpoint::Switch(PortRef::new(at.device, p)), frame.clone(), now);
        }
    }

    fn note_egress(&mut self, device: u64, frame: &EthernetFrame, now: SimTime) {
        for i in 0..self.flows.len() {
            let f = &self.flows[i];
            if f.ingress.device != device || f.flow.is_running() {
                continue;
            }
            let hosts = &self.graph.hosts;
            if frame.src != hosts[f.flow.src_host].mac || frame.dst != hosts[f.flow.dst_host].mac {
                continue;
            }
            let cap = self.path_capacity(i, now);
            if self.flows[i].flow.on_probe_egress(now, cap) {
                self.trace.push(now, TraceEvent::FlowResumed { flow: i });
            }
        }
    }

    /// Bottleneck capacity if live rules carry the flow both ways.
    fn path_capacity(&self, flow: usize, now: SimTime) -> Option<u64> {
        let f = &self.flows[flow];
        let fwd = self.walk(f.ingress, &f.probes[0], f.flow.dst_host, now)?;
        let rev = self.walk(f.egress, &f.reverse, f.flow.src_host, now)?;
        Some(fwd.min(rev))
    }

    fn walk(&self, mut at: PortRef, frame: &EthernetFrame, to_host: usize, now: SimTime) -> Option<u64> {
        let mut cap = u64::MAX;
        for _ in 0..=self.switches.len() {
            let entry = self.switches.get(&at.device)?.peek(frame, at.port, now)?;
            let out = entry.actions.iter().find_map(|a| match a {
                Action::Output(p) => Some(*p),
                _ => None,
            })?;
            let att = self.graph.attachment(PortRef::new(at.device, out))?;
            cap = cap.min(att.capacity_bps);
            match att.peer {
                PortPeer::Host(h) if h == to_host => return Some(cap),
                PortPeer::Host(_) => return None,
                PortPeer::Switch(q) => at = q,
            }
        }
        None
    }

    fn apply_sb(&mut self, msg: OfMessage, now: SimTime) -> Result<(), ControllerError> {
        match msg {
            OfMessage::FlowMod { device_id, entry, op } => {
                let Some(sw) = self.switches.get_mut(&device_id) else {
                    return Ok(());
                };
                let removed = match sw.apply_flow_mod(device_id, entry.clone(), op, now) {
                    Ok(r) => r,
                    Err(_) => {
                        self.trace.push(now, TraceEvent::Dropped { device: device_id, why: "rejected flow-mod" });
                        return Ok(());
                    }
                };
                if op == FlowModOp::Add {
                    self.trace.push(now, TraceEvent::FlowInstalled { device: device_id, entry });
                }
                self.on_removed(removed, now)?;
                self.schedule_expiry(device_id);
                for i in 0..self.flows.len() {
                    if !self.flows[i].flow.is_running() {
                        let cap = self.path_capacity(i, now);
                        if self.flows[i].flow.on_rules_changed(now, cap) {
                            self.trace.push(now, TraceEvent::FlowResumed { flow: i });
                        }
                    }
                }
            }
            OfMessage::PacketOut {
                device_id,
                in_port,
                out,
                frame,
            } => {
                self.counters.injected += 1;
                self.trace.push(now, TraceEvent::PacketOut { device: device_id, out });
                let at = PortRef::new(device_id, in_port);
                match out {
                    OutPortSpec::Port(p) => self.emit(at, vec![p], frame, now),
                    OutPortSpec::Flood => {
                        let ports = flood_ports(&self.graph, device_id, in_port);
                        self.emit(at, ports, frame, now);
                    }
                    OutPortSpec::Table => self.switch_rx(at, frame, now)?,
                }
            }
            other => {
                debug_assert!(false, "unexpected southbound message {other:?}");
            }
        }
        Ok(())
    }

    fn on_removed(&mut self, removed: Vec<FlowRemoved>, now: SimTime) -> Result<(), ControllerError> {
        if removed.is_empty() {
            return Ok(());
        }
        for r in &removed {
            self.trace.push(
                now,
                TraceEvent::FlowRemoved {
                    device: r.device_id,
                    entry_id: r.entry.entry_id,
                    reason: r.reason,
                },
            );
            self.ctl.on_flow_removed(r.device_id)?;
        }
        for i in 0..self.flows.len() {
            if self.flows[i].flow.is_running() && self.path_capacity(i, now).is_none() && self.flows[i].flow.on_path_broken(now) {
                self.trace.push(now, TraceEvent::FlowStalled { flow: i });
                self.queue.schedule(now, Event::ProbeInject { flow: i });
            }
        }
        Ok(())
    }

    fn schedule_expiry(&mut self, device: u64) {
        let Some(t) = self.switches.get(&device).and_then(SwitchState::next_deadline) else {
            return;
        };
        let t = t.max(self.queue.now());
        if self.expiries.insert((t, device)) {
            self.queue.schedule(t, Event::Expire { device });
        }
    }

    fn flush_outbox(&mut self) {
        for SbCommand { at, msg } in self.ctl.drain_outbox() {
            let at = at.max(self.queue.now());
            self.queue.schedule(at, Event::Sb(msg));
        }
    }
}
