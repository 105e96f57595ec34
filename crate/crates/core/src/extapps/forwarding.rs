// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{topology_discovery_step, AppConfig, DiscoveredTopology, MatchKind};
use crate::broker::FilterPredicate;
use crate::controller::{InternalContext, InternalProcessor, Northbound, PacketInView, SubscriptionRequest, MAIN_TOPIC};
use crate::fabric::PortRef;
use crate::netproto::{
    decode_frame, Action, CodecError, EthernetFrame, EventType, FlowEntry, Ipv4Packet, MatchFields, OutPortSpec,
    PacketEventEnvelope, ETHERTYPE_IPV4, ETHERTYPE_LLDP,
};
use crate::time::SimTime;

/// Rules for every hop of a path and the packet-out that returns the
/// triggering frame at the first hop.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardingDecision {
    /// `(device, out_port)` from the punting switch to the host port.
    pub path: Vec<(u64, u32)>,
    pub rules: Vec<(u64, FlowEntry)>,
    pub return_action: (u64, OutPortSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Forward(ForwardingDecision),
    /// Destination unknown or not unicast.
    Flood,
    /// Not a frame this app handles.
    Ignore,
}

/// Fewest-hop path from `from` to the host port `to`. At each step the
/// neighbor with the smallest device id among those one hop closer wins;
/// among parallel links the smallest local port wins. Every device appears
/// at most once.
pub fn shortest_path(topo: &DiscoveredTopology, from: u64, to: PortRef) -> Option<Vec<(u64, u32)>> {
    let mut adj: BTreeMap<u64, Vec<(u32, PortRef)>> = BTreeMap::new();
    for &(a, b) in &topo.links {
        adj.entry(a.device).or_default().push((a.port, b));
        adj.entry(b.device).or_default().push((b.port, a));
    }
    for v in adj.values_mut() {
        v.sort();
    }
    let mut dist: BTreeMap<u64, u32> = BTreeMap::from([(to.device, 0)]);
    let mut queue = VecDeque::from([to.device]);
    while let Some(d) = queue.pop_front() {
        let next = dist[&d] + 1;
        for &(_, peer) in adj.get(&d).map_or(&[][..], Vec::as_slice) {
            dist.entry(peer.device).or_insert_with(|| {
                queue.push_back(peer.device);
                next
            });
        }
    }
    let mut cur = from;
    let mut left = *dist.get(&from)?;
    let mut path = Vec::with_capacity(left as usize + 1);
    while left > 0 {
        let (port, peer) = adj[&cur]
            .iter()
            .filter(|(_, p)| dist.get(&p.device) == Some(&(left - 1)))
            .min_by_key(|(port, p)| (p.device, *port))
            .copied()?;
        path.push((cur, port));
        cur = peer.device;
        left -= 1;
    }
    path.push((to.device, to.port));
    Some(path)
}

fn rule_match(kind: MatchKind, frame: &EthernetFrame, reverse: bool) -> MatchFields {
    let (src, dst) = if reverse { (frame.dst, frame.src) } else { (frame.src, frame.dst) };
    let l2 = MatchFields {
        eth_src: Some(src),
        eth_dst: Some(dst),
        ..Default::default()
    };
    match kind {
        MatchKind::L2Pair => l2,
        MatchKind::L2Dst => MatchFields {
            eth_dst: Some(dst),
            ..Default::default()
        },
        MatchKind::L3Pair => match Ipv4Packet::from_frame(frame) {
            Ok(ip) if frame.ethertype == ETHERTYPE_IPV4 => {
                let (s, d) = if reverse { (ip.dst, ip.src) } else { (ip.src, ip.dst) };
                MatchFields {
                    ethertype: Some(ETHERTYPE_IPV4),
                    ip_src: Some(s),
                    ip_dst: Some(d),
                    ..Default::default()
                }
            }
            _ => l2,
        },
    }
}

/// Decision for a frame punted by `device` on `in_port`.
pub fn decide(topo: &DiscoveredTopology, device: u64, in_port: u32, frame: &EthernetFrame, cfg: &AppConfig) -> StepOutcome {
    if frame.ethertype == ETHERTYPE_LLDP {
        return StepOutcome::Ignore;
    }
    if frame.dst.is_multicast() {
        return StepOutcome::Flood;
    }
    let Some(dst) = topo.locate(frame.dst) else {
        return StepOutcome::Flood;
    };
    if dst.at == PortRef::new(device, in_port) {
        return StepOutcome::Ignore;
    }
    let Some(path) = shortest_path(topo, device, dst.at) else {
        return StepOutcome::Flood;
    };
    let mk = |matches: MatchFields, out: u32| {
        FlowEntry::new(cfg.priority, matches, vec![Action::Output(out)]).with_timeouts(cfg.hard_timeout, cfg.idle_timeout)
    };
    let fwd = rule_match(cfg.match_kind, frame, false);
    let rev = rule_match(cfg.match_kind, frame, true);
    let mut rules = Vec::with_capacity(path.len() * 2);
    let mut arrived_on = in_port;
    for (i, &(dev, out)) in path.iter().enumerate() {
        rules.push((dev, mk(fwd, out)));
        if cfg.bidirectional {
            rules.push((dev, mk(rev, arrived_on)));
        }
        if let Some(&(next, _)) = path.get(i + 1) {
            arrived_on = topo
                .peer_of(PortRef::new(dev, out))
                .filter(|p| p.device == next)
                .map_or(0, |p| p.port);
        }
    }
    StepOutcome::Forward(ForwardingDecision {
        return_action: (device, OutPortSpec::Port(path[0].1)),
        path,
        rules,
    })
}

/// The external app's decision for one envelope.
pub fn reactive_forwarding_step(env: &PacketEventEnvelope, topo: &DiscoveredTopology, cfg: &AppConfig) -> Result<StepOutcome, CodecError> {
    if env.event_type == EventType::Lldp {
        return Ok(StepOutcome::Ignore);
    }
    let frame = decode_frame(&env.frame)?;
    Ok(decide(topo, env.device_id, env.in_port, &frame, cfg))
}

/// Floods each distinct frame at most once per device, which bounds
/// broadcast storms on looped fabrics.
#[derive(Debug, Default, Clone)]
struct FloodGuard(BTreeSet<(u64, Vec<u8>)>);

impl FloodGuard {
    fn first(&mut self, device: u64, frame: &EthernetFrame) -> bool {
        self.0.insert((device, frame.encode().unwrap_or_default()))
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ForwardingStats {
    pub decisions: u64,
    pub floods: u64,
    pub suppressed_floods: u64,
    pub ignored: u64,
    pub errors: u64,
}

#[derive(Debug)]
pub struct ReactiveForwardingApp {
    app_id: String,
    cfg: AppConfig,
    topo: DiscoveredTopology,
    floods: FloodGuard,
    pub stats: ForwardingStats,
}

impl ReactiveForwardingApp {
    /// `topo` seeds the app's view; ARP events keep host locations fresh.
    pub fn new(cfg: AppConfig, topo: DiscoveredTopology) -> Self {
        ReactiveForwardingApp {
            app_id: "fwd".into(),
            cfg,
            topo,
            floods: FloodGuard::default(),
            stats: ForwardingStats::default(),
        }
    }
}

impl super::ExternalApp for ReactiveForwardingApp {
    fn app_id(&self) -> &str {
        &self.app_id
    }

    fn subscription(&self) -> SubscriptionRequest {
        SubscriptionRequest {
            app_id: self.app_id.clone(),
            topic: MAIN_TOPIC.into(),
            group_id: "fwd".into(),
            filter: Some(FilterPredicate::event_types([EventType::Arp, EventType::Ipv4, EventType::Other])),
        }
    }

    fn on_event(&mut self, env: &PacketEventEnvelope, now: SimTime, nb: &mut dyn Northbound) {
        if env.event_type == EventType::Arp && topology_discovery_step(env, &mut self.topo).is_err() {
            self.stats.errors += 1;
            return;
        }
        let Ok(frame) = decode_frame(&env.frame) else {
            self.stats.errors += 1;
            return;
        };
        match decide(&self.topo, env.device_id, env.in_port, &frame, &self.cfg) {
            StepOutcome::Forward(d) => {
                self.stats.decisions += 1;
                let mut ready = now;
                for (dev, rule) in d.rules {
                    match nb.install_flow(dev, rule, now) {
                        Ok(ack) => ready = ready.max(ack.ack_at),
                        Err(_) => self.stats.errors += 1,
                    }
                }
                let (dev, out) = d.return_action;
                if nb.packet_out(dev, env.in_port, out, frame, ready).is_err() {
                    self.stats.errors += 1;
                }
            }
            StepOutcome::Flood if self.floods.first(env.device_id, &frame) => {
                self.stats.floods += 1;
                if nb.packet_out(env.device_id, env.in_port, OutPortSpec::Flood, frame, now).is_err() {
                    self.stats.errors += 1;
                }
            }
            StepOutcome::Flood => self.stats.suppressed_floods += 1,
            StepOutcome::Ignore => self.stats.ignored += 1,
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// The same decisions applied from inside the controller's pipeline.
#[derive(Debug)]
pub struct InternalReactiveForwarding {
    cfg: AppConfig,
    topo: DiscoveredTopology,
    floods: FloodGuard,
    pub stats: ForwardingStats,
}

impl InternalReactiveForwarding {
    pub fn new(cfg: AppConfig, topo: DiscoveredTopology) -> Self {
        InternalReactiveForwarding {
            cfg,
            topo,
            floods: FloodGuard::default(),
            stats: ForwardingStats::default(),
        }
    }
}

impl InternalProcessor for InternalReactiveForwarding {
    fn name(&self) -> &str {
        "reactive-forwarding"
    }

    fn on_packet_in(&mut self, pi: PacketInView<'_>, ctx: &mut InternalContext<'_>) {
        if pi.frame.ethertype == crate::netproto::ETHERTYPE_ARP {
            let env = PacketEventEnvelope {
                event_type: EventType::Arp,
                device_id: pi.device_id,
                in_port: pi.in_port,
                buffer_id: pi.buffer_id,
                timestamp_ns: pi.now.as_nanos(),
                frame: pi.frame.encode().unwrap_or_default(),
            };
            let _ = topology_discovery_step(&env, &mut self.topo);
        }
        match decide(&self.topo, pi.device_id, pi.in_port, pi.frame, &self.cfg) {
            StepOutcome::Forward(d) => {
                self.stats.decisions += 1;
                for (dev, rule) in d.rules {
                    if ctx.install_flow(dev, rule).is_err() {
                        self.stats.errors += 1;
                    }
                }
                let (dev, out) = d.return_action;
                if ctx.packet_out(dev, pi.in_port, out, pi.frame.clone()).is_err() {
                    self.stats.errors += 1;
                }
            }
            StepOutcome::Flood if self.floods.first(pi.device_id, pi.frame) => {
                self.stats.floods += 1;
                if ctx
                    .packet_out(pi.device_id, pi.in_port, OutPortSpec::Flood, pi.frame.clone())
                    .is_err()
                {
                    self.stats.errors += 1;
                }
            }
            StepOutcome::Flood => self.stats.suppressed_floods += 1,
            StepOutcome::Ignore => self.stats.ignored += 1,
        }
    }
}
