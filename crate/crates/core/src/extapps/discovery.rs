// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

use crate::broker::FilterPredicate;
use crate::controller::{DeviceInfo, Northbound, SubscriptionRequest, MAIN_TOPIC};
use crate::fabric::{PortRef, TopologyGraph};
use crate::netproto::{
    decode_frame, ArpPacket, CodecError, EthernetFrame, EventType, LldpFrame, MacAddr, OutPortSpec, PacketEventEnvelope, NO_PORT,
};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HostLocation {
    pub at: PortRef,
    pub ip: u32,
}

/// Switch links and host attachment points as learned from LLDP and ARP.
///
/// Links are stored with the smaller endpoint first, so each undirected
/// link appears once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DiscoveredTopology {
    pub links: BTreeSet<(PortRef, PortRef)>,
    pub host_locations: BTreeMap<MacAddr, HostLocation>,
    link_ports: BTreeSet<PortRef>,
}

impl DiscoveredTopology {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ground truth, as if discovery had converged.
    pub fn from_graph(g: &TopologyGraph) -> Self {
        let mut t = DiscoveredTopology::new();
        for (a, b) in g.switch_link_set() {
            t.add_link(a, b);
        }
        for h in &g.hosts {
            t.host_locations.insert(h.mac, HostLocation { at: h.attached, ip: h.ip });
        }
        t
    }

    /// Host locations of `g` in discovery form.
    pub fn ground_truth_hosts(g: &TopologyGraph) -> BTreeMap<MacAddr, HostLocation> {
        Self::from_graph(g).host_locations
    }

    pub fn add_link(&mut self, a: PortRef, b: PortRef) -> bool {
        let key = if a <= b { (a, b) } else { (b, a) };
        if !self.links.insert(key) {
            return false;
        }
        self.link_ports.insert(a);
        self.link_ports.insert(b);
        self.host_locations.retain(|_, loc| loc.at != a && loc.at != b);
        true
    }

    pub fn is_link_port(&self, p: PortRef) -> bool {
        self.link_ports.contains(&p)
    }

    /// `(local port, remote endpoint)` pairs of `device`, by local port.
    pub fn neighbors(&self, device: u64) -> Vec<(u32, PortRef)> {
        let mut out: Vec<(u32, PortRef)> = self
            .links
            .iter()
            .filter_map(|&(a, b)| {
                if a.device == device {
                    Some((a.port, b))
                } else if b.device == device {
                    Some((b.port, a))
                } else {
                    None
                }
            })
            .collect();
        out.sort();
        out
    }

    pub fn peer_of(&self, p: PortRef) -> Option<PortRef> {
        self.links.iter().find_map(|&(a, b)| {
            if a == p {
                Some(b)
            } else if b == p {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn locate(&self, mac: MacAddr) -> Option<HostLocation> {
        self.host_locations.get(&mac).copied()
    }
}

/// Folds one envelope into `state`. Returns whether anything changed.
pub fn topology_discovery_step(env: &PacketEventEnvelope, state: &mut DiscoveredTopology) -> Result<bool, CodecError> {
    let here = PortRef::new(env.device_id, env.in_port);
    match env.event_type {
        EventType::Lldp => {
            let frame = decode_frame(&env.frame)?;
            let lldp = LldpFrame::from_frame(&frame)?;
            let there = PortRef::new(lldp.chassis_id(), lldp.port_id());
            if there == here {
                return Ok(false);
            }
            Ok(state.add_link(there, here))
        }
        EventType::Arp => {
            let frame = decode_frame(&env.frame)?;
            let arp = ArpPacket::from_frame(&frame)?;
            if state.is_link_port(here) {
                return Ok(false);
            }
            let loc = HostLocation {
                at: here,
                ip: arp.sender_ip,
            };
            Ok(state.host_locations.insert(arp.sender_mac, loc) != Some(loc))
        }
        EventType::Ipv4 | EventType::Other => Ok(false),
    }
}

/// One LLDP frame per port of every device: `(device, port, frame)`.
pub fn lldp_sweep(devices: &[DeviceInfo]) -> Vec<(u64, u32, EthernetFrame)> {
    devices
        .iter()
        .flat_map(|d| {
            d.ports.iter().filter_map(move |&p| {
                LldpFrame::new(d.device_id, p)
                    .ok()
                    .map(|l| (d.device_id, p, l.to_frame()))
            })
        })
        .collect()
}

/// Learns links from LLDP and host locations from ARP, and drives the LLDP
/// sweep through the packet-out channel.
#[derive(Debug)]
pub struct TopologyDiscoveryApp {
    app_id: String,
    filter: FilterPredicate,
    sweep_period: SimTime,
    state: DiscoveredTopology,
    sweeps: u64,
    pub decode_errors: u64,
}

impl TopologyDiscoveryApp {
    pub fn new(sweep_period: SimTime) -> Self {
        Self::with_filter(sweep_period, FilterPredicate::event_types([EventType::Lldp, EventType::Arp]))
    }

    pub fn with_filter(sweep_period: SimTime, filter: FilterPredicate) -> Self {
        TopologyDiscoveryApp {
            app_id: "topo".into(),
            filter,
            sweep_period,
            state: DiscoveredTopology::new(),
            sweeps: 0,
            decode_errors: 0,
        }
    }

    pub fn topology(&self) -> &DiscoveredTopology {
        &self.state
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    fn sweep(&mut self, now: SimTime, nb: &mut dyn Northbound) -> Option<SimTime> {
        for (device, port, frame) in lldp_sweep(&nb.devices()) {
            // The device is registered, so this cannot fail.
            let _ = nb.packet_out(device, NO_PORT, OutPortSpec::Port(port), frame, now);
        }
        self.sweeps += 1;
        (!self.sweep_period.is_zero()).then(|| now + self.sweep_period)
    }
}

impl super::ExternalApp for TopologyDiscoveryApp {
    fn app_id(&self) -> &str {
        &self.app_id
    }

    fn subscription(&self) -> SubscriptionRequest {
        SubscriptionRequest {
            app_id: self.app_id.clone(),
            topic: MAIN_TOPIC.into(),
            group_id: "topo".into(),
            filter: Some(self.filter.clone()),
        }
    }

    fn on_start(&mut self, now: SimTime, nb: &mut dyn Northbound) -> Option<SimTime> {
        self.sweep(now, nb)
    }

    fn on_timer(&mut self, now: SimTime, nb: &mut dyn Northbound) -> Option<SimTime> {
        self.sweep(now, nb)
    }

    fn on_event(&mut self, env: &PacketEventEnvelope, _now: SimTime, _nb: &mut dyn Northbound) {
        if topology_discovery_step(env, &mut self.state).is_err() {
            self.decode_errors += 1;
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
