// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use proptest::prelude::*;

use super::forwarding::decide;
use super::*;
use crate::broker::{Broker, FilterPredicate, Record, TopicPartition};
use crate::controller::{
    Confirmation, Controller, ControllerError, DeviceInfo, FilterPlacement, InstallAck, NbLatencyModel, Northbound,
    PipelineMode, SubscriptionRequest,
};
use crate::fabric::{build_fat_tree, PortPeer, PortRef, TopologyGraph};
use crate::netproto::{
    encode_envelope, Action, ArpPacket, EthernetFrame, EventType, FlowEntry, IcmpEcho, IcmpKind, LldpFrame, MacAddr,
    OutPortSpec, PacketEventEnvelope, NO_BUFFER,
};
use crate::time::SimTime;

#[derive(Default)]
struct RecordingNb {
    installs: Vec<(u64, FlowEntry, SimTime)>,
    outs: Vec<(u64, u32, OutPortSpec, SimTime)>,
    devices: Vec<DeviceInfo>,
}

impl Northbound for RecordingNb {
    fn subscribe(&mut self, _req: &SubscriptionRequest) -> Confirmation {
        Confirmation {
            granted: true,
            ..Default::default()
        }
    }
    fn poll(&mut self, _: &str, _: &str, _: usize, _: SimTime) -> Result<Vec<Record>, ControllerError> {
        Ok(Vec::new())
    }
    fn commit(&mut self, _: &str, _: &TopicPartition, _: u64) -> Result<(), ControllerError> {
        Ok(())
    }
    fn install_flow(&mut self, device_id: u64, rule: FlowEntry, now: SimTime) -> Result<InstallAck, ControllerError> {
        self.installs.push((device_id, rule, now));
        Ok(InstallAck {
            entry_id: self.installs.len() as u64,
            ack_at: now + SimTime::from_millis(10),
        })
    }
    fn packet_out(&mut self, device_id: u64, in_port: u32, out: OutPortSpec, _: EthernetFrame, now: SimTime) -> Result<(), ControllerError> {
        self.outs.push((device_id, in_port, out, now));
        Ok(())
    }
    fn devices(&self) -> Vec<DeviceInfo> {
        self.devices.clone()
    }
}

fn ping_frame(g: &TopologyGraph, a: usize, b: usize) -> EthernetFrame {
    IcmpEcho {
        kind: IcmpKind::Request,
        ident: 1,
        seq: 1,
        src_ip: g.hosts[a].ip,
        dst_ip: g.hosts[b].ip,
    }
    .to_frame(g.hosts[a].mac, g.hosts[b].mac)
}

fn env_for(device: u64, in_port: u32, frame: &EthernetFrame) -> PacketEventEnvelope {
    PacketEventEnvelope {
        event_type: EventType::from_ethertype(frame.ethertype),
        device_id: device,
        in_port,
        buffer_id: NO_BUFFER,
        timestamp_ns: 0,
        frame: frame.encode().unwrap(),
    }
}

// k=4, one site: cores 1..=4, aggregation 5..=12, edge 13..=20. Hosts 0 and
// 1 hang off edge 13, hosts 2 and 3 off edge 14. Edge uplinks are ports 3
// and 4; aggregation downlinks are ports 1 and 2.
#[test]
fn same_pod_path_by_hand() {
    let g = build_fat_tree(4, 1).unwrap();
    let topo = DiscoveredTopology::from_graph(&g);
    assert_eq!(g.hosts[3].attached, PortRef::new(14, 2));
    let path = shortest_path(&topo, 13, g.hosts[3].attached).unwrap();
    assert_eq!(path, vec![(13, 3), (5, 2), (14, 2)]);
}

#[test]
fn cross_pod_path_on_k2() {
    // k=2: core 1, aggregation 2 and 3, edge 4 and 5, one host per edge.
    let g = build_fat_tree(2, 1).unwrap();
    let topo = DiscoveredTopology::from_graph(&g);
    let path = shortest_path(&topo, 4, g.hosts[1].attached).unwrap();
    let devices: Vec<u64> = path.iter().map(|h| h.0).collect();
    assert_eq!(devices, vec![4, 2, 1, 3, 5]);
}

#[test]
fn three_hop_decision_installs_both_directions() {
    let g = build_fat_tree(4, 1).unwrap();
    let topo = DiscoveredTopology::from_graph(&g);
    let frame = ping_frame(&g, 0, 3);
    let cfg = AppConfig::default();
    let StepOutcome::Forward(d) = decide(&topo, 13, 1, &frame, &cfg) else {
        panic!("expected a path");
    };
    assert_eq!(d.rules.len(), 6);
    assert_eq!(d.return_action, (13, OutPortSpec::Port(3)));
    let reverse: Vec<(u64, Vec<Action>)> = d
        .rules
        .iter()
        .filter(|(_, r)| r.matches.eth_src == Some(g.hosts[3].mac))
        .map(|(dev, r)| (*dev, r.actions.clone()))
        .collect();
    assert_eq!(
        reverse,
        vec![(13, vec![Action::Output(1)]), (5, vec![Action::Output(1)]), (14, vec![Action::Output(3)])]
    );
    for (_, r) in &d.rules {
        assert_eq!(r.priority, 100);
        assert_eq!(r.hard_timeout, SimTime::from_secs(10));
        assert!(r.matches.eth_src.is_some() && r.matches.eth_dst.is_some());
    }
    let one_way = AppConfig {
        bidirectional: false,
        ..cfg
    };
    let StepOutcome::Forward(d) = decide(&topo, 13, 1, &frame, &one_way) else {
        panic!()
    };
    assert_eq!(d.rules.len(), 3);
}

#[test]
fn unknown_and_lldp() {
    let g = build_fat_tree(4, 1).unwrap();
    let topo = DiscoveredTopology::from_graph(&g);
    let mut frame = ping_frame(&g, 0, 3);
    frame.dst = MacAddr::from_index(999);
    assert_eq!(decide(&topo, 13, 1, &frame, &AppConfig::default()), StepOutcome::Flood);
    let lldp = env_for(13, 3, &LldpFrame::new(5, 1).unwrap().to_frame());
    assert_eq!(reactive_forwarding_step(&lldp, &topo, &AppConfig::default()).unwrap(), StepOutcome::Ignore);
}

#[test]
fn external_app_waits_for_acks_before_returning_packet() {
    let g = build_fat_tree(4, 1).unwrap();
    let mut app = ReactiveForwardingApp::new(AppConfig::default(), DiscoveredTopology::from_graph(&g));
    let mut nb = RecordingNb::default();
    let t = SimTime::from_millis(3);
    app.on_event(&env_for(13, 1, &ping_frame(&g, 0, 3)), t, &mut nb);
    assert_eq!(nb.installs.len(), 6);
    assert!(nb.installs.iter().all(|i| i.2 == t));
    assert_eq!(nb.outs, vec![(13, 1, OutPortSpec::Port(3), t + SimTime::from_millis(10))]);
}

#[test]
fn l3_and_dst_only_matches() {
    let g = build_fat_tree(4, 1).unwrap();
    let topo = DiscoveredTopology::from_graph(&g);
    let frame = ping_frame(&g, 0, 3);
    let l3 = AppConfig {
        match_kind: MatchKind::L3Pair,
        ..Default::default()
    };
    let StepOutcome::Forward(d) = decide(&topo, 13, 1, &frame, &l3) else {
        panic!()
    };
    assert_eq!(d.rules[0].1.matches.ip_dst, Some(g.hosts[3].ip));
    assert_eq!(d.rules[1].1.matches.ip_dst, Some(g.hosts[0].ip));
    let dst = AppConfig {
        match_kind: MatchKind::L2Dst,
        ..Default::default()
    };
    let StepOutcome::Forward(d) = decide(&topo, 13, 1, &frame, &dst) else {
        panic!()
    };
    assert!(d.rules[0].1.matches.eth_src.is_none());
}

#[test]
fn lldp_learns_links_idempotently() {
    let mut t = DiscoveredTopology::new();
    let env = env_for(2, 1, &LldpFrame::new(1, 2).unwrap().to_frame());
    assert!(topology_discovery_step(&env, &mut t).unwrap());
    assert!(!topology_discovery_step(&env, &mut t).unwrap());
    assert_eq!(t.links.iter().copied().collect::<Vec<_>>(), vec![(PortRef::new(1, 2), PortRef::new(2, 1))]);
}

#[test]
fn arp_on_link_port_is_not_a_host() {
    let mut t = DiscoveredTopology::new();
    let arp = ArpPacket::request(MacAddr::from_index(1), 0x0a00_0001, 0x0a00_0002).to_frame();
    assert!(topology_discovery_step(&env_for(3, 1, &arp), &mut t).unwrap());
    assert_eq!(t.locate(MacAddr::from_index(1)).unwrap().at, PortRef::new(3, 1));
    // The link learned later reclaims the port.
    let lldp = env_for(3, 1, &LldpFrame::new(4, 4).unwrap().to_frame());
    topology_discovery_step(&lldp, &mut t).unwrap();
    assert!(t.locate(MacAddr::from_index(1)).is_none());
    assert!(!topology_discovery_step(&env_for(3, 1, &arp), &mut t).unwrap());
    assert!(t.host_locations.is_empty());
}

#[test]
fn sweep_covers_every_port() {
    let devices: Vec<DeviceInfo> = (1..=5)
        .map(|d| DeviceInfo {
            device_id: d,
            ports: vec![1, 2, 3, 4],
        })
        .collect();
    assert_eq!(lldp_sweep(&devices).len(), 20);
    let mut app = TopologyDiscoveryApp::new(SimTime::ZERO);
    let mut nb = RecordingNb {
        devices,
        ..Default::default()
    };
    assert_eq!(app.on_start(SimTime::ZERO, &mut nb), None);
    assert_eq!(nb.outs.len(), 20);
    let mut periodic = TopologyDiscoveryApp::new(SimTime::from_secs(5));
    assert_eq!(periodic.on_start(SimTime::from_secs(1), &mut nb), Some(SimTime::from_secs(6)));
}

/// Feeds the LLDP a full sweep would produce straight into discovery.
fn discovered_by_hand(g: &TopologyGraph) -> DiscoveredTopology {
    let mut t = DiscoveredTopology::new();
    for s in g.switches.values() {
        for (&port, att) in &s.ports {
            if let PortPeer::Switch(peer) = att.peer {
                let f = LldpFrame::new(s.device_id, port).unwrap().to_frame();
                topology_discovery_step(&env_for(peer.device, peer.port, &f), &mut t).unwrap();
            }
        }
    }
    for h in &g.hosts {
        let f = ArpPacket::request(h.mac, h.ip, 0).to_frame();
        topology_discovery_step(&env_for(h.attached.device, h.attached.port, &f), &mut t).unwrap();
    }
    t
}

#[test]
fn hand_fed_discovery_matches_ground_truth() {
    for (k, sites) in [(2, 1), (4, 1), (2, 5)] {
        let g = build_fat_tree(k, sites).unwrap();
        let t = discovered_by_hand(&g);
        assert_eq!(t.links, g.switch_link_set(), "k={k} sites={sites}");
        assert_eq!(t.host_locations, DiscoveredTopology::ground_truth_hosts(&g));
    }
}

#[test]
fn runner_applies_client_side_filter() {
    let mut c = Controller::new(
        PipelineMode::External {
            placement: FilterPlacement::ClientSide,
        },
        NbLatencyModel::default(),
        Broker::new(SimTime::ZERO),
        1,
    )
    .unwrap();
    c.register_device(2, vec![1, 2]);
    c.register_device(1, vec![1, 2]);
    let app = TopologyDiscoveryApp::with_filter(SimTime::ZERO, FilterPredicate::event_types([EventType::Lldp]));
    let mut r = AppRunner::new(Box::new(app));
    r.start(SimTime::ZERO, &mut c).unwrap();
    let lldp = LldpFrame::new(1, 2).unwrap().to_frame();
    let arp = ArpPacket::request(MacAddr::from_index(1), 1, 2).to_frame();
    c.on_packet_in(2, 1, NO_BUFFER, &lldp, SimTime::ZERO).unwrap();
    c.on_packet_in(2, 2, NO_BUFFER, &arp, SimTime::ZERO).unwrap();
    assert_eq!(r.poll(SimTime::ZERO, SimTime::ZERO, &mut c).unwrap(), 2);
    let s = r.stats();
    assert_eq!((s.delivered, s.processed), (2, 1));
    let topo = r.app().as_any().downcast_ref::<TopologyDiscoveryApp>().unwrap().topology();
    assert_eq!(topo.links.len(), 1);
    assert!(topo.host_locations.is_empty());
    assert_eq!(r.processed(), &[encode_envelope(&env_for(2, 1, &lldp))]);
    // Committed: a second poll sees nothing.
    assert_eq!(r.poll(SimTime::ZERO, SimTime::ZERO, &mut c).unwrap(), 0);
}

#[test]
fn apps_config_from_toml() {
    let c: AppConfig = toml::from_str("hard_timeout = \"5s\"\nmatch = \"l3-pair\"\nbidirectional = false").unwrap();
    assert_eq!(c.hard_timeout, SimTime::from_secs(5));
    assert_eq!(c.match_kind, MatchKind::L3Pair);
    assert!(!c.bidirectional);
    assert_eq!(c.priority, 100);
}

proptest! {
    #[test]
    fn paths_are_simple_and_shortest(a in 0usize..32, b in 0usize..32) {
        let g = build_fat_tree(4, 2).unwrap();
        prop_assume!(g.hosts[a].attached.device != g.hosts[b].attached.device);
        let topo = DiscoveredTopology::from_graph(&g);
        let path = shortest_path(&topo, g.hosts[a].attached.device, g.hosts[b].attached).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        prop_assert!(path.iter().all(|(d, _)| seen.insert(*d)));
        // Consecutive hops are linked through the chosen ports.
        for w in path.windows(2) {
            let peer = topo.peer_of(PortRef::new(w[0].0, w[0].1)).unwrap();
            prop_assert_eq!(peer.device, w[1].0);
        }
        prop_assert_eq!(*path.last().unwrap(), (g.hosts[b].attached.device, g.hosts[b].attached.port));
    }
}
