// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use super::*;
use crate::broker::Broker;
use crate::netproto::{decode_envelope, Action, ArpPacket, IcmpEcho, IcmpKind, LldpFrame, MacAddr, MatchFields, NO_BUFFER};

fn ms(n: u64) -> SimTime {
    SimTime::from_millis(n)
}

fn ctl(mode: PipelineMode) -> Controller {
    let mut c = Controller::new(mode, NbLatencyModel::default(), Broker::new(ms(2)), 1).unwrap();
    for d in 1..=4 {
        c.register_device(d, vec![1, 2, 3, 4]);
    }
    c
}

fn arp() -> EthernetFrame {
    ArpPacket::request(MacAddr::from_index(1), 1, 2).to_frame()
}

fn icmp() -> EthernetFrame {
    IcmpEcho {
        kind: IcmpKind::Request,
        ident: 1,
        seq: 1,
        src_ip: 1,
        dst_ip: 2,
    }
    .to_frame(MacAddr::from_index(1), MacAddr::from_index(2))
}

fn lldp() -> EthernetFrame {
    LldpFrame::new(2, 3).unwrap().to_frame()
}

fn sub(app: &str, filter: Option<FilterPredicate>) -> SubscriptionRequest {
    SubscriptionRequest {
        app_id: app.into(),
        topic: MAIN_TOPIC.into(),
        group_id: app.into(),
        filter,
    }
}

#[test]
fn external_publishes_envelope_keyed_by_device() {
    let mut c = ctl(PipelineMode::EXTERNAL);
    let out = c.on_packet_in(3, 2, NO_BUFFER, &icmp(), ms(5)).unwrap();
    assert_eq!(
        out,
        PacketInOutcome::Published {
            topic: MAIN_TOPIC.into(),
            partition: 0,
            offset: 0
        }
    );
    let rec = c.broker().topic(MAIN_TOPIC).unwrap().record(0, 0).unwrap().clone();
    assert_eq!(rec.key, 3u64.to_be_bytes());
    let env = decode_envelope(&rec.value).unwrap();
    assert_eq!(env.event_type, EventType::Ipv4);
    assert_eq!((env.device_id, env.in_port, env.timestamp_ns), (3, 2, ms(5).as_nanos()));
    assert_eq!(env.frame, icmp().encode().unwrap());
}

#[test]
fn unknown_device_rejected_everywhere() {
    let mut c = ctl(PipelineMode::EXTERNAL);
    assert_eq!(c.on_packet_in(9, 1, NO_BUFFER, &arp(), ms(0)), Err(ControllerError::UnknownDevice(9)));
    let rule = FlowEntry::new(1, MatchFields { in_port: Some(1), ..Default::default() }, vec![Action::Drop]);
    assert_eq!(c.nb_install_flow(rule, 9, ms(0)), Err(ControllerError::UnknownDevice(9)));
    assert_eq!(
        c.nb_packet_out(9, 1, OutPortSpec::Flood, arp(), ms(0)),
        Err(ControllerError::UnknownDevice(9))
    );
}

#[test]
fn empty_match_is_invalid() {
    let mut c = ctl(PipelineMode::EXTERNAL);
    let rule = FlowEntry::new(1, MatchFields::default(), vec![Action::Drop]);
    assert!(matches!(c.nb_install_flow(rule, 1, ms(0)), Err(ControllerError::InvalidRule(_))));
}

#[test]
fn install_lands_after_rest_delay_with_fresh_ids() {
    let mut c = ctl(PipelineMode::EXTERNAL);
    let m = MatchFields { eth_dst: Some(MacAddr::from_index(2)), ..Default::default() };
    let a = c.nb_install_flow(FlowEntry::new(100, m, vec![Action::Output(2)]), 1, ms(7)).unwrap();
    let b = c.nb_install_flow(FlowEntry::new(100, m, vec![Action::Output(2)]), 2, ms(7)).unwrap();
    assert_eq!((a.entry_id, a.ack_at), (1, ms(17)));
    assert_eq!(b.entry_id, 2);
    let out = c.drain_outbox();
    assert_eq!(out.len(), 2);
    assert_eq!(out[0].at, ms(17));
    assert!(matches!(&out[0].msg, OfMessage::FlowMod { device_id: 1, entry, op: FlowModOp::Add } if entry.entry_id == 1));
    assert!(c.drain_outbox().is_empty());
}

#[test]
fn packet_out_lands_after_rpc_delay() {
    let mut c = ctl(PipelineMode::EXTERNAL);
    c.nb_packet_out(1, 2, OutPortSpec::Port(3), arp(), ms(4)).unwrap();
    let out = c.drain_outbox();
    assert_eq!(out[0].at, ms(5));
}

struct Recorder {
    name: &'static str,
    log: std::sync::Arc<std::sync::Mutex<Vec<(&'static str, u64)>>>,
    flood: bool,
}

impl InternalProcessor for Recorder {
    fn name(&self) -> &str {
        self.name
    }

    fn on_packet_in(&mut self, pi: PacketInView<'_>, ctx: &mut InternalContext<'_>) {
        self.log.lock().unwrap().push((self.name, pi.device_id));
        if self.flood {
            ctx.packet_out(pi.device_id, pi.in_port, OutPortSpec::Flood, pi.frame.clone())
                .unwrap();
        }
    }
}

#[test]
fn internal_processors_run_in_order_without_broker() {
    let mut c = ctl(PipelineMode::Internal);
    let log = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
    for (name, flood) in [("first", false), ("second", true)] {
        c.register_internal_processor(Box::new(Recorder {
            name,
            log: log.clone(),
            flood,
        }))
        .unwrap();
    }
    let out = c.on_packet_in(2, 1, NO_BUFFER, &arp(), ms(3)).unwrap();
    assert_eq!(out, PacketInOutcome::Dispatched { processors: 2, at: ms(4) });
    assert_eq!(*log.lock().unwrap(), vec![("first", 2), ("second", 2)]);
    assert_eq!(c.broker().total_records(), 0);
    let cmds = c.drain_outbox();
    assert_eq!(cmds.len(), 1);
    assert_eq!(cmds[0].at, ms(4));
}

#[test]
fn processors_only_in_internal_mode() {
    let mut c = ctl(PipelineMode::EXTERNAL);
    let r = Recorder {
        name: "x",
        log: Default::default(),
        flood: false,
    };
    assert_eq!(c.register_internal_processor(Box::new(r)), Err(ControllerError::WrongMode));
}

#[test]
fn subscribe_grants_and_denies() {
    let mut c = ctl(PipelineMode::EXTERNAL);
    let ok = c.handle_subscribe(&sub("a", None));
    assert!(ok.granted);
    assert_eq!(ok.assigned_partitions, vec![TopicPartition::new(MAIN_TOPIC, 0)]);
    let bad = c.handle_subscribe(&SubscriptionRequest {
        topic: "nope".into(),
        ..sub("a", None)
    });
    assert!(!bad.granted);
    assert_eq!(bad.error.as_deref(), Some("unknown topic"));
}

#[test]
fn server_side_filter_applied_to_topic() {
    let mut c = ctl(PipelineMode::External {
        placement: FilterPlacement::ServerSide,
    });
    assert!(c
        .handle_subscribe(&sub("a", Some(FilterPredicate::event_types([EventType::Arp]))))
        .granted);
    assert!(matches!(
        c.on_packet_in(1, 1, NO_BUFFER, &icmp(), ms(0)).unwrap(),
        PacketInOutcome::ServerFiltered { .. }
    ));
    assert!(matches!(
        c.on_packet_in(1, 1, NO_BUFFER, &arp(), ms(0)).unwrap(),
        PacketInOutcome::Published { .. }
    ));
    assert_eq!(c.broker().total_records(), 1);
}

#[test]
fn controller_side_uses_type_topics() {
    let mut c = ctl(PipelineMode::External {
        placement: FilterPlacement::ControllerSide,
    });
    let conf = c.handle_subscribe(&sub("topo", Some(FilterPredicate::event_types([EventType::Lldp]))));
    assert!(conf.granted);
    assert_eq!(conf.assigned_partitions, vec![TopicPartition::new("packets.lldp", 0)]);
    assert_eq!(c.on_packet_in(1, 1, NO_BUFFER, &arp(), ms(0)).unwrap(), PacketInOutcome::ControllerFiltered);
    assert_eq!(
        c.on_packet_in(1, 1, NO_BUFFER, &lldp(), ms(0)).unwrap(),
        PacketInOutcome::Published {
            topic: "packets.lldp".into(),
            partition: 0,
            offset: 0
        }
    );
    assert_eq!(c.broker().topic(MAIN_TOPIC).unwrap().len(), 0);
    assert_eq!(c.stats().controller_filtered, 1);
}

#[test]
fn controller_side_without_subscribers_publishes_nothing() {
    let mut c = ctl(PipelineMode::External {
        placement: FilterPlacement::ControllerSide,
    });
    assert_eq!(c.on_packet_in(1, 1, NO_BUFFER, &lldp(), ms(0)).unwrap(), PacketInOutcome::ControllerFiltered);
}

#[test]
fn internal_mode_leaves_broker_empty() {
    let mut c = ctl(PipelineMode::Internal);
    c.on_packet_in(1, 1, NO_BUFFER, &icmp(), ms(0)).unwrap();
    assert_eq!(c.broker().total_records(), 0);
}

#[test]
fn latency_model_from_toml() {
    let m: NbLatencyModel = toml::from_str("rest_install = \"20ms\"\nrpc_packet_out = \"500us\"").unwrap();
    assert_eq!(m.rest_install_delay, ms(20));
    assert_eq!(m.rpc_packet_out_delay, SimTime::from_micros(500));
    assert_eq!(m.internal_processing_delay, ms(1));
    assert!(toml::from_str::<NbLatencyModel>("bogus = 1").is_err());
}
