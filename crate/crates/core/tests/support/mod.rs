// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Generators shared by the integration targets.

#![allow(dead_code)]

use exopipe::netproto::{
    Action, ArpOp, ArpPacket, EthernetFrame, EventType, FlowEntry, FlowModOp, FlowRemovedReason, IcmpEcho, IcmpKind,
    LldpFrame, MacAddr, MatchFields, OfMessage, OutPortSpec, PacketEventEnvelope, MAX_PAYLOAD,
};
use exopipe::time::SimTime;
use proptest::prelude::*;

pub fn mac() -> impl Strategy<Value = MacAddr> {
    any::<[u8; 6]>().prop_map(MacAddr)
}

pub fn frame() -> impl Strategy<Value = EthernetFrame> {
    (mac(), mac(), any::<u16>(), proptest::collection::vec(any::<u8>(), 0..=MAX_PAYLOAD))
        .prop_map(|(d, s, t, p)| EthernetFrame::new(d, s, t, p))
}

/// Frames small enough to keep 1000-case runs quick.
pub fn small_frame() -> impl Strategy<Value = EthernetFrame> {
    (mac(), mac(), any::<u16>(), proptest::collection::vec(any::<u8>(), 0..96))
        .prop_map(|(d, s, t, p)| EthernetFrame::new(d, s, t, p))
}

pub fn arp() -> impl Strategy<Value = ArpPacket> {
    (any::<bool>(), mac(), any::<u32>(), mac(), any::<u32>()).prop_map(|(req, sm, si, tm, ti)| ArpPacket {
        op: if req { ArpOp::Request } else { ArpOp::Reply },
        sender_mac: sm,
        sender_ip: si,
        target_mac: tm,
        target_ip: ti,
    })
}

pub fn lldp() -> impl Strategy<Value = LldpFrame> {
    (1u64.., any::<u32>()).prop_map(|(c, p)| LldpFrame::new(c, p).unwrap())
}

pub fn icmp() -> impl Strategy<Value = IcmpEcho> {
    (any::<bool>(), any::<u16>(), any::<u16>(), any::<u32>(), any::<u32>()).prop_map(|(req, ident, seq, s, d)| IcmpEcho {
        kind: if req { IcmpKind::Request } else { IcmpKind::Reply },
        ident,
        seq,
        src_ip: s,
        dst_ip: d,
    })
}

pub fn matches() -> impl Strategy<Value = MatchFields> {
    (
        proptest::option::of(any::<u32>()),
        proptest::option::of(mac()),
        proptest::option::of(mac()),
        proptest::option::of(any::<u16>()),
        proptest::option::of(any::<u32>()),
        proptest::option::of(any::<u32>()),
        proptest::option::of(any::<u8>()),
        proptest::option::of(any::<u16>()),
        proptest::option::of(any::<u16>()),
    )
        .prop_map(|(in_port, eth_src, eth_dst, ethertype, ip_src, ip_dst, ip_proto, l4_src, l4_dst)| MatchFields {
            in_port,
            eth_src,
            eth_dst,
            ethertype,
            ip_src,
            ip_dst,
            ip_proto,
            l4_src,
            l4_dst,
        })
}

pub fn action() -> impl Strategy<Value = Action> {
    prop_oneof![any::<u32>().prop_map(Action::Output), Just(Action::Flood), Just(Action::Drop)]
}

pub fn entry() -> impl Strategy<Value = FlowEntry> {
    (
        any::<u64>(),
        any::<u16>(),
        matches(),
        proptest::collection::vec(action(), 0..8),
        any::<[u64; 4]>(),
        any::<u64>(),
        any::<u64>(),
    )
        .prop_map(|(id, prio, m, actions, t, pkts, bytes)| {
            let mut e = FlowEntry::new(prio, m, actions)
                .with_timeouts(SimTime::from_nanos(t[0]), SimTime::from_nanos(t[1]));
            e.entry_id = id;
            e.install_time = SimTime::from_nanos(t[2]);
            e.last_hit_time = SimTime::from_nanos(t[3]);
            e.packet_count = pkts;
            e.byte_count = bytes;
            e
        })
}

pub fn packet_in() -> impl Strategy<Value = OfMessage> {
    (any::<u64>(), any::<u32>(), any::<u32>(), small_frame()).prop_map(|(device_id, in_port, buffer_id, frame)| {
        OfMessage::PacketIn {
            device_id,
            in_port,
            buffer_id,
            frame,
        }
    })
}

pub fn packet_out() -> impl Strategy<Value = OfMessage> {
    let spec = prop_oneof![
        any::<u32>().prop_map(OutPortSpec::Port),
        Just(OutPortSpec::Flood),
        Just(OutPortSpec::Table)
    ];
    (any::<u64>(), any::<u32>(), spec, small_frame()).prop_map(|(device_id, in_port, out, frame)| OfMessage::PacketOut {
        device_id,
        in_port,
        out,
        frame,
    })
}

pub fn flow_mod() -> impl Strategy<Value = OfMessage> {
    (any::<u64>(), any::<bool>(), entry()).prop_map(|(device_id, add, entry)| OfMessage::FlowMod {
        device_id,
        entry,
        op: if add { FlowModOp::Add } else { FlowModOp::Delete },
    })
}

pub fn flow_removed() -> impl Strategy<Value = OfMessage> {
    let reason = prop_oneof![
        Just(FlowRemovedReason::IdleTimeout),
        Just(FlowRemovedReason::HardTimeout),
        Just(FlowRemovedReason::Deleted)
    ];
    (any::<u64>(), any::<u64>(), reason).prop_map(|(device_id, entry_id, reason)| OfMessage::FlowRemoved {
        device_id,
        entry_id,
        reason,
    })
}

pub fn echo() -> impl Strategy<Value = OfMessage> {
    any::<u64>().prop_map(|nonce| OfMessage::Echo { nonce })
}

pub fn envelope() -> impl Strategy<Value = PacketEventEnvelope> {
    (
        proptest::sample::select(EventType::ALL.to_vec()),
        any::<u64>(),
        any::<u32>(),
        any::<u32>(),
        any::<u64>(),
        proptest::collection::vec(any::<u8>(), 0..256),
    )
        .prop_map(|(event_type, device_id, in_port, buffer_id, timestamp_ns, frame)| PacketEventEnvelope {
            event_type,
            device_id,
            in_port,
            buffer_id,
            timestamp_ns,
            frame,
        })
}
