// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::fmt;

use crate::netproto::{
    Action, EthernetFrame, EventType, FlowEntry, FlowRemovedReason, IcmpEcho, IcmpKind, MatchFields, OutPortSpec, ETHERTYPE_ARP,
    ETHERTYPE_IPV4, ETHERTYPE_LLDP, IPPROTO_ICMP, IPPROTO_TCP,
};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Arp,
    Lldp,
    EchoRequest { ident: u16, seq: u16 },
    EchoReply { ident: u16, seq: u16 },
    Tcp,
    Other,
}

impl FrameKind {
    pub fn of(frame: &EthernetFrame) -> Self {
        match frame.ethertype {
            ETHERTYPE_ARP => FrameKind::Arp,
            ETHERTYPE_LLDP => FrameKind::Lldp,
            ETHERTYPE_IPV4 => match frame.payload.get(9).copied() {
                Some(IPPROTO_ICMP) => match IcmpEcho::from_frame(frame) {
                    Ok(e) if e.kind == IcmpKind::Request => FrameKind::EchoRequest { ident: e.ident, seq: e.seq },
                    Ok(e) => FrameKind::EchoReply { ident: e.ident, seq: e.seq },
                    Err(_) => FrameKind::Other,
                },
                Some(IPPROTO_TCP) => FrameKind::Tcp,
                _ => FrameKind::Other,
            },
            _ => FrameKind::Other,
        }
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameKind::Arp => f.write_str("arp"),
            FrameKind::Lldp => f.write_str("lldp"),
            FrameKind::EchoRequest { ident, seq } => write!(f, "echo-req({ident},{seq})"),
            FrameKind::EchoReply { ident, seq } => write!(f, "echo-rep({ident},{seq})"),
            FrameKind::Tcp => f.write_str("tcp"),
            FrameKind::Other => f.write_str("other"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    HostTx { host: usize, kind: FrameKind },
    HostRx { host: usize, kind: FrameKind },
    PacketIn { device: u64, in_port: u32, event_type: EventType },
    Published { topic: String, partition: u32, offset: u64 },
    ServerFiltered { topic: String },
    ControllerFiltered { device: u64 },
    PacketOut { device: u64, out: OutPortSpec },
    FlowInstalled { device: u64, entry: FlowEntry },
    FlowRemoved { device: u64, entry_id: u64, reason: FlowRemovedReason },
    PingReply { session: usize, seq: u16, rtt: SimTime },
    PingLost { session: usize, seq: u16 },
    FlowStalled { flow: usize },
    FlowResumed { flow: usize },
    Dropped { device: u64, why: &'static str },
}

fn actions_str(actions: &[Action]) -> String {
    let parts: Vec<String> = actions
        .iter()
        .map(|a| match a {
            Action::Output(p) => format!("out:{p}"),
            Action::Flood => "flood".into(),
            Action::Drop => "drop".into(),
        })
        .collect();
    parts.join(",")
}

fn out_str(o: &OutPortSpec) -> String {
    match o {
        OutPortSpec::Port(p) => p.to_string(),
        OutPortSpec::Flood => "flood".into(),
        OutPortSpec::Table => "table".into(),
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::HostTx { host, kind } => write!(f, "host-tx h{host} {kind}"),
            TraceEvent::HostRx { host, kind } => write!(f, "host-rx h{host} {kind}"),
            TraceEvent::PacketIn {
                device,
                in_port,
                event_type,
            } => write!(f, "packet-in s{device}:{in_port} {}", event_type.name()),
            TraceEvent::Published { topic, partition, offset } => write!(f, "published {topic}/{partition}@{offset}"),
            TraceEvent::ServerFiltered { topic } => write!(f, "server-filtered {topic}"),
            TraceEvent::ControllerFiltered { device } => write!(f, "controller-filtered s{device}"),
            TraceEvent::PacketOut { device, out } => write!(f, "packet-out s{device} {}", out_str(out)),
            TraceEvent::FlowInstalled { device, entry } => write!(
                f,
                "flow-installed s{device} id={} prio={} match={} actions={}",
                entry.entry_id,
                entry.priority,
                entry.matches,
                actions_str(&entry.actions)
            ),
            TraceEvent::FlowRemoved {
                device,
                entry_id,
                reason,
            } => write!(f, "flow-removed s{device} id={entry_id} {reason:?}"),
            TraceEvent::PingReply { session, seq, rtt } => write!(f, "ping-reply {session}/{seq} rtt={rtt}"),
            TraceEvent::PingLost { session, seq } => write!(f, "ping-lost {session}/{seq}"),
            TraceEvent::FlowStalled { flow } => write!(f, "flow-stalled {flow}"),
            TraceEvent::FlowResumed { flow } => write!(f, "flow-resumed {flow}"),
            TraceEvent::Dropped { device, why } => write!(f, "dropped s{device} {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub at: SimTime,
    pub event: TraceEvent,
}

/// `(device, match, priority, actions)` of an installed rule.
pub type RuleKey = (u64, MatchFields, u16, Vec<Action>);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn push(&mut self, at: SimTime, event: TraceEvent) {
        self.entries.push(TraceEntry { at, event });
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One line per entry: time in nanoseconds, then the event.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&format!("{} {}\n", e.at.as_nanos(), e.event));
        }
        s
    }

    pub fn packet_ins_between(&self, from: SimTime, to: SimTime) -> usize {
        self.entries
            .iter()
            .filter(|e| e.at >= from && e.at <= to && matches!(e.event, TraceEvent::PacketIn { .. }))
            .count()
    }

    pub fn packet_ins(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e.event, TraceEvent::PacketIn { .. }))
            .count()
    }

    /// Reply time minus request time for echo `(ident, seq)`, as seen on
    /// the wire by `host`.
    pub fn echo_rtt(&self, host: usize, ident: u16, seq: u16) -> Option<SimTime> {
        let sent = self.entries.iter().find_map(|e| match e.event {
            TraceEvent::HostTx {
                host: h,
                kind: FrameKind::EchoRequest { ident: i, seq: s },
            } if h == host && i == ident && s == seq => Some(e.at),
            _ => None,
        })?;
        let got = self.entries.iter().find_map(|e| match e.event {
            TraceEvent::HostRx {
                host: h,
                kind: FrameKind::EchoReply { ident: i, seq: s },
            } if h == host && i == ident && s == seq => Some(e.at),
            _ => None,
        })?;
        Some(got - sent)
    }

    /// Installed rules without ids or timing, sorted.
    pub fn rule_multiset(&self) -> Vec<RuleKey> {
        let mut v: Vec<RuleKey> = self
            .entries
            .iter()
            .filter_map(|e| match &e.event {
                TraceEvent::FlowInstalled { device, entry } => {
                    Some((*device, entry.matches, entry.priority, entry.actions.clone()))
                }
                _ => None,
            })
            .collect();
        v.sort();
        v
    }

    pub fn count(&self, pred: impl Fn(&TraceEvent) -> bool) -> usize {
        self.entries.iter().filter(|e| pred(&e.event)).count()
    }
}
