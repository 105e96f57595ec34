// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Fluid model of long-lived TCP-like transfers.
//!
//! The connections share the path bottleneck equally while every rule on the
//! path is installed. When a rule expires the transfer stalls; one probe
//! segment per connection is injected at the ingress switch, and the
//! transfer resumes once a probe has been released by the ingress switch and
//! the path is complete again.

use crate::netproto::{EthernetFrame, Ipv4Packet, MacAddr, IPPROTO_TCP};
use crate::time::SimTime;

pub const PROBE_DST_PORT: u16 = 5201;
pub const PROBE_SRC_PORT_BASE: u16 = 40000;

/// Minimal 20-byte TCP header, PSH|ACK, no options.
pub fn tcp_probe_frame(
    src_mac: MacAddr,
    dst_mac: MacAddr,
    src_ip: u32,
    dst_ip: u32,
    src_port: u16,
    dst_port: u16,
) -> EthernetFrame {
    let mut tcp = Vec::with_capacity(20);
    tcp.extend_from_slice(&src_port.to_be_bytes());
    tcp.extend_from_slice(&dst_port.to_be_bytes());
    tcp.extend_from_slice(&[0; 8]); // seq, ack
    tcp.push(5 << 4);
    tcp.push(0x18);
    tcp.extend_from_slice(&u16::MAX.to_be_bytes());
    tcp.extend_from_slice(&[0; 4]); // checksum, urgent
    Ipv4Packet {
        src: src_ip,
        dst: dst_ip,
        proto: IPPROTO_TCP,
        payload: tcp,
    }
    .to_frame(src_mac, dst_mac)
}

/// `capacity * (duration - stall) / duration`.
pub fn fluid_throughput(capacity_bps: u64, duration: SimTime, stall: SimTime) -> f64 {
    if duration.is_zero() {
        return 0.0;
    }
    let active = duration.saturating_sub(stall);
    capacity_bps as f64 * (active.as_nanos() as f64 / duration.as_nanos() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowPhase {
    Stalled { since: SimTime, probe_released: bool },
    Running { since: SimTime },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BulkFlowReport {
    pub n_conns: u32,
    pub duration: SimTime,
    pub capacity_bps: u64,
    pub stall_total: SimTime,
    pub first_stall: SimTime,
    /// Running-to-stalled transitions after the first install.
    pub expiry_cycles: u32,
    pub throughput_bps: f64,
    pub per_connection_bps: f64,
}

#[derive(Debug, Clone)]
pub struct BulkFlow {
    pub src_host: usize,
    pub dst_host: usize,
    pub n_conns: u32,
    pub start: SimTime,
    pub duration: SimTime,
    phase: FlowPhase,
    stalls: Vec<(SimTime, SimTime)>,
    expiry_cycles: u32,
    capacity_bps: u64,
}

impl BulkFlow {
    /// A flow that starts stalled at `start`; `capacity_bps` is the
    /// bottleneck of the ground-truth path until a live path is observed.
    pub fn new(src_host: usize, dst_host: usize, n_conns: u32, start: SimTime, duration: SimTime, capacity_bps: u64) -> Self {
        BulkFlow {
            src_host,
            dst_host,
            n_conns,
            start,
            duration,
            phase: FlowPhase::Stalled {
                since: start,
                probe_released: false,
            },
            stalls: Vec::new(),
            expiry_cycles: 0,
            capacity_bps,
        }
    }

    pub fn end(&self) -> SimTime {
        self.start + self.duration
    }

    pub fn phase(&self) -> FlowPhase {
        self.phase
    }

    pub fn is_running(&self) -> bool {
        matches!(self.phase, FlowPhase::Running { .. })
    }

    /// A path rule disappeared. Returns true when the flow just stalled and
    /// probes must be injected.
    pub fn on_path_broken(&mut self, now: SimTime) -> bool {
        match self.phase {
            FlowPhase::Running { .. } if now < self.end() => {
                self.phase = FlowPhase::Stalled {
                    since: now,
                    probe_released: false,
                };
                self.expiry_cycles += 1;
                true
            }
            _ => false,
        }
    }

    /// The ingress switch released a probe. `path` is the bottleneck capacity
    /// if every rule on the path is live, `None` otherwise.
    pub fn on_probe_egress(&mut self, now: SimTime, path: Option<u64>) -> bool {
        if let FlowPhase::Stalled { since, .. } = self.phase {
            self.phase = FlowPhase::Stalled {
                since,
                probe_released: true,
            };
            return self.try_resume(now, path);
        }
        false
    }

    /// Rules changed somewhere on the path.
    pub fn on_rules_changed(&mut self, now: SimTime, path: Option<u64>) -> bool {
        self.try_resume(now, path)
    }

    /// Path was complete before any traffic was sent.
    pub fn start_running(&mut self, now: SimTime, capacity_bps: u64) {
        self.capacity_bps = capacity_bps;
        self.phase = FlowPhase::Running { since: now };
    }

    fn try_resume(&mut self, now: SimTime, path: Option<u64>) -> bool {
        match (self.phase, path) {
            (
                FlowPhase::Stalled {
                    since,
                    probe_released: true,
                },
                Some(cap),
            ) => {
                self.stalls.push((since, now));
                self.capacity_bps = cap;
                self.phase = FlowPhase::Running { since: now };
                true
            }
            _ => false,
        }
    }

    pub fn report(&self) -> BulkFlowReport {
        let end = self.end();
        let clip = |(a, b): (SimTime, SimTime)| {
            let a = a.max(self.start).min(end);
            let b = b.max(self.start).min(end);
            b.saturating_sub(a)
        };
        let mut stall_total = self.stalls.iter().map(|&s| clip(s)).fold(SimTime::ZERO, |a, b| a + b);
        if let FlowPhase::Stalled { since, .. } = self.phase {
            stall_total += clip((since, end));
        }
        let first_stall = match (self.stalls.first(), self.phase) {
            (Some(&s), _) => clip(s),
            (None, FlowPhase::Stalled { since, .. }) => clip((since, end)),
            (None, FlowPhase::Running { .. }) => SimTime::ZERO,
        };
        let throughput_bps = fluid_throughput(self.capacity_bps, self.duration, stall_total);
        BulkFlowReport {
            n_conns: self.n_conns,
            duration: self.duration,
            capacity_bps: self.capacity_bps,
            stall_total,
            first_stall,
            expiry_cycles: self.expiry_cycles,
            throughput_bps,
            per_connection_bps: throughput_bps / f64::from(self.n_conns.max(1)),
        }
    }
}
