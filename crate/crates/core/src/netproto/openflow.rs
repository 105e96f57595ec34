// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! OpenFlow-1.0-like control messages. This is an analog of the protocol,
//! not a compliant implementation: the layout below is our own.

use std::fmt;

use super::cursor::Cursor;
use super::{CodecError, EthernetFrame, MatchFields};
use crate::time::SimTime;

/// Switches never buffer; every PACKET_IN carries the full frame.
pub const NO_BUFFER: u32 = 0xFFFF_FFFF;
/// `in_port` of a PACKET_OUT that did not originate on a switch port.
pub const NO_PORT: u32 = 0xFFFF_FFFF;

const TAG_PACKET_IN: u8 = 1;
const TAG_PACKET_OUT: u8 = 2;
const TAG_FLOW_MOD: u8 = 3;
const TAG_FLOW_REMOVED: u8 = 4;
const TAG_ECHO: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Output(u32),
    Flood,
    Drop,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Output(p) => write!(f, "output:{p}"),
            Action::Flood => f.write_str("flood"),
            Action::Drop => f.write_str("drop"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlowEntry {
    pub entry_id: u64,
    pub priority: u16,
    pub matches: MatchFields,
    pub actions: Vec<Action>,
    /// Zero disables the timeout.
    pub hard_timeout: SimTime,
    pub idle_timeout: SimTime,
    pub install_time: SimTime,
    pub last_hit_time: SimTime,
    pub packet_count: u64,
    pub byte_count: u64,
}

impl FlowEntry {
    pub fn new(priority: u16, matches: MatchFields, actions: Vec<Action>) -> Self {
        FlowEntry {
            entry_id: 0,
            priority,
            matches,
            actions,
            hard_timeout: SimTime::ZERO,
            idle_timeout: SimTime::ZERO,
            install_time: SimTime::ZERO,
            last_hit_time: SimTime::ZERO,
            packet_count: 0,
            byte_count: 0,
        }
    }

    pub fn with_timeouts(mut self, hard: SimTime, idle: SimTime) -> Self {
        self.hard_timeout = hard;
        self.idle_timeout = idle;
        self
    }

    fn encode_into(&self, out: &mut Vec<u8>) -> Result<(), CodecError> {
        out.extend_from_slice(&self.entry_id.to_be_bytes());
        out.extend_from_slice(&self.priority.to_be_bytes());
        self.matches.encode_into(out);
        let n: u8 = self
            .actions
            .len()
            .try_into()
            .map_err(|_| CodecError::malformed("flow entry", "more than 255 actions"))?;
        out.push(n);
        for a in &self.actions {
            match a {
                Action::Output(p) => {
                    out.push(0);
                    out.extend_from_slice(&p.to_be_bytes());
                }
                Action::Flood => out.push(1),
                Action::Drop => out.push(2),
            }
        }
        for v in [
            self.hard_timeout.as_nanos(),
            self.idle_timeout.as_nanos(),
            self.install_time.as_nanos(),
            self.last_hit_time.as_nanos(),
            self.packet_count,
            self.byte_count,
        ] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        Ok(())
    }

    fn decode_from(cur: &mut Cursor<'_>) -> Result<Self, CodecError> {
        let entry_id = cur.u64()?;
        let priority = cur.u16()?;
        let matches = MatchFields::decode_from(cur)?;
        let n = cur.u8()?;
        let mut actions = Vec::with_capacity(n as usize);
        for _ in 0..n {
            actions.push(match cur.u8()? {
                0 => Action::Output(cur.u32()?),
                1 => Action::Flood,
                2 => Action::Drop,
                other => return Err(CodecError::malformed("action", format!("kind {other}"))),
            });
        }
        Ok(FlowEntry {
            entry_id,
            priority,
            matches,
            actions,
            hard_timeout: SimTime::from_nanos(cur.u64()?),
            idle_timeout: SimTime::from_nanos(cur.u64()?),
            install_time: SimTime::from_nanos(cur.u64()?),
            last_hit_time: SimTime::from_nanos(cur.u64()?),
            packet_count: cur.u64()?,
            byte_count: cur.u64()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutPortSpec {
    Port(u32),
    Flood,
    /// Run the frame through the switch's flow table.
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowModOp {
    Add,
    Delete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowRemovedReason {
    IdleTimeout,
    HardTimeout,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OfMessage {
    PacketIn {
        device_id: u64,
        in_port: u32,
        buffer_id: u32,
        frame: EthernetFrame,
    },
    PacketOut {
        device_id: u64,
        /// Port the frame is considered to have arrived on, or [`NO_PORT`].
        in_port: u32,
        out: OutPortSpec,
        frame: EthernetFrame,
    },
    FlowMod {
        device_id: u64,
        entry: FlowEntry,
        op: FlowModOp,
    },
    FlowRemoved {
        device_id: u64,
        entry_id: u64,
        reason: FlowRemovedReason,
    },
    Echo {
        nonce: u64,
    },
}

impl OfMessage {
    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let mut out = Vec::with_capacity(64);
        match self {
            OfMessage::PacketIn {
                device_id,
                in_port,
                buffer_id,
                frame,
            } => {
                out.push(TAG_PACKET_IN);
                out.extend_from_slice(&device_id.to_be_bytes());
                out.extend_from_slice(&in_port.to_be_bytes());
                out.extend_from_slice(&buffer_id.to_be_bytes());
                frame.encode_into(&mut out)?;
            }
            OfMessage::PacketOut {
                device_id,
                in_port,
                out: spec,
                frame,
            } => {
                out.push(TAG_PACKET_OUT);
                out.extend_from_slice(&device_id.to_be_bytes());
                out.extend_from_slice(&in_port.to_be_bytes());
                let (kind, port) = match spec {
                    OutPortSpec::Port(p) => (0u8, *p),
                    OutPortSpec::Flood => (1, 0),
                    OutPortSpec::Table => (2, 0),
                };
                out.push(kind);
                out.extend_from_slice(&port.to_be_bytes());
                frame.encode_into(&mut out)?;
            }
            OfMessage::FlowMod {
                device_id,
                entry,
                op,
            } => {
                out.push(TAG_FLOW_MOD);
                out.extend_from_slice(&device_id.to_be_bytes());
                out.push(match op {
                    FlowModOp::Add => 0,
                    FlowModOp::Delete => 1,
                });
                entry.encode_into(&mut out)?;
            }
            OfMessage::FlowRemoved {
                device_id,
                entry_id,
                reason,
            } => {
                out.push(TAG_FLOW_REMOVED);
                out.extend_from_slice(&device_id.to_be_bytes());
                out.extend_from_slice(&entry_id.to_be_bytes());
                out.push(match reason {
                    FlowRemovedReason::IdleTimeout => 0,
                    FlowRemovedReason::HardTimeout => 1,
                    FlowRemovedReason::Deleted => 2,
                });
            }
            OfMessage::Echo { nonce } => {
                out.push(TAG_ECHO);
                out.extend_from_slice(&nonce.to_be_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut cur = Cursor::new(bytes);
        let msg = match cur.u8()? {
            TAG_PACKET_IN => {
                let device_id = cur.u64()?;
                let in_port = cur.u32()?;
                let buffer_id = cur.u32()?;
                let frame = EthernetFrame::decode(cur.rest())?;
                OfMessage::PacketIn {
                    device_id,
                    in_port,
                    buffer_id,
                    frame,
                }
            }
            TAG_PACKET_OUT => {
                let device_id = cur.u64()?;
                let in_port = cur.u32()?;
                let kind = cur.u8()?;
                let port = cur.u32()?;
                let out = match (kind, port) {
                    (0, p) => OutPortSpec::Port(p),
                    (1, 0) => OutPortSpec::Flood,
                    (2, 0) => OutPortSpec::Table,
                    (k, p) => {
                        return Err(CodecError::malformed(
                            "packet out",
                            format!("port spec {k}/{p}"),
                        ))
                    }
                };
                let frame = EthernetFrame::decode(cur.rest())?;
                OfMessage::PacketOut {
                    device_id,
                    in_port,
                    out,
                    frame,
                }
            }
            TAG_FLOW_MOD => {
                let device_id = cur.u64()?;
                let op = match cur.u8()? {
                    0 => FlowModOp::Add,
                    1 => FlowModOp::Delete,
                    other => {
                        return Err(CodecError::malformed("flow mod", format!("op {other}")))
                    }
                };
                let entry = FlowEntry::decode_from(&mut cur)?;
                cur.finish("flow mod")?;
                OfMessage::FlowMod {
                    device_id,
                    entry,
                    op,
                }
            }
            TAG_FLOW_REMOVED => {
                let device_id = cur.u64()?;
                let entry_id = cur.u64()?;
                let reason = match cur.u8()? {
                    0 => FlowRemovedReason::IdleTimeout,
                    1 => FlowRemovedReason::HardTimeout,
                    2 => FlowRemovedReason::Deleted,
                    other => {
                        return Err(CodecError::malformed(
                            "flow removed",
                            format!("reason {other}"),
                        ))
                    }
                };
                cur.finish("flow removed")?;
                OfMessage::FlowRemoved {
                    device_id,
                    entry_id,
                    reason,
                }
            }
            TAG_ECHO => {
                let nonce = cur.u64()?;
                cur.finish("echo")?;
                OfMessage::Echo { nonce }
            }
            other => return Err(CodecError::UnknownTag(other)),
        };
        Ok(msg)
    }
}

pub fn encode_of(msg: &OfMessage) -> Result<Vec<u8>, CodecError> {
    msg.encode()
}

pub fn decode_of(bytes: &[u8]) -> Result<OfMessage, CodecError> {
    OfMessage::decode(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netproto::MacAddr;

    #[test]
    fn echo_zero_layout() {
        let b = encode_of(&OfMessage::Echo { nonce: 0 }).unwrap();
        assert_eq!(b, vec![5, 0, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn unknown_tag() {
        assert_eq!(decode_of(&[0x09, 0, 0]), Err(CodecError::UnknownTag(9)));
        assert_eq!(decode_of(&[0x00]), Err(CodecError::UnknownTag(0)));
    }

    #[test]
    fn empty_and_short_inputs_truncate() {
        assert!(matches!(decode_of(&[]), Err(CodecError::Truncated { .. })));
        assert!(matches!(
            decode_of(&[5, 0, 0]),
            Err(CodecError::Truncated { .. })
        ));
        assert!(matches!(
            decode_of(&[1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 1, 0xFF, 0xFF, 0xFF, 0xFF, 0]),
            Err(CodecError::Truncated { .. })
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut b = encode_of(&OfMessage::Echo { nonce: 3 }).unwrap();
        b.push(0);
        assert!(matches!(decode_of(&b), Err(CodecError::Malformed { .. })));
    }

    #[test]
    fn packet_in_layout() {
        let frame = EthernetFrame::new(MacAddr::BROADCAST, MacAddr::from_index(1), 0x0806, vec![]);
        let b = encode_of(&OfMessage::PacketIn {
            device_id: 0x0102,
            in_port: 3,
            buffer_id: NO_BUFFER,
            frame: frame.clone(),
        })
        .unwrap();
        assert_eq!(b.len(), 1 + 8 + 4 + 4 + 14);
        assert_eq!(b[0], 1);
        assert_eq!(&b[1..9], &[0, 0, 0, 0, 0, 0, 1, 2]);
        assert_eq!(&b[9..13], &[0, 0, 0, 3]);
        assert_eq!(&b[13..17], &[0xFF; 4]);
        assert_eq!(&b[17..], frame.encode().unwrap().as_slice());
    }
}
