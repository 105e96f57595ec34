// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! The binary record published to the broker for every PACKET_IN.

use super::cursor::Cursor;
use super::{CodecError, ETHERTYPE_ARP, ETHERTYPE_IPV4, ETHERTYPE_LLDP};

pub const ENVELOPE_MAGIC: u16 = 0x5045;
pub const ENVELOPE_VERSION: u8 = 1;
pub const ENVELOPE_HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventType {
    Other = 0,
    Arp = 1,
    Lldp = 2,
    Ipv4 = 3,
}

impl EventType {
    pub const ALL: [EventType; 4] = [
        EventType::Other,
        EventType::Arp,
        EventType::Lldp,
        EventType::Ipv4,
    ];

    pub fn from_ethertype(ethertype: u16) -> Self {
        match ethertype {
            ETHERTYPE_ARP => EventType::Arp,
            ETHERTYPE_LLDP => EventType::Lldp,
            ETHERTYPE_IPV4 => EventType::Ipv4,
            _ => EventType::Other,
        }
    }

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => EventType::Other,
            1 => EventType::Arp,
            2 => EventType::Lldp,
            3 => EventType::Ipv4,
            _ => return None,
        })
    }

    /// Lower-case name, used for per-type topic suffixes.
    pub fn name(self) -> &'static str {
        match self {
            EventType::Other => "other",
            EventType::Arp => "arp",
            EventType::Lldp => "lldp",
            EventType::Ipv4 => "ipv4",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PacketEventEnvelope {
    pub event_type: EventType,
    pub device_id: u64,
    pub in_port: u32,
    pub buffer_id: u32,
    pub timestamp_ns: u64,
    /// Raw Ethernet frame bytes.
    pub frame: Vec<u8>,
}

impl PacketEventEnvelope {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ENVELOPE_HEADER_LEN + self.frame.len());
        out.extend_from_slice(&ENVELOPE_MAGIC.to_be_bytes());
        out.push(ENVELOPE_VERSION);
        out.push(self.event_type.tag());
        out.extend_from_slice(&self.device_id.to_be_bytes());
        out.extend_from_slice(&self.in_port.to_be_bytes());
        out.extend_from_slice(&self.buffer_id.to_be_bytes());
        out.extend_from_slice(&self.timestamp_ns.to_be_bytes());
        out.extend_from_slice(&(self.frame.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.frame);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let (event_type, device_id, mut cur) = Self::header(bytes)?;
        let in_port = cur.u32()?;
        let buffer_id = cur.u32()?;
        let timestamp_ns = cur.u64()?;
        let frame_len = cur.u32()? as usize;
        let frame = cur.take(frame_len)?.to_vec();
        cur.finish("envelope")?;
        Ok(PacketEventEnvelope {
            event_type,
            device_id,
            in_port,
            buffer_id,
            timestamp_ns,
            frame,
        })
    }

    /// Reads just `(event_type, device_id)`, for filters that need no more.
    pub fn peek(bytes: &[u8]) -> Result<(EventType, u64), CodecError> {
        let (ty, dev, _) = Self::header(bytes)?;
        Ok((ty, dev))
    }

    fn header(bytes: &[u8]) -> Result<(EventType, u64, Cursor<'_>), CodecError> {
        let mut cur = Cursor::new(bytes);
        let magic = cur.u16()?;
        if magic != ENVELOPE_MAGIC {
            return Err(CodecError::BadMagic(magic));
        }
        let version = cur.u8()?;
        if version != ENVELOPE_VERSION {
            return Err(CodecError::BadVersion(version));
        }
        let tag = cur.u8()?;
        let event_type = EventType::from_tag(tag)
            .ok_or_else(|| CodecError::malformed("envelope", format!("event type {tag}")))?;
        let device_id = cur.u64()?;
        Ok((event_type, device_id, cur))
    }
}

pub fn encode_envelope(env: &PacketEventEnvelope) -> Vec<u8> {
    env.encode()
}

pub fn decode_envelope(bytes: &[u8]) -> Result<PacketEventEnvelope, CodecError> {
    PacketEventEnvelope::decode(bytes)
}
