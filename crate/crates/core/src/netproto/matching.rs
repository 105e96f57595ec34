// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::fmt;

use super::cursor::Cursor;
use super::{
    CodecError, EthernetFrame, Ipv4Packet, MacAddr, ETHERTYPE_IPV4, IPPROTO_TCP, IPPROTO_UDP,
};

/// Nine-field match; `None` is a wildcard.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatchFields {
    pub in_port: Option<u32>,
    pub eth_src: Option<MacAddr>,
    pub eth_dst: Option<MacAddr>,
    pub ethertype: Option<u16>,
    pub ip_src: Option<u32>,
    pub ip_dst: Option<u32>,
    pub ip_proto: Option<u8>,
    pub l4_src: Option<u16>,
    pub l4_dst: Option<u16>,
}

impl MatchFields {
    pub fn is_empty(&self) -> bool {
        self.present_bits() == 0
    }

    /// True when every present field of `self` equals the same field of `key`.
    pub fn covers(&self, key: &MatchFields) -> bool {
        fn ok<T: PartialEq>(rule: Option<T>, key: Option<T>) -> bool {
            match rule {
                None => true,
                Some(v) => key == Some(v),
            }
        }
        ok(self.in_port, key.in_port)
            && ok(self.eth_src, key.eth_src)
            && ok(self.eth_dst, key.eth_dst)
            && ok(self.ethertype, key.ethertype)
            && ok(self.ip_src, key.ip_src)
            && ok(self.ip_dst, key.ip_dst)
            && ok(self.ip_proto, key.ip_proto)
            && ok(self.l4_src, key.l4_src)
            && ok(self.l4_dst, key.l4_dst)
    }

    fn present_bits(&self) -> u16 {
        let flags = [
            self.in_port.is_some(),
            self.eth_src.is_some(),
            self.eth_dst.is_some(),
            self.ethertype.is_some(),
            self.ip_src.is_some(),
            self.ip_dst.is_some(),
            self.ip_proto.is_some(),
            self.l4_src.is_some(),
            self.l4_dst.is_some(),
        ];
        flags
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &set)| acc | ((set as u16) << i))
    }

    /// Presence bitmap (bit i = field i in declaration order) followed by
    /// the present fields.
    pub(crate) fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.present_bits().to_be_bytes());
        if let Some(v) = self.in_port {
            out.extend_from_slice(&v.to_be_bytes());
        }
        if let Some(v) = self.eth_src {
            out.extend_from_slice(&v.0);
        }
        if let Some(v) = self.eth_dst {
            out.extend_from_slice(&v.0);
        }
        if let Some(v) = self.ethertype {
            out.extend_from_slice(&v.to_be_bytes());
        }
        if let Some(v) = self.ip_src {
            out.extend_from_slice(&v.to_be_bytes());
        }
        if let Some(v) = self.ip_dst {
            out.extend_from_slice(&v.to_be_bytes());
        }
        if let Some(v) = self.ip_proto {
            out.push(v);
        }
        if let Some(v) = self.l4_src {
            out.extend_from_slice(&v.to_be_bytes());
        }
        if let Some(v) = self.l4_dst {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }

    pub(crate) fn decode_from(cur: &mut Cursor<'_>) -> Result<Self, CodecError> {
        let bits = cur.u16()?;
        if bits & !0x1FF != 0 {
            return Err(CodecError::malformed("match", format!("bitmap {bits:#06x}")));
        }
        let has = |i: u16| bits & (1 << i) != 0;
        let mut m = MatchFields::default();
        if has(0) {
            m.in_port = Some(cur.u32()?);
        }
        if has(1) {
            m.eth_src = Some(MacAddr(cur.array()?));
        }
        if has(2) {
            m.eth_dst = Some(MacAddr(cur.array()?));
        }
        if has(3) {
            m.ethertype = Some(cur.u16()?);
        }
        if has(4) {
            m.ip_src = Some(cur.u32()?);
        }
        if has(5) {
            m.ip_dst = Some(cur.u32()?);
        }
        if has(6) {
            m.ip_proto = Some(cur.u8()?);
        }
        if has(7) {
            m.l4_src = Some(cur.u16()?);
        }
        if has(8) {
            m.l4_dst = Some(cur.u16()?);
        }
        Ok(m)
    }
}

impl fmt::Display for MatchFields {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(v) = self.in_port {
            parts.push(format!("in_port={v}"));
        }
        if let Some(v) = self.eth_src {
            parts.push(format!("eth_src={v}"));
        }
        if let Some(v) = self.eth_dst {
            parts.push(format!("eth_dst={v}"));
        }
        if let Some(v) = self.ethertype {
            parts.push(format!("ethertype={v:#06x}"));
        }
        if let Some(v) = self.ip_src {
            parts.push(format!("ip_src={v:#010x}"));
        }
        if let Some(v) = self.ip_dst {
            parts.push(format!("ip_dst={v:#010x}"));
        }
        if let Some(v) = self.ip_proto {
            parts.push(format!("ip_proto={v}"));
        }
        if let Some(v) = self.l4_src {
            parts.push(format!("l4_src={v}"));
        }
        if let Some(v) = self.l4_dst {
            parts.push(format!("l4_dst={v}"));
        }
        if parts.is_empty() {
            f.write_str("*")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

/// Exact-match key for a frame arriving on `in_port`.
pub fn extract_match(frame: &EthernetFrame, in_port: u32) -> MatchFields {
    let mut m = MatchFields {
        in_port: Some(in_port),
        eth_src: Some(frame.src),
        eth_dst: Some(frame.dst),
        ethertype: Some(frame.ethertype),
        ..Default::default()
    };
    if frame.ethertype != ETHERTYPE_IPV4 {
        return m;
    }
    let Ok(ip) = Ipv4Packet::decode(&frame.payload) else {
        return m;
    };
    m.ip_src = Some(ip.src);
    m.ip_dst = Some(ip.dst);
    m.ip_proto = Some(ip.proto);
    if matches!(ip.proto, IPPROTO_TCP | IPPROTO_UDP) && ip.payload.len() >= 4 {
        m.l4_src = Some(u16::from_be_bytes([ip.payload[0], ip.payload[1]]));
        m.l4_dst = Some(u16::from_be_bytes([ip.payload[2], ip.payload[3]]));
    }
    m
}
