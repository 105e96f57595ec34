// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Fixed 20-byte IPv4 header and ICMP echo. Checksums are left zero.

use super::cursor::Cursor;
use super::{CodecError, EthernetFrame, MacAddr, ETHERTYPE_IPV4};

pub const IPV4_HEADER_LEN: usize = 20;
pub const IPPROTO_ICMP: u8 = 1;
pub const IPPROTO_TCP: u8 = 6;
pub const IPPROTO_UDP: u8 = 17;

const DEFAULT_TTL: u8 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ipv4Packet {
    pub src: u32,
    pub dst: u32,
    pub proto: u8,
    pub payload: Vec<u8>,
}

impl Ipv4Packet {
    pub fn encode(&self) -> Vec<u8> {
        let total = (IPV4_HEADER_LEN + self.payload.len()) as u16;
        let mut out = Vec::with_capacity(total as usize);
        out.push(0x45);
        out.push(0);
        out.extend_from_slice(&total.to_be_bytes());
        out.extend_from_slice(&[0, 0, 0, 0]); // id, flags/fragment
        out.push(DEFAULT_TTL);
        out.push(self.proto);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&self.src.to_be_bytes());
        out.extend_from_slice(&self.dst.to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut cur = Cursor::new(bytes);
        let vihl = cur.u8()?;
        if vihl != 0x45 {
            return Err(CodecError::malformed("ipv4", format!("version/ihl {vihl:#04x}")));
        }
        cur.u8()?;
        let total = cur.u16()? as usize;
        if total < IPV4_HEADER_LEN || total > bytes.len() {
            return Err(CodecError::malformed("ipv4", format!("total length {total}")));
        }
        cur.take(5)?;
        let proto = cur.u8()?;
        cur.u16()?;
        let src = cur.u32()?;
        let dst = cur.u32()?;
        let payload = cur.take(total - IPV4_HEADER_LEN)?.to_vec();
        Ok(Ipv4Packet {
            src,
            dst,
            proto,
            payload,
        })
    }

    pub fn to_frame(&self, src: MacAddr, dst: MacAddr) -> EthernetFrame {
        EthernetFrame::new(dst, src, ETHERTYPE_IPV4, self.encode())
    }

    pub fn from_frame(frame: &EthernetFrame) -> Result<Self, CodecError> {
        if frame.ethertype != ETHERTYPE_IPV4 {
            return Err(CodecError::malformed(
                "ipv4",
                format!("ethertype {:#06x}", frame.ethertype),
            ));
        }
        Self::decode(&frame.payload)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IcmpKind {
    Request,
    Reply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IcmpEcho {
    pub kind: IcmpKind,
    pub ident: u16,
    pub seq: u16,
    pub src_ip: u32,
    pub dst_ip: u32,
}

impl IcmpEcho {
    /// The reply mirrors ident and seq and swaps the addresses.
    pub fn reply(&self) -> IcmpEcho {
        IcmpEcho {
            kind: IcmpKind::Reply,
            ident: self.ident,
            seq: self.seq,
            src_ip: self.dst_ip,
            dst_ip: self.src_ip,
        }
    }

    pub fn to_ipv4(&self) -> Ipv4Packet {
        let ty = match self.kind {
            IcmpKind::Request => 8,
            IcmpKind::Reply => 0,
        };
        let mut payload = vec![ty, 0, 0, 0];
        payload.extend_from_slice(&self.ident.to_be_bytes());
        payload.extend_from_slice(&self.seq.to_be_bytes());
        Ipv4Packet {
            src: self.src_ip,
            dst: self.dst_ip,
            proto: IPPROTO_ICMP,
            payload,
        }
    }

    pub fn from_ipv4(ip: &Ipv4Packet) -> Result<Self, CodecError> {
        if ip.proto != IPPROTO_ICMP {
            return Err(CodecError::malformed("icmp", format!("ip proto {}", ip.proto)));
        }
        let mut cur = Cursor::new(&ip.payload);
        let kind = match cur.u8()? {
            8 => IcmpKind::Request,
            0 => IcmpKind::Reply,
            other => return Err(CodecError::malformed("icmp", format!("type {other}"))),
        };
        cur.take(3)?;
        let ident = cur.u16()?;
        let seq = cur.u16()?;
        cur.finish("icmp")?;
        Ok(IcmpEcho {
            kind,
            ident,
            seq,
            src_ip: ip.src,
            dst_ip: ip.dst,
        })
    }

    pub fn to_frame(&self, src: MacAddr, dst: MacAddr) -> EthernetFrame {
        self.to_ipv4().to_frame(src, dst)
    }

    pub fn from_frame(frame: &EthernetFrame) -> Result<Self, CodecError> {
        Self::from_ipv4(&Ipv4Packet::from_frame(frame)?)
    }
}
