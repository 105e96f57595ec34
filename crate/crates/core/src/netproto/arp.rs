// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use super::cursor::Cursor;
use super::{CodecError, EthernetFrame, MacAddr, ETHERTYPE_ARP, ETHERTYPE_IPV4};

/// Ethernet/IPv4 ARP body length.
pub const ARP_LEN: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArpOp {
    Request,
    Reply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArpPacket {
    pub op: ArpOp,
    pub sender_mac: MacAddr,
    pub sender_ip: u32,
    pub target_mac: MacAddr,
    pub target_ip: u32,
}

impl ArpPacket {
    pub fn request(sender_mac: MacAddr, sender_ip: u32, target_ip: u32) -> Self {
        ArpPacket {
            op: ArpOp::Request,
            sender_mac,
            sender_ip,
            target_mac: MacAddr::ZERO,
            target_ip,
        }
    }

    /// The reply a host owning `target_ip` sends back with `mac`.
    pub fn reply(&self, mac: MacAddr) -> Self {
        ArpPacket {
            op: ArpOp::Reply,
            sender_mac: mac,
            sender_ip: self.target_ip,
            target_mac: self.sender_mac,
            target_ip: self.sender_ip,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ARP_LEN);
        out.extend_from_slice(&1u16.to_be_bytes()); // htype: ethernet
        out.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
        out.push(6);
        out.push(4);
        let op: u16 = match self.op {
            ArpOp::Request => 1,
            ArpOp::Reply => 2,
        };
        out.extend_from_slice(&op.to_be_bytes());
        out.extend_from_slice(&self.sender_mac.0);
        out.extend_from_slice(&self.sender_ip.to_be_bytes());
        out.extend_from_slice(&self.target_mac.0);
        out.extend_from_slice(&self.target_ip.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut cur = Cursor::new(bytes);
        let htype = cur.u16()?;
        let ptype = cur.u16()?;
        let hlen = cur.u8()?;
        let plen = cur.u8()?;
        if htype != 1 || ptype != ETHERTYPE_IPV4 || hlen != 6 || plen != 4 {
            return Err(CodecError::malformed(
                "arp",
                format!("htype={htype} ptype={ptype:#06x} hlen={hlen} plen={plen}"),
            ));
        }
        let op = match cur.u16()? {
            1 => ArpOp::Request,
            2 => ArpOp::Reply,
            other => return Err(CodecError::malformed("arp", format!("op={other}"))),
        };
        let sender_mac = MacAddr(cur.array()?);
        let sender_ip = cur.u32()?;
        let target_mac = MacAddr(cur.array()?);
        let target_ip = cur.u32()?;
        cur.finish("arp")?;
        Ok(ArpPacket {
            op,
            sender_mac,
            sender_ip,
            target_mac,
            target_ip,
        })
    }

    /// Broadcast request frame (replies go unicast to the requester).
    pub fn to_frame(&self) -> EthernetFrame {
        let dst = match self.op {
            ArpOp::Request => MacAddr::BROADCAST,
            ArpOp::Reply => self.target_mac,
        };
        EthernetFrame::new(dst, self.sender_mac, ETHERTYPE_ARP, self.encode())
    }

    pub fn from_frame(frame: &EthernetFrame) -> Result<Self, CodecError> {
        if frame.ethertype != ETHERTYPE_ARP {
            return Err(CodecError::malformed(
                "arp",
                format!("ethertype {:#06x}", frame.ethertype),
            ));
        }
        Self::decode(&frame.payload)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_is_broadcast_and_28_bytes() {
        let p = ArpPacket {
            op: ArpOp::Request,
            sender_mac: MacAddr::from_index(1),
            sender_ip: 0x0A00_0001,
            target_mac: MacAddr::ZERO,
            target_ip: 0x0A00_0002,
        };
        let f = p.to_frame();
        assert!(f.dst.is_broadcast());
        assert_eq!(f.payload.len(), ARP_LEN);
        assert_eq!(f.encode().unwrap().len(), 42);
        assert_eq!(ArpPacket::from_frame(&f).unwrap(), p);
    }

    #[test]
    fn bad_opcode() {
        let mut b = ArpPacket {
            op: ArpOp::Reply,
            sender_mac: MacAddr::ZERO,
            sender_ip: 0,
            target_mac: MacAddr::ZERO,
            target_ip: 0,
        }
        .encode();
        b[7] = 9;
        assert!(matches!(
            ArpPacket::decode(&b),
            Err(CodecError::Malformed { .. })
        ));
    }
}
