// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Minimal LLDP: chassis, port and TTL TLVs with locally assigned subtypes.

use super::cursor::Cursor;
use super::{CodecError, EthernetFrame, MacAddr, ETHERTYPE_LLDP};

/// Nearest-bridge group address.
pub const LLDP_MULTICAST: MacAddr = MacAddr([0x01, 0x80, 0xC2, 0x00, 0x00, 0x0E]);

const TLV_END: u16 = 0;
const TLV_CHASSIS: u16 = 1;
const TLV_PORT: u16 = 2;
const TLV_TTL: u16 = 3;
const SUBTYPE_LOCAL: u8 = 7;
const DEFAULT_TTL: u16 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LldpFrame {
    chassis_id: u64,
    port_id: u32,
}

impl LldpFrame {
    pub fn new(chassis_id: u64, port_id: u32) -> Result<Self, CodecError> {
        if chassis_id == 0 {
            return Err(CodecError::malformed("lldp", "chassis id 0"));
        }
        Ok(LldpFrame {
            chassis_id,
            port_id,
        })
    }

    pub fn chassis_id(&self) -> u64 {
        self.chassis_id
    }

    pub fn port_id(&self) -> u32 {
        self.port_id
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24);
        push_tlv(&mut out, TLV_CHASSIS, &{
            let mut v = vec![SUBTYPE_LOCAL];
            v.extend_from_slice(&self.chassis_id.to_be_bytes());
            v
        });
        push_tlv(&mut out, TLV_PORT, &{
            let mut v = vec![SUBTYPE_LOCAL];
            v.extend_from_slice(&self.port_id.to_be_bytes());
            v
        });
        push_tlv(&mut out, TLV_TTL, &DEFAULT_TTL.to_be_bytes());
        push_tlv(&mut out, TLV_END, &[]);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut cur = Cursor::new(bytes);
        let chassis = expect_tlv(&mut cur, TLV_CHASSIS, 9)?;
        let port = expect_tlv(&mut cur, TLV_PORT, 5)?;
        expect_tlv(&mut cur, TLV_TTL, 2)?;
        expect_tlv(&mut cur, TLV_END, 0)?;
        cur.finish("lldp")?;
        if chassis[0] != SUBTYPE_LOCAL || port[0] != SUBTYPE_LOCAL {
            return Err(CodecError::malformed("lldp", "unsupported id subtype"));
        }
        let chassis_id = u64::from_be_bytes(chassis[1..].try_into().unwrap());
        let port_id = u32::from_be_bytes(port[1..].try_into().unwrap());
        LldpFrame::new(chassis_id, port_id)
    }

    /// Frame as emitted from the advertised port; the source address is
    /// derived from the chassis id.
    pub fn to_frame(&self) -> EthernetFrame {
        let mut src = [0u8; 6];
        src[0] = 0x02;
        src[1..].copy_from_slice(&self.chassis_id.to_be_bytes()[3..]);
        EthernetFrame::new(LLDP_MULTICAST, MacAddr(src), ETHERTYPE_LLDP, self.encode())
    }

    pub fn from_frame(frame: &EthernetFrame) -> Result<Self, CodecError> {
        if frame.ethertype != ETHERTYPE_LLDP {
            return Err(CodecError::malformed(
                "lldp",
                format!("ethertype {:#06x}", frame.ethertype),
            ));
        }
        Self::decode(&frame.payload)
    }
}

fn push_tlv(out: &mut Vec<u8>, ty: u16, value: &[u8]) {
    let header = (ty << 9) | value.len() as u16;
    out.extend_from_slice(&header.to_be_bytes());
    out.extend_from_slice(value);
}

fn expect_tlv<'a>(cur: &mut Cursor<'a>, ty: u16, len: usize) -> Result<&'a [u8], CodecError> {
    let header = cur.u16()?;
    let (got_ty, got_len) = (header >> 9, (header & 0x1FF) as usize);
    if got_ty != ty || got_len != len {
        return Err(CodecError::malformed(
            "lldp",
            format!("expected tlv {ty}/{len}, got {got_ty}/{got_len}"),
        ));
    }
    cur.take(len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chassis_zero_rejected() {
        assert!(LldpFrame::new(0, 1).is_err());
        let mut raw = LldpFrame::new(1, 1).unwrap().encode();
        raw[3..11].fill(0);
        assert!(LldpFrame::decode(&raw).is_err());
    }

    #[test]
    fn frame_round_trip() {
        let l = LldpFrame::new(0x0102_0304_0506, 7).unwrap();
        let f = l.to_frame();
        assert_eq!(f.dst, LLDP_MULTICAST);
        assert_eq!(f.payload.len(), 24);
        assert_eq!(LldpFrame::from_frame(&f).unwrap(), l);
    }
}
