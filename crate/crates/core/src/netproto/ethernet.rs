// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::fmt;
use std::str::FromStr;

use super::cursor::Cursor;
use super::CodecError;

pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const ETHERTYPE_ARP: u16 = 0x0806;
pub const ETHERTYPE_LLDP: u16 = 0x88CC;

pub const ETH_HEADER_LEN: usize = 14;
pub const MAX_PAYLOAD: usize = 1500;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub const BROADCAST: MacAddr = MacAddr([0xFF; 6]);
    pub const ZERO: MacAddr = MacAddr([0; 6]);

    /// Locally numbered address `00:00:xx:xx:xx:xx` carrying `n` in the low 32 bits.
    pub fn from_index(n: u32) -> Self {
        let b = n.to_be_bytes();
        MacAddr([0, 0, b[0], b[1], b[2], b[3]])
    }

    pub fn is_broadcast(&self) -> bool {
        *self == Self::BROADCAST
    }

    pub fn is_multicast(&self) -> bool {
        self.0[0] & 0x01 == 1
    }

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

impl FromStr for MacAddr {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 6];
        let mut parts = s.split(':');
        for byte in out.iter_mut() {
            let part = parts
                .next()
                .ok_or_else(|| CodecError::malformed("mac address", s))?;
            *byte = u8::from_str_radix(part, 16)
                .map_err(|_| CodecError::malformed("mac address", s))?;
        }
        if parts.next().is_some() {
            return Err(CodecError::malformed("mac address", s));
        }
        Ok(MacAddr(out))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EthernetFrame {
    pub dst: MacAddr,
    pub src: MacAddr,
    pub ethertype: u16,
    pub payload: Vec<u8>,
}

impl EthernetFrame {
    pub fn new(dst: MacAddr, src: MacAddr, ethertype: u16, payload: Vec<u8>) -> Self {
        EthernetFrame {
            dst,
            src,
            ethertype,
            payload,
        }
    }

    /// Encoded length in bytes.
    pub fn wire_len(&self) -> usize {
        ETH_HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let mut out = Vec::with_capacity(self.wire_len());
        self.encode_into(&mut out)?;
        Ok(out)
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) -> Result<(), CodecError> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(CodecError::OversizePayload(self.payload.len()));
        }
        out.extend_from_slice(&self.dst.0);
        out.extend_from_slice(&self.src.0);
        out.extend_from_slice(&self.ethertype.to_be_bytes());
        out.extend_from_slice(&self.payload);
        Ok(())
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut cur = Cursor::new(bytes);
        let dst = MacAddr(cur.array()?);
        let src = MacAddr(cur.array()?);
        let ethertype = cur.u16()?;
        let payload = cur.rest();
        if payload.len() > MAX_PAYLOAD {
            return Err(CodecError::OversizePayload(payload.len()));
        }
        Ok(EthernetFrame {
            dst,
            src,
            ethertype,
            payload: payload.to_vec(),
        })
    }
}

pub fn encode_frame(frame: &EthernetFrame) -> Result<Vec<u8>, CodecError> {
    frame.encode()
}

pub fn decode_frame(bytes: &[u8]) -> Result<EthernetFrame, CodecError> {
    EthernetFrame::decode(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arp_sized_frame_layout() {
        let f = EthernetFrame::new(
            MacAddr::BROADCAST,
            MacAddr::from_index(1),
            ETHERTYPE_ARP,
            vec![0xAB; 28],
        );
        let b = encode_frame(&f).unwrap();
        assert_eq!(b.len(), 42);
        assert_eq!(&b[..6], &[0xFF; 6]);
        assert_eq!(&b[6..12], &[0, 0, 0, 0, 0, 1]);
        assert_eq!(&b[12..14], &[0x08, 0x06]);
    }

    #[test]
    fn empty_payload_is_fourteen_bytes() {
        let f = EthernetFrame::new(MacAddr::ZERO, MacAddr::ZERO, 0, vec![]);
        assert_eq!(encode_frame(&f).unwrap().len(), 14);
    }

    #[test]
    fn all_zero_header_decodes() {
        let f = decode_frame(&[0u8; 14]).unwrap();
        assert_eq!(f.dst, MacAddr::ZERO);
        assert_eq!(f.src, MacAddr::ZERO);
        assert_eq!(f.ethertype, 0);
        assert!(f.payload.is_empty());
    }

    #[test]
    fn thirteen_bytes_is_truncated() {
        assert!(matches!(
            decode_frame(&[0u8; 13]),
            Err(CodecError::Truncated { .. })
        ));
    }

    #[test]
    fn oversize_payload_rejected() {
        let f = EthernetFrame::new(MacAddr::ZERO, MacAddr::ZERO, 0, vec![0; 1501]);
        assert_eq!(encode_frame(&f), Err(CodecError::OversizePayload(1501)));
        let mut raw = vec![0u8; 14];
        raw.extend(std::iter::repeat_n(0, 1501));
        assert_eq!(decode_frame(&raw), Err(CodecError::OversizePayload(1501)));
        let ok = EthernetFrame::new(MacAddr::ZERO, MacAddr::ZERO, 0, vec![0; 1500]);
        assert_eq!(encode_frame(&ok).unwrap().len(), 1514);
    }

    #[test]
    fn mac_text_round_trip() {
        let m: MacAddr = "00:1b:2c:ff:00:0a".parse().unwrap();
        assert_eq!(m.to_string(), "00:1b:2c:ff:00:0a");
        assert!("00:11".parse::<MacAddr>().is_err());
        assert!("00:11:22:33:44:55:66".parse::<MacAddr>().is_err());
    }
}
