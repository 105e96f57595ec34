// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Data-plane frames and the OpenFlow-lite control messages.
//!
//! Every multi-byte integer is big-endian. The layouts here are the wire
//! contract of the repository and are mirrored in `docs/wire.md`.

mod arp;
pub(crate) mod cursor;
mod envelope;
mod error;
mod ethernet;
mod ipv4;
mod lldp;
mod matching;
mod openflow;

pub use arp::{ArpOp, ArpPacket, ARP_LEN};
pub use envelope::{
    decode_envelope, encode_envelope, EventType, PacketEventEnvelope, ENVELOPE_HEADER_LEN,
    ENVELOPE_MAGIC, ENVELOPE_VERSION,
};
pub use error::CodecError;
pub use ethernet::{
    decode_frame, encode_frame, EthernetFrame, MacAddr, ETHERTYPE_ARP, ETHERTYPE_IPV4,
    ETHERTYPE_LLDP, ETH_HEADER_LEN, MAX_PAYLOAD,
};
pub use ipv4::{IcmpEcho, IcmpKind, Ipv4Packet, IPPROTO_ICMP, IPPROTO_TCP, IPPROTO_UDP, IPV4_HEADER_LEN};
pub use lldp::{LldpFrame, LLDP_MULTICAST};
pub use matching::{extract_match, MatchFields};
pub use openflow::{
    decode_of, encode_of, Action, FlowEntry, FlowModOp, FlowRemovedReason, OfMessage, OutPortSpec,
    NO_BUFFER, NO_PORT,
};
