// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Data plane: topology, switches with flow tables, hosts, and the
//! virtual-time event queue they run on.
//!
//! Everything here is single-threaded and deterministic. The glue that wires
//! the fabric to the controller and broker lives in [`crate::testbed`].

mod bulk;
mod config;
mod error;
mod events;
mod hosts;
mod switch;
mod topology;

pub use bulk::{fluid_throughput, tcp_probe_frame, PROBE_DST_PORT, PROBE_SRC_PORT_BASE, BulkFlow, BulkFlowReport, FlowPhase};
pub use config::{LinkSpec, TopologyConfig};
pub use error::FabricError;
pub use events::{EventQueue, VirtualClock};
pub use hosts::{PingOutcome, PingSession};
pub use switch::{FlowRemoved, LookupResult, SwitchState};
pub use topology::{
    build_fat_tree, build_fat_tree_with, flood_ports, transmit, Delivery, Endpoint, FatTreeOptions,
    HostInfo, Link, PortAttachment, PortPeer, PortRef, SwitchInfo, SwitchRole, TopologyGraph,
};

pub use crate::netproto::{Action, FlowEntry};
