// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Applications that run outside the controller.
//!
//! External apps see only the [`Northbound`] trait: they subscribe, poll
//! envelopes, install rules over the REST model and return packets over the
//! RPC model. Each also has an internal twin that plugs into the
//! controller's pipeline for the baseline mode.

mod discovery;
mod forwarding;
mod relay;
mod runner;

use serde::{Deserialize, Serialize};

pub use discovery::{lldp_sweep, topology_discovery_step, DiscoveredTopology, HostLocation, TopologyDiscoveryApp};
pub use forwarding::{
    reactive_forwarding_step, shortest_path, ForwardingDecision, InternalReactiveForwarding, ReactiveForwardingApp, StepOutcome,
};
pub use relay::{relay_port, InternalRelay, RelayApp};
pub use runner::{AppRunner, ConsumerStats, ExternalApp};

use crate::time::SimTime;

/// Fields a reactive rule matches on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchKind {
    #[default]
    L2Pair,
    L2Dst,
    /// IPv4 source and destination; non-IPv4 frames fall back to the L2 pair.
    L3Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    #[serde(with = "crate::serde_time")]
    pub hard_timeout: SimTime,
    #[serde(with = "crate::serde_time")]
    pub idle_timeout: SimTime,
    #[serde(rename = "match")]
    pub match_kind: MatchKind,
    pub bidirectional: bool,
    pub priority: u16,
    /// Zero sends a single sweep at start.
    #[serde(with = "crate::serde_time")]
    pub sweep_period: SimTime,
    /// Per-event handling time inside an external app.
    #[serde(with = "crate::serde_time")]
    pub processing_delay: SimTime,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            hard_timeout: SimTime::from_secs(10),
            idle_timeout: SimTime::ZERO,
            match_kind: MatchKind::L2Pair,
            bidirectional: true,
            priority: 100,
            sweep_period: SimTime::from_secs(5),
            processing_delay: SimTime::ZERO,
        }
    }
}

#[cfg(test)]
mod tests;
