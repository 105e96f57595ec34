// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Returns every punted frame one hop closer to its destination without
//! installing anything, so each switch on the path punts once per frame.

use std::any::Any;

use super::{shortest_path, DiscoveredTopology};
use crate::controller::{InternalContext, InternalProcessor, Northbound, PacketInView, SubscriptionRequest, MAIN_TOPIC};
use crate::netproto::{decode_frame, EthernetFrame, OutPortSpec, PacketEventEnvelope};
use crate::time::SimTime;

/// Output port at `device` toward the host owning `frame.dst`.
pub fn relay_port(topo: &DiscoveredTopology, device: u64, frame: &EthernetFrame) -> Option<u32> {
    let dst = topo.locate(frame.dst)?;
    shortest_path(topo, device, dst.at).map(|p| p[0].1)
}

#[derive(Debug)]
pub struct RelayApp {
    topo: DiscoveredTopology,
    pub relayed: u64,
    pub unroutable: u64,
}

impl RelayApp {
    pub fn new(topo: DiscoveredTopology) -> Self {
        RelayApp {
            topo,
            relayed: 0,
            unroutable: 0,
        }
    }
}

impl super::ExternalApp for RelayApp {
    fn app_id(&self) -> &str {
        "relay"
    }

    fn subscription(&self) -> SubscriptionRequest {
        SubscriptionRequest {
            app_id: "relay".into(),
            topic: MAIN_TOPIC.into(),
            group_id: "relay".into(),
            filter: None,
        }
    }

    fn on_event(&mut self, env: &PacketEventEnvelope, now: SimTime, nb: &mut dyn Northbound) {
        let Ok(frame) = decode_frame(&env.frame) else {
            self.unroutable += 1;
            return;
        };
        match relay_port(&self.topo, env.device_id, &frame) {
            Some(p) if nb.packet_out(env.device_id, env.in_port, OutPortSpec::Port(p), frame, now).is_ok() => {
                self.relayed += 1;
            }
            _ => self.unroutable += 1,
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[derive(Debug)]
pub struct InternalRelay {
    topo: DiscoveredTopology,
    pub relayed: u64,
    pub unroutable: u64,
}

impl InternalRelay {
    pub fn new(topo: DiscoveredTopology) -> Self {
        InternalRelay {
            topo,
            relayed: 0,
            unroutable: 0,
        }
    }
}

impl InternalProcessor for InternalRelay {
    fn name(&self) -> &str {
        "relay"
    }

    fn on_packet_in(&mut self, pi: PacketInView<'_>, ctx: &mut InternalContext<'_>) {
        match relay_port(&self.topo, pi.device_id, pi.frame) {
            Some(p)
                if ctx
                    .packet_out(pi.device_id, pi.in_port, OutPortSpec::Port(p), pi.frame.clone())
                    .is_ok() =>
            {
                self.relayed += 1;
            }
            _ => self.unroutable += 1,
        }
    }
}
