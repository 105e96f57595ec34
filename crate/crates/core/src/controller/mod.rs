// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Control plane: switch sessions, the internal pipeline, the event
//! distribution app and the northbound channels.
//!
//! The controller never touches switch state. Everything it sends south is
//! queued as an [`SbCommand`] carrying the virtual time at which the switch
//! applies it; the simulation loop drains the queue.

mod error;
pub mod live;
pub mod text;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use error::ControllerError;

use crate::broker::{Broker, FilterPredicate, PublishOutcome, Record, TopicPartition};
use crate::netproto::{
    encode_envelope, EthernetFrame, EventType, FlowEntry, FlowModOp, OfMessage, OutPortSpec, PacketEventEnvelope,
};
use crate::time::SimTime;

pub const MAIN_TOPIC: &str = "packets";

/// Topic that receives one event type under controller-side filtering.
pub fn type_topic(t: EventType) -> String {
    format!("{MAIN_TOPIC}.{}", t.name())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterPlacement {
    ClientSide,
    ServerSide,
    ControllerSide,
}

impl FilterPlacement {
    pub const ALL: [FilterPlacement; 3] = [
        FilterPlacement::ClientSide,
        FilterPlacement::ServerSide,
        FilterPlacement::ControllerSide,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterPlacement::ClientSide => "client-side",
            FilterPlacement::ServerSide => "server-side",
            FilterPlacement::ControllerSide => "controller-side",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PipelineMode {
    Internal,
    External { placement: FilterPlacement },
}

impl PipelineMode {
    pub const EXTERNAL: PipelineMode = PipelineMode::External {
        placement: FilterPlacement::ClientSide,
    };

    pub fn is_external(self) -> bool {
        matches!(self, PipelineMode::External { .. })
    }

    pub fn name(self) -> &'static str {
        match self {
            PipelineMode::Internal => "internal",
            PipelineMode::External { .. } => "external",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbLatencyModel {
    #[serde(rename = "rest_install", with = "crate::serde_time")]
    pub rest_install_delay: SimTime,
    #[serde(rename = "rpc_packet_out", with = "crate::serde_time")]
    pub rpc_packet_out_delay: SimTime,
    #[serde(rename = "internal_processing", with = "crate::serde_time")]
    pub internal_processing_delay: SimTime,
}

impl Default for NbLatencyModel {
    fn default() -> Self {
        NbLatencyModel {
            rest_install_delay: SimTime::from_millis(10),
            rpc_packet_out_delay: SimTime::from_millis(1),
            internal_processing_delay: SimTime::from_millis(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubscriptionRequest {
    pub app_id: String,
    pub topic: String,
    pub group_id: String,
    pub filter: Option<FilterPredicate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Confirmation {
    pub granted: bool,
    pub assigned_partitions: Vec<TopicPartition>,
    pub error: Option<String>,
}

impl Confirmation {
    fn denied(error: impl Into<String>) -> Self {
        Confirmation {
            granted: false,
            assigned_partitions: Vec::new(),
            error: Some(error.into()),
        }
    }
}

/// Acknowledgment of a northbound flow install.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstallAck {
    pub entry_id: u64,
    /// When the switch applies the rule and the app sees the reply.
    pub ack_at: SimTime,
}

/// A southbound message and the time the switch applies it.
#[derive(Debug, Clone, PartialEq)]
pub struct SbCommand {
    pub at: SimTime,
    pub msg: OfMessage,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceInfo {
    pub device_id: u64,
    pub ports: Vec<u32>,
}

/// What external applications may call: broker access plus the two
/// northbound channels. Nothing else of the controller is reachable.
pub trait Northbound {
    fn subscribe(&mut self, req: &SubscriptionRequest) -> Confirmation;
    fn poll(&mut self, group_id: &str, consumer_id: &str, max: usize, now: SimTime) -> Result<Vec<Record>, ControllerError>;
    fn commit(&mut self, group_id: &str, tp: &TopicPartition, offset: u64) -> Result<(), ControllerError>;
    /// Modeled REST install; the rule is active at `ack_at`.
    fn install_flow(&mut self, device_id: u64, rule: FlowEntry, now: SimTime) -> Result<InstallAck, ControllerError>;
    /// Modeled RPC packet return; the switch acts on it one RPC delay later.
    fn packet_out(
        &mut self,
        device_id: u64,
        in_port: u32,
        out: OutPortSpec,
        frame: EthernetFrame,
        now: SimTime,
    ) -> Result<(), ControllerError>;
    fn devices(&self) -> Vec<DeviceInfo>;
}

/// A PACKET_IN as seen by internal processors.
#[derive(Debug, Clone, Copy)]
pub struct PacketInView<'a> {
    pub device_id: u64,
    pub in_port: u32,
    pub buffer_id: u32,
    pub frame: &'a EthernetFrame,
    pub now: SimTime,
}

/// Handle given to internal processors. Actions take effect one
/// internal-processing delay after the PACKET_IN, with no NB cost.
pub struct InternalContext<'a> {
    at: SimTime,
    devices: &'a BTreeMap<u64, Vec<u32>>,
    next_entry_id: &'a mut u64,
    outbox: &'a mut Vec<SbCommand>,
    stats: &'a mut ControllerStats,
}

impl InternalContext<'_> {
    pub fn effective_at(&self) -> SimTime {
        self.at
    }

    pub fn install_flow(&mut self, device_id: u64, rule: FlowEntry) -> Result<u64, ControllerError> {
        validate_rule(self.devices, device_id, &rule)?;
        let entry_id = alloc_entry_id(self.next_entry_id);
        self.outbox.push(flow_add(self.at, device_id, rule, entry_id));
        self.stats.flow_mods += 1;
        Ok(entry_id)
    }

    pub fn packet_out(&mut self, device_id: u64, in_port: u32, out: OutPortSpec, frame: EthernetFrame) -> Result<(), ControllerError> {
        check_device(self.devices, device_id)?;
        self.outbox.push(SbCommand {
            at: self.at,
            msg: OfMessage::PacketOut {
                device_id,
                in_port,
                out,
                frame,
            },
        });
        self.stats.packet_outs += 1;
        Ok(())
    }

    pub fn devices(&self) -> Vec<DeviceInfo> {
        device_list(self.devices)
    }
}

pub trait InternalProcessor: Send {
    fn name(&self) -> &str;
    fn on_packet_in(&mut self, pi: PacketInView<'_>, ctx: &mut InternalContext<'_>);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ControllerStats {
    pub packet_ins: u64,
    pub published: u64,
    /// Rejected by the broker's server-side filter.
    pub server_filtered: u64,
    /// Withheld by the controller-side filter.
    pub controller_filtered: u64,
    pub flow_mods: u64,
    pub packet_outs: u64,
    pub flow_removed: u64,
}

/// Outcome of one PACKET_IN, for tracing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PacketInOutcome {
    Dispatched { processors: usize, at: SimTime },
    Published { topic: String, partition: u32, offset: u64 },
    ServerFiltered { topic: String },
    ControllerFiltered,
}

pub struct Controller {
    mode: PipelineMode,
    latency: NbLatencyModel,
    broker: Broker,
    partitions: u32,
    devices: BTreeMap<u64, Vec<u32>>,
    processors: Vec<Box<dyn InternalProcessor>>,
    controller_filter: Option<FilterPredicate>,
    next_entry_id: u64,
    outbox: Vec<SbCommand>,
    stats: ControllerStats,
}

impl std::fmt::Debug for Controller {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Controller")
            .field("mode", &self.mode)
            .field("latency", &self.latency)
            .field("devices", &self.devices.len())
            .field("processors", &self.processors.len())
            .field("stats", &self.stats)
            .finish_non_exhaustive()
    }
}

fn alloc_entry_id(next: &mut u64) -> u64 {
    let id = *next;
    *next += 1;
    id
}

fn check_device(devices: &BTreeMap<u64, Vec<u32>>, device_id: u64) -> Result<(), ControllerError> {
    if devices.contains_key(&device_id) {
        Ok(())
    } else {
        Err(ControllerError::UnknownDevice(device_id))
    }
}

fn validate_rule(devices: &BTreeMap<u64, Vec<u32>>, device_id: u64, rule: &FlowEntry) -> Result<(), ControllerError> {
    check_device(devices, device_id)?;
    if rule.matches.is_empty() {
        return Err(ControllerError::InvalidRule("match has no fields".into()));
    }
    Ok(())
}

fn flow_add(at: SimTime, device_id: u64, rule: FlowEntry, entry_id: u64) -> SbCommand {
    SbCommand {
        at,
        msg: OfMessage::FlowMod {
            device_id,
            entry: FlowEntry { entry_id, ..rule },
            op: FlowModOp::Add,
        },
    }
}

fn device_list(devices: &BTreeMap<u64, Vec<u32>>) -> Vec<DeviceInfo> {
    devices
        .iter()
        .map(|(&device_id, ports)| DeviceInfo {
            device_id,
            ports: ports.clone(),
        })
        .collect()
}

impl Controller {
    /// `partitions` applies to every topic the controller creates.
    pub fn new(mode: PipelineMode, latency: NbLatencyModel, mut broker: Broker, partitions: u32) -> Result<Self, ControllerError> {
        if mode.is_external() && !broker.has_topic(MAIN_TOPIC) {
            broker.create_topic(MAIN_TOPIC, partitions)?;
        }
        Ok(Controller {
            mode,
            latency,
            broker,
            partitions,
            devices: BTreeMap::new(),
            processors: Vec::new(),
            controller_filter: None,
            next_entry_id: 1,
            outbox: Vec::new(),
            stats: ControllerStats::default(),
        })
    }

    pub fn mode(&self) -> PipelineMode {
        self.mode
    }

    pub fn latency(&self) -> &NbLatencyModel {
        &self.latency
    }

    pub fn broker(&self) -> &Broker {
        &self.broker
    }

    pub fn broker_mut(&mut self) -> &mut Broker {
        &mut self.broker
    }

    pub fn stats(&self) -> ControllerStats {
        self.stats
    }

    pub fn controller_filter(&self) -> Option<&FilterPredicate> {
        self.controller_filter.as_ref()
    }

    pub fn register_device(&mut self, device_id: u64, ports: Vec<u32>) {
        self.devices.insert(device_id, ports);
    }

    pub fn is_registered(&self, device_id: u64) -> bool {
        self.devices.contains_key(&device_id)
    }

    pub fn register_internal_processor(&mut self, p: Box<dyn InternalProcessor>) -> Result<(), ControllerError> {
        if self.mode != PipelineMode::Internal {
            return Err(ControllerError::WrongMode);
        }
        self.processors.push(p);
        Ok(())
    }

    /// Southbound commands queued so far, in issue order.
    pub fn drain_outbox(&mut self) -> Vec<SbCommand> {
        std::mem::take(&mut self.outbox)
    }

    pub fn on_packet_in(
        &mut self,
        device_id: u64,
        in_port: u32,
        buffer_id: u32,
        frame: &EthernetFrame,
        now: SimTime,
    ) -> Result<PacketInOutcome, ControllerError> {
        check_device(&self.devices, device_id)?;
        self.stats.packet_ins += 1;
        match self.mode {
            PipelineMode::Internal => {
                let at = now + self.latency.internal_processing_delay;
                let mut ctx = InternalContext {
                    at,
                    devices: &self.devices,
                    next_entry_id: &mut self.next_entry_id,
                    outbox: &mut self.outbox,
                    stats: &mut self.stats,
                };
                let view = PacketInView {
                    device_id,
                    in_port,
                    buffer_id,
                    frame,
                    now,
                };
                for p in &mut self.processors {
                    p.on_packet_in(view, &mut ctx);
                }
                Ok(PacketInOutcome::Dispatched {
                    processors: self.processors.len(),
                    at,
                })
            }
            PipelineMode::External { placement } => {
                let env = PacketEventEnvelope {
                    event_type: EventType::from_ethertype(frame.ethertype),
                    device_id,
                    in_port,
                    buffer_id,
                    timestamp_ns: now.as_nanos(),
                    frame: frame.encode()?,
                };
                let topic = if placement == FilterPlacement::ControllerSide {
                    let pass = self
                        .controller_filter
                        .as_ref()
                        .is_some_and(|f| f.allows(env.event_type, device_id));
                    if !pass {
                        self.stats.controller_filtered += 1;
                        return Ok(PacketInOutcome::ControllerFiltered);
                    }
                    type_topic(env.event_type)
                } else {
                    MAIN_TOPIC.to_string()
                };
                let value = encode_envelope(&env);
                match self.broker.publish(&topic, &device_id.to_be_bytes(), &value, now)? {
                    PublishOutcome::Appended { partition, offset } => {
                        self.stats.published += 1;
                        Ok(PacketInOutcome::Published {
                            topic,
                            partition,
                            offset,
                        })
                    }
                    PublishOutcome::Filtered => {
                        self.stats.server_filtered += 1;
                        Ok(PacketInOutcome::ServerFiltered { topic })
                    }
                }
            }
        }
    }

    pub fn on_flow_removed(&mut self, device_id: u64) -> Result<(), ControllerError> {
        check_device(&self.devices, device_id)?;
        self.stats.flow_removed += 1;
        Ok(())
    }

    /// The subscription endpoint. Errors are reported in the confirmation.
    pub fn handle_subscribe(&mut self, req: &SubscriptionRequest) -> Confirmation {
        if !self.broker.has_topic(&req.topic) {
            return Confirmation::denied("unknown topic");
        }
        match self.subscribe_inner(req) {
            Ok(assigned_partitions) => Confirmation {
                granted: true,
                assigned_partitions,
                error: None,
            },
            Err(e) => Confirmation::denied(e.to_string()),
        }
    }

    fn subscribe_inner(&mut self, req: &SubscriptionRequest) -> Result<Vec<TopicPartition>, ControllerError> {
        let placement = match self.mode {
            PipelineMode::External { placement } => Some(placement),
            PipelineMode::Internal => None,
        };
        let filter = req.filter.clone().unwrap_or_default();
        match placement {
            Some(FilterPlacement::ControllerSide) if req.topic == MAIN_TOPIC => {
                let mut assigned = Vec::new();
                for t in filter.admitted_types() {
                    let topic = type_topic(t);
                    if !self.broker.has_topic(&topic) {
                        self.broker.create_topic(&topic, self.partitions)?;
                    }
                    assigned = self.broker.subscribe(&req.group_id, &req.app_id, &topic)?;
                }
                self.controller_filter = Some(match self.controller_filter.take() {
                    Some(f) => f.union(&filter),
                    None => filter,
                });
                Ok(assigned)
            }
            Some(FilterPlacement::ServerSide) => {
                self.broker.merge_server_filter(&req.topic, &filter)?;
                Ok(self.broker.subscribe(&req.group_id, &req.app_id, &req.topic)?)
            }
            _ => Ok(self.broker.subscribe(&req.group_id, &req.app_id, &req.topic)?),
        }
    }

    pub fn nb_install_flow(&mut self, rule: FlowEntry, device_id: u64, now: SimTime) -> Result<InstallAck, ControllerError> {
        validate_rule(&self.devices, device_id, &rule)?;
        let entry_id = alloc_entry_id(&mut self.next_entry_id);
        let ack_at = now + self.latency.rest_install_delay;
        self.outbox.push(flow_add(ack_at, device_id, rule, entry_id));
        self.stats.flow_mods += 1;
        Ok(InstallAck { entry_id, ack_at })
    }

    pub fn nb_packet_out(
        &mut self,
        device_id: u64,
        in_port: u32,
        out: OutPortSpec,
        frame: EthernetFrame,
        now: SimTime,
    ) -> Result<(), ControllerError> {
        check_device(&self.devices, device_id)?;
        self.outbox.push(SbCommand {
            at: now + self.latency.rpc_packet_out_delay,
            msg: OfMessage::PacketOut {
                device_id,
                in_port,
                out,
                frame,
            },
        });
        self.stats.packet_outs += 1;
        Ok(())
    }
}

impl Northbound for Controller {
    fn subscribe(&mut self, req: &SubscriptionRequest) -> Confirmation {
        self.handle_subscribe(req)
    }

    fn poll(&mut self, group_id: &str, consumer_id: &str, max: usize, now: SimTime) -> Result<Vec<Record>, ControllerError> {
        Ok(self.broker.poll(group_id, consumer_id, max, now)?)
    }

    fn commit(&mut self, group_id: &str, tp: &TopicPartition, offset: u64) -> Result<(), ControllerError> {
        Ok(self.broker.commit(group_id, tp, offset)?)
    }

    fn install_flow(&mut self, device_id: u64, rule: FlowEntry, now: SimTime) -> Result<InstallAck, ControllerError> {
        self.nb_install_flow(rule, device_id, now)
    }

    fn packet_out(
        &mut self,
        device_id: u64,
        in_port: u32,
        out: OutPortSpec,
        frame: EthernetFrame,
        now: SimTime,
    ) -> Result<(), ControllerError> {
        self.nb_packet_out(device_id, in_port, out, frame, now)
    }

    fn devices(&self) -> Vec<DeviceInfo> {
        device_list(&self.devices)
    }
}

#[cfg(test)]
mod tests;
