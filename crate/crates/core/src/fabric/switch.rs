// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::collections::BTreeSet;

use super::FabricError;
use crate::netproto::{extract_match, EthernetFrame, FlowEntry, FlowModOp, FlowRemovedReason, OfMessage};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LookupResult {
    Hit(FlowEntry),
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRemoved {
    pub device_id: u64,
    pub entry: FlowEntry,
    pub reason: FlowRemovedReason,
}

impl FlowRemoved {
    pub fn to_message(&self) -> OfMessage {
        OfMessage::FlowRemoved {
            device_id: self.device_id,
            entry_id: self.entry.entry_id,
            reason: self.reason,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SwitchState {
    pub device_id: u64,
    /// Sorted by descending priority, then ascending entry id.
    table: Vec<FlowEntry>,
    /// Removals found lazily during lookups, waiting to be reported.
    pending_removed: Vec<FlowRemoved>,
}

fn expiry_reason(e: &FlowEntry, now: SimTime) -> Option<FlowRemovedReason> {
    if !e.hard_timeout.is_zero() && now >= e.install_time + e.hard_timeout {
        Some(FlowRemovedReason::HardTimeout)
    } else if !e.idle_timeout.is_zero() && now >= e.last_hit_time + e.idle_timeout {
        Some(FlowRemovedReason::IdleTimeout)
    } else {
        None
    }
}

fn deadline(e: &FlowEntry) -> Option<SimTime> {
    let hard = (!e.hard_timeout.is_zero()).then(|| e.install_time + e.hard_timeout);
    let idle = (!e.idle_timeout.is_zero()).then(|| e.last_hit_time + e.idle_timeout);
    match (hard, idle) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

impl SwitchState {
    pub fn new(device_id: u64) -> Self {
        SwitchState {
            device_id,
            table: Vec::new(),
            pending_removed: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[FlowEntry] {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Highest-priority live entry covering the frame; bumps its counters.
    pub fn lookup(&mut self, frame: &EthernetFrame, in_port: u32, now: SimTime) -> LookupResult {
        let removed = self.expire_entries(now);
        self.pending_removed.extend(removed);
        let key = extract_match(frame, in_port);
        match self.table.iter_mut().find(|e| e.matches.covers(&key)) {
            Some(e) => {
                e.packet_count += 1;
                e.byte_count += frame.wire_len() as u64;
                e.last_hit_time = now;
                LookupResult::Hit(e.clone())
            }
            None => LookupResult::Miss,
        }
    }

    /// Same selection as [`lookup`](Self::lookup) without touching any state.
    pub fn peek(&self, frame: &EthernetFrame, in_port: u32, now: SimTime) -> Option<&FlowEntry> {
        let key = extract_match(frame, in_port);
        self.table
            .iter()
            .find(|e| expiry_reason(e, now).is_none() && e.matches.covers(&key))
    }

    pub fn apply_flow_mod(
        &mut self,
        device_id: u64,
        entry: FlowEntry,
        op: FlowModOp,
        now: SimTime,
    ) -> Result<Vec<FlowRemoved>, FabricError> {
        if device_id != self.device_id {
            return Err(FabricError::WrongDevice {
                expected: self.device_id,
                got: device_id,
            });
        }
        match op {
            FlowModOp::Add => {
                self.table
                    .retain(|e| !(e.priority == entry.priority && e.matches == entry.matches));
                if self.table.iter().any(|e| e.entry_id == entry.entry_id) {
                    return Err(FabricError::DuplicateEntryId(entry.entry_id));
                }
                let entry = FlowEntry {
                    install_time: now,
                    last_hit_time: now,
                    packet_count: 0,
                    byte_count: 0,
                    ..entry
                };
                let pos = self
                    .table
                    .partition_point(|e| (std::cmp::Reverse(e.priority), e.entry_id) < (std::cmp::Reverse(entry.priority), entry.entry_id));
                self.table.insert(pos, entry);
                Ok(Vec::new())
            }
            FlowModOp::Delete => {
                let (gone, kept): (Vec<_>, Vec<_>) = std::mem::take(&mut self.table)
                    .into_iter()
                    .partition(|e| e.priority == entry.priority && e.matches == entry.matches);
                self.table = kept;
                Ok(gone
                    .into_iter()
                    .map(|e| FlowRemoved {
                        device_id: self.device_id,
                        entry: e,
                        reason: FlowRemovedReason::Deleted,
                    })
                    .collect())
            }
        }
    }

    /// Removes every entry whose hard or idle deadline is at or before `now`.
    pub fn expire_entries(&mut self, now: SimTime) -> Vec<FlowRemoved> {
        let mut out = Vec::new();
        let device_id = self.device_id;
        self.table.retain(|e| match expiry_reason(e, now) {
            Some(reason) => {
                out.push(FlowRemoved {
                    device_id,
                    entry: e.clone(),
                    reason,
                });
                false
            }
            None => true,
        });
        out
    }

    /// Drains removals discovered by lookups.
    pub fn take_removed(&mut self) -> Vec<FlowRemoved> {
        std::mem::take(&mut self.pending_removed)
    }

    /// Earliest instant at which some entry expires.
    pub fn next_deadline(&self) -> Option<SimTime> {
        self.table.iter().filter_map(deadline).min()
    }

    pub fn clear(&mut self) {
        self.table.clear();
        self.pending_removed.clear();
    }

    pub fn entry_ids(&self) -> BTreeSet<u64> {
        self.table.iter().map(|e| e.entry_id).collect()
    }
}
