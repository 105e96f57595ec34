// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::collections::BTreeSet;

use crate::netproto::{EventType, PacketEventEnvelope};

/// Admits envelopes by event type and, optionally, by device.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterPredicate {
    /// Empty admits every type.
    pub allowed_event_types: BTreeSet<EventType>,
    pub allowed_devices: Option<BTreeSet<u64>>,
}

impl FilterPredicate {
    pub fn allow_all() -> Self {
        Self::default()
    }

    pub fn event_types(types: impl IntoIterator<Item = EventType>) -> Self {
        FilterPredicate {
            allowed_event_types: types.into_iter().collect(),
            allowed_devices: None,
        }
    }

    pub fn allows(&self, event_type: EventType, device_id: u64) -> bool {
        let type_ok = self.allowed_event_types.is_empty() || self.allowed_event_types.contains(&event_type);
        let dev_ok = self
            .allowed_devices
            .as_ref()
            .is_none_or(|d| d.contains(&device_id));
        type_ok && dev_ok
    }

    /// Values that are not envelopes never pass.
    pub fn allows_value(&self, value: &[u8]) -> bool {
        PacketEventEnvelope::peek(value).is_ok_and(|(ty, dev)| self.allows(ty, dev))
    }

    /// Event types this predicate can admit.
    pub fn admitted_types(&self) -> Vec<EventType> {
        EventType::ALL
            .into_iter()
            .filter(|t| self.allowed_event_types.is_empty() || self.allowed_event_types.contains(t))
            .collect()
    }

    /// Smallest predicate admitting everything either side admits.
    pub fn union(&self, other: &FilterPredicate) -> FilterPredicate {
        let allowed_event_types = if self.allowed_event_types.is_empty() || other.allowed_event_types.is_empty() {
            BTreeSet::new()
        } else {
            self.allowed_event_types
                .union(&other.allowed_event_types)
                .copied()
                .collect()
        };
        let allowed_devices = match (&self.allowed_devices, &other.allowed_devices) {
            (Some(a), Some(b)) => Some(a.union(b).copied().collect()),
            _ => None,
        };
        FilterPredicate {
            allowed_event_types,
            allowed_devices,
        }
    }
}
