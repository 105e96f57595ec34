// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::fmt;
use std::sync::Arc;

use super::{BrokerError, FilterPredicate};
use crate::time::SimTime;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a. The partitioner takes this modulo the partition count.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TopicPartition {
    pub topic: String,
    pub partition: u32,
}

impl TopicPartition {
    pub fn new(topic: impl Into<String>, partition: u32) -> Self {
        TopicPartition {
            topic: topic.into(),
            partition,
        }
    }
}

impl fmt::Display for TopicPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.topic, self.partition)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub topic: Arc<str>,
    pub partition: u32,
    pub offset: u64,
    pub key: Vec<u8>,
    pub value: Vec<u8>,
    pub append_time: SimTime,
}

impl Record {
    pub fn topic_partition(&self) -> TopicPartition {
        TopicPartition::new(&*self.topic, self.partition)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PublishOutcome {
    Appended { partition: u32, offset: u64 },
    /// Rejected by the topic's server-side filter; nothing was stored.
    Filtered,
}

#[derive(Debug, Clone)]
pub struct Topic {
    name: Arc<str>,
    partitions: Vec<Vec<Record>>,
    pub(crate) server_filter: Option<FilterPredicate>,
    filtered: u64,
}

impl Topic {
    pub fn new(name: &str, partitions: u32) -> Result<Self, BrokerError> {
        if partitions == 0 {
            return Err(BrokerError::InvalidPartitionCount);
        }
        Ok(Topic {
            name: name.into(),
            partitions: vec![Vec::new(); partitions as usize],
            server_filter: None,
            filtered: 0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn partition_count(&self) -> u32 {
        self.partitions.len() as u32
    }

    pub fn partition_for(&self, key: &[u8]) -> u32 {
        (fnv1a64(key) % self.partitions.len() as u64) as u32
    }

    pub fn server_filter(&self) -> Option<&FilterPredicate> {
        self.server_filter.as_ref()
    }

    /// Records rejected by the server-side filter so far.
    pub fn filtered_count(&self) -> u64 {
        self.filtered
    }

    pub fn len(&self) -> u64 {
        self.partitions.iter().map(|p| p.len() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn end_offset(&self, partition: u32) -> Result<u64, BrokerError> {
        self.log(partition).map(|l| l.len() as u64)
    }

    fn log(&self, partition: u32) -> Result<&Vec<Record>, BrokerError> {
        self.partitions
            .get(partition as usize)
            .ok_or_else(|| BrokerError::UnknownPartition {
                topic: self.name.to_string(),
                partition,
            })
    }

    pub fn record(&self, partition: u32, offset: u64) -> Option<&Record> {
        self.partitions.get(partition as usize)?.get(offset as usize)
    }

    pub fn records(&self, partition: u32) -> &[Record] {
        self.partitions.get(partition as usize).map_or(&[], Vec::as_slice)
    }

    pub(crate) fn append(&mut self, key: &[u8], value: &[u8], now: SimTime) -> PublishOutcome {
        if let Some(f) = &self.server_filter {
            if !f.allows_value(value) {
                self.filtered += 1;
                return PublishOutcome::Filtered;
            }
        }
        let partition = self.partition_for(key);
        let log = &mut self.partitions[partition as usize];
        let offset = log.len() as u64;
        log.push(Record {
            topic: Arc::clone(&self.name),
            partition,
            offset,
            key: key.to_vec(),
            value: value.to_vec(),
            append_time: now,
        });
        PublishOutcome::Appended { partition, offset }
    }

    /// Up to `max` records from `from` that were appended at or before
    /// `now - delay`. Offsets are dense, so visibility is a prefix.
    pub(crate) fn read_visible(&self, partition: u32, from: u64, max: usize, now: SimTime, delay: SimTime) -> Vec<Record> {
        self.records(partition)
            .iter()
            .skip(from as usize)
            .take(max)
            .take_while(|r| r.append_time + delay <= now)
            .cloned()
            .collect()
    }

    /// Earliest time a record at or after `from` becomes visible.
    pub fn next_visible_at(&self, partition: u32, from: u64, delay: SimTime) -> Option<SimTime> {
        self.record(partition, from).map(|r| r.append_time + delay)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn zero_partitions_rejected() {
        assert_eq!(Topic::new("t", 0).unwrap_err(), BrokerError::InvalidPartitionCount);
    }

    #[test]
    fn visibility_is_delayed() {
        let mut t = Topic::new("t", 1).unwrap();
        t.append(b"k", b"v", SimTime::from_millis(1));
        let d = SimTime::from_millis(2);
        assert!(t.read_visible(0, 0, 10, SimTime::from_millis(2), d).is_empty());
        assert_eq!(t.read_visible(0, 0, 10, SimTime::from_millis(3), d).len(), 1);
        assert_eq!(t.next_visible_at(0, 0, d), Some(SimTime::from_millis(3)));
    }
}
