// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::collections::{BTreeMap, BTreeSet};

use super::{BrokerError, Record, TopicPartition};

/// Membership, partition ownership and offsets of one consumer group.
///
/// Partition `p` of a topic belongs to the `p mod m`-th of the `m` members
/// subscribed to that topic, in member-id order. Every partition of a
/// subscribed topic therefore has exactly one owner.
#[derive(Debug, Clone, Default)]
pub struct ConsumerGroup {
    group_id: String,
    members: BTreeMap<String, BTreeSet<String>>,
    partition_counts: BTreeMap<String, u32>,
    owners: BTreeMap<TopicPartition, String>,
    positions: BTreeMap<TopicPartition, u64>,
    committed: BTreeMap<TopicPartition, u64>,
}

impl ConsumerGroup {
    pub fn new(group_id: &str) -> Self {
        ConsumerGroup {
            group_id: group_id.to_string(),
            ..Default::default()
        }
    }

    pub fn group_id(&self) -> &str {
        &self.group_id
    }

    pub fn members(&self) -> impl Iterator<Item = &str> {
        self.members.keys().map(String::as_str)
    }

    pub fn is_member(&self, consumer_id: &str) -> bool {
        self.members.contains_key(consumer_id)
    }

    pub(crate) fn join(&mut self, consumer_id: &str, topic: &str, partitions: impl Fn(&str) -> u32) {
        self.members
            .entry(consumer_id.to_string())
            .or_default()
            .insert(topic.to_string());
        self.rebalance(partitions);
    }

    pub(crate) fn leave(&mut self, consumer_id: &str, partitions: impl Fn(&str) -> u32) -> Result<(), BrokerError> {
        if self.members.remove(consumer_id).is_none() {
            return Err(self.not_member(consumer_id));
        }
        self.rebalance(partitions);
        Ok(())
    }

    fn not_member(&self, consumer_id: &str) -> BrokerError {
        BrokerError::NotSubscribed {
            group: self.group_id.clone(),
            consumer: consumer_id.to_string(),
        }
    }

    /// A partition that changes owner restarts from the committed offset.
    fn rebalance(&mut self, partitions: impl Fn(&str) -> u32) {
        let mut by_topic: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (member, topics) in &self.members {
            for t in topics {
                by_topic.entry(t).or_default().push(member);
            }
        }
        let mut owners = BTreeMap::new();
        for (topic, subs) in &by_topic {
            let n = partitions(topic);
            self.partition_counts.insert(topic.to_string(), n);
            for p in 0..n {
                owners.insert(TopicPartition::new(*topic, p), subs[p as usize % subs.len()].to_string());
            }
        }
        for (tp, owner) in &owners {
            if self.owners.get(tp) != Some(owner) {
                let c = self.committed(tp);
                self.positions.insert(tp.clone(), c);
            }
        }
        self.positions.retain(|tp, _| owners.contains_key(tp));
        self.owners = owners;
    }

    pub fn assignment_of(&self, consumer_id: &str) -> Vec<TopicPartition> {
        self.owners
            .iter()
            .filter(|(_, o)| o.as_str() == consumer_id)
            .map(|(tp, _)| tp.clone())
            .collect()
    }

    pub fn owner_of(&self, tp: &TopicPartition) -> Option<&str> {
        self.owners.get(tp).map(String::as_str)
    }

    pub fn committed(&self, tp: &TopicPartition) -> u64 {
        self.committed.get(tp).copied().unwrap_or(0)
    }

    pub fn position(&self, tp: &TopicPartition) -> Option<u64> {
        self.positions.get(tp).copied()
    }

    /// Every partition the group owns or has committed.
    pub fn tracked_partitions(&self) -> BTreeSet<TopicPartition> {
        self.owners.keys().chain(self.committed.keys()).cloned().collect()
    }

    /// Reads through `fetch(tp, from, max)` across the member's partitions
    /// in order, advancing positions past what it returns.
    pub(crate) fn poll(
        &mut self,
        consumer_id: &str,
        max_records: usize,
        mut fetch: impl FnMut(&TopicPartition, u64, usize) -> Vec<Record>,
    ) -> Result<Vec<Record>, BrokerError> {
        if !self.is_member(consumer_id) {
            return Err(self.not_member(consumer_id));
        }
        let mut out = Vec::new();
        for tp in self.assignment_of(consumer_id) {
            let left = max_records - out.len();
            if left == 0 {
                break;
            }
            let pos = self.positions.entry(tp.clone()).or_insert(0);
            let got = fetch(&tp, *pos, left);
            *pos += got.len() as u64;
            out.extend(got);
        }
        Ok(out)
    }

    pub(crate) fn commit(&mut self, tp: &TopicPartition, offset: u64, end: u64) -> Result<(), BrokerError> {
        if offset > end {
            return Err(BrokerError::OffsetOutOfRange {
                topic: tp.topic.clone(),
                partition: tp.partition,
                offset,
                end,
            });
        }
        self.committed.insert(tp.clone(), offset);
        Ok(())
    }

    pub(crate) fn restart(&mut self, consumer_id: &str) -> Result<(), BrokerError> {
        if !self.is_member(consumer_id) {
            return Err(self.not_member(consumer_id));
        }
        for tp in self.assignment_of(consumer_id) {
            let c = self.committed(&tp);
            self.positions.insert(tp, c);
        }
        Ok(())
    }
}
