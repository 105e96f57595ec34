// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Embedded topic-partitioned log with consumer groups.
//!
//! One broker, no replication. Records become visible to consumers
//! `broker_delay` after they are appended, which models the produce and
//! fetch path in virtual time.

mod error;
mod filter;
mod group;
mod persist;
mod topic;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub use error::BrokerError;
pub use filter::FilterPredicate;
pub use group::ConsumerGroup;
pub use persist::{read_log, LogWriter};
pub use topic::{fnv1a64, PublishOutcome, Record, Topic, TopicPartition};

use crate::time::SimTime;

#[derive(Debug, Default)]
pub struct Broker {
    topics: BTreeMap<String, Topic>,
    groups: BTreeMap<String, ConsumerGroup>,
    delay: SimTime,
    log: Option<LogWriter>,
}

impl Broker {
    pub fn new(delay: SimTime) -> Self {
        Broker {
            delay,
            ..Default::default()
        }
    }

    /// Also append every record to `path` (u32 length + body framing).
    pub fn with_persistence(mut self, path: &Path) -> Result<Self, BrokerError> {
        self.log = Some(LogWriter::create(path)?);
        Ok(self)
    }

    pub fn delay(&self) -> SimTime {
        self.delay
    }

    pub fn create_topic(&mut self, name: &str, partitions: u32) -> Result<&Topic, BrokerError> {
        if self.topics.contains_key(name) {
            return Err(BrokerError::DuplicateTopic(name.to_string()));
        }
        let topic = Topic::new(name, partitions)?;
        Ok(self.topics.entry(name.to_string()).or_insert(topic))
    }

    pub fn topic(&self, name: &str) -> Option<&Topic> {
        self.topics.get(name)
    }

    pub fn topics(&self) -> impl Iterator<Item = &Topic> {
        self.topics.values()
    }

    pub fn has_topic(&self, name: &str) -> bool {
        self.topics.contains_key(name)
    }

    pub fn set_server_filter(&mut self, topic: &str, filter: Option<FilterPredicate>) -> Result<(), BrokerError> {
        let t = self.topic_mut(topic)?;
        t.server_filter = filter;
        Ok(())
    }

    /// Widens the topic's filter to also admit `filter`.
    pub fn merge_server_filter(&mut self, topic: &str, filter: &FilterPredicate) -> Result<(), BrokerError> {
        let t = self.topic_mut(topic)?;
        t.server_filter = Some(match t.server_filter.take() {
            Some(existing) => existing.union(filter),
            None => filter.clone(),
        });
        Ok(())
    }

    fn topic_mut(&mut self, name: &str) -> Result<&mut Topic, BrokerError> {
        self.topics
            .get_mut(name)
            .ok_or_else(|| BrokerError::UnknownTopic(name.to_string()))
    }

    /// Appends to partition `fnv1a64(key) mod n`, unless the topic's
    /// server-side filter rejects the value.
    pub fn publish(&mut self, topic: &str, key: &[u8], value: &[u8], now: SimTime) -> Result<PublishOutcome, BrokerError> {
        let t = self.topic_mut(topic)?;
        let outcome = t.append(key, value, now);
        if let (PublishOutcome::Appended { partition, offset }, Some(log)) = (outcome, self.log.as_mut()) {
            let t = &self.topics[topic];
            log.append(t.record(partition, offset).expect("just appended"))?;
        }
        Ok(outcome)
    }

    pub fn subscribe(&mut self, group_id: &str, consumer_id: &str, topic: &str) -> Result<Vec<TopicPartition>, BrokerError> {
        if !self.topics.contains_key(topic) {
            return Err(BrokerError::UnknownTopic(topic.to_string()));
        }
        let topics = &self.topics;
        let group = self
            .groups
            .entry(group_id.to_string())
            .or_insert_with(|| ConsumerGroup::new(group_id));
        group.join(consumer_id, topic, |name| topics[name].partition_count());
        Ok(group.assignment_of(consumer_id))
    }

    /// Leaves the group; the member's partitions move to the others.
    pub fn unsubscribe(&mut self, group_id: &str, consumer_id: &str) -> Result<(), BrokerError> {
        let topics = &self.topics;
        let group = self.groups.get_mut(group_id).ok_or_else(|| BrokerError::NotSubscribed {
            group: group_id.to_string(),
            consumer: consumer_id.to_string(),
        })?;
        group.leave(consumer_id, |name| topics[name].partition_count())
    }

    pub fn poll(&mut self, group_id: &str, consumer_id: &str, max_records: usize, now: SimTime) -> Result<Vec<Record>, BrokerError> {
        let topics = &self.topics;
        let delay = self.delay;
        let group = self.groups.get_mut(group_id).ok_or_else(|| BrokerError::NotSubscribed {
            group: group_id.to_string(),
            consumer: consumer_id.to_string(),
        })?;
        group.poll(consumer_id, max_records, |tp, from, max| {
            topics[&tp.topic].read_visible(tp.partition, from, max, now, delay)
        })
    }

    pub fn commit(&mut self, group_id: &str, tp: &TopicPartition, offset: u64) -> Result<(), BrokerError> {
        let end = self
            .topics
            .get(&tp.topic)
            .ok_or_else(|| BrokerError::UnknownTopic(tp.topic.clone()))?
            .end_offset(tp.partition)?;
        let group = self
            .groups
            .entry(group_id.to_string())
            .or_insert_with(|| ConsumerGroup::new(group_id));
        group.commit(tp, offset, end)
    }

    /// Simulates a consumer crash and restart: fetch positions fall back to
    /// the committed offsets.
    pub fn restart_consumer(&mut self, group_id: &str, consumer_id: &str) -> Result<(), BrokerError> {
        let group = self.groups.get_mut(group_id).ok_or_else(|| BrokerError::NotSubscribed {
            group: group_id.to_string(),
            consumer: consumer_id.to_string(),
        })?;
        group.restart(consumer_id)
    }

    pub fn group(&self, group_id: &str) -> Option<&ConsumerGroup> {
        self.groups.get(group_id)
    }

    pub fn end_offset(&self, tp: &TopicPartition) -> Result<u64, BrokerError> {
        self.topics
            .get(&tp.topic)
            .ok_or_else(|| BrokerError::UnknownTopic(tp.topic.clone()))?
            .end_offset(tp.partition)
    }

    /// Total records appended across all topics.
    pub fn total_records(&self) -> u64 {
        self.topics.values().map(Topic::len).sum()
    }

    pub fn flush(&mut self) -> Result<(), BrokerError> {
        if let Some(log) = self.log.as_mut() {
            log.flush()?;
        }
        Ok(())
    }

    /// `kind,name,topic,partition,end_offset,committed,lag`: one `topic` row
    /// per partition, then one `group` row per committed or assigned
    /// partition.
    pub fn stats_csv(&self) -> String {
        let mut out = String::from("kind,name,topic,partition,end_offset,committed,lag\n");
        for t in self.topics.values() {
            for p in 0..t.partition_count() {
                let end = t.end_offset(p).unwrap_or(0);
                let _ = writeln!(out, "topic,{},{},{p},{end},,", t.name(), t.name());
            }
        }
        for g in self.groups.values() {
            for tp in g.tracked_partitions() {
                let end = self.end_offset(&tp).unwrap_or(0);
                let committed = g.committed(&tp);
                let _ = writeln!(
                    out,
                    "group,{},{},{},{end},{committed},{}",
                    g.group_id(),
                    tp.topic,
                    tp.partition,
                    end - committed
                );
            }
        }
        out
    }
}
