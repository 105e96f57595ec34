// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BrokerError {
    #[error("topic {0:?} already exists")]
    DuplicateTopic(String),
    #[error("partition count must be at least 1")]
    InvalidPartitionCount,
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
    #[error("unknown partition {partition} of topic {topic:?}")]
    UnknownPartition { topic: String, partition: u32 },
    #[error("consumer {consumer:?} is not a member of group {group:?}")]
    NotSubscribed { group: String, consumer: String },
    #[error("offset {offset} beyond log end {end} of {topic}/{partition}")]
    OffsetOutOfRange {
        topic: String,
        partition: u32,
        offset: u64,
        end: u64,
    },
    #[error("log persistence: {0}")]
    Io(String),
}

impl From<std::io::Error> for BrokerError {
    fn from(e: std::io::Error) -> Self {
        BrokerError::Io(e.to_string())
    }
}
