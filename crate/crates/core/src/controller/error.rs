// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use thiserror::Error;

use crate::broker::BrokerError;
use crate::netproto::CodecError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error("unknown device {0}")]
    UnknownDevice(u64),
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error("operation not available in the current pipeline mode")]
    WrongMode,
    #[error(transparent)]
    Broker(#[from] BrokerError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}
