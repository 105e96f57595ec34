// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use thiserror::Error;

use super::PortRef;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FabricError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("port {0} already has a link")]
    PortInUse(PortRef),
    #[error("unknown device {0}")]
    UnknownDevice(u64),
    #[error("unknown port {0}")]
    UnknownPort(PortRef),
    #[error("flow mod for device {got} applied to device {expected}")]
    WrongDevice { expected: u64, got: u64 },
    #[error("entry id {0} already installed")]
    DuplicateEntryId(u64),
    #[error("no host with address {0:#010x}")]
    UnknownDestination(u32),
    #[error("unknown host index {0}")]
    UnknownHost(usize),
    #[error("no path between host {0} and host {1}")]
    NoPath(usize, usize),
}
