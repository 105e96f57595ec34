// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("payload of {0} bytes exceeds the 1500-byte limit")]
    OversizePayload(usize),
    #[error("truncated input: needed {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("unknown message tag {0:#04x}")]
    UnknownTag(u8),
    #[error("bad envelope magic {0:#06x}")]
    BadMagic(u16),
    #[error("unsupported envelope version {0}")]
    BadVersion(u8),
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
}

impl CodecError {
    pub(crate) fn malformed(what: &'static str, detail: impl Into<String>) -> Self {
        CodecError::Malformed {
            what,
            detail: detail.into(),
        }
    }
}
