// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! On-disk record log for post-mortem inspection.
//!
//! Each entry is a big-endian u32 body length followed by the body:
//! topic (u16 length + UTF-8), partition u32, offset u64, append time u64
//! nanoseconds, key (u32 length + bytes), value (u32 length + bytes).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{BrokerError, Record};
use crate::netproto::CodecError;
use crate::time::SimTime;

#[derive(Debug)]
pub struct LogWriter {
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn create(path: &Path) -> Result<Self, BrokerError> {
        Ok(LogWriter {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn append(&mut self, r: &Record) -> Result<(), BrokerError> {
        let body = encode_record(r);
        self.out.write_all(&(body.len() as u32).to_be_bytes())?;
        self.out.write_all(&body)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), BrokerError> {
        self.out.flush()?;
        Ok(())
    }
}

fn encode_record(r: &Record) -> Vec<u8> {
    let mut b = Vec::with_capacity(34 + r.topic.len() + r.key.len() + r.value.len());
    b.extend_from_slice(&(r.topic.len() as u16).to_be_bytes());
    b.extend_from_slice(r.topic.as_bytes());
    b.extend_from_slice(&r.partition.to_be_bytes());
    b.extend_from_slice(&r.offset.to_be_bytes());
    b.extend_from_slice(&r.append_time.as_nanos().to_be_bytes());
    b.extend_from_slice(&(r.key.len() as u32).to_be_bytes());
    b.extend_from_slice(&r.key);
    b.extend_from_slice(&(r.value.len() as u32).to_be_bytes());
    b.extend_from_slice(&r.value);
    b
}

fn decode_record(body: &[u8]) -> Result<Record, CodecError> {
    let mut c = crate::netproto::cursor::Cursor::new(body);
    let tlen = c.u16()? as usize;
    let topic = std::str::from_utf8(c.take(tlen)?)
        .map_err(|e| CodecError::malformed("log topic", e.to_string()))?
        .into();
    let partition = c.u32()?;
    let offset = c.u64()?;
    let append_time = SimTime::from_nanos(c.u64()?);
    let klen = c.u32()? as usize;
    let key = c.take(klen)?.to_vec();
    let vlen = c.u32()? as usize;
    let value = c.take(vlen)?.to_vec();
    c.finish("log record")?;
    Ok(Record {
        topic,
        partition,
        offset,
        key,
        value,
        append_time,
    })
}

/// Reads a log written by [`LogWriter`]. A truncated final entry is an error.
pub fn read_log(path: &Path) -> Result<Vec<Record>, BrokerError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let mut out = Vec::new();
    let mut rest = bytes.as_slice();
    while !rest.is_empty() {
        let bad = |e: CodecError| BrokerError::Io(format!("corrupt log entry {}: {e}", out.len()));
        if rest.len() < 4 {
            return Err(bad(CodecError::Truncated { needed: 4, got: rest.len() }));
        }
        let len = u32::from_be_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
        let body = rest.get(4..4 + len).ok_or_else(|| {
            bad(CodecError::Truncated {
                needed: 4 + len,
                got: rest.len(),
            })
        })?;
        let r = decode_record(body).map_err(bad)?;
        out.push(r);
        rest = &rest[4 + len..];
    }
    Ok(out)
}
