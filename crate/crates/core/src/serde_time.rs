// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Human-readable durations (`"50us"`, `"10ms"`, `"150s"`) for config files.

use std::time::Duration;

use serde::{de, Deserialize, Deserializer, Serializer};

use crate::time::SimTime;

pub fn serialize<S: Serializer>(t: &SimTime, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&humantime::format_duration(Duration::from(*t)).to_string())
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SimTime, D::Error> {
    let s = String::deserialize(d)?;
    parse(&s).map_err(de::Error::custom)
}

pub fn parse(s: &str) -> Result<SimTime, String> {
    let s = s.trim();
    if s == "0" {
        return Ok(SimTime::ZERO);
    }
    humantime::parse_duration(s)
        .map(SimTime::from)
        .map_err(|e| format!("invalid duration {s:?}: {e}"))
}
