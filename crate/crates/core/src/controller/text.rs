// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Line-oriented `key=value` bodies used by the socket demo for
//! subscription and northbound requests.
//!
//! One pair per line, split at the first `=`. Blank lines are ignored and
//! keys may not repeat. Lists are comma-separated; frames are lowercase hex.

use std::fmt::{self, Write as _};
use std::net::Ipv4Addr;
use std::str::FromStr;

use thiserror::Error;

use super::{Confirmation, SubscriptionRequest};
use crate::broker::{FilterPredicate, TopicPartition};
use crate::netproto::{decode_frame, Action, EthernetFrame, EventType, FlowEntry, MacAddr, MatchFields, OutPortSpec};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("line {0:?} has no '='")]
    NoSeparator(String),
    #[error("key {0:?} repeated")]
    DuplicateKey(String),
    #[error("missing key {0:?}")]
    Missing(&'static str),
    #[error("bad value for {key:?}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("unknown op {0:?}")]
    UnknownOp(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Kv(Vec<(String, String)>);

impl Kv {
    pub fn new() -> Self {
        Kv::default()
    }

    pub fn parse(s: &str) -> Result<Self, TextError> {
        let mut kv = Kv::new();
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| TextError::NoSeparator(line.to_string()))?;
            let k = k.trim();
            if kv.get(k).is_some() {
                return Err(TextError::DuplicateKey(k.to_string()));
            }
            kv.0.push((k.to_string(), v.trim().to_string()));
        }
        Ok(kv)
    }

    pub fn push(&mut self, k: &str, v: impl fmt::Display) -> &mut Self {
        self.0.push((k.to_string(), v.to_string()));
        self
    }

    pub fn get(&self, k: &str) -> Option<&str> {
        self.0.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, k: &'static str) -> Result<&str, TextError> {
        self.get(k).ok_or(TextError::Missing(k))
    }

    fn parsed<T: FromStr>(&self, k: &'static str) -> Result<Option<T>, TextError> {
        self.get(k)
            .map(|v| {
                v.parse().map_err(|_| TextError::BadValue {
                    key: k.to_string(),
                    value: v.to_string(),
                })
            })
            .transpose()
    }

    fn required<T: FromStr>(&self, k: &'static str) -> Result<T, TextError> {
        self.parsed(k)?.ok_or(TextError::Missing(k))
    }
}

impl fmt::Display for Kv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.0 {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

fn bad(key: &str, value: &str) -> TextError {
    TextError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    }
}

fn join<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let mut s = String::new();
    for (i, it) in items.into_iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{it}");
    }
    s
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_time(key: &str, v: &str) -> Result<SimTime, TextError> {
    crate::serde_time::parse(v).map_err(|_| bad(key, v))
}

fn fmt_time(t: SimTime) -> String {
    humantime::format_duration(t.into()).to_string()
}

pub fn subscription_to_kv(req: &SubscriptionRequest) -> Kv {
    let mut kv = Kv::new();
    kv.push("op", "subscribe")
        .push("app_id", &req.app_id)
        .push("topic", &req.topic)
        .push("group_id", &req.group_id);
    if let Some(f) = &req.filter {
        kv.push("types", join(f.allowed_event_types.iter().map(|t| t.name())));
        if let Some(d) = &f.allowed_devices {
            kv.push("devices", join(d));
        }
    }
    kv
}

pub fn subscription_from_kv(kv: &Kv) -> Result<SubscriptionRequest, TextError> {
    let filter = if kv.get("types").is_some() || kv.get("devices").is_some() {
        let mut f = FilterPredicate::default();
        for name in split_list(kv.get("types").unwrap_or("")) {
            f.allowed_event_types
                .insert(EventType::from_name(name).ok_or_else(|| bad("types", name))?);
        }
        if let Some(d) = kv.get("devices") {
            f.allowed_devices = Some(
                split_list(d)
                    .map(|x| x.parse().map_err(|_| bad("devices", x)))
                    .collect::<Result<_, _>>()?,
            );
        }
        Some(f)
    } else {
        None
    };
    Ok(SubscriptionRequest {
        app_id: kv.require("app_id")?.to_string(),
        topic: kv.require("topic")?.to_string(),
        group_id: kv.require("group_id")?.to_string(),
        filter,
    })
}

pub fn confirmation_to_kv(c: &Confirmation) -> Kv {
    let mut kv = Kv::new();
    kv.push("granted", c.granted)
        .push("partitions", join(&c.assigned_partitions));
    if let Some(e) = &c.error {
        kv.push("error", e);
    }
    kv
}

pub fn confirmation_from_kv(kv: &Kv) -> Result<Confirmation, TextError> {
    let assigned_partitions = split_list(kv.get("partitions").unwrap_or(""))
        .map(|s| {
            let (t, p) = s.rsplit_once('/').ok_or_else(|| bad("partitions", s))?;
            Ok(TopicPartition::new(t, p.parse().map_err(|_| bad("partitions", s))?))
        })
        .collect::<Result<_, TextError>>()?;
    Ok(Confirmation {
        granted: kv.required("granted")?,
        assigned_partitions,
        error: kv.get("error").map(str::to_string),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum NbRequest {
    Install { device_id: u64, rule: FlowEntry },
    PacketOut {
        device_id: u64,
        in_port: u32,
        out: OutPortSpec,
        frame: EthernetFrame,
    },
}

fn ip_str(ip: u32) -> String {
    Ipv4Addr::from(ip).to_string()
}

fn parse_ip(key: &str, v: &str) -> Result<u32, TextError> {
    v.parse::<Ipv4Addr>().map(u32::from).map_err(|_| bad(key, v))
}

fn parse_mac(key: &str, v: &str) -> Result<MacAddr, TextError> {
    v.parse().map_err(|_| bad(key, v))
}

fn parse_u16_any(key: &str, v: &str) -> Result<u16, TextError> {
    match v.strip_prefix("0x") {
        Some(h) => u16::from_str_radix(h, 16),
        None => v.parse(),
    }
    .map_err(|_| bad(key, v))
}

fn match_to_kv(m: &MatchFields, kv: &mut Kv) {
    if let Some(v) = m.in_port {
        kv.push("in_port", v);
    }
    if let Some(v) = m.eth_src {
        kv.push("eth_src", v);
    }
    if let Some(v) = m.eth_dst {
        kv.push("eth_dst", v);
    }
    if let Some(v) = m.ethertype {
        kv.push("ethertype", format!("0x{v:04x}"));
    }
    if let Some(v) = m.ip_src {
        kv.push("ip_src", ip_str(v));
    }
    if let Some(v) = m.ip_dst {
        kv.push("ip_dst", ip_str(v));
    }
    if let Some(v) = m.ip_proto {
        kv.push("ip_proto", v);
    }
    if let Some(v) = m.l4_src {
        kv.push("l4_src", v);
    }
    if let Some(v) = m.l4_dst {
        kv.push("l4_dst", v);
    }
}

fn match_from_kv(kv: &Kv) -> Result<MatchFields, TextError> {
    Ok(MatchFields {
        in_port: kv.parsed("in_port")?,
        eth_src: kv.get("eth_src").map(|v| parse_mac("eth_src", v)).transpose()?,
        eth_dst: kv.get("eth_dst").map(|v| parse_mac("eth_dst", v)).transpose()?,
        ethertype: kv.get("ethertype").map(|v| parse_u16_any("ethertype", v)).transpose()?,
        ip_src: kv.get("ip_src").map(|v| parse_ip("ip_src", v)).transpose()?,
        ip_dst: kv.get("ip_dst").map(|v| parse_ip("ip_dst", v)).transpose()?,
        ip_proto: kv.parsed("ip_proto")?,
        l4_src: kv.parsed("l4_src")?,
        l4_dst: kv.parsed("l4_dst")?,
    })
}

fn action_str(a: &Action) -> String {
    match a {
        Action::Output(p) => format!("output:{p}"),
        Action::Flood => "flood".into(),
        Action::Drop => "drop".into(),
    }
}

fn parse_action(v: &str) -> Result<Action, TextError> {
    match v {
        "flood" => Ok(Action::Flood),
        "drop" => Ok(Action::Drop),
        _ => v
            .strip_prefix("output:")
            .and_then(|p| p.parse().ok())
            .map(Action::Output)
            .ok_or_else(|| bad("actions", v)),
    }
}

fn out_str(o: OutPortSpec) -> String {
    match o {
        OutPortSpec::Port(p) => p.to_string(),
        OutPortSpec::Flood => "flood".into(),
        OutPortSpec::Table => "table".into(),
    }
}

fn parse_out(v: &str) -> Result<OutPortSpec, TextError> {
    match v {
        "flood" => Ok(OutPortSpec::Flood),
        "table" => Ok(OutPortSpec::Table),
        _ => v.parse().map(OutPortSpec::Port).map_err(|_| bad("out", v)),
    }
}

impl NbRequest {
    pub fn to_kv(&self) -> Kv {
        let mut kv = Kv::new();
        match self {
            NbRequest::Install { device_id, rule } => {
                kv.push("op", "install")
                    .push("device", device_id)
                    .push("priority", rule.priority);
                match_to_kv(&rule.matches, &mut kv);
                kv.push("actions", join(rule.actions.iter().map(action_str)))
                    .push("hard_timeout", fmt_time(rule.hard_timeout))
                    .push("idle_timeout", fmt_time(rule.idle_timeout));
            }
            NbRequest::PacketOut {
                device_id,
                in_port,
                out,
                frame,
            } => {
                kv.push("op", "packet_out")
                    .push("device", device_id)
                    .push("in_port", in_port)
                    .push("out", out_str(*out))
                    .push("frame", hex::encode(frame.encode().unwrap_or_default()));
            }
        }
        kv
    }

    pub fn from_kv(kv: &Kv) -> Result<Self, TextError> {
        let device_id = kv.required("device")?;
        match kv.require("op")? {
            "install" => {
                let actions = split_list(kv.require("actions")?)
                    .map(parse_action)
                    .collect::<Result<_, _>>()?;
                let hard = kv.get("hard_timeout").map(|v| parse_time("hard_timeout", v)).transpose()?;
                let idle = kv.get("idle_timeout").map(|v| parse_time("idle_timeout", v)).transpose()?;
                let rule = FlowEntry::new(kv.required("priority")?, match_from_kv(kv)?, actions)
                    .with_timeouts(hard.unwrap_or_default(), idle.unwrap_or_default());
                Ok(NbRequest::Install { device_id, rule })
            }
            "packet_out" => {
                let hex_frame = kv.require("frame")?;
                let bytes = hex::decode(hex_frame).map_err(|_| bad("frame", hex_frame))?;
                let frame = decode_frame(&bytes).map_err(|_| bad("frame", hex_frame))?;
                Ok(NbRequest::PacketOut {
                    device_id,
                    in_port: kv.required("in_port")?,
                    out: parse_out(kv.require("out")?)?,
                    frame,
                })
            }
            op => Err(TextError::UnknownOp(op.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NbReply {
    Installed { entry_id: u64 },
    Done,
    Error(String),
}

impl NbReply {
    pub fn to_kv(&self) -> Kv {
        let mut kv = Kv::new();
        match self {
            NbReply::Installed { entry_id } => kv.push("ok", true).push("entry_id", entry_id),
            NbReply::Done => kv.push("ok", true),
            NbReply::Error(e) => kv.push("ok", false).push("error", e),
        };
        kv
    }

    pub fn from_kv(kv: &Kv) -> Result<Self, TextError> {
        if !kv.required::<bool>("ok")? {
            return Ok(NbReply::Error(kv.get("error").unwrap_or("").to_string()));
        }
        Ok(match kv.parsed("entry_id")? {
            Some(entry_id) => NbReply::Installed { entry_id },
            None => NbReply::Done,
        })
    }
}
