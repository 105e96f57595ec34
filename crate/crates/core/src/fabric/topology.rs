// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Ground-truth topology and the k-ary fat-tree builder.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};

use super::{FabricError, LinkSpec};
use crate::netproto::{EthernetFrame, MacAddr};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortRef {
    pub device: u64,
    pub port: u32,
}

impl PortRef {
    pub fn new(device: u64, port: u32) -> Self {
        PortRef { device, port }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}:{}", self.device, self.port)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SwitchRole {
    Core,
    Aggregation,
    Edge,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortPeer {
    Switch(PortRef),
    Host(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortAttachment {
    pub peer: PortPeer,
    pub latency: SimTime,
    pub capacity_bps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchInfo {
    pub device_id: u64,
    pub role: SwitchRole,
    pub site: u32,
    pub ports: BTreeMap<u32, PortAttachment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostInfo {
    pub mac: MacAddr,
    pub ip: u32,
    pub attached: PortRef,
    pub latency: SimTime,
    pub capacity_bps: u64,
}

/// Undirected switch-to-switch link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub a: PortRef,
    pub b: PortRef,
    pub latency: SimTime,
    pub capacity_bps: u64,
}

impl Link {
    /// Endpoints with the smaller one first.
    pub fn normalized(&self) -> (PortRef, PortRef) {
        if self.a <= self.b {
            (self.a, self.b)
        } else {
            (self.b, self.a)
        }
    }
}

/// Where a frame can be: on a switch port or at a host NIC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Switch(PortRef),
    Host(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub at: SimTime,
    pub to: Endpoint,
    pub frame: EthernetFrame,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopologyGraph {
    pub switches: BTreeMap<u64, SwitchInfo>,
    pub hosts: Vec<HostInfo>,
    pub links: Vec<Link>,
}

impl TopologyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_switch(&mut self, device_id: u64, role: SwitchRole, site: u32) -> Result<(), FabricError> {
        if device_id == 0 {
            return Err(FabricError::InvalidParam("device id 0 is reserved".into()));
        }
        if self.switches.contains_key(&device_id) {
            return Err(FabricError::InvalidParam(format!("duplicate device {device_id}")));
        }
        self.switches.insert(
            device_id,
            SwitchInfo {
                device_id,
                role,
                site,
                ports: BTreeMap::new(),
            },
        );
        Ok(())
    }

    fn attach(&mut self, at: PortRef, att: PortAttachment) -> Result<(), FabricError> {
        if at.port == 0 {
            return Err(FabricError::InvalidParam("port 0 is reserved".into()));
        }
        let sw = self
            .switches
            .get_mut(&at.device)
            .ok_or(FabricError::UnknownDevice(at.device))?;
        if sw.ports.contains_key(&at.port) {
            return Err(FabricError::PortInUse(at));
        }
        sw.ports.insert(at.port, att);
        Ok(())
    }

    pub fn add_link(&mut self, a: PortRef, b: PortRef, spec: LinkSpec) -> Result<(), FabricError> {
        if a == b {
            return Err(FabricError::InvalidParam(format!("self-loop on {a}")));
        }
        for end in [a, b] {
            let sw = self
                .switches
                .get(&end.device)
                .ok_or(FabricError::UnknownDevice(end.device))?;
            if sw.ports.contains_key(&end.port) {
                return Err(FabricError::PortInUse(end));
            }
        }
        let mk = |peer| PortAttachment {
            peer: PortPeer::Switch(peer),
            latency: spec.latency,
            capacity_bps: spec.capacity_bps,
        };
        self.attach(a, mk(b))?;
        self.attach(b, mk(a))?;
        self.links.push(Link {
            a,
            b,
            latency: spec.latency,
            capacity_bps: spec.capacity_bps,
        });
        Ok(())
    }

    pub fn add_host(&mut self, mac: MacAddr, ip: u32, at: PortRef, spec: LinkSpec) -> Result<usize, FabricError> {
        if self.hosts.iter().any(|h| h.mac == mac || h.ip == ip) {
            return Err(FabricError::InvalidParam(format!("duplicate host {mac}")));
        }
        let idx = self.hosts.len();
        self.attach(
            at,
            PortAttachment {
                peer: PortPeer::Host(idx),
                latency: spec.latency,
                capacity_bps: spec.capacity_bps,
            },
        )?;
        self.hosts.push(HostInfo {
            mac,
            ip,
            attached: at,
            latency: spec.latency,
            capacity_bps: spec.capacity_bps,
        });
        Ok(idx)
    }

    pub fn attachment(&self, at: PortRef) -> Option<&PortAttachment> {
        self.switches.get(&at.device)?.ports.get(&at.port)
    }

    pub fn ports(&self, device: u64) -> Vec<u32> {
        self.switches
            .get(&device)
            .map(|s| s.ports.keys().copied().collect())
            .unwrap_or_default()
    }

    pub fn host_by_ip(&self, ip: u32) -> Option<usize> {
        self.hosts.iter().position(|h| h.ip == ip)
    }

    pub fn host_by_mac(&self, mac: MacAddr) -> Option<usize> {
        self.hosts.iter().position(|h| h.mac == mac)
    }

    /// Switch links as normalized endpoint pairs.
    pub fn switch_link_set(&self) -> BTreeSet<(PortRef, PortRef)> {
        self.links.iter().map(Link::normalized).collect()
    }

    pub fn total_ports(&self) -> usize {
        self.switches.values().map(|s| s.ports.len()).sum()
    }

    /// True when every switch and host is reachable from the first switch.
    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.switches.keys().next() else {
            return self.hosts.is_empty();
        };
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(d) = queue.pop_front() {
            for att in self.switches[&d].ports.values() {
                if let PortPeer::Switch(p) = att.peer {
                    if seen.insert(p.device) {
                        queue.push_back(p.device);
                    }
                }
            }
        }
        seen.len() == self.switches.len()
    }

    /// Human-readable edge list: one line per switch link, then one per host.
    pub fn dump_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} switches, {} hosts, {} switch links",
            self.switches.len(),
            self.hosts.len(),
            self.links.len()
        );
        let mut links: Vec<_> = self.links.iter().collect();
        links.sort_by_key(|l| l.normalized());
        for l in links {
            let (a, b) = l.normalized();
            let _ = writeln!(
                out,
                "{a} -- {b} latency_ns={} capacity_bps={}",
                l.latency.as_nanos(),
                l.capacity_bps
            );
        }
        for (i, h) in self.hosts.iter().enumerate() {
            let _ = writeln!(
                out,
                "h{} -- {} mac={} ip={} latency_ns={} capacity_bps={}",
                i + 1,
                h.attached,
                h.mac,
                ip_to_string(h.ip),
                h.latency.as_nanos(),
                h.capacity_bps
            );
        }
        out
    }
}

pub(crate) fn ip_to_string(ip: u32) -> String {
    let b = ip.to_be_bytes();
    format!("{}.{}.{}.{}", b[0], b[1], b[2], b[3])
}

/// Puts `frame` on the wire at `from`; `None` if the port is unconnected.
pub fn transmit(graph: &TopologyGraph, from: Endpoint, frame: EthernetFrame, now: SimTime) -> Option<Delivery> {
    match from {
        Endpoint::Host(h) => {
            let host = graph.hosts.get(h)?;
            Some(Delivery {
                at: now + host.latency,
                to: Endpoint::Switch(host.attached),
                frame,
            })
        }
        Endpoint::Switch(p) => {
            let att = graph.attachment(p)?;
            let to = match att.peer {
                PortPeer::Switch(q) => Endpoint::Switch(q),
                PortPeer::Host(h) => Endpoint::Host(h),
            };
            Some(Delivery {
                at: now + att.latency,
                to,
                frame,
            })
        }
    }
}

/// Every connected port of `device` except `in_port`, ascending.
pub fn flood_ports(graph: &TopologyGraph, device: u64, in_port: u32) -> Vec<u32> {
    graph
        .ports(device)
        .into_iter()
        .filter(|&p| p != in_port)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FatTreeOptions {
    pub hosts_per_edge: Option<u32>,
    pub host_link: LinkSpec,
    pub switch_link: LinkSpec,
    pub inter_site_link: LinkSpec,
}

impl Default for FatTreeOptions {
    fn default() -> Self {
        FatTreeOptions {
            hosts_per_edge: None,
            host_link: LinkSpec::default(),
            switch_link: LinkSpec::default(),
            inter_site_link: LinkSpec::default(),
        }
    }
}

pub fn build_fat_tree(k: u32, sites: u32) -> Result<TopologyGraph, FabricError> {
    build_fat_tree_with(k, sites, &FatTreeOptions::default())
}

/// Builds `sites` k-ary fat-trees joined in a ring through their first core
/// switch.
///
/// Per site: `(k/2)^2` core, `k` pods of `k/2` aggregation and `k/2` edge
/// switches, `k/2` hosts per edge switch unless overridden. Device ids are
/// assigned sequentially from 1, site by site, in core, aggregation, edge
/// order. Edge ports `1..=h` face hosts and `h+1..` face aggregation;
/// aggregation ports `1..=k/2` face edges and the rest face cores; core port
/// `p+1` faces pod `p`. The ring uses core ports `k+1` (towards the next site)
/// and `k+2` (towards the previous one). Host `i` (0-based, global) gets MAC
/// `00:00:` + `i+1` and IPv4 `10.0.0.0 + i + 1`.
pub fn build_fat_tree_with(k: u32, sites: u32, opts: &FatTreeOptions) -> Result<TopologyGraph, FabricError> {
    if k < 2 || k % 2 != 0 {
        return Err(FabricError::InvalidParam(format!("k must be even and >= 2, got {k}")));
    }
    if sites == 0 {
        return Err(FabricError::InvalidParam("sites must be >= 1".into()));
    }
    let half = k / 2;
    let hosts_per_edge = opts.hosts_per_edge.unwrap_or(half);
    let mut g = TopologyGraph::new();
    let mut next_id = 1u64;
    let mut first_cores = Vec::with_capacity(sites as usize);

    for site in 0..sites {
        let mut alloc = |g: &mut TopologyGraph, role| -> Result<u64, FabricError> {
            let id = next_id;
            next_id += 1;
            g.add_switch(id, role, site)?;
            Ok(id)
        };
        let cores = (0..half * half)
            .map(|_| alloc(&mut g, SwitchRole::Core))
            .collect::<Result<Vec<_>, _>>()?;
        let aggs = (0..k * half)
            .map(|_| alloc(&mut g, SwitchRole::Aggregation))
            .collect::<Result<Vec<_>, _>>()?;
        let edges = (0..k * half)
            .map(|_| alloc(&mut g, SwitchRole::Edge))
            .collect::<Result<Vec<_>, _>>()?;
        first_cores.push(cores[0]);

        for pod in 0..k {
            for e in 0..half {
                let edge = edges[(pod * half + e) as usize];
                for a in 0..half {
                    let agg = aggs[(pod * half + a) as usize];
                    g.add_link(
                        PortRef::new(edge, hosts_per_edge + a + 1),
                        PortRef::new(agg, e + 1),
                        opts.switch_link,
                    )?;
                }
            }
            for a in 0..half {
                let agg = aggs[(pod * half + a) as usize];
                for c in 0..half {
                    let core = cores[(a * half + c) as usize];
                    g.add_link(
                        PortRef::new(agg, half + c + 1),
                        PortRef::new(core, pod + 1),
                        opts.switch_link,
                    )?;
                }
            }
        }
        for &edge in &edges {
            for h in 0..hosts_per_edge {
                let n = g.hosts.len() as u32 + 1;
                g.add_host(
                    MacAddr::from_index(n),
                    0x0A00_0000 + n,
                    PortRef::new(edge, h + 1),
                    opts.host_link,
                )?;
            }
        }
    }

    let n = first_cores.len();
    if n >= 2 {
        let pairs = if n == 2 { 1 } else { n };
        for s in 0..pairs {
            let a = first_cores[s];
            let b = first_cores[(s + 1) % n];
            g.add_link(PortRef::new(a, k + 1), PortRef::new(b, k + 2), opts.inter_site_link)?;
        }
    }
    Ok(g)
}
