// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use serde::{Deserialize, Serialize};

use super::{build_fat_tree_with, FabricError, FatTreeOptions, TopologyGraph};
use crate::time::SimTime;

/// Latency and capacity of one class of links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    #[serde(with = "crate::serde_time")]
    pub latency: SimTime,
    pub capacity_bps: u64,
}

impl Default for LinkSpec {
    fn default() -> Self {
        LinkSpec {
            latency: SimTime::from_micros(50),
            capacity_bps: 100_000_000,
        }
    }
}

/// `[topology]` section of the configuration file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub k: u32,
    pub sites: u32,
    /// Hosts under each edge switch; `k/2` when absent.
    pub hosts_per_edge: Option<u32>,
    pub host_link: LinkSpec,
    pub switch_link: LinkSpec,
    pub inter_site_link: LinkSpec,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            k: 4,
            sites: 5,
            hosts_per_edge: None,
            host_link: LinkSpec::default(),
            switch_link: LinkSpec::default(),
            inter_site_link: LinkSpec::default(),
        }
    }
}

impl TopologyConfig {
    pub fn build(&self) -> Result<TopologyGraph, FabricError> {
        build_fat_tree_with(
            self.k,
            self.sites,
            &FatTreeOptions {
                hosts_per_edge: self.hosts_per_edge,
                host_link: self.host_link,
                switch_link: self.switch_link,
                inter_site_link: self.inter_site_link,
            },
        )
    }
}
