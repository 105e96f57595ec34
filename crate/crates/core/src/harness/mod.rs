// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Scenario runners, the shared configuration file and CSV output.

mod metrics;
mod scenarios;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{emit_csv, summarize, write_csv, MetricSample, Summary, Unit, CSV_HEADER};
pub use scenarios::{
    calibrate, filter_compare_runs, run, run_filter_compare, run_scenario1, run_scenario2, scenario1_runs, scenario2_reports,
    PlacementRun, Scenario1Run,
};

use crate::controller::{ControllerError, FilterPlacement, NbLatencyModel, PipelineMode};
use crate::extapps::AppConfig;
use crate::fabric::{FabricError, TopologyConfig};
use crate::testbed::TestbedConfig;
use crate::time::SimTime;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid band [{low}, {high}] ms: low must be below high")]
    InvalidBand { low: f64, high: f64 },
    #[error("mean external RTT {mean_ms:.3} ms outside [{low}, {high}] ms")]
    CalibrationOutOfBand { mean_ms: f64, low: f64, high: f64 },
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    #[default]
    Ping,
    Throughput,
    #[serde(alias = "filter")]
    FilterCompare,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Ping => "ping",
            ScenarioKind::Throughput => "throughput",
            ScenarioKind::FilterCompare => "filter",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Internal,
    #[default]
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrokerConfig {
    /// Time from append until a record is visible to consumers.
    #[serde(with = "crate::serde_time")]
    pub delay: SimTime,
    pub partitions: u32,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        BrokerConfig {
            delay: SimTime::from_millis(3),
            partitions: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PingConfig {
    #[serde(with = "crate::serde_time")]
    pub interval: SimTime,
    #[serde(with = "crate::serde_time")]
    pub timeout: SimTime,
}

impl Default for PingConfig {
    fn default() -> Self {
        PingConfig {
            interval: SimTime::from_secs(1),
            timeout: SimTime::from_secs(1),
        }
    }
}

/// The mixed trace replayed under every filter placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterTraceConfig {
    /// Random host pairs, each pinged once.
    pub pings: u32,
    /// Window the pings are spread over.
    #[serde(with = "crate::serde_time")]
    pub window: SimTime,
}

impl Default for FilterTraceConfig {
    fn default() -> Self {
        FilterTraceConfig {
            pings: 100,
            window: SimTime::from_secs(1),
        }
    }
}

/// Everything one `run` needs. Doubles as the TOML config file layout; the
/// `[topology]` table is the fabric's own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub mode: ModeKind,
    /// Filter placement used in external mode.
    pub placement: FilterPlacement,
    pub seed: u64,
    pub repetitions: u32,
    #[serde(with = "crate::serde_time")]
    pub duration: SimTime,
    pub n_conns: Vec<u32>,
    /// Host indices standing in for H1 and H4.
    pub h1: usize,
    pub h4: usize,
    /// Run independent simulations on separate threads.
    pub parallel: bool,
    pub topology: TopologyConfig,
    pub latency: NbLatencyModel,
    pub broker: BrokerConfig,
    pub apps: AppConfig,
    pub ping: PingConfig,
    pub filter: FilterTraceConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: ScenarioKind::Ping,
            mode: ModeKind::External,
            placement: FilterPlacement::ClientSide,
            seed: 0,
            repetitions: 500,
            duration: SimTime::from_secs(150),
            n_conns: vec![1, 2, 4, 8, 16],
            h1: 0,
            h4: 3,
            parallel: false,
            topology: TopologyConfig::default(),
            latency: NbLatencyModel::default(),
            broker: BrokerConfig::default(),
            apps: AppConfig::default(),
            ping: PingConfig::default(),
            filter: FilterTraceConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn with_mode(mut self, mode: ModeKind) -> Self {
        self.mode = mode;
        self
    }

    pub fn pipeline_mode(&self) -> PipelineMode {
        match self.mode {
            ModeKind::Internal => PipelineMode::Internal,
            ModeKind::External => PipelineMode::External {
                placement: self.placement,
            },
        }
    }

    pub fn testbed(&self) -> TestbedConfig {
        TestbedConfig {
            mode: self.pipeline_mode(),
            latency: self.latency,
            broker_delay: self.broker.delay,
            partitions: self.broker.partitions,
            app_processing: self.apps.processing_delay,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.duration.is_zero() || self.ping.interval.is_zero() || self.ping.timeout.is_zero() {
            return bad("durations must be positive");
        }
        if self.n_conns.is_empty() || self.n_conns.contains(&0) {
            return bad("n_conns must be a non-empty list of positive counts");
        }
        if self.broker.partitions == 0 {
            return bad("broker.partitions must be at least 1");
        }
        if self.apps.hard_timeout.is_zero() && self.scenario == ScenarioKind::Throughput {
            return bad("apps.hard_timeout must be positive for the throughput scenario");
        }
        if self.h1 == self.h4 {
            return bad("h1 and h4 must differ");
        }
        Ok(())
    }
}
