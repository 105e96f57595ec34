// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HarnessError, MetricSample, ScenarioConfig, ScenarioKind, Unit};
use crate::broker::FilterPredicate;
use crate::controller::{FilterPlacement, NbLatencyModel, PipelineMode};
use crate::exec;
use crate::extapps::{InternalReactiveForwarding, InternalRelay, ReactiveForwardingApp, RelayApp, TopologyDiscoveryApp};
use crate::fabric::{BulkFlowReport, TopologyGraph};
use crate::netproto::EventType;
use crate::testbed::{FrameKind, Testbed, TestbedConfig, TraceEvent};
use crate::time::SimTime;

fn require(cfg: &ScenarioConfig, kind: ScenarioKind) -> Result<(), HarnessError> {
    if cfg.scenario != kind {
        return Err(HarnessError::Config(format!(
            "scenario is {}, expected {}",
            cfg.scenario.name(),
            kind.name()
        )));
    }
    cfg.validate()
}

fn build(cfg: &ScenarioConfig) -> Result<TopologyGraph, HarnessError> {
    let g = cfg.topology.build().map_err(|e| HarnessError::Config(e.to_string()))?;
    let n = g.hosts.len();
    if cfg.h1 >= n || cfg.h4 >= n {
        return Err(HarnessError::Config(format!(
            "host pair ({}, {}) out of range for {n} hosts",
            cfg.h1, cfg.h4
        )));
    }
    Ok(g)
}

fn ms(t: SimTime) -> f64 {
    t.as_millis_f64()
}

/// What one ping repetition measured, with the same RTT re-derived from
/// the raw trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scenario1Run {
    pub repetition: u32,
    pub rtt: Option<SimTime>,
    pub trace_rtt: Option<SimTime>,
    pub punts: usize,
}

fn scenario1_once(graph: &TopologyGraph, tb_cfg: &TestbedConfig, cfg: &ScenarioConfig, repetition: u32) -> Result<Scenario1Run, HarnessError> {
    let mut tb = Testbed::new(graph.clone(), tb_cfg)?;
    tb.clear_flow_tables();
    let topo = tb.ground_truth();
    match tb_cfg.mode {
        PipelineMode::Internal => tb.add_internal_processor(Box::new(InternalRelay::new(topo)))?,
        PipelineMode::External { .. } => tb.add_app(Box::new(RelayApp::new(topo))),
    }
    let dst_ip = graph.hosts[cfg.h4].ip;
    let session = tb.ping(cfg.h1, dst_ip, 1, cfg.ping.interval, cfg.ping.timeout, SimTime::ZERO)?;
    tb.run()?;
    let s = tb.ping_session(session).expect("session exists");
    Ok(Scenario1Run {
        repetition,
        rtt: tb.ping_results(session).first().and_then(|o| o.rtt()),
        trace_rtt: tb.trace().echo_rtt(cfg.h1, s.ident, 1),
        punts: tb.trace().packet_ins(),
    })
}

/// One fresh fabric per repetition; repetitions are independent, so they
/// may run on separate threads.
pub fn scenario1_runs(cfg: &ScenarioConfig) -> Result<Vec<Scenario1Run>, HarnessError> {
    require(cfg, ScenarioKind::Ping)?;
    let graph = build(cfg)?;
    let tb_cfg = cfg.testbed();
    exec::map_with(cfg.parallel, (0..cfg.repetitions).collect(), |rep| {
        scenario1_once(&graph, &tb_cfg, cfg, rep)
    })
    .into_iter()
    .collect()
}

/// One RTT sample per repetition; a lost ping yields a `lost` count instead.
pub fn run_scenario1(cfg: &ScenarioConfig) -> Result<Vec<MetricSample>, HarnessError> {
    let mode = cfg.pipeline_mode().name();
    Ok(scenario1_runs(cfg)?
        .into_iter()
        .map(|r| {
            let s = match r.rtt {
                Some(rtt) => MetricSample::new("ping", mode, r.repetition, "rtt", Unit::Ms, ms(rtt)),
                None => MetricSample::new("ping", mode, r.repetition, "lost", Unit::Count, 1.0),
            };
            s.with("h1", cfg.h1)
                .with("h4", cfg.h4)
                .with("punts", r.punts)
                .with("seed", cfg.seed)
        })
        .collect())
}

/// Bulk-flow report per entry of `cfg.n_conns`, in list order.
pub fn scenario2_reports(cfg: &ScenarioConfig) -> Result<Vec<BulkFlowReport>, HarnessError> {
    require(cfg, ScenarioKind::Throughput)?;
    let graph = build(cfg)?;
    let tb_cfg = cfg.testbed();
    exec::map_with(cfg.parallel, cfg.n_conns.clone(), |n| -> Result<BulkFlowReport, HarnessError> {
        let mut tb = Testbed::new(graph.clone(), &tb_cfg)?;
        let topo = tb.ground_truth();
        match tb_cfg.mode {
            PipelineMode::Internal => {
                tb.add_internal_processor(Box::new(InternalReactiveForwarding::new(cfg.apps, topo)))?
            }
            PipelineMode::External { .. } => tb.add_app(Box::new(ReactiveForwardingApp::new(cfg.apps, topo))),
        }
        let flow = tb.bulk_flows(cfg.h1, cfg.h4, n, SimTime::ZERO, cfg.duration)?;
        tb.run_until(cfg.duration + SimTime::from_secs(1))?;
        Ok(tb.bulk_report(flow).expect("flow exists"))
    })
    .into_iter()
    .collect()
}

pub fn run_scenario2(cfg: &ScenarioConfig) -> Result<Vec<MetricSample>, HarnessError> {
    let mode = cfg.pipeline_mode().name();
    let mut out = Vec::new();
    for (rep, r) in scenario2_reports(cfg)?.into_iter().enumerate() {
        let rep = rep as u32;
        let tag = |s: MetricSample| s.with("n_conns", r.n_conns).with("seed", cfg.seed);
        out.push(tag(MetricSample::new("throughput", mode, rep, "throughput", Unit::BitsPerSec, r.throughput_bps)));
        out.push(tag(MetricSample::new(
            "throughput",
            mode,
            rep,
            "per_connection",
            Unit::BitsPerSec,
            r.per_connection_bps,
        )));
        out.push(tag(MetricSample::new("throughput", mode, rep, "stall_total", Unit::Ms, ms(r.stall_total))));
        out.push(tag(MetricSample::new(
            "throughput",
            mode,
            rep,
            "expiry_cycles",
            Unit::Count,
            r.expiry_cycles as f64,
        )));
    }
    Ok(out)
}

/// Outcome of the mixed trace under one filter placement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementRun {
    pub placement: FilterPlacement,
    pub packet_ins: u64,
    pub lldp_packet_ins: u64,
    /// Records appended across all topics.
    pub appended: u64,
    pub per_topic: BTreeMap<String, u64>,
    pub server_filtered: u64,
    pub controller_filtered: u64,
    pub delivered: u64,
    /// Envelopes handed to the app, in processing order.
    pub processed: Vec<Vec<u8>>,
    pub host_rx: u64,
}

/// The mixed trace: one LLDP sweep from the discovery app, one ARP per
/// host and `filter.pings` seeded random pings. No forwarder runs, so every
/// non-LLDP punt is dropped after publication.
fn filter_trace_once(graph: &TopologyGraph, cfg: &ScenarioConfig, placement: FilterPlacement) -> Result<PlacementRun, HarnessError> {
    let mut tb_cfg = cfg.testbed();
    tb_cfg.mode = PipelineMode::External { placement };
    let mut tb = Testbed::new(graph.clone(), &tb_cfg)?;
    let filter = FilterPredicate::event_types([EventType::Lldp]);
    tb.add_app(Box::new(TopologyDiscoveryApp::with_filter(cfg.apps.sweep_period, filter)));
    let n = graph.hosts.len();
    for h in 0..n {
        let target = graph.hosts[(h + 1) % n].ip;
        tb.arp_request(h, target, SimTime::from_millis(1))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let window = cfg.filter.window.as_nanos().max(1);
    for _ in 0..cfg.filter.pings {
        let a = rng.gen_range(0..n);
        let b = (a + rng.gen_range(1..n.max(2))) % n;
        let at = SimTime::from_nanos(rng.gen_range(0..window));
        tb.ping(a, graph.hosts[b].ip, 1, cfg.ping.interval, cfg.ping.timeout, at)?;
    }
    // Long enough for the last ping to time out; short of a second sweep
    // with the default period.
    tb.run_until(cfg.filter.window + cfg.ping.timeout + SimTime::from_millis(10))?;

    let trace = tb.trace();
    let broker = tb.controller().broker();
    let stats = tb.controller().stats();
    let runner = &tb.apps()[0];
    Ok(PlacementRun {
        placement,
        packet_ins: stats.packet_ins,
        lldp_packet_ins: trace.count(|e| matches!(e, TraceEvent::PacketIn { event_type: EventType::Lldp, .. })) as u64,
        appended: broker.total_records(),
        per_topic: broker.topics().map(|t| (t.name().to_string(), t.len())).collect(),
        server_filtered: stats.server_filtered,
        controller_filtered: stats.controller_filtered,
        delivered: runner.stats().delivered,
        processed: runner.processed().to_vec(),
        host_rx: trace.count(|e| matches!(e, TraceEvent::HostRx { kind: FrameKind::Lldp, .. })) as u64,
    })
}

/// The same trace under each placement, in [`FilterPlacement::ALL`] order.
pub fn filter_compare_runs(cfg: &ScenarioConfig) -> Result<Vec<PlacementRun>, HarnessError> {
    require(cfg, ScenarioKind::FilterCompare)?;
    let graph = build(cfg)?;
    exec::map_with(cfg.parallel, FilterPlacement::ALL.to_vec(), |p| filter_trace_once(&graph, cfg, p))
        .into_iter()
        .collect()
}

pub fn run_filter_compare(cfg: &ScenarioConfig) -> Result<Vec<MetricSample>, HarnessError> {
    let mut out = Vec::new();
    for r in filter_compare_runs(cfg)? {
        let mode = format!("external:{}", r.placement.name());
        let rows = [
            ("packet_ins", r.packet_ins),
            ("lldp_packet_ins", r.lldp_packet_ins),
            ("appended", r.appended),
            ("server_filtered", r.server_filtered),
            ("controller_filtered", r.controller_filtered),
            ("delivered", r.delivered),
            ("processed", r.processed.len() as u64),
        ];
        for (metric, v) in rows {
            out.push(
                MetricSample::new("filter", &mode, 0, metric, Unit::Count, v as f64)
                    .with("pings", cfg.filter.pings)
                    .with("predicate", "lldp")
                    .with("seed", cfg.seed),
            );
        }
    }
    Ok(out)
}

pub fn run(cfg: &ScenarioConfig) -> Result<Vec<MetricSample>, HarnessError> {
    match cfg.scenario {
        ScenarioKind::Ping => run_scenario1(cfg),
        ScenarioKind::Throughput => run_scenario2(cfg),
        ScenarioKind::FilterCompare => run_filter_compare(cfg),
    }
}

/// Runs the ping scenario in external mode with `cfg`'s latency model and
/// returns that model if the mean RTT lands inside `[low, high]` ms.
pub fn calibrate(cfg: &ScenarioConfig, (low, high): (f64, f64)) -> Result<NbLatencyModel, HarnessError> {
    if !(low.is_finite() && high.is_finite() && low < high) {
        return Err(HarnessError::InvalidBand { low, high });
    }
    let mut c = cfg.clone().with_mode(super::ModeKind::External);
    c.scenario = ScenarioKind::Ping;
    let samples = run_scenario1(&c)?;
    let rtts: Vec<f64> = samples.iter().filter(|s| s.metric == "rtt").map(|s| s.value).collect();
    let mean_ms = if rtts.len() == samples.len() && !rtts.is_empty() {
        rtts.iter().sum::<f64>() / rtts.len() as f64
    } else {
        f64::INFINITY
    };
    if (low..=high).contains(&mean_ms) {
        Ok(c.latency)
    } else {
        Err(HarnessError::CalibrationOutOfBand { mean_ms, low, high })
    }
}
