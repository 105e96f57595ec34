// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Runs each acceptance criterion at its stated tolerance and prints one
//! PASS/FAIL line per criterion. Exits non-zero if any fails.

mod support;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use exopipe::broker::{Broker, TopicPartition};
use exopipe::controller::{FilterPlacement, NbLatencyModel, PipelineMode};
use exopipe::extapps::{
    AppConfig, DiscoveredTopology, InternalReactiveForwarding, ReactiveForwardingApp, TopologyDiscoveryApp,
};
use exopipe::fabric::{build_fat_tree, FlowRemoved, LookupResult, SwitchState};
use exopipe::harness::{
    self, filter_compare_runs, scenario1_runs, scenario2_reports, ModeKind, ScenarioConfig, ScenarioKind,
};
use exopipe::netproto::{
    decode_envelope, decode_frame, decode_of, ArpPacket, FlowEntry, FlowModOp, FlowRemovedReason, IcmpEcho, LldpFrame,
    MacAddr, MatchFields, PacketEventEnvelope,
};
use exopipe::testbed::{Testbed, TestbedConfig};
use exopipe::time::SimTime;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    )
}

fn prop<S: Strategy>(name: &str, cases: u32, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&s, f).map_err(|e| format!("{name}: {e}"))
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    if took < limit {
        Ok(took)
    } else {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    }
}

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

const CODEC_CASES: u32 = 1000;

fn c1_codec() -> Outcome {
    use support::*;
    let t = Instant::now();
    prop("ethernet", CODEC_CASES, frame(), |f| {
        prop_assert_eq!(decode_frame(&f.encode().unwrap()).unwrap(), f);
        Ok(())
    })?;
    prop("arp", CODEC_CASES, arp(), |a| {
        prop_assert_eq!(ArpPacket::decode(&a.encode()).unwrap(), a);
        Ok(())
    })?;
    prop("lldp", CODEC_CASES, lldp(), |l| {
        prop_assert_eq!(LldpFrame::decode(&l.encode()).unwrap(), l);
        Ok(())
    })?;
    prop("icmp", CODEC_CASES, (icmp(), mac(), mac()), |(e, a, b)| {
        let f = decode_frame(&e.to_frame(a, b).encode().unwrap()).unwrap();
        prop_assert_eq!(IcmpEcho::from_frame(&f).unwrap(), e);
        Ok(())
    })?;
    let variants: [(&str, BoxedStrategy<_>); 5] = [
        ("packet-in", packet_in().boxed()),
        ("packet-out", packet_out().boxed()),
        ("flow-mod", flow_mod().boxed()),
        ("flow-removed", flow_removed().boxed()),
        ("echo", echo().boxed()),
    ];
    for (name, s) in variants {
        prop(name, CODEC_CASES, s, |m| {
            prop_assert_eq!(decode_of(&m.encode().unwrap()).unwrap(), m);
            Ok(())
        })?;
    }
    prop("envelope", CODEC_CASES, envelope(), |e: PacketEventEnvelope| {
        prop_assert_eq!(decode_envelope(&e.encode()).unwrap(), e);
        Ok(())
    })?;
    let took = within(Duration::from_secs(5), t)?;
    Ok(format!("10 codecs x {CODEC_CASES} cases, {took:.2?}"))
}

fn c2_broker() -> Outcome {
    let ms = SimTime::from_millis;
    prop(
        "ordering",
        200,
        (proptest::collection::vec(0u8..32, 1..300), 1u32..8, 1usize..20),
        |(keys, parts, batch)| {
            let mut b = Broker::new(SimTime::ZERO);
            b.create_topic("t", parts).unwrap();
            b.subscribe("g", "c", "t").unwrap();
            for (i, k) in keys.iter().enumerate() {
                b.publish("t", &[*k], &(i as u32).to_be_bytes(), ms(i as u64)).unwrap();
            }
            let mut got = Vec::new();
            loop {
                let r = b.poll("g", "c", batch, ms(10_000)).unwrap();
                if r.is_empty() {
                    break;
                }
                got.extend(r);
            }
            prop_assert_eq!(got.len(), keys.len());
            for p in 0..parts {
                let seq: Vec<u32> = got
                    .iter()
                    .filter(|r| r.partition == p)
                    .map(|r| u32::from_be_bytes(r.value[..4].try_into().unwrap()))
                    .collect();
                prop_assert!(seq.windows(2).all(|w| w[0] < w[1]));
            }
            Ok(())
        },
    )?;
    prop("redelivery", 200, (1u64..60, any::<prop::sample::Index>(), any::<prop::sample::Index>()), |(n, read, commit)| {
        let mut b = Broker::new(SimTime::ZERO);
        b.create_topic("t", 1).unwrap();
        b.subscribe("g", "c", "t").unwrap();
        for i in 0..n {
            b.publish("t", b"k", &i.to_be_bytes(), ms(0)).unwrap();
        }
        let read = read.index(n as usize + 1);
        let got = b.poll("g", "c", read, ms(0)).unwrap();
        let committed = commit.index(got.len() + 1) as u64;
        let tp = TopicPartition::new("t", 0);
        b.commit("g", &tp, committed).unwrap();
        b.restart_consumer("g", "c").unwrap();
        let again = b.poll("g", "c", usize::MAX, ms(0)).unwrap();
        // Everything past the commit comes back, including records already
        // read once.
        let offs: Vec<u64> = again.iter().map(|r| r.offset).collect();
        prop_assert_eq!(offs, (committed..n).collect::<Vec<_>>());
        Ok(())
    })?;
    let ops = proptest::collection::vec((any::<bool>(), 0usize..6), 1..40);
    prop("rebalance", 150, (1u32..10, ops), |(parts, ops)| {
        let mut b = Broker::new(SimTime::ZERO);
        b.create_topic("t", parts).unwrap();
        let mut live = BTreeSet::new();
        for (join, who) in ops {
            let id = format!("c{who}");
            if join {
                b.subscribe("g", &id, "t").unwrap();
                live.insert(id);
            } else if live.remove(&id) {
                b.unsubscribe("g", &id).unwrap();
            }
            if live.is_empty() {
                continue;
            }
            let g = b.group("g").unwrap();
            let mut seen = BTreeSet::new();
            for m in &live {
                for tp in g.assignment_of(m) {
                    prop_assert!(seen.insert(tp), "partition assigned twice");
                }
            }
            prop_assert_eq!(seen.len(), parts as usize);
        }
        Ok(())
    })?;
    Ok("ordering 200, redelivery 200, rebalance 150 sequences".into())
}

fn c3_expiry() -> Outcome {
    let t0 = SimTime::from_millis(3_250);
    let hard = SimTime::from_secs(10);
    let frame = exopipe::netproto::EthernetFrame::new(MacAddr([0, 0, 0, 0, 0, 2]), MacAddr([0, 0, 0, 0, 0, 1]), 0x0800, vec![]);
    let m = MatchFields {
        eth_dst: Some(frame.dst),
        ..Default::default()
    };
    let mut e = FlowEntry::new(100, m, vec![exopipe::netproto::Action::Output(2)]).with_timeouts(hard, SimTime::ZERO);
    e.entry_id = 1;
    let mut lazy = SwitchState::new(1);
    lazy.apply_flow_mod(1, e.clone(), FlowModOp::Add, t0).map_err(|e| e.to_string())?;
    let mut eager = lazy.clone();
    let before = t0 + hard - SimTime::from_nanos(1);
    check(matches!(lazy.lookup(&frame, 1, before), LookupResult::Hit(_)), || "miss at t+10s-1ns".into())?;
    check(eager.expire_entries(before).is_empty(), || "eager removal before deadline".into())?;
    check(matches!(lazy.lookup(&frame, 1, t0 + hard), LookupResult::Miss), || "hit at t+10s".into())?;
    let reasons = |v: Vec<FlowRemoved>| v.into_iter().map(|r| r.reason).collect::<Vec<_>>();
    let want = vec![FlowRemovedReason::HardTimeout];
    let got = reasons(lazy.take_removed());
    check(got == want, || format!("lazy removal {got:?}"))?;
    let got = reasons(eager.expire_entries(t0 + hard));
    check(got == want, || format!("eager removal {got:?}"))?;
    check(eager.next_deadline().is_none() && lazy.is_empty(), || "entry left behind".into())?;
    Ok("present at t+10s-1ns, absent at t+10s, HardTimeout (lazy and eager)".into())
}

fn c4_discovery() -> Outcome {
    let t = Instant::now();
    let mut parts = Vec::new();
    for (k, sites) in [(2, 1), (4, 1), (2, 5)] {
        let g = build_fat_tree(k, sites).map_err(|e| e.to_string())?;
        let cfg = TestbedConfig {
            mode: PipelineMode::EXTERNAL,
            ..TestbedConfig::default()
        };
        let mut tb = Testbed::new(g.clone(), &cfg).map_err(|e| e.to_string())?;
        tb.add_app(Box::new(TopologyDiscoveryApp::new(SimTime::ZERO)));
        let n = g.hosts.len();
        for h in 0..n {
            tb.arp_request(h, g.hosts[(h + 1) % n].ip, SimTime::from_millis(50)).map_err(|e| e.to_string())?;
        }
        tb.run().map_err(|e| e.to_string())?;
        let app: &TopologyDiscoveryApp = tb.app().ok_or("topology app missing")?;
        let topo = app.topology();
        check(app.sweeps() == 1, || format!("{} sweeps", app.sweeps()))?;
        check(topo.links == g.switch_link_set(), || {
            format!("k={k} sites={sites}: {} links found, {} expected", topo.links.len(), g.switch_link_set().len())
        })?;
        check(topo.host_locations == DiscoveredTopology::ground_truth_hosts(&g), || {
            format!("k={k} sites={sites}: host locations differ")
        })?;
        parts.push(format!("k={k}/sites={sites} {} links {} hosts", topo.links.len(), n));
    }
    let took = within(Duration::from_secs(10), t)?;
    Ok(format!("{}; {took:.2?}", parts.join(", ")))
}

fn c5_rule_equivalence() -> Outcome {
    let mut sets = Vec::new();
    for mode in [PipelineMode::Internal, PipelineMode::EXTERNAL] {
        let g = build_fat_tree(4, 1).map_err(|e| e.to_string())?;
        let cfg = TestbedConfig {
            mode,
            ..TestbedConfig::default()
        };
        let mut tb = Testbed::new(g.clone(), &cfg).map_err(|e| e.to_string())?;
        let topo = tb.ground_truth();
        let app = AppConfig::default();
        if mode.is_external() {
            tb.add_app(Box::new(ReactiveForwardingApp::new(app, topo)));
        } else {
            tb.add_internal_processor(Box::new(InternalReactiveForwarding::new(app, topo)))
                .map_err(|e| e.to_string())?;
        }
        // 100 pings 50 ms apart: each finishes before the next starts and
        // all fit inside one hard timeout.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = g.hosts.len();
        for i in 0..100u64 {
            let a = rng.gen_range(0..n);
            let b = (a + rng.gen_range(1..n)) % n;
            let at = SimTime::from_millis(50 * i);
            tb.ping(a, g.hosts[b].ip, 1, SimTime::from_secs(1), SimTime::from_secs(1), at)
                .map_err(|e| e.to_string())?;
        }
        tb.run_until(SimTime::from_secs(6)).map_err(|e| e.to_string())?;
        sets.push(tb.trace().rule_multiset());
    }
    check(!sets[0].is_empty(), || "no rules installed".into())?;
    check(sets[0] == sets[1], || format!("internal {} rules, external {} rules", sets[0].len(), sets[1].len()))?;
    Ok(format!("{} identical rules from 100 pings", sets[0].len()))
}

fn c6_scenario1() -> Outcome {
    let t = Instant::now();
    let base = ScenarioConfig {
        scenario: ScenarioKind::Ping,
        repetitions: 500,
        parallel: true,
        ..ScenarioConfig::default()
    };
    let int = scenario1_runs(&base.clone().with_mode(ModeKind::Internal)).map_err(|e| e.to_string())?;
    let ext = scenario1_runs(&base.clone().with_mode(ModeKind::External)).map_err(|e| e.to_string())?;
    check(int.len() == 500 && ext.len() == 500, || "missing repetitions".into())?;
    let lat = base.latency;
    let per_punt = base.broker.delay + lat.rpc_packet_out_delay - lat.internal_processing_delay;
    let mut sum = 0.0;
    for (i, e) in int.iter().zip(&ext) {
        let (Some(ri), Some(re)) = (i.rtt, e.rtt) else {
            return Err(format!("repetition {} lost its ping", i.repetition));
        };
        check(i.trace_rtt == i.rtt && e.trace_rtt == e.rtt, || "trace RTT differs from sample".into())?;
        check(i.punts == e.punts, || format!("punts {} vs {}", i.punts, e.punts))?;
        check(re - ri == per_punt * i.punts as u64, || {
            format!("gap {} != {} x {}", re - ri, per_punt, i.punts)
        })?;
        sum += re.as_millis_f64();
    }
    let mean = sum / ext.len() as f64;
    check((24.0..=35.0).contains(&mean), || format!("external mean {mean:.3} ms outside [24, 35]"))?;
    let took = within(Duration::from_secs(30), t)?;
    Ok(format!(
        "external mean {mean:.3} ms in [24, 35]; gap = {} punts x {:.3} ms exactly; {took:.2?}",
        int[0].punts,
        per_punt.as_millis_f64()
    ))
}

fn c7_scenario2() -> Outcome {
    let t = Instant::now();
    let base = ScenarioConfig {
        scenario: ScenarioKind::Throughput,
        parallel: true,
        ..ScenarioConfig::default()
    };
    let run = |cfg: &ScenarioConfig| scenario2_reports(cfg).map_err(|e| e.to_string());
    let int = run(&base.clone().with_mode(ModeKind::Internal))?;
    let ext = run(&base.clone().with_mode(ModeKind::External))?;
    for (i, e) in int.iter().zip(&ext) {
        check(i.throughput_bps >= e.throughput_bps, || {
            format!("n={}: internal {} < external {}", i.n_conns, i.throughput_bps, e.throughput_bps)
        })?;
        check(i.expiry_cycles == 14 && e.expiry_cycles == 14, || {
            format!("n={}: {} / {} expiry cycles", i.n_conns, i.expiry_cycles, e.expiry_cycles)
        })?;
    }
    // Degenerate model: no REST or broker cost, packet return as fast as the
    // internal path.
    let mut flat = base.clone();
    let i_delay = flat.latency.internal_processing_delay;
    flat.latency = NbLatencyModel {
        rest_install_delay: SimTime::ZERO,
        rpc_packet_out_delay: i_delay,
        internal_processing_delay: i_delay,
    };
    flat.broker.delay = SimTime::ZERO;
    let fi = run(&flat.clone().with_mode(ModeKind::Internal))?;
    let fe = run(&flat.with_mode(ModeKind::External))?;
    for (i, e) in fi.iter().zip(&fe) {
        check(i.throughput_bps == e.throughput_bps, || {
            format!("n={}: degenerate gap {} bit/s", i.n_conns, i.throughput_bps - e.throughput_bps)
        })?;
    }
    let took = within(Duration::from_secs(60), t)?;
    let gap = int[0].throughput_bps - ext[0].throughput_bps;
    Ok(format!(
        "internal >= external for n in {:?} (gap {gap:.0} bit/s), 14 cycles, degenerate gap 0; {took:.2?}",
        base.n_conns
    ))
}

fn c8_filtering() -> Outcome {
    let cfg = ScenarioConfig {
        scenario: ScenarioKind::FilterCompare,
        seed: 11,
        ..ScenarioConfig::default()
    };
    let runs = filter_compare_runs(&cfg).map_err(|e| e.to_string())?;
    let find = |p| runs.iter().find(|r| r.placement == p).ok_or("placement missing");
    let client = find(FilterPlacement::ClientSide)?;
    let server = find(FilterPlacement::ServerSide)?;
    let ctl = find(FilterPlacement::ControllerSide)?;
    let multiset = |v: &Vec<Vec<u8>>| {
        let mut v = v.clone();
        v.sort();
        v
    };
    check(!client.processed.is_empty(), || "nothing processed".into())?;
    check(multiset(&client.processed) == multiset(&server.processed), || "client vs server differ".into())?;
    check(multiset(&client.processed) == multiset(&ctl.processed), || "client vs controller differ".into())?;
    check(client.appended >= server.appended, || {
        format!("appended client {} < server {}", client.appended, server.appended)
    })?;
    check(ctl.per_topic.get("packets.lldp") == Some(&ctl.lldp_packet_ins), || {
        "packets.lldp count != LLDP PACKET_INs".into()
    })?;
    Ok(format!(
        "{} events processed under each placement; appended client {} >= server {} (controller {})",
        client.processed.len(),
        client.appended,
        server.appended,
        ctl.appended
    ))
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = Vec::new();
    for kind in [ScenarioKind::Ping, ScenarioKind::Throughput, ScenarioKind::FilterCompare] {
        for mode in [ModeKind::Internal, ModeKind::External] {
            let cfg = ScenarioConfig {
                scenario: kind,
                mode,
                seed: 2024,
                repetitions: 50,
                ..ScenarioConfig::default()
            };
            let mut bytes = Vec::new();
            for (i, parallel) in [false, true, false].into_iter().enumerate() {
                let c = ScenarioConfig { parallel, ..cfg.clone() };
                let path = dir.path().join(format!("{}-{}-{i}.csv", kind.name(), c.pipeline_mode().name()));
                let samples = harness::run(&c).map_err(|e| e.to_string())?;
                harness::emit_csv(&samples, &path).map_err(|e| e.to_string())?;
                bytes.push(std::fs::read(&path).map_err(|e| e.to_string())?);
            }
            check(bytes.windows(2).all(|w| w[0] == w[1]), || {
                format!("{} {:?} output differs between runs", kind.name(), mode)
            })?;
            checked.push(format!("{}/{}", kind.name(), cfg.pipeline_mode().name()));
        }
    }
    Ok(format!("byte-identical CSV across 3 runs for {}", checked.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("codec round-trips", c1_codec),
        ("broker ordering, redelivery, rebalance", c2_broker),
        ("flow-expiry exactness", c3_expiry),
        ("topology-discovery oracle", c4_discovery),
        ("rule-set equivalence", c5_rule_equivalence),
        ("scenario 1 RTT", c6_scenario1),
        ("scenario 2 throughput ordering", c7_scenario2),
        ("filtering equivalence", c8_filtering),
        ("determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let res = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match res {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
