// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

//! Sequential against data-parallel execution of independent repetitions.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use exopipe::harness::{scenario1_runs, scenario2_reports, ModeKind, ScenarioConfig, ScenarioKind};

fn ping(c: &mut Criterion) {
    let mut g = c.benchmark_group("ping_100_reps");
    g.sample_size(10);
    for parallel in [false, true] {
        let cfg = ScenarioConfig {
            scenario: ScenarioKind::Ping,
            mode: ModeKind::External,
            repetitions: 100,
            parallel,
            ..ScenarioConfig::default()
        };
        let label = if parallel { "parallel" } else { "sequential" };
        g.bench_with_input(BenchmarkId::from_parameter(label), &cfg, |b, cfg| {
            b.iter(|| scenario1_runs(cfg).unwrap())
        });
    }
    g.finish();
}

fn throughput(c: &mut Criterion) {
    let mut g = c.benchmark_group("throughput_sweep");
    g.sample_size(10);
    for parallel in [false, true] {
        let cfg = ScenarioConfig {
            scenario: ScenarioKind::Throughput,
            mode: ModeKind::External,
            parallel,
            ..ScenarioConfig::default()
        };
        let label = if parallel { "parallel" } else { "sequential" };
        g.bench_with_input(BenchmarkId::from_parameter(label), &cfg, |b, cfg| {
            b.iter(|| scenario2_reports(cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, ping, throughput);
criterion_main!(benches);
