// SPDX-License-Identifier: Apache-2.0
// Copyright The exopipe Authors

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use super::HarnessError;

pub const CSV_HEADER: &str = "scenario,mode,repetition,metric,unit,value,meta";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Unit {
    Ms,
    BitsPerSec,
    Count,
}

impl Unit {
    pub fn name(self) -> &'static str {
        match self {
            Unit::Ms => "ms",
            Unit::BitsPerSec => "bits/sec",
            Unit::Count => "count",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One measurement. `value` is finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample {
    pub scenario: String,
    pub mode: String,
    pub repetition: u32,
    pub metric: String,
    pub unit: Unit,
    pub value: f64,
    pub meta: BTreeMap<String, String>,
}

impl MetricSample {
    pub fn new(scenario: &str, mode: &str, repetition: u32, metric: &str, unit: Unit, value: f64) -> Self {
        assert!(value.is_finite() && value >= 0.0, "{metric} = {value}");
        MetricSample {
            scenario: scenario.into(),
            mode: mode.into(),
            repetition,
            metric: metric.into(),
            unit,
            value,
            meta: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.into(), value.to_string());
        self
    }

    /// `k=v` pairs in key order, each terminated by `;`.
    pub fn meta_string(&self) -> String {
        self.meta.iter().map(|(k, v)| format!("{k}={v};")).collect()
    }
}

/// Writes the CSV form; rows keep insertion order and values carry three
/// decimals so output is byte-stable.
pub fn write_csv<W: Write>(samples: &[MetricSample], out: W) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for s in samples {
        w.write_record([
            s.scenario.as_str(),
            s.mode.as_str(),
            &s.repetition.to_string(),
            s.metric.as_str(),
            s.unit.name(),
            &format!("{:.3}", s.value),
            &s.meta_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(samples: &[MetricSample], path: &Path) -> Result<(), HarnessError> {
    let f = std::fs::File::create(path)?;
    write_csv(samples, std::io::BufWriter::new(f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub scenario: String,
    pub mode: String,
    pub metric: String,
    pub unit: Unit,
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub p50: f64,
    pub p99: f64,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} [{}] n={} mean={:.3} min={:.3} max={:.3} p50={:.3} p99={:.3}",
            self.scenario, self.mode, self.metric, self.unit, self.n, self.mean, self.min, self.max, self.p50, self.p99
        )
    }
}

/// Nearest-rank percentile of a sorted, non-empty slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// One summary per (scenario, mode, metric, unit), in first-seen order.
pub fn summarize(samples: &[MetricSample]) -> Vec<Summary> {
    let mut groups: Vec<((&str, &str, &str, Unit), Vec<f64>)> = Vec::new();
    for s in samples {
        let key = (s.scenario.as_str(), s.mode.as_str(), s.metric.as_str(), s.unit);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(s.value),
            None => groups.push((key, vec![s.value])),
        }
    }
    groups
        .into_iter()
        .map(|((scenario, mode, metric, unit), mut v)| {
            v.sort_by(f64::total_cmp);
            Summary {
                scenario: scenario.into(),
                mode: mode.into(),
                metric: metric.into(),
                unit,
                n: v.len(),
                mean: v.iter().sum::<f64>() / v.len() as f64,
                min: v[0],
                max: v[v.len() - 1],
                p50: percentile(&v, 50.0),
                p99: percentile(&v, 99.0),
            }
        })
        .collect()
}
