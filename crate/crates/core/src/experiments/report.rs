use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use crate::fmt_float;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub level: usize,
    pub n: usize,
    pub eps: f64,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub level: usize,
    pub n: usize,
    pub eps: f64,
    pub metric: String,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub count: usize,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub kind: String,
    pub schedule: Schedule,
    pub seeds: Vec<u64>,
    /// Sorted by (level, seed), metrics in insertion order within a task.
    pub records: Vec<Record>,
    /// Per-level annotations such as covering-radius violations.
    pub flags: Vec<(usize, String)>,
    pub warnings: Vec<String>,
}

impl LadderReport {
    pub fn metrics(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for r in &self.records {
            if !seen.contains(&r.metric) {
                seen.push(r.metric.clone());
            }
        }
        seen
    }

    pub fn values(&self, level: usize, metric: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.level == level && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    pub fn median(&self, level: usize, metric: &str) -> Option<f64> {
        let v = self.values(level, metric);
        (!v.is_empty()).then(|| median(&v))
    }

    /// Median per level for `metric`, `None` where the level produced nothing.
    pub fn median_series(&self, metric: &str) -> Vec<Option<f64>> {
        (0..self.schedule.len())
            .map(|k| self.median(k, metric))
            .collect()
    }

    pub fn aggregates(&self) -> Vec<Aggregate> {
        let metrics = self.metrics();
        let position = |m: &str| metrics.iter().position(|x| x == m).unwrap();
        let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for r in &self.records {
            groups
                .entry((r.level, position(&r.metric)))
                .or_default()
                .push(r.value);
        }
        groups
            .into_iter()
            .map(|((level, m), mut v)| {
                v.sort_by(f64::total_cmp);
                let l = &self.schedule.levels[level];
                Aggregate {
                    level,
                    n: l.n,
                    eps: l.eps,
                    metric: metrics[m].clone(),
                    median: quantile(&v, 0.5),
                    q1: quantile(&v, 0.25),
                    q3: quantile(&v, 0.75),
                    count: v.len(),
                }
            })
            .collect()
    }

    /// `#`-prefixed lines: the caller's lines, then the schedule honesty note
    /// and any level flags.
    pub fn header_lines(&self, extra: &[String]) -> Vec<String> {
        let mut lines: Vec<String> = extra.iter().map(|l| format!("# {l}")).collect();
        lines.push(format!("# experiment={}", self.kind));
        lines.push(format!("# {}", self.schedule.honesty_note()));
        for (level, flag) in &self.flags {
            lines.push(format!("# flag level={level}: {flag}"));
        }
        lines
    }

    pub fn write_records_csv<W: Write>(&self, mut out: W, extra: &[String]) -> std::io::Result<()> {
        for line in self.header_lines(extra) {
            writeln!(out, "{line}")?;
        }
        writeln!(out, "level,n,eps,seed,metric,value")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.level,
                r.n,
                fmt_float(r.eps),
                r.seed,
                r.metric,
                fmt_float(r.value)
            )?;
        }
        Ok(())
    }

    pub fn write_aggregate_csv<W: Write>(
        &self,
        mut out: W,
        extra: &[String],
    ) -> std::io::Result<()> {
        for line in self.header_lines(extra) {
            writeln!(out, "{line}")?;
        }
        writeln!(out, "level,n,eps,metric,median,q1,q3")?;
        for a in self.aggregates() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                a.level,
                a.n,
                fmt_float(a.eps),
                a.metric,
                fmt_float(a.median),
                fmt_float(a.q1),
                fmt_float(a.q3)
            )?;
        }
        Ok(())
    }
}
