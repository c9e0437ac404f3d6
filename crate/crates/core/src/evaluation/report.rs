//! Multi-system comparison tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Bucket, MetricsSummary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRow {
    pub system: String,
    #[serde(flatten)]
    pub metrics: MetricsSummary,
}

/// Rows ordered by F1 (descending), then system name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<SystemRow>,
}

impl Report {
    pub fn new(mut rows: Vec<SystemRow>) -> Self {
        rows.sort_by(|a, b| {
            b.metrics
                .f1
                .total_cmp(&a.metrics.f1)
                .then_with(|| a.system.cmp(&b.system))
        });
        Report { rows }
    }

    fn buckets(&self) -> Vec<Bucket> {
        let set: BTreeSet<Bucket> = self
            .rows
            .iter()
            .flat_map(|r| r.metrics.acc.keys().copied())
            .collect();
        set.into_iter().collect()
    }

    /// Full-precision CSV; a missing accuracy is an empty field.
    pub fn to_csv(&self) -> Result<String> {
        let buckets = self.buckets();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["system".to_string(), "precision".into(), "recall".into(), "f1".into()];
        header.extend(buckets.iter().map(|b| format!("acc@{b}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let m = &r.metrics;
            let mut rec = vec![
                r.system.clone(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
            ];
            rec.extend(
                buckets
                    .iter()
                    .map(|b| m.acc.get(b).map(f64::to_string).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.clone();
        let bad = |line: usize, m: String| Error::Parse { line, message: m };
        if header.len() < 4 || &header[0] != "system" {
            return Err(bad(1, "expected `system,precision,recall,f1,...`".into()));
        }
        let buckets: Vec<Bucket> = header
            .iter()
            .skip(4)
            .map(|h| {
                h.strip_prefix("acc@")
                    .and_then(Bucket::parse)
                    .ok_or_else(|| bad(1, format!("bad column `{h}`")))
            })
            .collect::<Result<_>>()?;
        let mut rows = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(line, e.to_string()));
            let mut acc = BTreeMap::new();
            for (b, v) in buckets.iter().zip(rec.iter().skip(4)) {
                if !v.is_empty() {
                    acc.insert(*b, num(v)?);
                }
            }
            rows.push(SystemRow {
                system: rec[0].to_string(),
                metrics: MetricsSummary {
                    precision: num(&rec[1])?,
                    recall: num(&rec[2])?,
                    f1: num(&rec[3])?,
                    acc,
                },
            });
        }
        Ok(Report::new(rows))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fixed-width table with percentages to two decimals.
    pub fn to_table(&self) -> String {
        let buckets = self.buckets();
        let width = self.rows.iter().map(|r| r.system.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = write!(out, "{:<width$} {:>7} {:>7} {:>7}", "system", "P", "R", "F1");
        for b in &buckets {
            let _ = write!(out, " {:>7}", format!("Acc@{b}"));
        }
        out.push('\n');
        for r in &self.rows {
            let m = &r.metrics;
            let _ = write!(
                out,
                "{:<width$} {:>7.2} {:>7.2} {:>7.2}",
                r.system,
                100.0 * m.precision,
                100.0 * m.recall,
                100.0 * m.f1
            );
            for b in &buckets {
                match m.acc.get(b) {
                    Some(v) => {
                        let _ = write!(out, " {:>7.2}", 100.0 * v);
                    }
                    None => {
                        let _ = write!(out, " {:>7}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
