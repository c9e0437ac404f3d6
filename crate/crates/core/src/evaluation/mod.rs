//! Micro-averaged precision, recall and F1, accuracy by answer distance, and
//! comparison reports.

mod report;

pub use report::{Report, SystemRow};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dialogue::Dialogue;
use crate::error::{Error, Result};
use crate::matcher::MatchResult;

/// Non-negative fraction kept as integer counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: usize,
    pub den: usize,
}

impl Ratio {
    pub fn new(num: usize, den: usize) -> Self {
        Ratio { num, den }
    }

    /// The value, or 0 when the denominator is 0.
    pub fn value(self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }

    /// Lowest terms; `0/0` stays `0/0`.
    pub fn reduced(self) -> Self {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        match gcd(self.num, self.den) {
            0 => self,
            g => Ratio::new(self.num / g, self.den / g),
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// True positive, false positive and false negative counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> Ratio {
        Ratio::new(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Ratio {
        Ratio::new(self.tp, self.tp + self.fn_)
    }

    /// `2PR / (P + R)` written over counts: `2tp / (2tp + fp + fn)`.
    pub fn f1(&self) -> Ratio {
        if self.tp == 0 {
            return Ratio::new(0, 0);
        }
        Ratio::new(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    fn add(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Distance group used by accuracy-at-distance. Serialized as its label
/// (`"3"`, `">=5"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    Exact(usize),
    AtLeast(usize),
}

impl Bucket {
    pub fn contains(self, distance: usize) -> bool {
        match self {
            Bucket::Exact(d) => distance == d,
            Bucket::AtLeast(d) => distance >= d,
        }
    }

    pub fn label(self) -> String {
        match self {
            Bucket::Exact(d) => d.to_string(),
            Bucket::AtLeast(d) => format!(">={d}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.strip_prefix(">=") {
            Some(rest) => rest.parse().ok().map(Bucket::AtLeast),
            None => s.parse().ok().map(Bucket::Exact),
        }
    }
}

impl Serialize for Bucket {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Bucket {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Bucket::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad bucket `{s}`")))
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// How gold distances are grouped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// `1, 2, 3, 4, >=5`
    #[default]
    Bucketed,
    /// One group per distance.
    Exact,
}

impl DistanceMode {
    pub fn bucket(self, distance: usize) -> Bucket {
        match self {
            DistanceMode::Bucketed if distance >= 5 => Bucket::AtLeast(5),
            _ => Bucket::Exact(distance),
        }
    }
}

/// Counts for one dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueCounts {
    pub id: String,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Accuracy per non-empty distance group.
    pub acc_by_distance: BTreeMap<Bucket, Ratio>,
    pub per_dialogue: Vec<DialogueCounts>,
}

impl MetricsReport {
    pub fn acc(&self, bucket: Bucket) -> Option<f64> {
        self.acc_by_distance.get(&bucket).map(|r| r.value())
    }
}

fn index_predictions<'a>(
    predictions: &'a [MatchResult],
    gold: &[Dialogue],
) -> Result<HashMap<&'a str, BTreeSet<(usize, usize)>>> {
    let known: BTreeSet<&str> = gold.iter().map(|d| d.id.as_str()).collect();
    let mut out: HashMap<&str, BTreeSet<(usize, usize)>> = HashMap::new();
    for p in predictions {
        if !known.contains(p.dialogue_id.as_str()) {
            return Err(Error::UnknownDialogue(p.dialogue_id.clone()));
        }
        out.entry(p.dialogue_id.as_str())
            .or_default()
            .extend(p.pairs.iter().copied());
    }
    Ok(out)
}

/// Pools true/false positives and false negatives over all dialogues.
/// Dialogues without a prediction line count as empty predictions.
pub fn micro_prf(predictions: &[MatchResult], gold: &[Dialogue]) -> Result<MetricsReport> {
    micro_prf_with(predictions, gold, DistanceMode::Bucketed)
}

pub fn micro_prf_with(
    predictions: &[MatchResult],
    gold: &[Dialogue],
    mode: DistanceMode,
) -> Result<MetricsReport> {
    let pred = index_predictions(predictions, gold)?;
    let empty = BTreeSet::new();
    let mut total = Counts::default();
    let mut per_dialogue = Vec::with_capacity(gold.len());
    for d in gold {
        let p = pred.get(d.id.as_str()).unwrap_or(&empty);
        let tp = p.intersection(&d.gold_pairs).count();
        let c = Counts {
            tp,
            fp: p.len() - tp,
            fn_: d.gold_pairs.len() - tp,
        };
        total.add(c);
        per_dialogue.push(DialogueCounts {
            id: d.id.clone(),
            counts: c,
        });
    }
    Ok(MetricsReport {
        counts: total,
        precision: total.precision().value(),
        recall: total.recall().value(),
        f1: total.f1().value(),
        acc_by_distance: acc_at_distance_with(predictions, gold, mode)?,
        per_dialogue,
    })
}

/// Share of gold pairs recovered, per bucketed distance. Buckets with no
/// gold pair are absent.
pub fn acc_at_distance(
    predictions: &[MatchResult],
    gold: &[Dialogue],
) -> Result<BTreeMap<Bucket, Ratio>> {
    acc_at_distance_with(predictions, gold, DistanceMode::Bucketed)
}

pub fn acc_at_distance_with(
    predictions: &[MatchResult],
    gold: &[Dialogue],
    mode: DistanceMode,
) -> Result<BTreeMap<Bucket, Ratio>> {
    let pred = index_predictions(predictions, gold)?;
    let mut out: BTreeMap<Bucket, Ratio> = BTreeMap::new();
    for d in gold {
        let p = pred.get(d.id.as_str());
        for &(q, a) in &d.gold_pairs {
            let r = out.entry(mode.bucket(a - q)).or_insert(Ratio::new(0, 0));
            r.den += 1;
            if p.is_some_and(|p| p.contains(&(q, a))) {
                r.num += 1;
            }
        }
    }
    Ok(out)
}

/// Share of gold pairs at distance `min_distance` or more that were
/// recovered; `None` when there are none.
pub fn acc_at_least(
    predictions: &[MatchResult],
    gold: &[Dialogue],
    min_distance: usize,
) -> Result<Option<Ratio>> {
    let pred = index_predictions(predictions, gold)?;
    let mut r = Ratio::new(0, 0);
    for d in gold {
        for &(q, a) in d.gold_pairs.iter().filter(|(q, a)| a - q >= min_distance) {
            r.den += 1;
            if pred.get(d.id.as_str()).is_some_and(|p| p.contains(&(q, a))) {
                r.num += 1;
            }
        }
    }
    Ok((r.den > 0).then_some(r))
}

/// Mean precision, recall, F1 and accuracies over several runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Accuracy per distance group; a group missing from a run is left out
    /// of that group's mean.
    pub acc: BTreeMap<Bucket, f64>,
}

impl From<&MetricsReport> for MetricsSummary {
    fn from(r: &MetricsReport) -> Self {
        MetricsSummary {
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            acc: r
                .acc_by_distance
                .iter()
                .map(|(b, v)| (*b, v.value()))
                .collect(),
        }
    }
}

impl MetricsSummary {
    /// Arithmetic mean of `runs` in the given order.
    pub fn mean(runs: &[MetricsSummary]) -> MetricsSummary {
        let n = runs.len().max(1) as f64;
        let mean = |f: &dyn Fn(&MetricsSummary) -> f64| runs.iter().map(f).sum::<f64>() / n;
        let mut acc: BTreeMap<Bucket, (f64, usize)> = BTreeMap::new();
        for r in runs {
            for (b, v) in &r.acc {
                let e = acc.entry(*b).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
        MetricsSummary {
            precision: mean(&|r| r.precision),
            recall: mean(&|r| r.recall),
            f1: mean(&|r| r.f1),
            acc: acc.into_iter().map(|(b, (s, k))| (b, s / k as f64)).collect(),
        }
    }
}

#[cfg(test)]
mod tests;
