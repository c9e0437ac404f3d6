//! Train/dev/test splitting and corpus statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dialogue::{build_candidate_pairs, Dialogue};
use crate::evaluation::{Bucket, DistanceMode};

/// Dialogues split 7:1:2.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataSplit {
    pub train: Vec<Dialogue>,
    pub dev: Vec<Dialogue>,
    pub test: Vec<Dialogue>,
}

impl DataSplit {
    pub fn parts(&self) -> [(&'static str, &[Dialogue]); 3] {
        [("train", &self.train), ("dev", &self.dev), ("test", &self.test)]
    }
}

/// Shuffles whole dialogues and cuts them 7:1:2. Test and dev sizes are
/// rounded to the nearest integer; train takes the rest. Each part keeps
/// the input order.
pub fn split_dialogues<R: Rng>(dialogues: Vec<Dialogue>, rng: &mut R) -> DataSplit {
    let n = dialogues.len();
    let n_test = (n as f64 * 0.2).round() as usize;
    let n_dev = ((n as f64 * 0.1).round() as usize).min(n - n_test);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut part = vec![0u8; n];
    for (k, &i) in order.iter().enumerate() {
        part[i] = if k < n_test {
            2
        } else if k < n_test + n_dev {
            1
        } else {
            0
        };
    }
    let mut split = DataSplit::default();
    for (d, p) in dialogues.into_iter().zip(part) {
        match p {
            0 => split.train.push(d),
            1 => split.dev.push(d),
            _ => split.test.push(d),
        }
    }
    split
}

/// Counts describing one part of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub name: String,
    pub dialogues: usize,
    pub turns: usize,
    pub questions: usize,
    /// Gold pairs per distance group `1, 2, 3, 4, >=5`.
    pub gold_by_distance: BTreeMap<Bucket, usize>,
    pub positive_pairs: usize,
    pub negative_pairs: usize,
}

pub fn summarize(name: &str, dialogues: &[Dialogue]) -> SplitSummary {
    let mut gold_by_distance: BTreeMap<Bucket, usize> = (1..=4)
        .map(Bucket::Exact)
        .chain([Bucket::AtLeast(5)])
        .map(|b| (b, 0))
        .collect();
    let (mut pos, mut neg) = (0, 0);
    for d in dialogues {
        for &(q, a) in &d.gold_pairs {
            *gold_by_distance
                .entry(DistanceMode::Bucketed.bucket(a - q))
                .or_default() += 1;
        }
        for p in build_candidate_pairs(d) {
            if p.gold {
                pos += 1;
            } else {
                neg += 1;
            }
        }
    }
    SplitSummary {
        name: name.to_string(),
        dialogues: dialogues.len(),
        turns: dialogues.iter().map(Dialogue::len).sum(),
        questions: dialogues
            .iter()
            .flat_map(|d| &d.turns)
            .filter(|t| t.is_question())
            .count(),
        gold_by_distance,
        positive_pairs: pos,
        negative_pairs: neg,
    }
}

/// Gold pairs by distance per part, then candidate-pair labels per part.
pub fn render_summary(parts: &[SplitSummary]) -> String {
    let mut out = String::new();
    let buckets: Vec<Bucket> = parts
        .first()
        .map(|p| p.gold_by_distance.keys().copied().collect())
        .unwrap_or_default();
    let _ = write!(out, "{:<8} {:>9} {:>7}", "split", "dialogues", "turns");
    for b in &buckets {
        let _ = write!(out, " {:>6}", format!("d={b}"));
    }
    out.push('\n');
    for p in parts {
        let _ = write!(out, "{:<8} {:>9} {:>7}", p.name, p.dialogues, p.turns);
        for b in &buckets {
            let _ = write!(out, " {:>6}", p.gold_by_distance.get(b).copied().unwrap_or(0));
        }
        out.push('\n');
    }
    out.push('\n');
    let _ = writeln!(out, "{:<8} {:>9} {:>9}", "split", "true", "false");
    for p in parts {
        let _ = writeln!(out, "{:<8} {:>9} {:>9}", p.name, p.positive_pairs, p.negative_pairs);
    }
    out
}
