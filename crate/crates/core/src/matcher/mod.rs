//! Turning pair scores into matches, plus the rule-based and distance-only
//! baselines.

mod distance;
mod gd;

pub use distance::{DistanceBaseline, DistanceBaselineConfig};
pub use gd::{baseline_gd, gd_claims, GdRule};

use serde::{Deserialize, Serialize};

use crate::dialogue::Dialogue;

/// Predicted pairs of one dialogue. This is also the line format of a
/// predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    #[serde(rename = "id")]
    pub dialogue_id: String,
    /// Sorted `(question, answer)` pairs.
    pub pairs: Vec<(usize, usize)>,
    /// Probabilities aligned with `pairs`; absent for rule-based systems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

impl MatchResult {
    pub fn new(dialogue_id: impl Into<String>, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        MatchResult {
            dialogue_id: dialogue_id.into(),
            pairs,
            probs: None,
        }
    }
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Links every non-question to its highest-scoring earlier question when
/// that probability is strictly above `threshold`. Equal scores go to the
/// nearest question. `score(q, nq)` is called once per candidate pair.
pub fn greedy_match_with<F>(d: &Dialogue, threshold: f64, mut score: F) -> MatchResult
where
    F: FnMut(usize, usize) -> f64,
{
    let mut pairs = Vec::new();
    let mut probs = Vec::new();
    for nq in 0..d.len() {
        let mut best: Option<(usize, f64)> = None;
        for q in 0..nq {
            if !d.is_candidate(q, nq) {
                continue;
            }
            let p = score(q, nq);
            if best.is_none_or(|(_, b)| p >= b) {
                best = Some((q, p));
            }
        }
        if let Some((q, p)) = best.filter(|&(_, p)| p > threshold) {
            pairs.push((q, nq));
            probs.push(p);
        }
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by_key(|&k| pairs[k]);
    MatchResult {
        dialogue_id: d.id.clone(),
        pairs: order.iter().map(|&k| pairs[k]).collect(),
        probs: Some(order.iter().map(|&k| probs[k]).collect()),
    }
}

/// [`greedy_match_with`] at the 0.5 threshold.
pub fn greedy_match<F>(d: &Dialogue, score: F) -> MatchResult
where
    F: FnMut(usize, usize) -> f64,
{
    greedy_match_with(d, DEFAULT_THRESHOLD, score)
}
