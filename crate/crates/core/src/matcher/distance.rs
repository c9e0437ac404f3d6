//! Logistic scorer over the one-hot distance alone.

use serde::{Deserialize, Serialize};

use crate::dialogue::{build_candidate_pairs, encode_distance, CandidatePair, Dialogue, DISTANCE_DIMS};
use crate::error::{Error, Result};
use crate::numerics::{AdamState, Graph, Gradients, ParamStore, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistanceBaselineConfig {
    pub lr: f64,
    /// Full-batch Adam steps.
    pub steps: usize,
}

impl Default for DistanceBaselineConfig {
    fn default() -> Self {
        DistanceBaselineConfig { lr: 0.05, steps: 500 }
    }
}

/// `softmax(W d + b)` with `W` of shape `[2, 10]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBaseline {
    params: ParamStore,
}

impl DistanceBaseline {
    /// Minimizes mean cross-entropy over `pairs`. Starts from zero weights,
    /// so training is deterministic.
    pub fn train(pairs: &[CandidatePair], config: &DistanceBaselineConfig) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Empty("distance baseline training pairs"));
        }
        // Per bucket: (negatives, positives). The mean loss only depends on these.
        let mut counts = [[0usize; 2]; DISTANCE_DIMS];
        for p in pairs {
            counts[encode_distance(p.distance).bucket() - 1][usize::from(p.gold)] += 1;
        }
        let mut params = ParamStore::new();
        let w = params.add("fc.w", Tensor::zeros(&[2, DISTANCE_DIMS]));
        let b = params.add("fc.b", Tensor::zeros(&[2]));
        let mut adam = AdamState::new(&params);
        let scale = 1.0 / pairs.len() as f64;
        for _ in 0..config.steps {
            let mut grads = Gradients::zeros_like(&params);
            {
                let mut g = Graph::new(&params);
                let (wn, bn) = (g.param(w), g.param(b));
                for (bucket, c) in counts.iter().enumerate() {
                    let mut onehot = vec![0.0; DISTANCE_DIMS];
                    onehot[bucket] = 1.0;
                    let x = g.constant(Tensor::vector(onehot));
                    let z = g.matvec(wn, x);
                    let logits = g.add(z, bn);
                    for (class, &n) in c.iter().enumerate() {
                        if n > 0 {
                            let loss = g.cross_entropy(logits, class);
                            g.backward_scaled(loss, n as f64 * scale, &mut grads);
                        }
                    }
                }
            }
            adam.step(&mut params, &grads, config.lr);
        }
        Ok(DistanceBaseline { params })
    }

    /// Trains on every candidate pair of `dialogues`.
    pub fn train_on(dialogues: &[Dialogue], config: &DistanceBaselineConfig) -> Result<Self> {
        let pairs: Vec<CandidatePair> = dialogues.iter().flat_map(build_candidate_pairs).collect();
        Self::train(&pairs, config)
    }

    /// Match probability for a pair at `distance`.
    pub fn score(&self, distance: usize) -> f64 {
        let w = self.params.tensor(self.params.find("fc.w").expect("fc.w"));
        let b = self.params.tensor(self.params.find("fc.b").expect("fc.b")).values();
        let k = encode_distance(distance).bucket() - 1;
        let logits = [w.row(0)[k] + b[0], w.row(1)[k] + b[1]];
        crate::numerics::softmax(&logits)[1]
    }
}
