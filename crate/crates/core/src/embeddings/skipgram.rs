//! Skip-gram with negative sampling.
//!
//! Noise words are drawn from the unigram distribution raised to 0.75 and
//! the learning rate decays linearly to `lr * 1e-4` over all epochs.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{Vocabulary, PAD, UNK};
use super::EmbeddingMatrix;
use crate::numerics::{sigmoid, RandomSource, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkipGramReport {
    /// Mean negative-sampling loss per (center, context) pair, per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trainer state: input ("word") and output ("context") vectors.
pub struct SkipGram {
    config: SkipGramConfig,
    input: Vec<f64>,
    output: Vec<f64>,
    vocab_len: usize,
}

impl SkipGram {
    pub fn new(vocab: &Vocabulary, config: SkipGramConfig) -> Self {
        let mut rng = RandomSource::new(config.seed).stream("skipgram-init");
        let d = config.dim;
        let half = 0.5 / d as f64;
        let input = (0..vocab.len() * d).map(|_| rng.gen_range(-half..half)).collect();
        SkipGram {
            input,
            output: vec![0.0; vocab.len() * d],
            vocab_len: vocab.len(),
            config,
        }
    }

    pub fn train(&mut self, corpus: &[Vec<usize>]) -> SkipGramReport {
        let cfg = self.config.clone();
        let d = cfg.dim;
        let mut report = SkipGramReport::default();
        let mut counts = vec![0.0f64; self.vocab_len];
        for &id in corpus.iter().flatten() {
            counts[id] += 1.0;
        }
        counts[UNK] = 0.0;
        counts[PAD] = 0.0;
        let weights: Vec<f64> = counts.iter().map(|c| c.powf(0.75)).collect();
        let Ok(noise) = WeightedIndex::new(&weights) else {
            log::warn!("skip-gram corpus has no in-vocabulary tokens; skipping training");
            return report;
        };
        if corpus.iter().all(|s| s.len() <= cfg.window) {
            log::warn!(
                "every skip-gram sequence is shorter than the window ({})",
                cfg.window
            );
        }
        let mut rng = RandomSource::new(cfg.seed).stream("skipgram-train");
        let total = (cfg.epochs * corpus.iter().map(Vec::len).sum::<usize>()).max(1) as f64;
        let mut processed = 0usize;
        let mut grad = vec![0.0; d];

        for _ in 0..cfg.epochs {
            let (mut loss_sum, mut pairs) = (0.0, 0usize);
            for seq in corpus {
                for (pos, &center) in seq.iter().enumerate() {
                    processed += 1;
                    if center == UNK || center == PAD {
                        continue;
                    }
                    let lr = cfg.lr * (1.0 - processed as f64 / total).max(1e-4);
                    let lo = pos.saturating_sub(cfg.window);
                    let hi = (pos + cfg.window + 1).min(seq.len());
                    for (cpos, &context) in seq.iter().enumerate().take(hi).skip(lo) {
                        if cpos == pos || context == UNK || context == PAD {
                            continue;
                        }
                        grad.iter_mut().for_each(|g| *g = 0.0);
                        let mut loss = 0.0;
                        for k in 0..=cfg.negatives {
                            let (target, label) = if k == 0 {
                                (context, 1.0)
                            } else {
                                let n = noise.sample(&mut rng);
                                if n == context {
                                    continue;
                                }
                                (n, 0.0)
                            };
                            let wi = &self.input[center * d..(center + 1) * d];
                            let wo = &mut self.output[target * d..(target + 1) * d];
                            let dot: f64 = wi.iter().zip(wo.iter()).map(|(a, b)| a * b).sum();
                            let s = sigmoid(dot);
                            loss -= if label > 0.0 { s.max(1e-300).ln() } else { (1.0 - s).max(1e-300).ln() };
                            let gcoef = (label - s) * lr;
                            for j in 0..d {
                                grad[j] += gcoef * wo[j];
                                wo[j] += gcoef * wi[j];
                            }
                        }
                        let wi = &mut self.input[center * d..(center + 1) * d];
                        for j in 0..d {
                            wi[j] += grad[j];
                        }
                        loss_sum += loss;
                        pairs += 1;
                    }
                }
            }
            report
                .epoch_losses
                .push(if pairs == 0 { 0.0 } else { loss_sum / pairs as f64 });
        }
        report
    }

    /// Input vectors with the unknown row replaced by the mean of all
    /// regular rows and the padding row zeroed.
    pub fn embeddings(&self) -> EmbeddingMatrix {
        let d = self.config.dim;
        let mut table = self.input.clone();
        let regular = self.vocab_len.saturating_sub(2);
        let mut mean = vec![0.0; d];
        if regular > 0 {
            for id in 2..self.vocab_len {
                for j in 0..d {
                    mean[j] += table[id * d + j];
                }
            }
            mean.iter_mut().for_each(|m| *m /= regular as f64);
        }
        table[UNK * d..(UNK + 1) * d].copy_from_slice(&mean);
        table[PAD * d..(PAD + 1) * d].iter_mut().for_each(|v| *v = 0.0);
        EmbeddingMatrix::new(Tensor::matrix(self.vocab_len, d, table))
    }
}

/// Trains skip-gram vectors for `vocab` on token sequences.
pub fn train_skipgram<S: AsRef<str>>(
    corpus: &[Vec<S>],
    vocab: &Vocabulary,
    config: &SkipGramConfig,
) -> (EmbeddingMatrix, SkipGramReport) {
    let ids: Vec<Vec<usize>> = corpus.iter().map(|s| vocab.ids_of(s)).collect();
    let mut sg = SkipGram::new(vocab, config.clone());
    let report = sg.train(&ids);
    (sg.embeddings(), report)
}
