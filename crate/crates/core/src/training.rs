//! Mini-batch training of a [`Model`] on candidate pairs, with per-epoch
//! learning-rate decay, early stopping and multi-seed averaging.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dialogue::{build_candidate_pairs, Dialogue};
use crate::embeddings::{EmbeddingMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::evaluation::{micro_prf, MetricsSummary};
use crate::matcher::{greedy_match_with, MatchResult};
use crate::model::{Dropout, Model, ModelConfig, PairInput, PairScore};
use crate::numerics::{AdamState, Gradients, Graph, RandomSource};

/// Which loss early stopping watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    #[default]
    DevLoss,
    TrainLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub lr_decay: f64,
    pub dropout: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub monitor: Monitor,
    /// Stop as soon as dev F1 reaches this value.
    pub stop_at_f1: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            lr_decay: 0.95,
            dropout: 0.3,
            patience: 3,
            max_epochs: 50,
            batch_size: 32,
            seeds: vec![1, 2, 3],
            monitor: Monitor::DevLoss,
            stop_at_f1: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("training: {m}")));
        if self.patience < 1 {
            return bad("patience must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        Ok(())
    }

    /// Learning rate after `k` decay steps; epoch `k + 1` trains with it.
    pub fn lr_at(&self, k: usize) -> f64 {
        self.lr * self.lr_decay.powi(k as i32)
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
    pub dev_f1: Option<f64>,
    pub improved: bool,
    /// Seconds; ignored by equality.
    pub wall_time: f64,
}

impl PartialEq for EpochRecord {
    fn eq(&self, o: &Self) -> bool {
        self.epoch == o.epoch
            && self.lr.to_bits() == o.lr.to_bits()
            && self.train_loss.to_bits() == o.train_loss.to_bits()
            && self.dev_loss.map(f64::to_bits) == o.dev_loss.map(f64::to_bits)
            && self.dev_f1.map(f64::to_bits) == o.dev_f1.map(f64::to_bits)
            && self.improved == o.improved
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were restored.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.epochs {
            serde_json::to_writer(&mut w, e)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

/// Patience counter over a monitored loss. Lower is better; ties do not
/// count as improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    /// Records the loss of `epoch`; returns whether it improved on the best.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            true
        } else {
            self.bad_epochs += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.bad_epochs >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Hook called after every epoch.
pub trait TrainObserver {
    fn on_epoch(&mut self, record: &EpochRecord, model: &Model) -> Result<()>;
}

impl TrainObserver for () {
    fn on_epoch(&mut self, _: &EpochRecord, _: &Model) -> Result<()> {
        Ok(())
    }
}

/// Writes `epoch-<k>.ckpt` into a directory whenever the monitored loss
/// improves.
#[derive(Debug, Clone)]
pub struct CheckpointWriter {
    pub dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl CheckpointWriter {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(CheckpointWriter {
            dir,
            written: Vec::new(),
        })
    }

    pub fn path_for(dir: &Path, epoch: usize) -> PathBuf {
        dir.join(format!("epoch-{epoch}.ckpt"))
    }
}

impl TrainObserver for CheckpointWriter {
    fn on_epoch(&mut self, record: &EpochRecord, model: &Model) -> Result<()> {
        if record.improved {
            let path = Self::path_for(&self.dir, record.epoch);
            model.save(&path, serde_json::json!({ "epoch": record.epoch }))?;
            self.written.push(path);
        }
        Ok(())
    }
}

struct Example {
    input: PairInput,
    label: usize,
}

fn examples(model: &Model, dialogues: &[Dialogue]) -> Vec<Example> {
    dialogues
        .iter()
        .flat_map(|d| {
            build_candidate_pairs(d).into_iter().map(move |p| (d, p))
        })
        .map(|(d, p)| Example {
            input: model.input(d, p.q_index, p.nq_index),
            label: usize::from(p.gold),
        })
        .collect()
}

/// Eval-mode loss over all candidate pairs of `dialogues` and the greedy
/// matcher's micro F1 on them.
pub fn evaluate_dialogues(model: &Model, dialogues: &[Dialogue]) -> Result<(f64, f64)> {
    let threshold = model.config().classification_threshold;
    let mut total = 0.0;
    let mut n = 0usize;
    let mut preds = Vec::with_capacity(dialogues.len());
    for d in dialogues {
        let pairs = build_candidate_pairs(d);
        let mut scores = Vec::with_capacity(pairs.len());
        for p in &pairs {
            let s = model.score_pair(d, p.q_index, p.nq_index);
            total += ce(&s, usize::from(p.gold));
            n += 1;
            scores.push(((p.q_index, p.nq_index), s.probability));
        }
        preds.push(greedy_match_with(d, threshold, |q, nq| {
            scores
                .iter()
                .find(|(k, _)| *k == (q, nq))
                .map(|(_, p)| *p)
                .unwrap_or(0.0)
        }));
    }
    let loss = if n == 0 { 0.0 } else { total / n as f64 };
    let f1 = micro_prf(&preds, dialogues)?.f1;
    Ok((loss, f1))
}

fn ce(s: &PairScore, label: usize) -> f64 {
    crate::numerics::cross_entropy(&s.logits, label)
}

/// Runs the greedy matcher with `model` over every dialogue.
pub fn predict(model: &Model, dialogues: &[Dialogue]) -> Vec<MatchResult> {
    let threshold = model.config().classification_threshold;
    dialogues
        .iter()
        .map(|d| greedy_match_with(d, threshold, |q, nq| model.score_pair(d, q, nq).probability))
        .collect()
}

/// Initializes a model from the `init` stream of `seed` and trains it.
pub fn train(
    config: ModelConfig,
    embeddings: EmbeddingMatrix,
    vocab: Vocabulary,
    train_set: &[Dialogue],
    dev_set: &[Dialogue],
    cfg: &TrainConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<(Model, TrainLog)> {
    let source = RandomSource::new(seed);
    let model = Model::new(config, embeddings, vocab, &mut source.stream("init"))?;
    fit(model, train_set, dev_set, cfg, seed, observer)
}

/// Trains `model` in place and returns it with the best epoch's parameters.
///
/// Without dev dialogues the train loss is monitored whatever
/// `cfg.monitor` says.
pub fn fit(
    mut model: Model,
    train_set: &[Dialogue],
    dev_set: &[Dialogue],
    cfg: &TrainConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<(Model, TrainLog)> {
    cfg.validate()?;
    let mut data = examples(&model, train_set);
    if data.is_empty() {
        return Err(Error::Empty("training set has no candidate pairs"));
    }
    let positives = data.iter().filter(|e| e.label == 1).count();
    if positives == 0 || positives == data.len() {
        log::warn!(
            "all {} training pairs share one label ({})",
            data.len(),
            if positives == 0 { "negative" } else { "positive" }
        );
    }
    let monitor = if dev_set.is_empty() {
        Monitor::TrainLoss
    } else {
        cfg.monitor
    };
    let source = RandomSource::new(seed);
    let mut shuffle_rng = source.stream("shuffle");
    let mut dropout_rng = source.stream("dropout");
    let mut adam = AdamState::new(&model.params);
    let mut grads = Gradients::zeros_like(&model.params);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.params.clone();
    let mut log = TrainLog {
        seed,
        ..Default::default()
    };

    for epoch in 1..=cfg.max_epochs {
        let start = Instant::now();
        let lr = cfg.lr_at(epoch - 1);
        data.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in data.chunks(cfg.batch_size) {
            grads.zero();
            let scale = 1.0 / batch.len() as f64;
            for ex in batch {
                let mut g = Graph::new(&model.params);
                let mut drop = Dropout::train(cfg.dropout, &mut dropout_rng);
                let f = model.net.forward(&mut g, &model.embeddings, &ex.input, &mut drop);
                let loss = g.cross_entropy(f.logits, ex.label);
                let v = g.value(loss).values()[0];
                if !v.is_finite() {
                    return Err(Error::NonFinite { epoch });
                }
                total += v;
                g.backward_scaled(loss, scale, &mut grads);
            }
            if !grads.all_finite() {
                return Err(Error::NonFinite { epoch });
            }
            adam.step(&mut model.params, &grads, lr);
        }
        let train_loss = total / data.len() as f64;
        let (dev_loss, dev_f1) = if dev_set.is_empty() {
            (None, None)
        } else {
            let (l, f) = evaluate_dialogues(&model, dev_set)?;
            if !l.is_finite() {
                return Err(Error::NonFinite { epoch });
            }
            (Some(l), Some(f))
        };
        let watched = match monitor {
            Monitor::DevLoss => dev_loss.unwrap_or(train_loss),
            Monitor::TrainLoss => train_loss,
        };
        let improved = stopper.observe(epoch, watched);
        if improved {
            best.clone_from(&model.params);
        }
        let record = EpochRecord {
            epoch,
            lr,
            train_loss,
            dev_loss,
            dev_f1,
            improved,
            wall_time: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: lr {lr:.6} train {train_loss:.4} dev {:?} f1 {:?}",
            dev_loss,
            dev_f1
        );
        observer.on_epoch(&record, &model)?;
        log.epochs.push(record);
        if stopper.should_stop() {
            log.stopped_early = true;
            break;
        }
        if let (Some(target), Some(f)) = (cfg.stop_at_f1, dev_f1) {
            if f >= target {
                break;
            }
        }
    }
    log.best_epoch = stopper.best_epoch();
    model.params = best;
    Ok((model, log))
}

/// Per-seed and mean metrics of repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeedReport {
    pub runs: Vec<(u64, MetricsSummary)>,
    pub mean: MetricsSummary,
}

/// Calls `run` once per seed and averages the results. Runs are ordered by
/// seed before averaging, so the mean does not depend on the order of `seeds`.
pub fn run_multi_seed<F>(seeds: &[u64], mut run: F) -> Result<MultiSeedReport>
where
    F: FnMut(u64) -> Result<MetricsSummary>,
{
    if seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    let mut runs = seeds
        .iter()
        .map(|&s| run(s).map(|m| (s, m)))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|(s, _)| *s);
    let summaries: Vec<_> = runs.iter().map(|(_, m)| m.clone()).collect();
    let mean = MetricsSummary::mean(&summaries);
    Ok(MultiSeedReport { runs, mean })
}
