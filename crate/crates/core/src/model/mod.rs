//! The pair scorer: shared sentence encoder, mutual attention over the
//! role-partitioned history, fusion LSTM, attentive match-LSTM and a
//! distance-aware prediction layer.

mod config;
mod layers;

pub use config::{ModelConfig, Variant, Wiring};
pub use layers::{
    attend, encode_sentence, match_lstm, mutual_attention, predict, Attended, AttentionParams,
    Dropout, EncodedTurn, MatchAttentionParams, MatchOutput, MutualOutput, Speaker,
};

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dialogue::{pair_history, Dialogue};
use crate::embeddings::{EmbeddingMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::{softmax, Checkpoint, Graph, LstmParams, NodeId, ParamId, ParamStore, Tensor};

/// Probability that a pair matches, with the raw logits `[no, yes]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScore {
    pub probability: f64,
    pub logits: [f64; 2],
}

impl PairScore {
    pub fn from_logits(logits: &[f64]) -> Self {
        assert_eq!(logits.len(), 2, "pair logits must have two entries");
        let p = softmax(logits);
        PairScore {
            probability: p[1],
            logits: [logits[0], logits[1]],
        }
    }
}

/// One history turn of a pair as token ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub index: usize,
    pub tokens: Vec<usize>,
    pub asker: bool,
}

/// Token-id view of a candidate pair, ready for the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInput {
    pub q: Vec<usize>,
    pub nq: Vec<usize>,
    /// History in dialogue order.
    pub history: Vec<HistoryTurn>,
    pub distance: usize,
}

impl PairInput {
    /// Builds the input for `(q, nq)` with the history selected by `variant`.
    pub fn from_dialogue(
        d: &Dialogue,
        q: usize,
        nq: usize,
        variant: Variant,
        vocab: &Vocabulary,
    ) -> Self {
        let history = if variant.uses_history() {
            let h = pair_history(d, q, nq, variant.history_scope());
            h.turns
                .iter()
                .map(|&t| HistoryTurn {
                    index: t,
                    tokens: vocab.ids_of(&d.turns[t].tokens),
                    asker: d.turns[t].role == d.turns[q].role,
                })
                .collect()
        } else {
            Vec::new()
        };
        PairInput {
            q: vocab.ids_of(&d.turns[q].tokens),
            nq: vocab.ids_of(&d.turns[nq].tokens),
            history,
            distance: nq - q,
        }
    }
}

/// Parameter handles of one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: ModelConfig,
    pub encoder: LstmParams,
    pub att_q: Option<AttentionParams>,
    pub att_nq: Option<AttentionParams>,
    pub fusion: LstmParams,
    pub match_att: MatchAttentionParams,
    pub matcher: LstmParams,
    pub fc_w: ParamId,
    pub fc_b: ParamId,
}

/// Nodes of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub q_prime: NodeId,
    pub nq_prime: NodeId,
    pub q_weights: Option<NodeId>,
    pub nq_weights: Option<NodeId>,
    pub p_m: NodeId,
    pub match_weights: Vec<NodeId>,
    pub logits: NodeId,
}

impl Network {
    /// Registers every parameter the variant uses.
    pub fn init<R: Rng>(config: &ModelConfig, store: &mut ParamStore, rng: &mut R) -> Self {
        let (e, h, m) = (config.embedding_dim, config.encoder_hidden, config.match_hidden);
        let encoder = LstmParams::init(store, "encoder", e, h, rng);
        let (att_q, att_nq) = if config.variant.uses_history() {
            (
                Some(AttentionParams::init(store, "att_q", h, rng)),
                Some(AttentionParams::init(store, "att_nq", h, rng)),
            )
        } else {
            (None, None)
        };
        let fusion = LstmParams::init(store, "fusion", 2 * h, m, rng);
        let match_att = MatchAttentionParams::init(store, "match_att", m, rng);
        let matcher = LstmParams::init(store, "match", 2 * m, m, rng);
        let fc_w = store.add_uniform("fc.w", 2, config.fc_input(), rng);
        let fc_b = store.add("fc.b", Tensor::zeros(&[2]));
        Network {
            config: config.clone(),
            encoder,
            att_q,
            att_nq,
            fusion,
            match_att,
            matcher,
            fc_w,
            fc_b,
        }
    }

    /// Resolves the handles of an already populated store.
    pub fn lookup(config: &ModelConfig, store: &ParamStore) -> Result<Self> {
        let missing = |what: &str| Error::Checkpoint(format!("missing parameters `{what}`"));
        let (att_q, att_nq) = if config.variant.uses_history() {
            (
                Some(AttentionParams::lookup(store, "att_q").ok_or_else(|| missing("att_q"))?),
                Some(AttentionParams::lookup(store, "att_nq").ok_or_else(|| missing("att_nq"))?),
            )
        } else {
            (None, None)
        };
        Ok(Network {
            config: config.clone(),
            encoder: LstmParams::lookup(store, "encoder").ok_or_else(|| missing("encoder"))?,
            att_q,
            att_nq,
            fusion: LstmParams::lookup(store, "fusion").ok_or_else(|| missing("fusion"))?,
            match_att: MatchAttentionParams::lookup(store, "match_att")
                .ok_or_else(|| missing("match_att"))?,
            matcher: LstmParams::lookup(store, "match").ok_or_else(|| missing("match"))?,
            fc_w: store.find("fc.w").ok_or_else(|| missing("fc.w"))?,
            fc_b: store.find("fc.b").ok_or_else(|| missing("fc.b"))?,
        })
    }

    /// Records the full scoring pass for `input` on `g`.
    pub fn forward(
        &self,
        g: &mut Graph<'_>,
        emb: &EmbeddingMatrix,
        input: &PairInput,
        dropout: &mut Dropout<'_>,
    ) -> Forward {
        let variant = self.config.variant;
        let q = encode_sentence(g, emb, &input.q, &self.encoder, dropout);
        let nq = encode_sentence(g, emb, &input.nq, &self.encoder, dropout);
        let history: Vec<(NodeId, Speaker)> = if variant.uses_history() {
            input
                .history
                .iter()
                .map(|t| {
                    let enc = encode_sentence(g, emb, &t.tokens, &self.encoder, dropout);
                    let who = if t.asker {
                        Speaker::Asker
                    } else {
                        Speaker::Responder
                    };
                    (enc.last_state, who)
                })
                .collect()
        } else {
            Vec::new()
        };
        let mutual = mutual_attention(
            g,
            &q,
            &nq,
            &history,
            variant.wiring(),
            self.att_q.as_ref(),
            self.att_nq.as_ref(),
        );
        let m = match_lstm(
            g,
            mutual.q.u,
            mutual.nq.u,
            &self.fusion,
            &self.match_att,
            &self.matcher,
            dropout,
        );
        let distance = variant.uses_distance().then_some(input.distance);
        let logits = predict(g, m.p_m, distance, self.fc_w, self.fc_b);
        Forward {
            q_prime: mutual.q.u,
            nq_prime: mutual.nq.u,
            q_weights: mutual.q.weights,
            nq_weights: mutual.nq.weights,
            p_m: m.p_m,
            match_weights: m.weights,
            logits,
        }
    }
}

/// Trained or freshly initialized scorer together with its frozen
/// embeddings and vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub net: Network,
    pub params: ParamStore,
    pub embeddings: EmbeddingMatrix,
    pub vocab: Vocabulary,
}

impl Model {
    pub fn new<R: Rng>(
        config: ModelConfig,
        embeddings: EmbeddingMatrix,
        vocab: Vocabulary,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if embeddings.dim() != config.embedding_dim {
            return Err(Error::Config(format!(
                "embedding_dim is {} but the embedding table has {} columns",
                config.embedding_dim,
                embeddings.dim()
            )));
        }
        if embeddings.rows() != vocab.len() {
            return Err(Error::Config(format!(
                "vocabulary has {} entries but the embedding table has {} rows",
                vocab.len(),
                embeddings.rows()
            )));
        }
        let mut params = ParamStore::new();
        let net = Network::init(&config, &mut params, rng);
        Ok(Model {
            net,
            params,
            embeddings,
            vocab,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.net.config
    }

    pub fn variant(&self) -> Variant {
        self.net.config.variant
    }

    pub fn input(&self, d: &Dialogue, q: usize, nq: usize) -> PairInput {
        PairInput::from_dialogue(d, q, nq, self.variant(), &self.vocab)
    }

    /// Evaluation-mode score of one pair.
    pub fn score(&self, input: &PairInput) -> PairScore {
        let mut g = Graph::new(&self.params);
        let f = self
            .net
            .forward(&mut g, &self.embeddings, input, &mut Dropout::eval());
        PairScore::from_logits(g.value(f.logits).values())
    }

    /// Scores candidate `(q, nq)` of `d`.
    pub fn score_pair(&self, d: &Dialogue, q: usize, nq: usize) -> PairScore {
        self.score(&self.input(d, q, nq))
    }

    /// Checkpoint with the configuration, vocabulary and `extra` in the
    /// header; embeddings are stored as the tensor `embeddings`.
    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Checkpoint {
        let header = serde_json::json!({
            "model": self.net.config,
            "vocab": self.vocab.tokens(),
            "vocab_min_count": self.vocab.min_count(),
            "extra": extra,
        });
        let mut tensors = self.params.snapshot();
        tensors.push(("embeddings".to_string(), self.embeddings.table().clone()));
        Checkpoint::new(header, tensors)
    }

    /// Restores a model; with `expected` set, refuses a different variant
    /// or different layer sizes.
    pub fn from_checkpoint(ckpt: &Checkpoint, expected: Option<&ModelConfig>) -> Result<Self> {
        let config: ModelConfig = serde_json::from_value(
            ckpt.header
                .get("model")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("header has no `model` section".into()))?,
        )?;
        if let Some(want) = expected {
            config.check_compatible(want)?;
        }
        config.validate()?;
        let tokens: Vec<String> = serde_json::from_value(
            ckpt.header
                .get("vocab")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("header has no `vocab` section".into()))?,
        )?;
        let min_count = ckpt
            .header
            .get("vocab_min_count")
            .and_then(|v| v.as_u64())
            .unwrap_or(1) as usize;
        let vocab = Vocabulary::from_tokens(tokens, min_count);
        let mut tensors = ckpt.tensors()?;
        let pos = tensors
            .iter()
            .position(|(n, _)| n == "embeddings")
            .ok_or_else(|| Error::Checkpoint("missing tensor `embeddings`".into()))?;
        let (_, table) = tensors.remove(pos);
        if table.shape() != [vocab.len(), config.embedding_dim] {
            return Err(Error::Checkpoint(format!(
                "embedding table shape {:?} does not match vocabulary {} x {}",
                table.shape(),
                vocab.len(),
                config.embedding_dim
            )));
        }
        let embeddings = EmbeddingMatrix::new(table);
        let mut params = ParamStore::new();
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let net = Network::init(&config, &mut params, &mut rng);
        params.load_from(&tensors)?;
        Ok(Model {
            net,
            params,
            embeddings,
            vocab,
        })
    }

    pub fn save(&self, path: &Path, extra: serde_json::Value) -> Result<()> {
        self.to_checkpoint(extra).save(path)
    }

    pub fn load(path: &Path, expected: Option<&ModelConfig>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?, expected)
    }
}
