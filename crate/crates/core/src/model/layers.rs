//! Building blocks of the scorer, each recorded on a [`Graph`].

use rand::Rng;

use super::config::Wiring;
use crate::dialogue::encode_distance;
use crate::embeddings::EmbeddingMatrix;
use crate::numerics::rng::Rng as StreamRng;
use crate::numerics::{lstm_cell, lstm_sequence, Graph, LstmParams, LstmState, NodeId, ParamId, ParamStore, Tensor};

/// Dropout rate plus the generator that draws masks. Without a generator
/// (evaluation) it is the identity.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: Option<&'a mut StreamRng>,
}

impl<'a> Dropout<'a> {
    pub fn eval() -> Self {
        Dropout { rate: 0.0, rng: None }
    }

    pub fn train(rate: f64, rng: &'a mut StreamRng) -> Self {
        Dropout {
            rate,
            rng: Some(rng),
        }
    }

    pub fn apply(&mut self, g: &mut Graph<'_>, x: NodeId) -> NodeId {
        match self.rng.as_deref_mut() {
            Some(r) => g.dropout(x, self.rate, true, r),
            None => x,
        }
    }
}

/// `s = v^T tanh(W_word h + W_hist d)` parameters of one attention direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionParams {
    pub w_word: ParamId,
    pub w_hist: ParamId,
    pub v: ParamId,
}

impl AttentionParams {
    pub fn init<R: Rng>(store: &mut ParamStore, prefix: &str, hidden: usize, rng: &mut R) -> Self {
        AttentionParams {
            w_word: store.add_uniform(format!("{prefix}.w_word"), hidden, hidden, rng),
            w_hist: store.add_uniform(format!("{prefix}.w_hist"), hidden, hidden, rng),
            v: uniform_vector(store, format!("{prefix}.v"), hidden, rng),
        }
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Option<Self> {
        Some(AttentionParams {
            w_word: store.find(&format!("{prefix}.w_word"))?,
            w_hist: store.find(&format!("{prefix}.w_hist"))?,
            v: store.find(&format!("{prefix}.v"))?,
        })
    }
}

/// `s = v^T tanh(W_NQ f^p + W_Q f^q + W_p p)` parameters of the match attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchAttentionParams {
    pub w_nq: ParamId,
    pub w_q: ParamId,
    pub w_p: ParamId,
    pub v: ParamId,
}

impl MatchAttentionParams {
    pub fn init<R: Rng>(store: &mut ParamStore, prefix: &str, hidden: usize, rng: &mut R) -> Self {
        MatchAttentionParams {
            w_nq: store.add_uniform(format!("{prefix}.w_nq"), hidden, hidden, rng),
            w_q: store.add_uniform(format!("{prefix}.w_q"), hidden, hidden, rng),
            w_p: store.add_uniform(format!("{prefix}.w_p"), hidden, hidden, rng),
            v: uniform_vector(store, format!("{prefix}.v"), hidden, rng),
        }
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Option<Self> {
        Some(MatchAttentionParams {
            w_nq: store.find(&format!("{prefix}.w_nq"))?,
            w_q: store.find(&format!("{prefix}.w_q"))?,
            w_p: store.find(&format!("{prefix}.w_p"))?,
            v: store.find(&format!("{prefix}.v"))?,
        })
    }
}

fn uniform_vector<R: Rng>(store: &mut ParamStore, name: String, n: usize, rng: &mut R) -> ParamId {
    let id = store.add_uniform(name.clone(), 1, n, rng);
    let t = store.tensor(id).clone().into_values();
    *store.tensor_mut(id) = Tensor::vector(t);
    id
}

/// Sentence encoder output for one turn.
#[derive(Debug, Clone, Copy)]
pub struct EncodedTurn {
    /// `[words, hidden]`
    pub all_states: NodeId,
    /// `[hidden]`, the last row of `all_states`.
    pub last_state: NodeId,
    pub words: usize,
}

/// Runs the shared encoder over frozen embeddings of `ids`.
pub fn encode_sentence(
    g: &mut Graph<'_>,
    emb: &EmbeddingMatrix,
    ids: &[usize],
    encoder: &LstmParams,
    dropout: &mut Dropout<'_>,
) -> EncodedTurn {
    assert!(!ids.is_empty(), "cannot encode an empty turn");
    let x = g.constant(emb.gather(ids));
    let hs = lstm_sequence(g, x, encoder);
    let all = g.stack_rows(&hs);
    let all = dropout.apply(g, all);
    let last = g.row(all, ids.len() - 1);
    EncodedTurn {
        all_states: all,
        last_state: last,
        words: ids.len(),
    }
}

/// Speaker of a history turn relative to the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Speaker {
    /// Same role as the question.
    Asker,
    /// Same role as the non-question.
    Responder,
}

/// Attention output for one side: `u = [h, c]` per word and the weights.
#[derive(Debug, Clone, Copy)]
pub struct Attended {
    /// `[words, 2 * hidden]`
    pub u: NodeId,
    /// `[words, attended turns]`; `None` when nothing was attended.
    pub weights: Option<NodeId>,
}

/// Pools `set` (history last states) for every row of `words`.
pub fn attend(
    g: &mut Graph<'_>,
    words: &EncodedTurn,
    set: &[NodeId],
    att: Option<&AttentionParams>,
) -> Attended {
    let hidden = g.value(words.all_states).cols();
    let (Some(att), false) = (att, set.is_empty()) else {
        let zeros = g.constant(Tensor::zeros(&[words.words, hidden]));
        let u = g.concat_cols(words.all_states, zeros);
        return Attended { u, weights: None };
    };
    let d = g.stack_rows(set);
    let w_word = g.param(att.w_word);
    let w_hist = g.param(att.w_hist);
    let v = g.param(att.v);
    let a = g.matmul_nt(words.all_states, w_word);
    let b = g.matmul_nt(d, w_hist);
    let s = g.additive_scores(a, b, v);
    let alpha = g.softmax(s);
    let c = g.matmul(alpha, d);
    let u = g.concat_cols(words.all_states, c);
    Attended {
        u,
        weights: Some(alpha),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MutualOutput {
    pub q: Attended,
    pub nq: Attended,
}

/// Attends each side over the history partition selected by `wiring`.
/// `history` holds encoded history turns in dialogue order.
pub fn mutual_attention(
    g: &mut Graph<'_>,
    q: &EncodedTurn,
    nq: &EncodedTurn,
    history: &[(NodeId, Speaker)],
    wiring: Wiring,
    att_q: Option<&AttentionParams>,
    att_nq: Option<&AttentionParams>,
) -> MutualOutput {
    let pick = |who: Option<Speaker>| -> Vec<NodeId> {
        history
            .iter()
            .filter(|(_, s)| who.is_none_or(|w| *s == w))
            .map(|(n, _)| *n)
            .collect()
    };
    let (q_set, nq_set) = match wiring {
        Wiring::Mutual => (pick(Some(Speaker::Responder)), pick(Some(Speaker::Asker))),
        Wiring::SameSpeaker => (pick(Some(Speaker::Asker)), pick(Some(Speaker::Responder))),
        Wiring::Joint => (pick(None), pick(None)),
        Wiring::Off => (Vec::new(), Vec::new()),
    };
    let (att_q, att_nq) = match wiring {
        Wiring::Off => (None, None),
        _ => (att_q, att_nq),
    };
    MutualOutput {
        q: attend(g, q, &q_set, att_q),
        nq: attend(g, nq, &nq_set, att_nq),
    }
}

#[derive(Debug, Clone)]
pub struct MatchOutput {
    /// Final match state `[match_hidden]`.
    pub p_m: NodeId,
    /// Attention weights over Q words, one `[1, N]` node per NQ word.
    pub weights: Vec<NodeId>,
}

/// Fuses both sides with `fusion` and runs the attentive match recurrence
/// over the non-question words, starting from a zero state.
pub fn match_lstm(
    g: &mut Graph<'_>,
    q_prime: NodeId,
    nq_prime: NodeId,
    fusion: &LstmParams,
    att: &MatchAttentionParams,
    cell: &LstmParams,
    dropout: &mut Dropout<'_>,
) -> MatchOutput {
    let fq = lstm_sequence(g, q_prime, fusion);
    let fq = g.stack_rows(&fq);
    let fp_rows = lstm_sequence(g, nq_prime, fusion);
    let fp = g.stack_rows(&fp_rows);

    let w_nq = g.param(att.w_nq);
    let w_q = g.param(att.w_q);
    let w_p = g.param(att.w_p);
    let v = g.param(att.v);
    let q_proj = g.matmul_nt(fq, w_q);
    let p_proj = g.matmul_nt(fp, w_nq);

    let mut state = LstmState::zeros(g, cell.hidden);
    let mut weights = Vec::with_capacity(fp_rows.len());
    for (i, &f_i) in fp_rows.iter().enumerate() {
        let mut a = g.row(p_proj, i);
        if i > 0 {
            let rec = g.matvec(w_p, state.h);
            a = g.add(a, rec);
        }
        let s = g.additive_scores(a, q_proj, v);
        let alpha = g.softmax(s);
        let c = g.matmul(alpha, fq);
        let x = g.concat(&[f_i, c]);
        let x = dropout.apply(g, x);
        state = lstm_cell(g, x, state, cell);
        weights.push(alpha);
    }
    MatchOutput {
        p_m: state.h,
        weights,
    }
}

/// Prediction layer `W [p_M, d] + b`; `distance` is `None` for variants
/// without the distance path.
pub fn predict(
    g: &mut Graph<'_>,
    p_m: NodeId,
    distance: Option<usize>,
    w: ParamId,
    b: ParamId,
) -> NodeId {
    let input = match distance {
        Some(d) => {
            let dv = g.constant(Tensor::vector(encode_distance(d).to_f64()));
            g.concat(&[p_m, dv])
        }
        None => p_m,
    };
    let w = g.param(w);
    let b = g.param(b);
    let z = g.matvec(w, input);
    g.add(z, b)
}
