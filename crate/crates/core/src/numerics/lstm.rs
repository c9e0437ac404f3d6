//! Unidirectional LSTM built from tape primitives.
//!
//! Gates are packed `[input, forget, cell, output]` along the first axis of
//! the weight matrices:
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
//! g = tanh(W_g x + U_g h + b_g) o = σ(W_o x + U_o h + b_o)
//! c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
//! ```

use rand::Rng;

use super::graph::{Graph, NodeId};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    /// `[4H, input]`
    pub w_ih: ParamId,
    /// `[4H, H]`
    pub w_hh: ParamId,
    /// `[4H]`
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmParams {
    /// Registers `{prefix}.w_ih`, `{prefix}.w_hh` and `{prefix}.bias`.
    /// Forget-gate biases start at 1, all other biases at 0.
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let w_ih = store.add_uniform(format!("{prefix}.w_ih"), 4 * hidden, input, rng);
        let w_hh = store.add_uniform(format!("{prefix}.w_hh"), 4 * hidden, hidden, rng);
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let bias = store.add(format!("{prefix}.bias"), Tensor::vector(b));
        LstmParams {
            w_ih,
            w_hh,
            bias,
            input,
            hidden,
        }
    }

    /// Looks up an existing parameter triple by prefix.
    pub fn lookup(store: &ParamStore, prefix: &str) -> Option<Self> {
        let w_ih = store.find(&format!("{prefix}.w_ih"))?;
        let w_hh = store.find(&format!("{prefix}.w_hh"))?;
        let bias = store.find(&format!("{prefix}.bias"))?;
        let shape = store.tensor(w_ih).shape();
        Some(LstmParams {
            w_ih,
            w_hh,
            bias,
            input: shape[1],
            hidden: shape[0] / 4,
        })
    }
}

/// Recurrent state nodes.
#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: NodeId,
    pub c: NodeId,
}

impl LstmState {
    pub fn zeros(g: &mut Graph<'_>, hidden: usize) -> Self {
        let h = g.constant(Tensor::zeros(&[hidden]));
        let c = g.constant(Tensor::zeros(&[hidden]));
        LstmState { h, c }
    }
}

/// One cell step from an already projected input `W_ih x + b`.
pub fn lstm_step_projected(
    g: &mut Graph<'_>,
    x_proj: NodeId,
    prev: LstmState,
    p: &LstmParams,
) -> LstmState {
    let w_hh = g.param(p.w_hh);
    let rec = g.matvec(w_hh, prev.h);
    let pre = g.add(x_proj, rec);
    let hc = g.lstm_gates(pre, prev.c);
    let h = g.slice(hc, 0, p.hidden);
    let c = g.slice(hc, p.hidden, p.hidden);
    LstmState { h, c }
}

/// A single LSTM cell application: `(x, h, c) -> (h', c')`.
pub fn lstm_cell(g: &mut Graph<'_>, x: NodeId, prev: LstmState, p: &LstmParams) -> LstmState {
    let w_ih = g.param(p.w_ih);
    let b = g.param(p.bias);
    let xp = g.matvec(w_ih, x);
    let xp = g.add(xp, b);
    lstm_step_projected(g, xp, prev, p)
}

/// Runs the LSTM over the rows of `inputs` (`[T, input]`) from a zero state
/// and returns the hidden state after every step. The input projection is
/// computed for all steps at once.
pub fn lstm_sequence(g: &mut Graph<'_>, inputs: NodeId, p: &LstmParams) -> Vec<NodeId> {
    let steps = g.value(inputs).rows();
    let w_ih = g.param(p.w_ih);
    let b = g.param(p.bias);
    let proj = g.matmul_nt(inputs, w_ih);
    let proj = g.add_row(proj, b);
    let mut state = LstmState::zeros(g, p.hidden);
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        let xp = g.row(proj, t);
        state = lstm_step_projected(g, xp, state, p);
        out.push(state.h);
    }
    out
}
