//! Tokenization, vocabulary and skip-gram word embeddings.

mod file;
mod skipgram;
mod vocab;

pub use file::{read_embeddings, write_embeddings};
pub use skipgram::{train_skipgram, SkipGram, SkipGramConfig, SkipGramReport};
pub use vocab::{build_vocab, TokenizerSpec, Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

use crate::numerics::Tensor;

/// `|V| x dim` lookup table whose rows follow the vocabulary ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    table: Tensor,
}

impl EmbeddingMatrix {
    /// Panics unless `table` is 2-D.
    pub fn new(table: Tensor) -> Self {
        assert_eq!(table.shape().len(), 2, "embedding table must be 2-D");
        EmbeddingMatrix { table }
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn rows(&self) -> usize {
        self.table.rows()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.table.row(id)
    }

    pub fn table(&self) -> &Tensor {
        &self.table
    }

    pub fn into_table(self) -> Tensor {
        self.table
    }

    /// Uniform `(-0.5, 0.5)` rows for every id except [`PAD`], which is zero.
    /// Stands in for pretrained vectors in tests and quick runs.
    pub fn random<R: rand::Rng>(vocab: &Vocabulary, dim: usize, rng: &mut R) -> Self {
        let mut v: Vec<f64> = (0..vocab.len() * dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        v[PAD * dim..(PAD + 1) * dim].iter_mut().for_each(|x| *x = 0.0);
        EmbeddingMatrix::new(Tensor::matrix(vocab.len(), dim, v))
    }

    /// Stacks the rows of `ids` into a `[ids.len(), dim]` tensor.
    pub fn gather(&self, ids: &[usize]) -> Tensor {
        let d = self.dim();
        let mut v = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            v.extend_from_slice(self.row(id));
        }
        Tensor::matrix(ids.len(), d, v)
    }

    /// Row for `token`, falling back to the unknown-token row.
    pub fn lookup(&self, vocab: &Vocabulary, token: &str) -> &[f64] {
        self.row(vocab.id(token))
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
