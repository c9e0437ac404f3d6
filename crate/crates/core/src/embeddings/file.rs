//! Plain-text word-vector files: a `"<rows> <dim>"` header, then one line per
//! token holding the token followed by `dim` floats.

use std::io::{BufRead, Write};

use super::vocab::{Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};
use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub fn write_embeddings<W: Write>(
    mut w: W,
    vocab: &Vocabulary,
    emb: &EmbeddingMatrix,
) -> Result<()> {
    writeln!(w, "{} {}", emb.rows(), emb.dim())?;
    for (id, token) in vocab.tokens().iter().enumerate() {
        write!(w, "{token}")?;
        for v in emb.row(id) {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a word-vector file. Reserved rows may appear anywhere (or not at
/// all); they are moved to their fixed ids. A missing `<unk>` row becomes the
/// mean of the regular rows and a missing `<pad>` row is zero.
pub fn read_embeddings<R: BufRead>(r: R) -> Result<(Vocabulary, EmbeddingMatrix)> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Empty("embedding file"))?;
    let header = header?;
    let mut parts = header.split_whitespace();
    let parse_err = |line: usize, m: &str| Error::Parse {
        line,
        message: m.to_string(),
    };
    let rows: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, "bad header"))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, "bad header"))?;

    let mut tokens = Vec::with_capacity(rows);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(rows);
    let (mut unk, mut pad) = (None, None);
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let token = it.next().unwrap_or_default().to_string();
        let vec: Vec<f64> = it
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(i + 1, &e.to_string()))?;
        if vec.len() != dim {
            return Err(parse_err(
                i + 1,
                &format!("expected {dim} values, found {}", vec.len()),
            ));
        }
        match token.as_str() {
            UNK_TOKEN => unk = Some(vec),
            PAD_TOKEN => pad = Some(vec),
            _ => {
                tokens.push(token);
                vectors.push(vec);
            }
        }
    }
    let unk = unk.unwrap_or_else(|| {
        let mut m = vec![0.0; dim];
        for v in &vectors {
            for (a, b) in m.iter_mut().zip(v) {
                *a += b;
            }
        }
        let n = vectors.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    });
    let pad = pad.unwrap_or_else(|| vec![0.0; dim]);
    let vocab = Vocabulary::from_tokens(tokens, 1);
    if vocab.len() != vectors.len() + 2 {
        return Err(Error::Parse {
            line: 1,
            message: "duplicate token in embedding file".into(),
        });
    }
    let rows = vocab.len();
    let mut table = vec![0.0; vocab.len() * dim];
    table[UNK * dim..(UNK + 1) * dim].copy_from_slice(&unk);
    table[PAD * dim..(PAD + 1) * dim].copy_from_slice(&pad);
    for (k, v) in vectors.iter().enumerate() {
        let id = k + 2;
        table[id * dim..(id + 1) * dim].copy_from_slice(v);
    }
    Ok((vocab, EmbeddingMatrix::new(Tensor::matrix(rows, dim, table))))
}
