//! JSONL readers and writers for dialogues, candidate pairs and predictions.
//!
//! A dialogue line looks like
//!
//! ```json
//! {"id": "d1",
//!  "turns": [{"role": "P", "label": "Q", "text": "is it bad ?"},
//!            {"role": "D", "label": "NQ", "text": "no"}],
//!  "gold_pairs": [[0, 1]]}
//! ```
//!
//! Labels may instead be `Q`, `A` and `O`, where every `A` turn names the
//! question it answers with `"answers": <index>`; gold pairs are then
//! derived from those references. A turn may carry `"tokens"` to bypass the
//! tokenizer.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dialogue::{validate_dialogue, Dialogue, Role, Turn, TurnLabel};
use crate::embeddings::TokenizerSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TurnRecord {
    role: String,
    label: String,
    #[serde(default)]
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DialogueRecord {
    id: String,
    turns: Vec<TurnRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_pairs: Option<Vec<(usize, usize)>>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn record_to_dialogue(
    rec: DialogueRecord,
    tokenizer: TokenizerSpec,
    line: usize,
) -> Result<Dialogue> {
    let qao = rec
        .turns
        .iter()
        .any(|t| matches!(t.label.as_str(), "A" | "O") || t.answers.is_some());
    let mut derived = Vec::new();
    let mut turns = Vec::with_capacity(rec.turns.len());
    for (index, t) in rec.turns.into_iter().enumerate() {
        let label = match (qao, t.label.as_str()) {
            (_, "Q") => TurnLabel::Q,
            (false, "NQ") | (true, "O") => TurnLabel::NQ,
            (true, "A") => {
                let q = t.answers.ok_or_else(|| {
                    parse_err(line, format!("turn {index} is labelled A without `answers`"))
                })?;
                derived.push((q, index));
                TurnLabel::NQ
            }
            (_, other) => {
                return Err(Error::dialogue(
                    &rec.id,
                    format!("turn {index}: label `{other}` is not one of Q, NQ (or Q, A, O)"),
                ))
            }
        };
        let tokens = match (tokenizer, t.tokens) {
            (_, Some(tokens)) => tokens,
            (TokenizerSpec::Whitespace, None) => tokenizer.tokenize(&t.text),
            (TokenizerSpec::ExternalPretokenized, None) => {
                return Err(parse_err(
                    line,
                    format!("turn {index} has no `tokens` in pretokenized mode"),
                ))
            }
        };
        turns.push(Turn {
            index,
            role: Role::new(t.role),
            label,
            tokens,
        });
    }
    let gold_pairs: BTreeSet<(usize, usize)> = match (qao, rec.gold_pairs) {
        (false, Some(g)) => g.into_iter().collect(),
        (false, None) => BTreeSet::new(),
        (true, given) => {
            let d: BTreeSet<_> = derived.into_iter().collect();
            if given.is_some_and(|g| g.into_iter().collect::<BTreeSet<_>>() != d) {
                return Err(Error::dialogue(
                    &rec.id,
                    "`gold_pairs` disagrees with the `answers` references",
                ));
            }
            d
        }
    };
    validate_dialogue(Dialogue {
        id: rec.id,
        turns,
        gold_pairs,
    })
}

/// Reads and validates a dialogue file. Blank lines are skipped; ids must
/// be unique.
pub fn read_dialogues<R: BufRead>(r: R, tokenizer: TokenizerSpec) -> Result<Vec<Dialogue>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DialogueRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(k + 1, e.to_string()))?;
        let d = record_to_dialogue(rec, tokenizer, k + 1)?;
        if !ids.insert(d.id.clone()) {
            return Err(parse_err(k + 1, format!("duplicate dialogue id `{}`", d.id)));
        }
        out.push(d);
    }
    Ok(out)
}

pub fn read_dialogues_file(path: &Path, tokenizer: TokenizerSpec) -> Result<Vec<Dialogue>> {
    read_dialogues(BufReader::new(File::open(path)?), tokenizer)
}

/// Writes dialogues with `Q`/`NQ` labels. Turn text is the space-joined
/// tokens; `tokens` is written as well when a token contains whitespace.
pub fn write_dialogues<W: Write>(mut w: W, dialogues: &[Dialogue]) -> Result<()> {
    for d in dialogues {
        let rec = DialogueRecord {
            id: d.id.clone(),
            turns: d
                .turns
                .iter()
                .map(|t| TurnRecord {
                    role: t.role.as_str().to_string(),
                    label: t.label.as_str().to_string(),
                    text: t.tokens.join(" "),
                    tokens: t
                        .tokens
                        .iter()
                        .any(|s| s.chars().any(char::is_whitespace))
                        .then(|| t.tokens.clone()),
                    answers: None,
                })
                .collect(),
            gold_pairs: Some(d.gold_pairs.iter().copied().collect()),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_dialogues_file(path: &Path, dialogues: &[Dialogue]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dialogues(&mut w, dialogues)?;
    w.flush()?;
    Ok(())
}

/// One value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse_err(k + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(BufReader::new(File::open(path)?))
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, items: &[T]) -> Result<()> {
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_jsonl_file<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_jsonl(&mut w, items)?;
    w.flush()?;
    Ok(())
}
