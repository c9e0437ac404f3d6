//! Synthetic two-party dialogues with planted question–answer structure.
//!
//! Every answer repeats a key word of its question. Dialogues are built from
//! segments:
//!
//! * direct: `Q(a,k) A(b,k)`, sometimes followed by a second fragment `A(b,k)`;
//! * delayed: `Q(a,k) chat(a) A(b,k)`;
//! * incremental chain: `Q(a,k1) [partial A(b,k1)] FQ(b,k2) FA(a,k2) A(b,k1)`,
//!   whose final answer lies 3 or 4 turns after the question;
//! * repeat: the same question asked two or three times, each copy answered
//!   right away, with optional small talk by the asker between rounds;
//! * small talk by either party.
//!
//! A repeat pairs the first question with a later, key-sharing answer that
//! belongs to the re-asked copy. At distance 3 or 4 such negatives are about
//! as common as chain answers, so distance plus word overlap cannot tell them
//! apart; the turns in between can.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dialogue::{Dialogue, TurnLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_dialogues: usize,
    pub min_turns: usize,
    pub max_turns: usize,
    /// Distinct word types: half keys, the rest filler and small talk.
    pub vocab_size: usize,
    /// Probability that a question–answer segment is an incremental chain.
    pub incremental_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_dialogues: 100,
            min_turns: 6,
            max_turns: 12,
            vocab_size: 120,
            incremental_fraction: 0.3,
            seed: 0,
        }
    }
}

const SMALL_TALK: [&str; 8] = ["ok", "thanks", "hello", "hmm", "right", "i see", "well", "good"];

impl SyntheticSpec {
    fn keys(&self) -> usize {
        self.vocab_size / 2
    }

    fn fillers(&self) -> usize {
        self.vocab_size - self.keys()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.min_turns < 2 || self.min_turns > self.max_turns {
            return bad(format!(
                "turn range {}..={} must satisfy 2 <= min <= max",
                self.min_turns, self.max_turns
            ));
        }
        if !(0.0..=1.0).contains(&self.incremental_fraction) {
            return bad(format!(
                "incremental_fraction {} outside [0, 1]",
                self.incremental_fraction
            ));
        }
        if self.incremental_fraction > 0.0 && self.max_turns < 4 {
            return bad("incremental chains need at least 4 turns".into());
        }
        if self.keys() < self.max_turns || self.fillers() < 4 {
            return bad(format!(
                "vocab_size {} too small for {} turns",
                self.vocab_size, self.max_turns
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Who {
    Asker,
    Other,
}

struct Planned {
    who: Who,
    label: TurnLabel,
    key: Option<usize>,
    /// Offset (within the segment) of the question this turn answers.
    answers: Option<usize>,
}

fn q(who: Who, key: usize) -> Planned {
    Planned { who, label: TurnLabel::Q, key: Some(key), answers: None }
}

fn a(who: Who, key: usize, of: usize) -> Planned {
    Planned { who, label: TurnLabel::NQ, key: Some(key), answers: Some(of) }
}

fn chat(who: Who) -> Planned {
    Planned { who, label: TurnLabel::NQ, key: None, answers: None }
}

struct Gen<'a, R: Rng> {
    spec: &'a SyntheticSpec,
    rng: &'a mut R,
    keys: Vec<usize>,
}

impl<R: Rng> Gen<'_, R> {
    fn key(&mut self) -> usize {
        self.keys.pop().expect("enough keys for the turn budget")
    }

    /// A question–answer segment that fits in `room` turns (`room >= 2`).
    fn qa_segment(&mut self, room: usize) -> Vec<Planned> {
        use Who::*;
        let r = &mut *self.rng;
        if room >= 4 && r.gen_bool(self.spec.incremental_fraction) {
            let partial = room >= 5 && r.gen_bool(0.5);
            let (k1, k2) = (self.key(), self.key());
            let mut seg = vec![q(Asker, k1)];
            if partial {
                seg.push(a(Other, k1, 0));
            }
            let f = seg.len();
            seg.extend([q(Other, k2), a(Asker, k2, f), a(Other, k1, 0)]);
            return seg;
        }
        let roll: f64 = self.rng.gen();
        if roll < 0.8 && room >= 4 {
            let k = self.key();
            let rounds = if room >= 6 && self.rng.gen_bool(0.5) { 3 } else { 2 };
            let mut seg = Vec::new();
            for round in 0..rounds {
                if round > 0 && seg.len() + 1 + 2 * (rounds - round) <= room && self.rng.gen_bool(0.4) {
                    seg.push(chat(Asker));
                }
                let at = seg.len();
                seg.extend([q(Asker, k), a(Other, k, at)]);
            }
            return seg;
        }
        let k = self.key();
        if roll < 0.9 && room >= 3 {
            return vec![q(Asker, k), chat(Asker), a(Other, k, 0)];
        }
        let mut seg = vec![q(Asker, k), a(Other, k, 0)];
        if room >= 3 && self.rng.gen_bool(0.3) {
            seg.push(a(Other, k, 0));
        }
        seg
    }

    fn words(&mut self, n: usize) -> Vec<String> {
        let f = self.spec.fillers();
        (0..n).map(|_| format!("w{}", self.rng.gen_range(0..f))).collect()
    }

    fn dialogue(&mut self, id: String) -> Dialogue {
        let spec = self.spec;
        let target = self.rng.gen_range(spec.min_turns..=spec.max_turns);
        self.keys = (0..spec.keys()).collect();
        self.keys.shuffle(self.rng);
        let roles = ["P", "D"];
        let mut turns: Vec<(&str, TurnLabel, Vec<String>)> = Vec::new();
        let mut gold = Vec::new();
        while turns.len() < target {
            let room = target - turns.len();
            let asker = self.rng.gen_range(0..2);
            let segment = if room < 2 || (!turns.is_empty() && self.rng.gen_bool(0.15)) {
                vec![chat(if self.rng.gen_bool(0.5) { Who::Asker } else { Who::Other })]
            } else {
                self.qa_segment(room)
            };
            let base = turns.len();
            for (k, p) in segment.iter().enumerate() {
                let role = match p.who {
                    Who::Asker => roles[asker],
                    Who::Other => roles[1 - asker],
                };
                let n = self.rng.gen_range(1..=2);
                let tokens = match (p.key, p.label) {
                    (Some(key), TurnLabel::Q) => {
                        let mut t = self.words(n);
                        t.extend([format!("k{key}"), "?".to_string()]);
                        t
                    }
                    (Some(key), TurnLabel::NQ) => {
                        let mut t = self.words(n);
                        t.push(format!("k{key}"));
                        t
                    }
                    (None, _) => SMALL_TALK
                        .choose(self.rng)
                        .expect("non-empty")
                        .split(' ')
                        .map(str::to_string)
                        .collect(),
                };
                if let Some(of) = p.answers {
                    gold.push((base + of, base + k));
                }
                turns.push((role, p.label, tokens));
            }
        }
        Dialogue::from_parts(&id, turns, &gold)
    }
}

/// Generates `spec.n_dialogues` dialogues named `syn-<n>`.
pub fn generate<R: Rng>(spec: &SyntheticSpec, rng: &mut R) -> Result<Vec<Dialogue>> {
    spec.validate()?;
    let mut g = Gen { spec, rng, keys: Vec::new() };
    Ok((0..spec.n_dialogues).map(|i| g.dialogue(format!("syn-{i}"))).collect())
}
