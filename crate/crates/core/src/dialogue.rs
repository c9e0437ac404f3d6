//! Labeled two-party dialogues and the Q–NQ candidate pairs built from them.
//!
//! All indices are 0-based. Figures that number turns `U1, U2, ...` are
//! shifted down by one when converted to this representation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of components in the one-hot distance encoding.
pub const DISTANCE_DIMS: usize = 10;

/// The speaker of a turn. A dialogue has at most two distinct roles.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Role(pub String);

impl Role {
    pub fn new(name: impl Into<String>) -> Self {
        Role(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TurnLabel {
    Q,
    NQ,
}

impl TurnLabel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Q" => Some(TurnLabel::Q),
            "NQ" => Some(TurnLabel::NQ),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TurnLabel::Q => "Q",
            TurnLabel::NQ => "NQ",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub index: usize,
    pub role: Role,
    pub label: TurnLabel,
    pub tokens: Vec<String>,
}

impl Turn {
    pub fn is_question(&self) -> bool {
        self.label == TurnLabel::Q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Turn>,
    /// Gold `(question index, answer index)` pairs.
    pub gold_pairs: BTreeSet<(usize, usize)>,
}

impl Dialogue {
    /// Builds a dialogue from `(role, label, tokens)` triples, assigning
    /// turn indices by position. The result is not validated.
    pub fn from_parts<R, I>(id: &str, turns: I, gold_pairs: &[(usize, usize)]) -> Self
    where
        R: Into<String>,
        I: IntoIterator<Item = (R, TurnLabel, Vec<String>)>,
    {
        let turns = turns
            .into_iter()
            .enumerate()
            .map(|(index, (role, label, tokens))| Turn {
                index,
                role: Role::new(role),
                label,
                tokens,
            })
            .collect();
        Dialogue {
            id: id.to_string(),
            turns,
            gold_pairs: gold_pairs.iter().copied().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Distinct roles in order of first appearance.
    pub fn roles(&self) -> Vec<&Role> {
        let mut seen: Vec<&Role> = Vec::with_capacity(2);
        for t in &self.turns {
            if !seen.contains(&&t.role) {
                seen.push(&t.role);
            }
        }
        seen
    }

    /// Whether `(q, nq)` satisfies the structural pairing constraints:
    /// question before non-question, uttered by different roles.
    pub fn is_candidate(&self, q: usize, nq: usize) -> bool {
        q < nq
            && nq < self.turns.len()
            && self.turns[q].label == TurnLabel::Q
            && self.turns[nq].label == TurnLabel::NQ
            && self.turns[q].role != self.turns[nq].role
    }
}

/// Checks every dialogue invariant and returns the dialogue unchanged when
/// all hold. The error names the first violation found.
pub fn validate_dialogue(raw: Dialogue) -> Result<Dialogue> {
    let id = raw.id.as_str();
    if raw.turns.len() < 2 {
        return Err(Error::dialogue(
            id,
            format!("needs at least 2 turns, found {}", raw.turns.len()),
        ));
    }
    for (pos, turn) in raw.turns.iter().enumerate() {
        if turn.index != pos {
            return Err(Error::dialogue(
                id,
                format!("turn at position {pos} carries index {}", turn.index),
            ));
        }
        if turn.tokens.is_empty() {
            return Err(Error::dialogue(id, format!("turn {pos} has no tokens")));
        }
    }
    let roles = raw.roles();
    if roles.len() > 2 {
        return Err(Error::dialogue(
            id,
            format!(
                "more than two roles: {}",
                roles.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(", ")
            ),
        ));
    }

    let mut answered: BTreeMap<usize, usize> = BTreeMap::new();
    for &(q, a) in &raw.gold_pairs {
        let n = raw.turns.len();
        if q >= n || a >= n {
            return Err(Error::dialogue(
                id,
                format!("gold pair ({q}, {a}) out of range for {n} turns"),
            ));
        }
        if a <= q {
            return Err(Error::dialogue(
                id,
                format!("gold pair ({q}, {a}): answer precedes question"),
            ));
        }
        if raw.turns[q].label != TurnLabel::Q {
            return Err(Error::dialogue(
                id,
                format!("gold pair ({q}, {a}): turn {q} is not a question"),
            ));
        }
        if raw.turns[a].label != TurnLabel::NQ {
            return Err(Error::dialogue(
                id,
                format!("gold pair ({q}, {a}): turn {a} is not a non-question"),
            ));
        }
        if raw.turns[q].role == raw.turns[a].role {
            return Err(Error::dialogue(
                id,
                format!("gold pair ({q}, {a}): both turns uttered by the same role"),
            ));
        }
        if let Some(prev) = answered.insert(a, q) {
            return Err(Error::dialogue(
                id,
                format!("turn {a} answers both question {prev} and question {q}"),
            ));
        }
    }
    Ok(raw)
}

/// Which turns count as the history of a candidate pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HistoryScope {
    /// Turns strictly between the question and the non-question.
    #[default]
    Between,
    /// Every turn before the question.
    BeforeQuestion,
    /// Every turn before the non-question, the question included.
    BeforeAnswer,
}

impl HistoryScope {
    fn range(self, q: usize, nq: usize) -> std::ops::Range<usize> {
        match self {
            HistoryScope::Between => q + 1..nq,
            HistoryScope::BeforeQuestion => 0..q,
            HistoryScope::BeforeAnswer => 0..nq,
        }
    }
}

/// History turn indices of one pair, together with the role partition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairHistory {
    pub turns: Vec<usize>,
    /// Turns uttered by the question's speaker.
    pub h_rq: Vec<usize>,
    /// Turns uttered by the non-question's speaker.
    pub h_rnq: Vec<usize>,
}

/// Collects the history of `(q, nq)` under `scope` and splits it by role.
pub fn pair_history(d: &Dialogue, q: usize, nq: usize, scope: HistoryScope) -> PairHistory {
    let rq = &d.turns[q].role;
    let mut out = PairHistory::default();
    for t in scope.range(q, nq) {
        out.turns.push(t);
        if &d.turns[t].role == rq {
            out.h_rq.push(t);
        } else {
            out.h_rnq.push(t);
        }
    }
    out
}

/// One Q–NQ instance with its distance, history partition and gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub dialogue_id: String,
    pub q_index: usize,
    pub nq_index: usize,
    pub distance: usize,
    pub history: Vec<usize>,
    pub h_rq: Vec<usize>,
    pub h_rnq: Vec<usize>,
    pub gold: bool,
}

/// Enumerates every role-alternating question-before-non-question pair of a
/// validated dialogue, ordered by non-question index and then question index.
pub fn build_candidate_pairs(d: &Dialogue) -> Vec<CandidatePair> {
    let mut pairs = Vec::new();
    for (j, nq) in d.turns.iter().enumerate() {
        if nq.label != TurnLabel::NQ {
            continue;
        }
        for i in 0..j {
            if !d.is_candidate(i, j) {
                continue;
            }
            let PairHistory { turns, h_rq, h_rnq } =
                pair_history(d, i, j, HistoryScope::Between);
            pairs.push(CandidatePair {
                dialogue_id: d.id.clone(),
                q_index: i,
                nq_index: j,
                distance: j - i,
                history: turns,
                h_rq,
                h_rnq,
                gold: d.gold_pairs.contains(&(i, j)),
            });
        }
    }
    pairs
}

/// One-hot distance encoding; distances of ten or more share the last slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DistanceVector([u8; DISTANCE_DIMS]);

impl DistanceVector {
    pub fn components(&self) -> [u8; DISTANCE_DIMS] {
        self.0
    }

    /// 1-based position of the hot component.
    pub fn bucket(&self) -> usize {
        self.0.iter().position(|&c| c == 1).map(|p| p + 1).unwrap_or(0)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| f64::from(c)).collect()
    }
}

/// Encodes a pair distance. Panics when `distance` is zero.
pub fn encode_distance(distance: usize) -> DistanceVector {
    assert!(distance >= 1, "distance must be at least 1, got {distance}");
    let mut v = [0u8; DISTANCE_DIMS];
    v[distance.min(DISTANCE_DIMS) - 1] = 1;
    DistanceVector(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::worked_case;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn worked_case_validates() {
        assert!(validate_dialogue(worked_case()).is_ok());
    }

    #[test]
    fn answer_before_question_rejected() {
        let mut d = worked_case();
        d.gold_pairs.insert((2, 1));
        let err = validate_dialogue(d).unwrap_err().to_string();
        assert!(err.contains("answer precedes question"), "{err}");
    }

    #[test]
    fn same_role_gold_rejected() {
        let mut d = worked_case();
        d.gold_pairs.insert((0, 2));
        let err = validate_dialogue(d).unwrap_err().to_string();
        assert!(err.contains("same role"), "{err}");
    }

    #[test]
    fn third_role_rejected() {
        let mut d = worked_case();
        d.turns[2].role = Role::new("X");
        let err = validate_dialogue(d).unwrap_err().to_string();
        assert!(err.contains("more than two roles"), "{err}");
    }

    #[test]
    fn empty_turn_and_double_answer_rejected() {
        let mut d = worked_case();
        d.turns[1].tokens.clear();
        assert!(validate_dialogue(d).is_err());

        let mut d = worked_case();
        d.turns[1].label = TurnLabel::Q;
        d.gold_pairs.insert((1, 4));
        let err = validate_dialogue(d).unwrap_err().to_string();
        assert!(err.contains("answers both"), "{err}");
    }

    #[test]
    fn worked_case_pairs() {
        let d = worked_case();
        let got: Vec<(usize, usize, bool)> = build_candidate_pairs(&d)
            .iter()
            .map(|p| (p.q_index, p.nq_index, p.gold))
            .collect();
        assert_eq!(
            got,
            vec![
                (0, 1, false),
                (3, 4, true),
                (0, 5, true),
                (0, 6, true),
                (0, 7, true)
            ]
        );
        let p05 = build_candidate_pairs(&d)
            .into_iter()
            .find(|p| p.q_index == 0 && p.nq_index == 5)
            .unwrap();
        assert_eq!(p05.distance, 5);
        assert_eq!(p05.history, vec![1, 2, 3, 4]);
        assert_eq!(p05.h_rq, vec![2, 4]);
        assert_eq!(p05.h_rnq, vec![1, 3]);
    }

    #[test]
    fn two_turn_dialogues() {
        use TurnLabel::*;
        let d = Dialogue::from_parts("a", vec![("P1", Q, toks("x")), ("P2", NQ, toks("y"))], &[]);
        let pairs = build_candidate_pairs(&d);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].distance, 1);
        assert!(pairs[0].history.is_empty());

        let d = Dialogue::from_parts("b", vec![("P1", Q, toks("x")), ("P1", NQ, toks("y"))], &[]);
        assert!(build_candidate_pairs(&d).is_empty());
    }

    #[test]
    fn distance_encoding() {
        assert_eq!(encode_distance(4).components(), [0, 0, 0, 1, 0, 0, 0, 0, 0, 0]);
        assert_eq!(encode_distance(1).components(), [1, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(encode_distance(13).components(), [0, 0, 0, 0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(encode_distance(13).bucket(), 10);
    }

    #[test]
    #[should_panic]
    fn zero_distance_panics() {
        encode_distance(0);
    }

    #[test]
    fn history_scopes() {
        let d = worked_case();
        let h = pair_history(&d, 3, 4, HistoryScope::BeforeQuestion);
        assert_eq!(h.turns, vec![0, 1, 2]);
        assert_eq!(h.h_rq, vec![1]);
        assert_eq!(h.h_rnq, vec![0, 2]);
        let h = pair_history(&d, 3, 4, HistoryScope::BeforeAnswer);
        assert_eq!(h.turns, vec![0, 1, 2, 3]);
        assert_eq!(h.h_rq, vec![1, 3]);
    }
}
