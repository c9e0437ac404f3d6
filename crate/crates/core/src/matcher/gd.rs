//! Greedy forward-scan baselines.

use std::fmt;
use std::str::FromStr;

use super::MatchResult;
use crate::dialogue::Dialogue;
use crate::error::{Error, Result};

/// A forward-scan rule: `multi` keeps matching after the first answer,
/// `jump` skips the asker's own non-questions instead of stopping there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GdRule {
    pub multi: bool,
    pub jump: bool,
}

impl GdRule {
    pub const GD1: GdRule = GdRule { multi: false, jump: false };
    pub const GDN: GdRule = GdRule { multi: true, jump: false };
    pub const GD1_J: GdRule = GdRule { multi: false, jump: true };
    pub const GDN_J: GdRule = GdRule { multi: true, jump: true };
    pub const ALL: [GdRule; 4] = [GdRule::GD1, GdRule::GDN, GdRule::GD1_J, GdRule::GDN_J];

    pub fn name(self) -> &'static str {
        match (self.multi, self.jump) {
            (false, false) => "gd1",
            (true, false) => "gdn",
            (false, true) => "gd1+j",
            (true, true) => "gdn+j",
        }
    }
}

impl fmt::Display for GdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GdRule::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown rule `{s}`")))
    }
}

/// Answers claimed by each question, in scan order, before any conflict
/// resolution. Questions without claims are omitted.
pub fn gd_claims(d: &Dialogue, rule: GdRule) -> Vec<(usize, Vec<usize>)> {
    let mut out = Vec::new();
    for (i, q) in d.turns.iter().enumerate() {
        if !q.is_question() {
            continue;
        }
        let mut claimed = Vec::new();
        for t in &d.turns[i + 1..] {
            if t.is_question() {
                break;
            }
            if t.role != q.role {
                claimed.push(t.index);
                if !rule.multi {
                    break;
                }
            } else if !rule.jump {
                break;
            }
        }
        if !claimed.is_empty() {
            out.push((i, claimed));
        }
    }
    out
}

/// Runs a scan rule. With `resolve`, an answer claimed by several questions
/// goes to the latest of them; otherwise every claim is kept.
pub fn baseline_gd(d: &Dialogue, rule: GdRule, resolve: bool) -> MatchResult {
    let mut owner: Vec<Option<usize>> = vec![None; d.len()];
    let mut pairs = Vec::new();
    for (q, answers) in gd_claims(d, rule) {
        for a in answers {
            if resolve {
                owner[a] = Some(owner[a].map_or(q, |p| p.max(q)));
            } else {
                pairs.push((q, a));
            }
        }
    }
    if resolve {
        pairs.extend(owner.iter().enumerate().filter_map(|(a, q)| q.map(|q| (q, a))));
    }
    MatchResult::new(d.id.clone(), pairs)
}
