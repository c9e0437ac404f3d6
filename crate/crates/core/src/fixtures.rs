use crate::dialogue::{Dialogue, TurnLabel};

pub(crate) fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// The eight-turn worked case: patient question, greetings, a follow-up
/// question by the doctor, then three answer fragments.
pub(crate) fn worked_case() -> Dialogue {
    use TurnLabel::*;
    Dialogue::from_parts(
        "case",
        vec![
            ("P", Q, toks("boy 4 months tried yolk what's wrong")),
            ("D", NQ, toks("hello")),
            ("P", NQ, toks("hello")),
            ("D", Q, toks("is he four months old")),
            ("P", NQ, toks("yes")),
            ("D", NQ, toks("eat too early")),
            ("D", NQ, toks("not advise")),
            ("D", NQ, toks("difficult for digestion")),
        ],
        &[(0, 5), (0, 6), (0, 7), (3, 4)],
    )
}
