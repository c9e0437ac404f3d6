use std::collections::BTreeSet;

use proptest::prelude::*;
use qamatch::data::split_dialogues;
use qamatch::dialogue::{
    build_candidate_pairs, encode_distance, validate_dialogue, Dialogue, TurnLabel, DISTANCE_DIMS,
};
use qamatch::embeddings::TokenizerSpec;
use qamatch::io::{read_dialogues, write_dialogues};
use qamatch::matcher::{baseline_gd, greedy_match_with, GdRule};
use qamatch::numerics::{RandomSource, Tensor};
use rand::SeedableRng;

/// Valid dialogues of 2 to 14 turns with a random gold matching.
fn arb_dialogue() -> impl Strategy<Value = Dialogue> {
    prop::collection::vec((any::<bool>(), any::<bool>(), 1usize..4, any::<u8>()), 2..15).prop_map(|turns| {
        let mut d = Dialogue::from_parts(
            "p",
            turns.iter().enumerate().map(|(k, &(role, q, len, _))| {
                let label = if q { TurnLabel::Q } else { TurnLabel::NQ };
                let tokens = (0..len).map(|w| format!("t{}", (k + w) % 7)).collect();
                (if role { "A" } else { "B" }, label, tokens)
            }),
            &[],
        );
        for (nq, &(_, _, _, pick)) in turns.iter().enumerate() {
            let options: Vec<usize> = (0..nq).filter(|&q| d.is_candidate(q, nq)).collect();
            if !options.is_empty() && pick % 3 != 0 {
                d.gold_pairs.insert((options[pick as usize % options.len()], nq));
            }
        }
        validate_dialogue(d).expect("generated dialogue is valid")
    })
}

fn pair_set(pairs: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
    pairs.iter().copied().collect()
}

proptest! {
    #[test]
    fn candidate_pairs_follow_the_constraints(d in arb_dialogue()) {
        let pairs = build_candidate_pairs(&d);
        let mut brute = Vec::new();
        for j in 0..d.len() {
            for i in 0..j {
                let (q, nq) = (&d.turns[i], &d.turns[j]);
                if q.label == TurnLabel::Q && nq.label == TurnLabel::NQ && q.role != nq.role {
                    brute.push((i, j));
                }
            }
        }
        let got: Vec<(usize, usize)> = pairs.iter().map(|p| (p.q_index, p.nq_index)).collect();
        prop_assert_eq!(got, brute);
        for p in &pairs {
            prop_assert_eq!(p.distance, p.nq_index - p.q_index);
            prop_assert_eq!(p.history.len(), p.distance - 1);
            prop_assert_eq!(p.h_rq.len() + p.h_rnq.len(), p.history.len());
            prop_assert_eq!(p.gold, d.gold_pairs.contains(&(p.q_index, p.nq_index)));
        }
        let positives = pairs.iter().filter(|p| p.gold).count();
        prop_assert_eq!(positives, d.gold_pairs.len());
    }

    #[test]
    fn distance_is_one_hot(dist in 1usize..200) {
        let v = encode_distance(dist);
        prop_assert_eq!(v.components().iter().map(|&c| c as usize).sum::<usize>(), 1);
        prop_assert_eq!(v.bucket(), dist.min(DISTANCE_DIMS));
    }

    #[test]
    fn greedy_match_is_a_thresholded_assignment(
        d in arb_dialogue(),
        seed in any::<u64>(),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let score = |q: usize, nq: usize| {
            let h = seed ^ ((q as u64) << 32 | nq as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            (h >> 11) as f64 / (1u64 << 53) as f64
        };
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let low = greedy_match_with(&d, lo, score);
        let high = greedy_match_with(&d, hi, score);
        let mut answered = BTreeSet::new();
        for (k, &(q, nq)) in low.pairs.iter().enumerate() {
            prop_assert!(d.is_candidate(q, nq));
            prop_assert!(answered.insert(nq), "turn {nq} matched twice");
            let p = low.probs.as_ref().unwrap()[k];
            prop_assert!(p > lo);
            for other in (0..nq).filter(|&o| d.is_candidate(o, nq)) {
                prop_assert!(score(other, nq) <= p);
            }
        }
        prop_assert!(pair_set(&high.pairs).is_subset(&pair_set(&low.pairs)));
    }

    #[test]
    fn scan_rules_nest(d in arb_dialogue()) {
        let run = |rule| pair_set(&baseline_gd(&d, rule, false).pairs);
        let (gd1, gdn, gd1j, gdnj) = (run(GdRule::GD1), run(GdRule::GDN), run(GdRule::GD1_J), run(GdRule::GDN_J));
        prop_assert!(gd1.is_subset(&gdn));
        prop_assert!(gd1.is_subset(&gd1j));
        prop_assert!(gdn.is_subset(&gdnj));
        prop_assert!(gd1j.is_subset(&gdnj));
        for &(q, a) in &gdnj {
            prop_assert!(d.is_candidate(q, a));
        }
        for rule in GdRule::ALL {
            prop_assert_eq!(baseline_gd(&d, rule, true).pairs, baseline_gd(&d, rule, false).pairs);
        }
    }

    #[test]
    fn jsonl_roundtrip(ds in prop::collection::vec(arb_dialogue(), 1..5)) {
        let ds: Vec<Dialogue> = ds
            .into_iter()
            .enumerate()
            .map(|(k, mut d)| {
                d.id = format!("d{k}");
                d
            })
            .collect();
        let mut buf = Vec::new();
        write_dialogues(&mut buf, &ds).unwrap();
        let back = read_dialogues(buf.as_slice(), TokenizerSpec::Whitespace).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn split_is_a_partition(n in 0usize..60, seed in any::<u64>()) {
        let ds: Vec<Dialogue> = (0..n)
            .map(|k| Dialogue::from_parts(&format!("d{k}"), [("A", TurnLabel::Q, vec!["x".into()])], &[]))
            .collect();
        let split = split_dialogues(ds, &mut RandomSource::new(seed).stream("split"));
        let mut ids: Vec<usize> = split
            .parts()
            .iter()
            .flat_map(|(_, part)| part.iter().map(|d| d.id[1..].parse::<usize>().unwrap()))
            .collect();
        prop_assert_eq!(split.test.len(), (n as f64 * 0.2).round() as usize);
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn tensor_json_roundtrip(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t = Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1e3..1e3)).collect());
        let back: Tensor = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        prop_assert_eq!(back, t);
    }
}
