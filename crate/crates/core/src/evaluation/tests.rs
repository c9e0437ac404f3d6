use proptest::prelude::*;

use super::*;
use crate::fixtures::worked_case;

fn pred(id: &str, pairs: &[(usize, usize)]) -> MatchResult {
    MatchResult::new(id, pairs.to_vec())
}

#[test]
fn worked_case_columns() {
    let gold = [worked_case()];
    let rpn = micro_prf(&[pred("case", &[(3, 4), (0, 5)])], &gold).unwrap();
    assert_eq!((rpn.counts.tp, rpn.counts.fp, rpn.counts.fn_), (2, 0, 2));
    assert_eq!(rpn.counts.precision().reduced(), Ratio::new(1, 1));
    assert_eq!(rpn.counts.recall().reduced(), Ratio::new(1, 2));
    assert_eq!(rpn.counts.f1().reduced(), Ratio::new(2, 3));
    assert_eq!(rpn.f1, 2.0 / 3.0);

    let all: Vec<_> = gold[0].gold_pairs.iter().copied().collect();
    let hdm = micro_prf(&[pred("case", &all)], &gold).unwrap();
    assert_eq!((hdm.precision, hdm.recall, hdm.f1), (1.0, 1.0, 1.0));

    let dis = acc_at_distance(&[pred("case", &[(3, 4)])], &gold).unwrap();
    assert_eq!(dis[&Bucket::Exact(1)], Ratio::new(1, 1));
    assert_eq!(dis[&Bucket::AtLeast(5)], Ratio::new(0, 3));
    assert_eq!(dis.len(), 2);
}

#[test]
fn empty_predictions() {
    let r = micro_prf(&[], &[worked_case()]).unwrap();
    assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
}

#[test]
fn unknown_dialogue_is_an_error() {
    let err = micro_prf(&[pred("nope", &[])], &[worked_case()]).unwrap_err();
    assert!(matches!(err, Error::UnknownDialogue(ref id) if id == "nope"));
}

#[test]
fn distance_threshold_scorer_accuracy() {
    use crate::dialogue::TurnLabel::*;
    use crate::fixtures::toks;
    // One question answered at distances 1..=6 by alternating fillers.
    let mut turns = vec![("A", Q, toks("q"))];
    turns.extend((1..=6).map(|_| ("B", NQ, toks("a"))));
    let gold: Vec<_> = (1..=6).map(|a| (0, a)).collect();
    let d = Dialogue::from_parts("d", turns, &gold);
    let acc = acc_at_distance(&[pred("d", &[(0, 1), (0, 2)])], &[d.clone()]).unwrap();
    let v: Vec<f64> = acc.values().map(|r| r.value()).collect();
    assert_eq!(v, vec![1.0, 1.0, 0.0, 0.0, 0.0]);
    assert_eq!(acc_at_least(&[pred("d", &[(0, 4)])], &[d], 3).unwrap(), Some(Ratio::new(1, 4)));
}

#[test]
fn exact_mode_keeps_long_distances_apart() {
    let gold = [worked_case()];
    let acc = acc_at_distance_with(&[pred("case", &[(0, 6)])], &gold, DistanceMode::Exact).unwrap();
    assert_eq!(acc.keys().copied().collect::<Vec<_>>(), vec![
        Bucket::Exact(1),
        Bucket::Exact(5),
        Bucket::Exact(6),
        Bucket::Exact(7)
    ]);
    assert_eq!(acc[&Bucket::Exact(6)], Ratio::new(1, 1));
}

#[test]
fn report_orders_and_roundtrips() {
    let row = |name: &str, f1: f64| SystemRow {
        system: name.into(),
        metrics: MetricsSummary {
            precision: 0.1 + f1 / 3.0,
            recall: 1.0 / 7.0,
            f1,
            acc: [(Bucket::Exact(1), 0.3), (Bucket::AtLeast(5), f1 / 9.0)].into_iter().collect(),
        },
    };
    let mut partial = row("b", 0.5);
    partial.metrics.acc.remove(&Bucket::AtLeast(5));
    let r = Report::new(vec![row("c", 0.2), partial, row("a", 0.5)]);
    let names: Vec<_> = r.rows.iter().map(|r| r.system.as_str()).collect();
    assert_eq!(names, vec!["a", "b", "c"]);
    let csv = r.to_csv().unwrap();
    assert_eq!(Report::from_csv(&csv).unwrap(), r);
    let table = r.to_table();
    assert!(table.contains("50.00"), "{table}");
    let json: Report = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(json, r);
}

#[test]
fn mean_of_one_run_is_that_run() {
    let m = MetricsSummary { precision: 0.3, recall: 0.6, f1: 0.4, acc: Default::default() };
    assert_eq!(MetricsSummary::mean(std::slice::from_ref(&m)), m);
}

fn random_case() -> impl Strategy<Value = (Vec<(usize, usize)>, Vec<(usize, usize)>)> {
    let pair = (0usize..6, 1usize..6).prop_map(|(q, d)| (q, q + d));
    (prop::collection::vec(pair.clone(), 0..8), prop::collection::vec(pair, 0..8))
}

fn gold_dialogue(pairs: &[(usize, usize)]) -> Dialogue {
    let mut d = worked_case();
    d.id = "g".into();
    d.gold_pairs = pairs.iter().copied().collect();
    d
}

proptest! {
    #[test]
    fn counts_match_set_operations((p, g) in random_case()) {
        let d = gold_dialogue(&g);
        let r = micro_prf(&[pred("g", &p)], std::slice::from_ref(&d)).unwrap();
        let ps: BTreeSet<_> = p.iter().copied().collect();
        prop_assert_eq!(r.counts.tp, ps.intersection(&d.gold_pairs).count());
        prop_assert_eq!(r.counts.fp, ps.difference(&d.gold_pairs).count());
        prop_assert_eq!(r.counts.fn_, d.gold_pairs.difference(&ps).count());
        let acc = acc_at_distance(&[pred("g", &p)], std::slice::from_ref(&d)).unwrap();
        let (num, den) = acc.values().fold((0, 0), |(a, b), r| (a + r.num, b + r.den));
        prop_assert_eq!((num, den), (r.counts.tp, r.counts.tp + r.counts.fn_));
    }

    #[test]
    fn adding_pairs_is_monotone((p, g) in random_case(), extra in (0usize..6, 1usize..6)) {
        let d = gold_dialogue(&g);
        let gs = std::slice::from_ref(&d);
        let before = micro_prf(&[pred("g", &p)], gs).unwrap();
        let add = (extra.0, extra.0 + extra.1);
        let mut p2 = p.clone();
        p2.push(add);
        let after = micro_prf(&[pred("g", &p2)], gs).unwrap();
        if d.gold_pairs.contains(&add) {
            prop_assert!(after.recall >= before.recall && after.f1 >= before.f1);
        } else {
            prop_assert!(after.precision <= before.precision);
        }
    }

    #[test]
    fn mean_ignores_run_order(f in prop::collection::vec(0.0f64..1.0, 3)) {
        let runs: Vec<MetricsSummary> = f.iter().map(|&x| MetricsSummary { precision: x, recall: x, f1: x, acc: Default::default() }).collect();
        let mut rev = runs.clone();
        rev.reverse();
        let (a, b) = (MetricsSummary::mean(&runs), MetricsSummary::mean(&rev));
        prop_assert!((a.f1 - b.f1).abs() < 1e-15);
    }
}
