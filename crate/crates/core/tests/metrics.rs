use candidate_distill::metrics::{alpha_error, assess, beta_coverage, f1_score};
use candidate_distill::CandidateSet;
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (usize, Vec<(Vec<usize>, usize)>)> {
    (2usize..=10).prop_flat_map(|c| {
        let row = (proptest::sample::subsequence((0..c).collect::<Vec<_>>(), 1..=c), 0..c);
        (Just(c), proptest::collection::vec(row, 1..=50))
    })
}

fn split(c: usize, rows: &[(Vec<usize>, usize)]) -> (Vec<CandidateSet>, Vec<usize>) {
    let sets = rows.iter().map(|(s, _)| CandidateSet::new(s.clone(), c).unwrap()).collect();
    (sets, rows.iter().map(|&(_, g)| g).collect())
}

proptest! {
    #[test]
    fn f1_field_is_f1_of_reported_rates((c, rows) in instance()) {
        let (sets, gold) = split(c, &rows);
        let r = assess(&sets, &gold, c).unwrap();
        prop_assert_eq!(r.f1, f1_score(r.one_minus_alpha, r.beta));
    }

    #[test]
    fn adding_gold_never_lowers_inclusion((c, rows) in instance(), pick in any::<prop::sample::Index>()) {
        let (sets, gold) = split(c, &rows);
        let before = alpha_error(&sets, &gold).unwrap();
        let i = pick.index(sets.len());
        let mut grown = sets.clone();
        let mut labels = grown[i].labels().to_vec();
        labels.push(gold[i]);
        grown[i] = CandidateSet::new(labels, c).unwrap();
        prop_assert!(alpha_error(&grown, &gold).unwrap() >= before);
    }

    #[test]
    fn growing_a_set_never_raises_coverage((c, rows) in instance(), pick in any::<prop::sample::Index>(), extra in 0usize..10) {
        let (sets, _) = split(c, &rows);
        let before = beta_coverage(&sets, c).unwrap();
        let i = pick.index(sets.len());
        let mut grown = sets.clone();
        let mut labels = grown[i].labels().to_vec();
        labels.push(extra % c);
        grown[i] = CandidateSet::new(labels, c).unwrap();
        prop_assert!(beta_coverage(&grown, c).unwrap() <= before);
    }

    #[test]
    fn singleton_accuracy_is_inclusion((c, rows) in instance()) {
        let rows: Vec<_> = rows.into_iter().map(|(s, g)| (vec![s[0]], g)).collect();
        let (sets, gold) = split(c, &rows);
        let r = assess(&sets, &gold, c).unwrap();
        prop_assert_eq!(r.accuracy, Some(r.one_minus_alpha));
        prop_assert_eq!(r.beta, 1.0);
    }
}

#[test]
fn perfect_singletons_score_one() {
    let sets: Vec<_> = (0..6).map(|y| CandidateSet::singleton(y, 6).unwrap()).collect();
    let r = assess(&sets, &[0, 1, 2, 3, 4, 5], 6).unwrap();
    assert_eq!((r.one_minus_alpha, r.beta, r.f1), (1.0, 1.0, 1.0));
}

#[test]
fn zero_rates_give_zero_f1() {
    assert_eq!(f1_score(0.0, 0.0), 0.0);
}
