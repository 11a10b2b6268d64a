use candidate_distill::synth::{gen_synthetic, NoiseSpec, SynthConfig};
use candidate_distill::{load_dataset, save_dataset, CandidateSet, Dataset, LabelSpace, Sample};
use proptest::prelude::*;

fn sample_strategy(c: usize, d: usize) -> impl Strategy<Value = (Sample, Option<Vec<usize>>)> {
    (
        proptest::collection::vec(-1e6f64..1e6, d),
        proptest::option::of("[a-z ?]{0,20}"),
        proptest::option::of(0..c),
        proptest::option::of(proptest::sample::subsequence((0..c).collect::<Vec<_>>(), 1..=c)),
        proptest::collection::vec(proptest::collection::vec(-10f64..10.0, d), 0..3),
    )
        .prop_map(|(features, text, gold, cand, views)| {
            let mut s = Sample::new("", features);
            s.text = text;
            s.gold = gold;
            s.aug_features = if views.is_empty() { None } else { Some(views) };
            (s, cand)
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn save_then_load_is_identity(rows in proptest::collection::vec(sample_strategy(4, 3), 1..20)) {
        let space = LabelSpace::numbered(4).unwrap();
        let mut samples = Vec::new();
        let mut cands = Vec::new();
        for (i, (mut s, c)) in rows.into_iter().enumerate() {
            s.id = format!("x{i}");
            samples.push(s);
            cands.push(c.map(|c| CandidateSet::new(c, 4).unwrap()));
        }
        let ds = Dataset::with_candidates(space.clone(), samples, cands).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        save_dataset(&path, &ds).unwrap();
        prop_assert_eq!(load_dataset(&path, space).unwrap(), ds);
    }

    #[test]
    fn synthesis_is_a_function_of_its_config(seed in any::<u64>(), c in 3usize..6, inclusion in 0.5f64..1.0) {
        let cfg = SynthConfig {
            num_classes: c,
            per_class: 5,
            dim: 3,
            sep: 2.0,
            noise: NoiseSpec { inclusion, mean_size: 1.5 },
            seed,
        };
        let a = gen_synthetic(&cfg).unwrap();
        prop_assert_eq!(&a, &gen_synthetic(&cfg).unwrap());
        for set in a.candidates().iter().flatten() {
            prop_assert!(!set.is_empty() && set.max_label() < c);
        }
    }
}

#[test]
fn synthetic_noise_matches_its_spec_on_average() {
    let ds = gen_synthetic(&SynthConfig {
        num_classes: 4,
        per_class: 2500,
        dim: 2,
        sep: 1.0,
        noise: NoiseSpec { inclusion: 0.85, mean_size: 2.0 },
        seed: 3,
    })
    .unwrap();
    let gold = ds.gold_labels().unwrap();
    let sets: Vec<_> = ds.candidates().iter().map(|s| s.clone().unwrap()).collect();
    let r = candidate_distill::metrics::assess(&sets, &gold, 4).unwrap();
    assert!((r.one_minus_alpha - 0.85).abs() < 0.015, "{r:?}");
    assert!((r.mean_set_size - 2.0).abs() < 0.03, "{r:?}");
}

#[test]
fn invalid_candidate_labels_are_rejected() {
    assert!(CandidateSet::new([0, 4], 4).is_err());
    assert!(CandidateSet::new(Vec::<usize>::new(), 4).is_err());
}
