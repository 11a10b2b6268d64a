use candidate_distill::refinery::{
    predict, renormalize_target, select_small_loss, sharpen, train, LinearSoftmax, Mlp, RefineryConfig,
};
use candidate_distill::synth::{gen_synthetic, NoiseSpec, SynthConfig};
use candidate_distill::{CandidateSet, Dataset, ProbVector};
use proptest::prelude::*;

fn blobs(inclusion: f64, mean_size: f64, seed: u64) -> Dataset {
    gen_synthetic(&SynthConfig {
        num_classes: 3,
        per_class: 60,
        dim: 4,
        sep: 4.0,
        noise: NoiseSpec { inclusion, mean_size },
        seed,
    })
    .unwrap()
}

fn short(seed: u64) -> RefineryConfig {
    RefineryConfig { epochs: 12, warmup_epochs: 2, eta_ramp_epochs: 3, seed, ..RefineryConfig::default() }
}

#[test]
fn clean_singletons_are_learned() {
    let ds = blobs(1.0, 1.0, 1);
    let out = train::<f64, _>(&ds, LinearSoftmax::zeros(4, 3), &short(0)).unwrap();
    assert!(out.history.final_train_acc().unwrap() > 0.95, "{:?}", out.history.final_train_acc());
}

#[test]
fn ambiguous_sets_still_resolve_to_gold() {
    let ds = blobs(1.0, 2.0, 2);
    let out = train::<f64, _>(&ds, Mlp::init(4, 16, 3, 5), &short(5)).unwrap();
    assert!(out.history.final_train_acc().unwrap() > 0.9);
}

#[test]
fn same_seed_same_model() {
    let ds = blobs(0.8, 1.5, 3);
    let a = train::<f64, _>(&ds, Mlp::init(4, 8, 3, 1), &short(9)).unwrap();
    let b = train::<f64, _>(&ds, Mlp::init(4, 8, 3, 1), &short(9)).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(predict(&a.model, &ds).unwrap().probs, predict(&b.model, &ds).unwrap().probs);
    let c = train::<f64, _>(&ds, Mlp::init(4, 8, 3, 1), &short(10)).unwrap();
    assert_ne!(a.history.step_losses, c.history.step_losses);
}

#[test]
fn single_precision_tracks_double() {
    let ds = blobs(0.9, 1.5, 4);
    let wide = train::<f64, _>(&ds, LinearSoftmax::zeros(4, 3), &short(2)).unwrap();
    let narrow = train::<f32, _>(&ds, LinearSoftmax::zeros(4, 3), &short(2)).unwrap();
    let a = wide.history.final_train_acc().unwrap();
    let b = narrow.history.final_train_acc().unwrap();
    assert!((a - b).abs() <= 0.05, "f64 {a} vs f32 {b}");
}

#[test]
fn sharpen_hand_values() {
    // [0.2, 0.8] with γ = 0.5 squares: 0.04 / 0.68 and 0.64 / 0.68.
    let q = ProbVector::new(vec![0.2f64, 0.8]).unwrap();
    let s = sharpen(&q, 0.5);
    approx::assert_relative_eq!(s.get(0), 0.04 / 0.68, max_relative = 1e-12);
    approx::assert_relative_eq!(s.get(1), 0.64 / 0.68, max_relative = 1e-12);
    assert_eq!(sharpen(&q, 1.0), q);
}

#[test]
fn renormalization_hand_values() {
    let p = ProbVector::new(vec![0.1f64, 0.3, 0.6]).unwrap();
    let set = CandidateSet::new([0, 1], 3).unwrap();
    let r = renormalize_target(Some(&p), &set, 3);
    assert!(!r.fell_back);
    approx::assert_relative_eq!(r.target.get(0), 0.25, max_relative = 1e-12);
    approx::assert_relative_eq!(r.target.get(1), 0.75, max_relative = 1e-12);
    assert_eq!(r.target.get(2), 0.0);
}

fn probs(c: usize) -> impl Strategy<Value = ProbVector<f64>> {
    proptest::collection::vec(0.01f64..1.0, c).prop_map(|w| ProbVector::from_weights(w).unwrap())
}

proptest! {
    #[test]
    fn sharpening_keeps_order_and_mass(q in probs(5), gamma in 0.1f64..1.0) {
        let s = sharpen(&q, gamma);
        prop_assert!((s.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert_eq!(s.argmax(), q.argmax());
        prop_assert!(s.max() >= q.max() - 1e-12);
    }

    #[test]
    fn small_loss_keeps_floor_per_predicted_class(
        rows in proptest::collection::vec((probs(3), probs(3)), 1..40),
        delta in 0.0f64..1.0,
    ) {
        let (preds, targets): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let pool: Vec<usize> = (0..preds.len()).collect();
        let kept = select_small_loss(&preds, &targets, &pool, delta);
        for c in 0..3 {
            let n_c = preds.iter().filter(|p| p.argmax() == c).count();
            let k_c = kept.iter().filter(|&&i| preds[i].argmax() == c).count();
            let want = if n_c == 0 { 0 } else { ((delta * n_c as f64).floor() as usize).max(1) };
            prop_assert_eq!(k_c, want);
        }
    }
}
