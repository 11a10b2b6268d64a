use candidate_distill::theory::{
    balanced_labels, build_similarity, condition_top1, condition_top2, phase_sweep, quantified_prediction,
    simulate_infinite, symmetric_eigenvalues, symmetric_grid, Mode, NoiseMatrix, TheoryParams,
};
use candidate_distill::ProbVector;
use proptest::prelude::*;

fn numeric_eigenvalues(c: usize, m: usize, a: f64, b: f64) -> Vec<f64> {
    let s = build_similarity(&balanced_labels(m, c), a, b);
    let dense = nalgebra::DMatrix::from_fn(m, m, |i, j| s[(i, j)]);
    let mut ev: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn analytic_eigenvalues(p: &TheoryParams<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = p.eigenvalues().iter().flat_map(|&(v, k)| std::iter::repeat_n(v, k)).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn eigen_families_match_dense_solver(c in 2usize..5, per in 1usize..12, b in 0.0f64..0.6, gap in 0.05f64..0.4) {
        let m = c * per;
        let a = (b + gap).min(0.99);
        let p = TheoryParams::new(c, m, a, b, 0.1).unwrap();
        let numeric = numeric_eigenvalues(c, m, a, b);
        let analytic = analytic_eigenvalues(&p);
        prop_assert_eq!(numeric.len(), analytic.len());
        for (x, y) in numeric.iter().zip(&analytic) {
            prop_assert!((x - y).abs() < 1e-8, "{} vs {}", x, y);
        }
    }

    #[test]
    fn jacobi_agrees_with_dense_solver(c in 2usize..4, per in 1usize..8, b in 0.0f64..0.5) {
        let m = c * per;
        let s = build_similarity(&balanced_labels(m, c), b + 0.3, b);
        let ours = symmetric_eigenvalues(&s, 1e-14, 100).unwrap();
        let theirs = numeric_eigenvalues(c, m, b + 0.3, b);
        for (x, y) in ours.iter().zip(&theirs) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn quantified_predictions_sum_to_one(c in 2usize..7, obs in 0usize..7, seed in 0u64..1000) {
        let obs = obs % c;
        let p = TheoryParams::new(c, 10 * c, 0.7, 0.1, 0.05).unwrap();
        let s = p.shrinkage();
        let w: Vec<f64> = (0..c).map(|k| ((seed as usize * 31 + k * 17) % 11 + 1) as f64).collect();
        let mean = ProbVector::from_weights(w).unwrap();
        let q = quantified_prediction(&ProbVector::one_hot(obs, c), &mean, s.theta, s.phi);
        let total: f64 = q.as_slice().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn top1_condition_iff_perfect_top1_student(c in 2usize..6, rho in 0.0f64..0.95, lambda in 0.001f64..0.2) {
        let p = TheoryParams::new(c, 20 * c, 0.8, 0.2, lambda).unwrap();
        let r = NoiseMatrix::symmetric(c, rho).unwrap();
        let s = p.shrinkage();
        let cond = condition_top1(&r, s.theta, s.phi).pass;
        let acc = simulate_infinite(&p, &r, Mode::Top1).unwrap().accuracy;
        prop_assert_eq!(cond, acc == 1.0, "rho={} acc={}", rho, acc);
    }

    #[test]
    fn top2_condition_iff_perfect_top2_student_without_ties(c in 3usize..6, rho in 0.001f64..0.99) {
        let p = TheoryParams::new(c, 20 * c, 0.8, 0.2, 0.01).unwrap();
        let r = NoiseMatrix::symmetric(c, rho).unwrap();
        let report = condition_top2(&r);
        prop_assume!(report.degenerate_rows.is_empty());
        let acc = simulate_infinite(&p, &r, Mode::Top2).unwrap().accuracy;
        prop_assert_eq!(report.pass, acc == 1.0, "rho={} acc={}", rho, acc);
    }

    #[test]
    fn teacher_top2_contains_truth_under_top2_condition(c in 2usize..6, seed in 0u64..10_000, lambda in 0.001f64..0.5) {
        // Random rows with a dominant diagonal.
        let mut rows = Vec::new();
        for y in 0..c {
            let w: Vec<f64> = (0..c).map(|k| ((seed as usize + 7 * y + 13 * k) % 10) as f64 + 1.0).collect();
            let off: f64 = w.iter().enumerate().filter(|&(k, _)| k != y).map(|(_, v)| v).sum();
            let diag = off * (1.0 + (seed % 5) as f64 * 0.3) + 0.5;
            let total = off + diag;
            rows.push((0..c).map(|k| if k == y { diag / total } else { w[k] / total }).collect::<Vec<_>>());
        }
        let r = NoiseMatrix::from_rows(&rows).unwrap();
        prop_assume!(condition_top2(&r).pass);
        let p = TheoryParams::new(c, 20 * c, 0.8, 0.2, lambda).unwrap();
        let s = p.shrinkage();
        for y in 0..c {
            let mean = ProbVector::new(r.row(y).to_vec()).unwrap();
            for obs in 0..c {
                let t = quantified_prediction(&ProbVector::one_hot(obs, c), &mean, s.theta, s.phi);
                let beaten_by = (0..c).filter(|&k| k != y && t.get(k) >= t.get(y)).count();
                prop_assert!(beaten_by <= 1, "class {} observed as {}: {:?}", y, obs, t.as_slice());
            }
        }
    }
}

#[test]
fn top1_threshold_is_monotone_on_a_grid() {
    for &lambda in &[0.001, 0.01, 0.05] {
        let mut last = f64::NEG_INFINITY;
        for k in 1..=8 {
            let gap = k as f64 * 0.1;
            let t = TheoryParams::new(3, 60, 0.05 + gap, 0.05, lambda).unwrap().top1_threshold();
            assert!(t > last, "threshold not increasing in a-b at lambda={lambda}");
            last = t;
        }
    }
    for &(a, b) in &[(0.8, 0.2), (0.6, 0.3), (0.95, 0.01)] {
        let mut last = f64::NEG_INFINITY;
        for k in 1..=8 {
            let t = TheoryParams::new(3, 60, a, b, 0.002 * k as f64).unwrap().top1_threshold();
            // θ/(φ-θ) = λ₃/(λ₂-λ₃) · (1 + λ₂/(Cmλ)) shrinks as λ grows.
            assert!(t > last, "threshold not increasing in lambda at a={a} b={b}");
            last = t;
        }
    }
}

#[test]
fn example_shrinkage_values() {
    let p = TheoryParams::<f64>::new(2, 100, 0.8, 0.2, 0.01).unwrap();
    let s = p.shrinkage();
    assert!((s.theta - 0.0909).abs() < 1e-4);
    assert!((s.phi - 0.93789).abs() < 1e-5);
    assert!((s.psi - 0.96169).abs() < 1e-5);
    assert!((p.top1_threshold() - 0.89267).abs() < 1e-5);
}

#[test]
fn sweep_conditions_flip_once() {
    let p = TheoryParams::new(2, 100, 0.8, 0.2, 0.01).unwrap();
    let rhos: Vec<f64> = (0..50).map(|i| i as f64 / 100.0).collect();
    let rows = phase_sweep(&p, &symmetric_grid(2, &rhos).unwrap()).unwrap();
    let flips = |f: &dyn Fn(usize) -> bool| (1..rows.len()).filter(|&i| f(i) != f(i - 1)).count();
    assert_eq!(flips(&|i| rows[i].cond_top1), 1);
    assert_eq!(flips(&|i| rows[i].cond_top2), 0);
    assert!(rows.iter().all(|r| r.cond_top2));
}

/// The literal two-class top-2 clause: unattainable, since a half/half target
/// over two classes leaves the student exactly tied in every cell.
#[test]
#[ignore = "two-class top-2 student is tied at every noise level; see README"]
fn two_class_top2_student_is_perfect_below_one_half() {
    let p = TheoryParams::new(2, 100, 0.8, 0.2, 0.01).unwrap();
    let rhos: Vec<f64> = (0..50).map(|i| i as f64 / 100.0).collect();
    let rows = phase_sweep(&p, &symmetric_grid(2, &rhos).unwrap()).unwrap();
    for r in rows {
        assert_eq!(r.top2_acc, 1.0, "rho={}", r.rho);
    }
}
