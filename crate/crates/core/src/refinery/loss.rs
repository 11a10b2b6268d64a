//! Distillation, consistency and mixup losses, and the batch objective
//! `L_total = L_dr + η (L_cr_in + L_cr_out + L_mix) + (λ/2)‖W‖²`.

use log::warn;
use rand::seq::SliceRandom;
use rand_distr::{Beta, Distribution};

use super::classifier::Classifier;
use crate::prob::{cross_entropy, cross_entropy_logits, kl_divergence, log_softmax, ProbVector};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Mean cross-entropy over samples that have a target; zero when none do.
pub fn dr_loss<T: Scalar>(preds: &[ProbVector<T>], targets: &[Option<ProbVector<T>>]) -> T {
    let mut total = T::zero();
    let mut n = 0usize;
    for (p, q) in preds.iter().zip(targets) {
        if let Some(q) = q {
            total += cross_entropy(p.as_slice(), q.as_slice());
            n += 1;
        }
    }
    if n == 0 {
        warn!("distillation loss over an empty inclusion set");
        return T::zero();
    }
    total / T::of_usize(n)
}

/// `(L_cr_in, L_cr_out)`: cross-entropy of augmented predictions against targets
/// averaged over `d_in`, and `KL(p_aug ‖ p)` averaged over `d_out`.
/// Members of `d_in` without a target are skipped.
pub fn consistency_losses<T: Scalar>(
    preds_aug: &[ProbVector<T>],
    preds: &[ProbVector<T>],
    targets: &[Option<ProbVector<T>>],
    d_in: &[usize],
    d_out: &[usize],
) -> (T, T) {
    let mean = |vals: Vec<T>| {
        if vals.is_empty() {
            T::zero()
        } else {
            let n = T::of_usize(vals.len());
            vals.into_iter().sum::<T>() / n
        }
    };
    let cr_in = mean(
        d_in.iter()
            .filter_map(|&i| targets[i].as_ref().map(|q| cross_entropy(preds_aug[i].as_slice(), q.as_slice())))
            .collect(),
    );
    let cr_out = mean(d_out.iter().map(|&i| kl_divergence(preds_aug[i].as_slice(), preds[i].as_slice())).collect());
    (cr_in, cr_out)
}

/// Interpolates each row with `partner[i]` using weight `weights[i]`:
/// `x_i ω + x_partner (1 - ω)`, and likewise for targets.
pub fn mixup_with<T: Scalar>(
    features: &[Vec<T>],
    targets: &[Vec<T>],
    partner: &[usize],
    weights: &[T],
) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    let lerp =
        |a: &[T], b: &[T], w: T| -> Vec<T> { a.iter().zip(b).map(|(&x, &y)| w * x + (T::one() - w) * y).collect() };
    partner
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(i, (&j, &w))| (lerp(&features[i], &features[j], w), lerp(&targets[i], &targets[j], w)))
        .unzip()
}

/// Mixup with partners from a seeded permutation and `ω ~ Beta(ς, ς)` per pair.
pub fn mixup_batch<T: Scalar>(
    features: &[Vec<T>],
    targets: &[Vec<T>],
    concentration: f64,
    rng: &mut Rng,
) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    let mut partner: Vec<usize> = (0..features.len()).collect();
    partner.shuffle(rng);
    let beta = Beta::new(concentration, concentration).expect("positive concentration");
    let weights: Vec<T> = partner.iter().map(|_| T::of(beta.sample(rng))).collect();
    mixup_with(features, targets, &partner, &weights)
}

/// Loss components of one batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown<T> {
    pub dr: T,
    pub cr_in: T,
    pub cr_out: T,
    pub mix: T,
    pub penalty: T,
    pub total: T,
}

/// The terms of `L_total` for one batch, with every target frozen.
///
/// `cr_out` pairs an augmented input with a fixed reference distribution (the
/// clean-view prediction, treated as a constant).
#[derive(Debug, Clone, Default)]
pub struct BatchObjective<T> {
    pub dr: Vec<(Vec<T>, Vec<T>)>,
    pub cr_in: Vec<(Vec<T>, Vec<T>)>,
    pub cr_out: Vec<(Vec<T>, Vec<T>)>,
    pub mix: Vec<(Vec<T>, Vec<T>)>,
    pub eta: T,
    pub weight_decay: T,
}

impl<T: Scalar> BatchObjective<T> {
    /// Evaluates the loss and, when `grad` is given, accumulates its gradient.
    pub fn evaluate<C: Classifier<T>>(&self, model: &C, mut grad: Option<&mut [T]>) -> LossBreakdown<T> {
        let eta = self.eta;
        let dr = ce_term(model, &self.dr, T::one(), grad.as_deref_mut());
        let (cr_in, cr_out, mix) = if eta != T::zero() {
            (
                ce_term(model, &self.cr_in, eta, grad.as_deref_mut()),
                kl_term(model, &self.cr_out, eta, grad.as_deref_mut()),
                ce_term(model, &self.mix, eta, grad.as_deref_mut()),
            )
        } else {
            (T::zero(), T::zero(), T::zero())
        };
        let penalty = model.penalty(self.weight_decay);
        if let Some(g) = grad {
            model.penalty_grad(self.weight_decay, g);
        }
        LossBreakdown { dr, cr_in, cr_out, mix, penalty, total: dr + eta * (cr_in + cr_out + mix) + penalty }
    }
}

/// Mean cross-entropy `-Σ q log softmax(f(x))`; gradient scaled by `weight / n`.
fn ce_term<T: Scalar, C: Classifier<T>>(
    model: &C,
    items: &[(Vec<T>, Vec<T>)],
    weight: T,
    mut grad: Option<&mut [T]>,
) -> T {
    if items.is_empty() {
        return T::zero();
    }
    let n = T::of_usize(items.len());
    let mut total = T::zero();
    for (x, q) in items {
        let z = model.logits(x);
        total += cross_entropy_logits(&z, q);
        if let Some(g) = grad.as_deref_mut() {
            let p = ProbVector::softmax(&z);
            let mass: T = q.iter().copied().sum();
            let dz: Vec<T> = p.as_slice().iter().zip(q).map(|(&pj, &qj)| (pj * mass - qj) * weight / n).collect();
            model.backward(x, &dz, g);
        }
    }
    total / n
}

/// Mean `KL(softmax(f(x)) ‖ r)`; `∂/∂z_k = p_k (ln p_k - ln r_k - KL)`.
fn kl_term<T: Scalar, C: Classifier<T>>(
    model: &C,
    items: &[(Vec<T>, Vec<T>)],
    weight: T,
    mut grad: Option<&mut [T]>,
) -> T {
    if items.is_empty() {
        return T::zero();
    }
    let n = T::of_usize(items.len());
    let mut total = T::zero();
    for (x, r) in items {
        let z = model.logits(x);
        let logp = log_softmax(&z);
        let p: Vec<T> = logp.iter().map(|l| l.exp()).collect();
        let logr: Vec<T> = r.iter().map(|&v| v.max(T::min_positive_value()).ln()).collect();
        let kl: T = p.iter().zip(&logp).zip(&logr).map(|((&pj, &lp), &lr)| pj * (lp - lr)).sum();
        total += kl;
        if let Some(g) = grad.as_deref_mut() {
            let dz: Vec<T> =
                p.iter().zip(&logp).zip(&logr).map(|((&pj, &lp), &lr)| pj * (lp - lr - kl) * weight / n).collect();
            model.backward(x, &dz, g);
        }
    }
    total / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refinery::classifier::LinearSoftmax;
    use crate::rng::{stream, Stream};
    use approx::assert_abs_diff_eq;

    fn pv(v: &[f64]) -> ProbVector<f64> {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn dr_loss_cases() {
        let q = ProbVector::<f64>::one_hot(1, 4);
        assert_eq!(dr_loss(std::slice::from_ref(&q), &[Some(q.clone())]), 0.0);
        let u = ProbVector::<f64>::uniform(4);
        assert_abs_diff_eq!(dr_loss(std::slice::from_ref(&u), &[Some(q.clone())]), 4f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(dr_loss(std::slice::from_ref(&u), &[Some(q.clone())]), 1.3863, epsilon = 1e-4);
        // mean of ln 4 and 0, with an excluded sample in between
        let l = dr_loss(&[u.clone(), u.clone(), q.clone()], &[Some(q.clone()), None, Some(q.clone())]);
        assert_abs_diff_eq!(l, 4f64.ln() / 2.0, epsilon = 1e-12);
        assert_eq!(dr_loss::<f64>(&[u], &[None]), 0.0);
    }

    #[test]
    fn consistency_identities() {
        let p = vec![pv(&[0.5, 0.5]), pv(&[0.9, 0.1])];
        let targets = vec![Some(pv(&[1.0, 0.0])), None];
        let (_, out) = consistency_losses(&p, &p, &targets, &[0], &[1]);
        assert_eq!(out, 0.0);
        let aug = vec![pv(&[1.0, 0.0]), pv(&[0.5, 0.5])];
        let (cr_in, cr_out) = consistency_losses(&aug, &p, &targets, &[0], &[1]);
        assert_eq!(cr_in, 0.0);
        assert_abs_diff_eq!(cr_out, 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln(), epsilon = 1e-12);
        assert_eq!(consistency_losses::<f64>(&aug, &p, &targets, &[], &[]), (0.0, 0.0));
    }

    #[test]
    fn mixup_endpoints() {
        let x = vec![vec![1.0f64, 2.0], vec![3.0, 4.0]];
        let q = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let (mx, mq) = mixup_with(&x, &q, &[1, 0], &[1.0, 1.0]);
        assert_eq!((mx, mq), (x.clone(), q.clone()));
        let (mx, mq) = mixup_with(&x, &q, &[1, 0], &[0.5, 0.5]);
        assert_eq!(mq[0], vec![0.5, 0.5, 0.0]);
        assert_eq!(mx[0], vec![2.0, 3.0]);
    }

    #[test]
    fn mixup_batch_is_seeded() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let q: Vec<Vec<f64>> = (0..8).map(|i| vec![(i % 2) as f64, 1.0 - (i % 2) as f64]).collect();
        let a = mixup_batch(&x, &q, 4.0, &mut stream(3, Stream::Mixup));
        let b = mixup_batch(&x, &q, 4.0, &mut stream(3, Stream::Mixup));
        assert_eq!(a, b);
        for t in &a.1 {
            assert_abs_diff_eq!(t.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn objective_without_eta_is_plain_cross_entropy() {
        let model = LinearSoftmax::<f64>::from_params(2, 2, vec![0.3, -0.2, 0.1, 0.4, 0.0, 0.05]).unwrap();
        let obj = BatchObjective {
            dr: vec![(vec![1.0, 2.0], vec![0.0, 1.0])],
            cr_in: vec![(vec![9.0, 9.0], vec![1.0, 0.0])],
            eta: 0.0,
            weight_decay: 0.0,
            ..Default::default()
        };
        let l = obj.evaluate(&model, None);
        let p = model.forward(&[1.0, 2.0]);
        assert_abs_diff_eq!(l.total, -p.get(1).ln(), epsilon = 1e-12);
        assert_eq!(l.cr_in, 0.0);
    }
}
