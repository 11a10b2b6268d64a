//! Per-epoch target construction: renormalization over candidate sets,
//! out-of-candidate filtering, class-wise small-loss selection, high-confidence
//! selection, sharpening and final target assembly.

use crate::label::CandidateSet;
use crate::prob::{cross_entropy, ProbVector};
use crate::scalar::Scalar;

/// Result of restricting a prediction to a candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct Renormalized<T> {
    pub target: ProbVector<T>,
    /// True when the restricted mass was zero and the uniform fallback was used.
    pub fell_back: bool,
}

/// Restricts `prev_pred` to `set` and renormalizes; without a previous prediction
/// (first epoch) the target is uniform over `set`.
pub fn renormalize_target<T: Scalar>(
    prev_pred: Option<&ProbVector<T>>,
    set: &CandidateSet,
    num_classes: usize,
) -> Renormalized<T> {
    let Some(prev) = prev_pred else {
        return Renormalized { target: ProbVector::uniform_over(set, num_classes), fell_back: false };
    };
    let mass: T = set.iter().map(|j| prev.get(j)).sum();
    if !(mass > T::zero()) || !mass.is_finite() {
        return Renormalized { target: ProbVector::uniform_over(set, num_classes), fell_back: true };
    }
    let mut values = vec![T::zero(); num_classes];
    for j in set.iter() {
        values[j] = prev.get(j) / mass;
    }
    Renormalized { target: ProbVector::from_raw_unchecked(values), fell_back: false }
}

/// Splits positions into (in-candidate, out-of-candidate) by whether the
/// prediction's argmax lies in the candidate set.
pub fn partition_out_of_candidate<T: Scalar>(
    preds: &[ProbVector<T>],
    candidates: &[&CandidateSet],
) -> (Vec<usize>, Vec<usize>) {
    let mut d_in = Vec::new();
    let mut d_out = Vec::new();
    for (i, (p, s)) in preds.iter().zip(candidates).enumerate() {
        if s.contains(p.argmax()) {
            d_in.push(i);
        } else {
            d_out.push(i);
        }
    }
    (d_in, d_out)
}

/// Class-wise small-loss selection over `pool` (positions into `preds`/`targets`).
///
/// Samples are bucketed by predicted class; each bucket of size `n_c` keeps its
/// `max(1, ⌊δ n_c⌋)` smallest-loss members, ties broken by position.
pub fn select_small_loss<T: Scalar>(
    preds: &[ProbVector<T>],
    targets: &[ProbVector<T>],
    pool: &[usize],
    delta: f64,
) -> Vec<usize> {
    let num_classes = preds.first().map_or(0, ProbVector::len);
    let mut buckets: Vec<Vec<(T, usize)>> = vec![Vec::new(); num_classes];
    for &i in pool {
        let loss = cross_entropy(preds[i].as_slice(), targets[i].as_slice());
        buckets[preds[i].argmax()].push((loss, i));
    }
    let mut selected = Vec::new();
    for mut bucket in buckets {
        if bucket.is_empty() {
            continue;
        }
        bucket.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        let keep = ((delta * bucket.len() as f64).floor() as usize).clamp(1, bucket.len());
        selected.extend(bucket[..keep].iter().map(|&(_, i)| i));
    }
    selected.sort_unstable();
    selected
}

/// Members of `pool` whose top prediction strictly exceeds `tau`.
pub fn select_high_confidence<T: Scalar>(preds: &[ProbVector<T>], pool: &[usize], tau: f64) -> Vec<usize> {
    let tau = T::of(tau);
    pool.iter().copied().filter(|&i| preds[i].max() > tau).collect()
}

/// Power transform `q_j^{1/γ} / Σ_c q_c^{1/γ}`.
pub fn sharpen<T: Scalar>(q: &ProbVector<T>, gamma: f64) -> ProbVector<T> {
    if gamma == 1.0 {
        return q.clone();
    }
    let power = T::one() / T::of(gamma);
    let powered: Vec<T> = q.as_slice().iter().map(|&v| if v > T::zero() { v.powf(power) } else { T::zero() }).collect();
    let sum: T = powered.iter().copied().sum();
    if !(sum > T::zero()) || !sum.is_finite() {
        return q.clone();
    }
    ProbVector::from_raw_unchecked(powered.into_iter().map(|v| v / sum).collect())
}

/// Which training target a sample receives in the current epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    /// In-candidate and small-loss: sharpened renormalized target.
    Reliable,
    /// In-candidate, not selected: renormalized target.
    Candidate,
    /// Out-of-candidate with high confidence: one-hot at the prediction.
    Confident,
    /// Out-of-candidate, low confidence: no distillation target.
    Excluded,
}

impl Route {
    pub fn in_candidate(self) -> bool {
        matches!(self, Route::Reliable | Route::Candidate)
    }
}

/// Index sets of one epoch, as positions into the training subset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partition {
    pub d_in: Vec<usize>,
    pub d_out: Vec<usize>,
    pub d_sl: Vec<usize>,
    pub d_hc: Vec<usize>,
}

impl Partition {
    /// Every position in-candidate; used during warm-up.
    pub fn all_in(n: usize) -> Self {
        Self { d_in: (0..n).collect(), ..Self::default() }
    }

    pub fn routes(&self, n: usize) -> Vec<Route> {
        let mut routes = vec![Route::Excluded; n];
        for &i in &self.d_in {
            routes[i] = Route::Candidate;
        }
        for &i in &self.d_sl {
            routes[i] = Route::Reliable;
        }
        for &i in &self.d_hc {
            routes[i] = Route::Confident;
        }
        routes
    }

    /// Checks `D_in ⊔ D_out = 0..n`, `D_sl ⊆ D_in`, `D_hc ⊆ D_out`.
    pub fn is_consistent(&self, n: usize) -> bool {
        let mut seen = vec![0u8; n];
        for &i in self.d_in.iter().chain(&self.d_out) {
            if i >= n {
                return false;
            }
            seen[i] += 1;
        }
        let is_in = |i: &usize| self.d_in.binary_search(i).is_ok();
        let is_out = |i: &usize| self.d_out.binary_search(i).is_ok();
        seen.iter().all(|&k| k == 1) && self.d_sl.iter().all(is_in) && self.d_hc.iter().all(is_out)
    }
}

/// Routes every sample to its target: sharpened for `D_sl`, plain renormalized for
/// the rest of `D_in`, one-hot at the predicted class for `D_hc`, none otherwise.
pub fn assemble_targets<T: Scalar>(
    partition: &Partition,
    renormalized: &[ProbVector<T>],
    preds: &[ProbVector<T>],
    gamma: f64,
) -> Vec<Option<ProbVector<T>>> {
    let n = renormalized.len();
    partition
        .routes(n)
        .into_iter()
        .enumerate()
        .map(|(i, route)| match route {
            Route::Reliable => Some(sharpen(&renormalized[i], gamma)),
            Route::Candidate => Some(renormalized[i].clone()),
            Route::Confident => Some(ProbVector::one_hot(preds[i].argmax(), preds[i].len())),
            Route::Excluded => None,
        })
        .collect()
}

/// Thresholds of one refinement step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionParams {
    pub delta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub filter_out_of_candidate: bool,
}

/// Everything the trainer needs for one post-warm-up epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPlan<T> {
    pub targets: Vec<Option<ProbVector<T>>>,
    pub partition: Partition,
    /// Positions whose renormalization fell back to uniform.
    pub fallbacks: Vec<usize>,
}

/// Builds targets from the previous epoch's predictions.
pub fn plan_epoch<T: Scalar>(
    preds: &[ProbVector<T>],
    candidates: &[&CandidateSet],
    params: &SelectionParams,
) -> EpochPlan<T> {
    let c = preds.first().map_or(0, ProbVector::len);
    let mut fallbacks = Vec::new();
    let renormalized: Vec<ProbVector<T>> = preds
        .iter()
        .zip(candidates)
        .enumerate()
        .map(|(i, (p, s))| {
            let r = renormalize_target(Some(p), s, c);
            if r.fell_back {
                fallbacks.push(i);
            }
            r.target
        })
        .collect();
    let (d_in, d_out) = if params.filter_out_of_candidate {
        partition_out_of_candidate(preds, candidates)
    } else {
        ((0..preds.len()).collect(), Vec::new())
    };
    let d_sl = select_small_loss(preds, &renormalized, &d_in, params.delta);
    let d_hc = select_high_confidence(preds, &d_out, params.tau);
    let partition = Partition { d_in, d_out, d_sl, d_hc };
    let targets = assemble_targets(&partition, &renormalized, preds, params.gamma);
    EpochPlan { targets, partition, fallbacks }
}
