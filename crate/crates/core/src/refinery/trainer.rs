//! The epoch loop: warm-up on uniform candidate targets, then per-epoch
//! refinement from a frozen snapshot of the previous epoch's predictions.

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::Classifier;
use super::loss::{mixup_batch, BatchObjective, LossBreakdown};
use super::targets::{plan_epoch, EpochPlan, Partition, SelectionParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::label::CandidateSet;
use crate::prob::ProbVector;
use crate::rng::{stream, Rng, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineryConfig {
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// L2 penalty λ on classifier weights.
    pub weight_decay: f64,
    /// Small-loss ratio δ.
    pub delta: f64,
    /// Sharpening temperature γ.
    pub gamma: f64,
    /// High-confidence threshold τ.
    pub tau: f64,
    /// Mixup Beta concentration ς.
    pub mixup_concentration: f64,
    /// η rises linearly from 0 to 1 over this many post-warm-up epochs.
    pub eta_ramp_epochs: usize,
    /// Fixed η, overriding the ramp after warm-up.
    pub eta: Option<f64>,
    /// Drop low-confidence out-of-candidate samples from the distillation loss.
    pub filter_out_of_candidate: bool,
    /// Gaussian jitter as the augmented view when a sample has no `aug_features`.
    pub jitter: bool,
    /// Jitter std as a fraction of each feature's std.
    pub jitter_scale: f64,
    pub seed: u64,
}

impl Default for RefineryConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            warmup_epochs: 5,
            batch_size: 32,
            learning_rate: 0.1,
            weight_decay: 0.01,
            delta: 0.5,
            gamma: 0.85,
            tau: 0.99,
            mixup_concentration: 4.0,
            eta_ramp_epochs: 10,
            eta: None,
            filter_out_of_candidate: true,
            jitter: true,
            jitter_scale: 0.05,
            seed: 0,
        }
    }
}

impl RefineryConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} = {v} must lie in (0, 1]")))
            }
        };
        unit("delta", self.delta)?;
        unit("gamma", self.gamma)?;
        unit("tau", self.tau)?;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) || !(self.mixup_concentration > 0.0) {
            return Err(Error::InvalidArgument(
                "learning_rate and mixup_concentration must be positive, weight_decay nonnegative".into(),
            ));
        }
        if let Some(eta) = self.eta {
            if !(eta >= 0.0) {
                return Err(Error::InvalidArgument(format!("eta = {eta} must be nonnegative")));
            }
        }
        Ok(())
    }

    /// Consistency/mixup weight for `epoch`; zero throughout warm-up.
    pub fn eta_at(&self, epoch: usize) -> f64 {
        if epoch < self.warmup_epochs {
            return 0.0;
        }
        if let Some(eta) = self.eta {
            return eta;
        }
        if self.eta_ramp_epochs == 0 {
            return 1.0;
        }
        ((epoch - self.warmup_epochs) as f64 / self.eta_ramp_epochs as f64).min(1.0)
    }

    fn selection(&self) -> SelectionParams {
        SelectionParams {
            delta: self.delta,
            gamma: self.gamma,
            tau: self.tau,
            filter_out_of_candidate: self.filter_out_of_candidate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_dr: f64,
    pub loss_cr_in: f64,
    pub loss_cr_out: f64,
    pub loss_mix: f64,
    pub eta: f64,
    pub n_in: usize,
    pub n_out: usize,
    pub n_sl: usize,
    pub n_hc: usize,
    pub train_acc: Option<f64>,
    /// Samples whose renormalized target fell back to uniform this epoch.
    pub fallbacks: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// `L_total` of every gradient step, in order.
    pub step_losses: Vec<f64>,
}

impl History {
    pub const CSV_HEADER: &'static str =
        "epoch,loss_dr,loss_cr_in,loss_cr_out,loss_mix,eta,d_in,d_out,d_sl,d_hc,train_acc,fallbacks";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.epochs {
            let acc = r.train_acc.map(|a| a.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.epoch,
                r.loss_dr,
                r.loss_cr_in,
                r.loss_cr_out,
                r.loss_mix,
                r.eta,
                r.n_in,
                r.n_out,
                r.n_sl,
                r.n_hc,
                acc,
                r.fallbacks
            ));
        }
        out
    }

    pub fn final_train_acc(&self) -> Option<f64> {
        self.epochs.last().and_then(|r| r.train_acc)
    }
}

#[derive(Debug, Clone)]
pub struct Trained<C> {
    pub model: C,
    pub history: History,
}

/// Training view of a dataset: only samples carrying a candidate set.
struct TrainSet<'a, T> {
    features: Vec<Vec<T>>,
    views: Vec<Vec<Vec<T>>>,
    candidates: Vec<&'a CandidateSet>,
    gold: Option<Vec<usize>>,
    jitter_std: Vec<T>,
}

impl<'a, T: Scalar> TrainSet<'a, T> {
    fn new(dataset: &'a Dataset, jitter_scale: f64) -> Result<Self> {
        let conv = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<T>>();
        let mut features = Vec::new();
        let mut views = Vec::new();
        let mut candidates = Vec::new();
        let mut gold = Some(Vec::new());
        for (s, c) in dataset.samples().iter().zip(dataset.candidates()) {
            let Some(c) = c else { continue };
            features.push(conv(&s.features));
            views.push(s.aug_features.iter().flatten().map(|v| conv(v)).collect());
            candidates.push(c);
            gold = match (gold, s.gold) {
                (Some(mut g), Some(y)) => {
                    g.push(y);
                    Some(g)
                }
                _ => None,
            };
        }
        if features.is_empty() {
            return Err(Error::EmptyInput("samples with candidate sets"));
        }
        let skipped = dataset.len() - features.len();
        if skipped > 0 {
            warn!("{skipped} samples without a candidate set are excluded from training");
        }
        let jitter_std = feature_std(&features).into_iter().map(|s| s * T::of(jitter_scale)).collect();
        Ok(Self { features, views, candidates, gold, jitter_std })
    }

    fn len(&self) -> usize {
        self.features.len()
    }

    /// An augmented view: a stored view if any, else Gaussian jitter, else none.
    fn augmented(&self, i: usize, jitter: bool, view_rng: &mut Rng, jitter_rng: &mut Rng) -> Option<Vec<T>> {
        let views = &self.views[i];
        if !views.is_empty() {
            let k = if views.len() == 1 { 0 } else { view_rng.random_range(0..views.len()) };
            return Some(views[k].clone());
        }
        if !jitter {
            return None;
        }
        Some(
            self.features[i]
                .iter()
                .zip(&self.jitter_std)
                .map(|(&x, &s)| {
                    let z: f64 = StandardNormal.sample(jitter_rng);
                    x + s * T::of(z)
                })
                .collect(),
        )
    }
}

fn feature_std<T: Scalar>(features: &[Vec<T>]) -> Vec<T> {
    let n = T::of_usize(features.len());
    let d = features[0].len();
    (0..d)
        .map(|j| {
            let mean = features.iter().map(|x| x[j]).sum::<T>() / n;
            (features.iter().map(|x| (x[j] - mean).powi(2)).sum::<T>() / n).sqrt()
        })
        .collect()
}

/// Forward pass over every row; order-preserving, so parallelism does not affect results.
pub fn predict_all<T: Scalar, C: Classifier<T>>(model: &C, features: &[Vec<T>]) -> Vec<ProbVector<T>> {
    features.par_iter().map(|x| model.forward(x)).collect()
}

/// Shuffles `0..n` with `rng` and cuts it into batches.
pub fn shuffled_batches(rng: &mut Rng, n: usize, batch_size: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Trains `model` on the dataset's candidate sets.
pub fn train<T: Scalar, C: Classifier<T>>(
    dataset: &Dataset,
    mut model: C,
    config: &RefineryConfig,
) -> Result<Trained<C>> {
    config.validate()?;
    if dataset.feature_dim() != model.input_dim() {
        return Err(Error::DimensionMismatch { expected: model.input_dim(), got: dataset.feature_dim() });
    }
    if dataset.num_classes() != model.num_classes() {
        return Err(Error::DimensionMismatch { expected: model.num_classes(), got: dataset.num_classes() });
    }
    let data = TrainSet::<T>::new(dataset, config.jitter_scale)?;
    let n = data.len();
    let c = model.num_classes();
    let has_views = data.views.iter().any(|v| !v.is_empty());
    if !config.jitter && !has_views {
        warn!("no augmented views and jitter disabled: consistency losses are zero");
    }

    let mut shuffle_rng = stream(config.seed, Stream::Shuffle);
    let mut mixup_rng = stream(config.seed, Stream::Mixup);
    let mut jitter_rng = stream(config.seed, Stream::Jitter);
    let mut view_rng = stream(config.seed, Stream::Views);
    let weight_decay = T::of(config.weight_decay);
    let lr = T::of(config.learning_rate);
    let mut history = History::default();
    let mut grad = vec![T::zero(); model.num_params()];

    for epoch in 0..config.epochs {
        let plan = if epoch < config.warmup_epochs {
            EpochPlan {
                targets: data.candidates.iter().map(|s| Some(ProbVector::uniform_over(s, c))).collect(),
                partition: Partition::all_in(n),
                fallbacks: Vec::new(),
            }
        } else {
            let snapshot = predict_all(&model, &data.features);
            plan_epoch(&snapshot, &data.candidates, &config.selection())
        };
        debug_assert!(plan.partition.is_consistent(n));
        let routes = plan.partition.routes(n);
        let eta_f = config.eta_at(epoch);
        let eta = T::of(eta_f);

        let mut sums = LossBreakdown::<T>::default();
        let batches = shuffled_batches(&mut shuffle_rng, n, config.batch_size);
        let n_batches = batches.len();
        for batch in batches {
            let mut obj = BatchObjective { eta, weight_decay, ..Default::default() };
            for &i in &batch {
                if let Some(q) = &plan.targets[i] {
                    obj.dr.push((data.features[i].clone(), q.as_slice().to_vec()));
                }
            }
            if eta_f > 0.0 {
                for &i in &batch {
                    let Some(aug) = data.augmented(i, config.jitter, &mut view_rng, &mut jitter_rng) else {
                        continue;
                    };
                    if routes[i].in_candidate() {
                        if let Some(q) = &plan.targets[i] {
                            obj.cr_in.push((aug, q.as_slice().to_vec()));
                        }
                    } else {
                        let reference = model.forward(&data.features[i]).into_inner();
                        obj.cr_out.push((aug, reference));
                    }
                }
                if obj.dr.len() >= 2 {
                    let (xs, qs): (Vec<_>, Vec<_>) = obj.dr.iter().cloned().unzip();
                    let (mx, mq) = mixup_batch(&xs, &qs, config.mixup_concentration, &mut mixup_rng);
                    obj.mix = mx.into_iter().zip(mq).collect();
                }
            }
            grad.iter_mut().for_each(|g| *g = T::zero());
            let loss = obj.evaluate(&model, Some(&mut grad));
            if !loss.total.is_finite() {
                return Err(Error::Diverged { epoch, what: "loss" });
            }
            for (p, g) in model.params_mut().iter_mut().zip(&grad) {
                *p -= lr * *g;
            }
            if model.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { epoch, what: "parameters" });
            }
            history.step_losses.push(loss.total.as_f64());
            sums.dr += loss.dr;
            sums.cr_in += loss.cr_in;
            sums.cr_out += loss.cr_out;
            sums.mix += loss.mix;
        }

        let train_acc = data.gold.as_ref().map(|gold| {
            let preds = predict_all(&model, &data.features);
            let hits = preds.iter().zip(gold).filter(|(p, &y)| p.argmax() == y).count();
            hits as f64 / n as f64
        });
        let nb = T::of_usize(n_batches);
        let record = EpochRecord {
            epoch,
            loss_dr: (sums.dr / nb).as_f64(),
            loss_cr_in: (sums.cr_in / nb).as_f64(),
            loss_cr_out: (sums.cr_out / nb).as_f64(),
            loss_mix: (sums.mix / nb).as_f64(),
            eta: eta_f,
            n_in: plan.partition.d_in.len(),
            n_out: plan.partition.d_out.len(),
            n_sl: plan.partition.d_sl.len(),
            n_hc: plan.partition.d_hc.len(),
            train_acc,
            fallbacks: plan.fallbacks.len(),
        };
        debug!("epoch {epoch}: {record:?}");
        history.epochs.push(record);
    }
    Ok(Trained { model, history })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions<T> {
    pub labels: Vec<usize>,
    pub probs: Vec<ProbVector<T>>,
}

/// Hard labels (ties to the lowest index) and full distributions for every sample.
pub fn predict<T: Scalar, C: Classifier<T>>(model: &C, dataset: &Dataset) -> Result<Predictions<T>> {
    if dataset.feature_dim() != model.input_dim() && !dataset.is_empty() {
        return Err(Error::DimensionMismatch { expected: model.input_dim(), got: dataset.feature_dim() });
    }
    let features: Vec<Vec<T>> =
        dataset.samples().iter().map(|s| s.features.iter().map(|&x| T::of(x)).collect()).collect();
    let probs = predict_all(model, &features);
    let labels = probs.iter().map(ProbVector::argmax).collect();
    Ok(Predictions { labels, probs })
}
