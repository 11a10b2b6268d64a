//! Differentiable classifiers over precomputed feature vectors.

use std::ops::Range;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::ProbVector;
use crate::rng::{stream, Stream};
use crate::scalar::Scalar;

/// A softmax classifier with a flat parameter vector.
///
/// `backward` accumulates `∂L/∂θ` into `grad` given `∂L/∂logits` for one input;
/// the trainer owns losses and the update rule.
pub trait Classifier<T: Scalar>: Clone + Send + Sync {
    fn num_classes(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn params(&self) -> &[T];
    fn params_mut(&mut self) -> &mut [T];
    fn logits(&self, x: &[T]) -> Vec<T>;
    fn backward(&self, x: &[T], dlogits: &[T], grad: &mut [T]);
    /// Parameter ranges subject to the L2 penalty (weights, not biases).
    fn weight_ranges(&self) -> Vec<Range<usize>>;
    fn spec(&self) -> ClassifierSpec;

    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn forward(&self, x: &[T]) -> ProbVector<T> {
        ProbVector::softmax(&self.logits(x))
    }

    /// `(λ/2) ‖W‖²` over the weight ranges.
    fn penalty(&self, lambda: T) -> T {
        let p = self.params();
        let sq: T = self.weight_ranges().into_iter().flat_map(|r| p[r].iter().map(|&w| w * w)).sum();
        lambda * sq / T::of(2.0)
    }

    fn penalty_grad(&self, lambda: T, grad: &mut [T]) {
        let p = self.params();
        for r in self.weight_ranges() {
            for i in r {
                grad[i] += lambda * p[i];
            }
        }
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() == self.input_dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() })
        }
    }
}

/// Architecture description stored alongside parameters in model files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Linear { input_dim: usize, num_classes: usize },
    Mlp { input_dim: usize, hidden: usize, num_classes: usize },
}

impl ClassifierSpec {
    pub fn num_params(&self) -> usize {
        match *self {
            ClassifierSpec::Linear { input_dim, num_classes } => num_classes * (input_dim + 1),
            ClassifierSpec::Mlp { input_dim, hidden, num_classes } => {
                hidden * (input_dim + 1) + num_classes * (hidden + 1)
            }
        }
    }
}

/// `softmax(W x + b)` with `W ∈ R^{C×d}`; parameters laid out as `[W row-major | b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmax<T> {
    input_dim: usize,
    num_classes: usize,
    params: Vec<T>,
}

impl<T: Scalar> LinearSoftmax<T> {
    /// Zero-initialized; the objective is convex so no symmetry breaking is needed.
    pub fn zeros(input_dim: usize, num_classes: usize) -> Self {
        Self { input_dim, num_classes, params: vec![T::zero(); num_classes * (input_dim + 1)] }
    }

    pub fn from_params(input_dim: usize, num_classes: usize, params: Vec<T>) -> Result<Self> {
        let expected = num_classes * (input_dim + 1);
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: params.len() });
        }
        Ok(Self { input_dim, num_classes, params })
    }

    pub fn weight(&self, class: usize, feature: usize) -> T {
        self.params[class * self.input_dim + feature]
    }

    pub fn bias(&self, class: usize) -> T {
        self.params[self.num_classes * self.input_dim + class]
    }
}

impl<T: Scalar> Classifier<T> for LinearSoftmax<T> {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn params(&self) -> &[T] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn logits(&self, x: &[T]) -> Vec<T> {
        let d = self.input_dim;
        let bias = &self.params[self.num_classes * d..];
        (0..self.num_classes)
            .map(|c| {
                let row = &self.params[c * d..(c + 1) * d];
                row.iter().zip(x).map(|(&w, &xi)| w * xi).sum::<T>() + bias[c]
            })
            .collect()
    }

    fn backward(&self, x: &[T], dlogits: &[T], grad: &mut [T]) {
        let d = self.input_dim;
        for (c, &g) in dlogits.iter().enumerate() {
            for (gw, &xi) in grad[c * d..(c + 1) * d].iter_mut().zip(x) {
                *gw += g * xi;
            }
            grad[self.num_classes * d + c] += g;
        }
    }

    fn weight_ranges(&self) -> Vec<Range<usize>> {
        vec![0..self.num_classes * self.input_dim]
    }

    fn spec(&self) -> ClassifierSpec {
        ClassifierSpec::Linear { input_dim: self.input_dim, num_classes: self.num_classes }
    }
}

/// One hidden tanh layer: `softmax(W2 tanh(W1 x + b1) + b2)`.
/// Layout `[W1 (h×d) | b1 | W2 (C×h) | b2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    input_dim: usize,
    hidden: usize,
    num_classes: usize,
    params: Vec<T>,
}

impl<T: Scalar> Mlp<T> {
    /// Gaussian init scaled by `1/sqrt(fan_in)`, zero biases.
    pub fn init(input_dim: usize, hidden: usize, num_classes: usize, seed: u64) -> Self {
        let spec = ClassifierSpec::Mlp { input_dim, hidden, num_classes };
        let mut params = vec![T::zero(); spec.num_params()];
        let mut rng = stream(seed, Stream::Init);
        let s1 = 1.0 / (input_dim as f64).sqrt();
        for p in &mut params[..hidden * input_dim] {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p = T::of(z * s1);
        }
        let w2 = hidden * (input_dim + 1);
        let s2 = 1.0 / (hidden as f64).sqrt();
        for p in &mut params[w2..w2 + num_classes * hidden] {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p = T::of(z * s2);
        }
        Self { input_dim, hidden, num_classes, params }
    }

    pub fn from_params(input_dim: usize, hidden: usize, num_classes: usize, params: Vec<T>) -> Result<Self> {
        let expected = ClassifierSpec::Mlp { input_dim, hidden, num_classes }.num_params();
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: params.len() });
        }
        Ok(Self { input_dim, hidden, num_classes, params })
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.input_dim;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.num_classes * self.hidden;
        (b1, w2, b2)
    }

    fn hidden_activations(&self, x: &[T]) -> Vec<T> {
        let d = self.input_dim;
        let (b1, _, _) = self.offsets();
        (0..self.hidden)
            .map(|k| {
                let row = &self.params[k * d..(k + 1) * d];
                (row.iter().zip(x).map(|(&w, &xi)| w * xi).sum::<T>() + self.params[b1 + k]).tanh()
            })
            .collect()
    }
}

impl<T: Scalar> Classifier<T> for Mlp<T> {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn params(&self) -> &[T] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn logits(&self, x: &[T]) -> Vec<T> {
        let h = self.hidden_activations(x);
        let (_, w2, b2) = self.offsets();
        (0..self.num_classes)
            .map(|c| {
                let row = &self.params[w2 + c * self.hidden..w2 + (c + 1) * self.hidden];
                row.iter().zip(&h).map(|(&w, &hk)| w * hk).sum::<T>() + self.params[b2 + c]
            })
            .collect()
    }

    fn backward(&self, x: &[T], dlogits: &[T], grad: &mut [T]) {
        let h = self.hidden_activations(x);
        let d = self.input_dim;
        let (b1, w2, b2) = self.offsets();
        let mut dh = vec![T::zero(); self.hidden];
        for (c, &g) in dlogits.iter().enumerate() {
            let row = w2 + c * self.hidden;
            for k in 0..self.hidden {
                grad[row + k] += g * h[k];
                dh[k] += g * self.params[row + k];
            }
            grad[b2 + c] += g;
        }
        for k in 0..self.hidden {
            let da = dh[k] * (T::one() - h[k] * h[k]);
            for (gw, &xi) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                *gw += da * xi;
            }
            grad[b1 + k] += da;
        }
    }

    fn weight_ranges(&self) -> Vec<Range<usize>> {
        let (b1, w2, b2) = self.offsets();
        vec![0..b1, w2..b2]
    }

    fn spec(&self) -> ClassifierSpec {
        ClassifierSpec::Mlp { input_dim: self.input_dim, hidden: self.hidden, num_classes: self.num_classes }
    }
}

/// Either supported architecture, for code that picks one at run time.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyClassifier<T> {
    Linear(LinearSoftmax<T>),
    Mlp(Mlp<T>),
}

impl<T: Scalar> AnyClassifier<T> {
    pub fn from_spec(spec: ClassifierSpec, params: Vec<T>) -> Result<Self> {
        Ok(match spec {
            ClassifierSpec::Linear { input_dim, num_classes } => {
                AnyClassifier::Linear(LinearSoftmax::from_params(input_dim, num_classes, params)?)
            }
            ClassifierSpec::Mlp { input_dim, hidden, num_classes } => {
                AnyClassifier::Mlp(Mlp::from_params(input_dim, hidden, num_classes, params)?)
            }
        })
    }

    /// Fresh model: zero linear weights or a seeded MLP init.
    pub fn init(spec: ClassifierSpec, seed: u64) -> Self {
        match spec {
            ClassifierSpec::Linear { input_dim, num_classes } => {
                AnyClassifier::Linear(LinearSoftmax::zeros(input_dim, num_classes))
            }
            ClassifierSpec::Mlp { input_dim, hidden, num_classes } => {
                AnyClassifier::Mlp(Mlp::init(input_dim, hidden, num_classes, seed))
            }
        }
    }
}

macro_rules! delegate {
    ($self:ident, $m:ident ( $($arg:expr),* )) => {
        match $self {
            AnyClassifier::Linear(c) => c.$m($($arg),*),
            AnyClassifier::Mlp(c) => c.$m($($arg),*),
        }
    };
}

impl<T: Scalar> Classifier<T> for AnyClassifier<T> {
    fn num_classes(&self) -> usize {
        delegate!(self, num_classes())
    }
    fn input_dim(&self) -> usize {
        delegate!(self, input_dim())
    }
    fn params(&self) -> &[T] {
        delegate!(self, params())
    }
    fn params_mut(&mut self) -> &mut [T] {
        delegate!(self, params_mut())
    }
    fn logits(&self, x: &[T]) -> Vec<T> {
        delegate!(self, logits(x))
    }
    fn backward(&self, x: &[T], dlogits: &[T], grad: &mut [T]) {
        delegate!(self, backward(x, dlogits, grad))
    }
    fn weight_ranges(&self) -> Vec<Range<usize>> {
        delegate!(self, weight_ranges())
    }
    fn spec(&self) -> ClassifierSpec {
        delegate!(self, spec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_linear_weights_follow_feature_argmax() {
        let mut params = vec![0.0f64; 3 * 4];
        for c in 0..3 {
            params[c * 3 + c] = 5.0;
        }
        let model = LinearSoftmax::from_params(3, 3, params).unwrap();
        for (x, want) in [([1.0, 0.0, 0.0], 0), ([0.1, 0.2, 0.9], 2), ([0.0, 1.0, 0.5], 1)] {
            assert_eq!(model.forward(&x).argmax(), want);
        }
    }

    #[test]
    fn mlp_backward_matches_finite_differences() {
        let model = Mlp::<f64>::init(3, 4, 2, 11);
        let x = [0.3, -0.7, 1.1];
        let dl = [0.4, -0.9];
        let mut grad = vec![0.0; model.num_params()];
        model.backward(&x, &dl, &mut grad);
        let f = |m: &Mlp<f64>| m.logits(&x).iter().zip(&dl).map(|(z, g)| z * g).sum::<f64>();
        for i in 0..model.num_params() {
            let mut plus = model.clone();
            plus.params_mut()[i] += 1e-6;
            let mut minus = model.clone();
            minus.params_mut()[i] -= 1e-6;
            let fd = (f(&plus) - f(&minus)) / 2e-6;
            assert!((fd - grad[i]).abs() < 1e-7, "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn penalty_skips_biases() {
        let model = LinearSoftmax::from_params(1, 2, vec![1.0f64, 2.0, 10.0, 10.0]).unwrap();
        assert_eq!(model.penalty(2.0), 5.0);
        let mut g = vec![0.0; 4];
        model.penalty_grad(2.0, &mut g);
        assert_eq!(g, vec![2.0, 4.0, 0.0, 0.0]);
    }
}
