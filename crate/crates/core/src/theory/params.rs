//! Shrinkage coefficients of the linearized ridge-regularized softmax model on
//! block-structured similarity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams<T> {
    pub num_classes: usize,
    pub num_samples: usize,
    /// Feature similarity of two distinct samples from the same class.
    pub intra: T,
    /// Feature similarity of samples from different classes.
    pub inter: T,
    pub lambda: T,
}

/// `(θ, φ, ψ)`: how much of a sample's own target, its class-mean target and the
/// global-mean target survive regularization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shrinkage<T> {
    pub theta: T,
    pub phi: T,
    pub psi: T,
}

impl<T: Scalar> TheoryParams<T> {
    pub fn new(num_classes: usize, num_samples: usize, intra: T, inter: T, lambda: T) -> Result<Self> {
        let p = Self { num_classes, num_samples, intra, inter, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::TooFewClasses(self.num_classes));
        }
        if self.num_samples == 0 {
            return Err(Error::InvalidParams("sample count must be positive".into()));
        }
        let (a, b) = (self.intra, self.inter);
        if !(a < T::one() && b > T::zero()) {
            return Err(Error::InvalidParams(format!("similarities must lie in (0, 1), got a={a}, b={b}")));
        }
        if !(a > b) {
            return Err(Error::InvalidParams(format!("intra-class similarity {a} must exceed inter-class {b}")));
        }
        if !(self.lambda > T::zero()) || !self.lambda.is_finite() {
            return Err(Error::InvalidParams(format!("lambda {} must be positive", self.lambda)));
        }
        Ok(())
    }

    fn c(&self) -> T {
        T::of_usize(self.num_classes)
    }

    fn m(&self) -> T {
        T::of_usize(self.num_samples)
    }

    /// The three distinct eigenvalues of the balanced similarity matrix with
    /// their multiplicities `1, C-1, m-C`.
    pub fn eigenvalues(&self) -> [(T, usize); 3] {
        let (c, m, a, b) = (self.c(), self.m(), self.intra, self.inter);
        let within = m / c * (a - b) + T::one() - a;
        [
            (m * b + within, 1),
            (within, self.num_classes - 1),
            (T::one() - a, self.num_samples.saturating_sub(self.num_classes)),
        ]
    }

    /// `1 - Cmλ / (Cmλ + ev)` for an eigenvalue `ev` of the similarity matrix.
    pub fn shrink(&self, ev: T) -> T {
        let k = self.c() * self.m() * self.lambda;
        T::one() - k / (k + ev)
    }

    pub fn shrinkage(&self) -> Shrinkage<T> {
        let [(l1, _), (l2, _), (l3, _)] = self.eigenvalues();
        Shrinkage { theta: self.shrink(l3), phi: self.shrink(l2), psi: self.shrink(l1) }
    }

    pub fn theta(&self) -> T {
        self.shrinkage().theta
    }

    pub fn phi(&self) -> T {
        self.shrinkage().phi
    }

    pub fn psi(&self) -> T {
        self.shrinkage().psi
    }

    /// `1 - θ/(φ-θ)`: the largest off-diagonal noise mass a row may carry for
    /// single-label training to stay correct.
    pub fn top1_threshold(&self) -> T {
        let s = self.shrinkage();
        T::one() - s.theta / (s.phi - s.theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example() -> TheoryParams<f64> {
        TheoryParams::new(2, 100, 0.8, 0.2, 0.01).unwrap()
    }

    #[test]
    fn direct_formula_values() {
        let p = example();
        // Direct evaluation: Cmλ = 2.
        let theta = 1.0 - 2.0 / (2.0 + 0.2);
        let phi = 1.0 - 2.0 / (2.0 + 50.0 * 0.6 + 0.2);
        let psi = 1.0 - 2.0 / (2.0 + 20.0 + 50.0 * 0.6 + 0.2);
        let s = p.shrinkage();
        assert_abs_diff_eq!(s.theta, theta, epsilon = 1e-15);
        assert_abs_diff_eq!(s.phi, phi, epsilon = 1e-15);
        assert_abs_diff_eq!(s.psi, psi, epsilon = 1e-15);
        assert_abs_diff_eq!(s.theta, 0.0909, epsilon = 1e-4);
        assert_abs_diff_eq!(s.phi, 0.9379, epsilon = 1e-4);
        assert!(s.theta < s.phi && s.phi < s.psi && s.psi < 1.0);
        assert_abs_diff_eq!(p.top1_threshold(), 0.89267, epsilon = 1e-5);
    }

    #[test]
    fn heavy_regularization_shrinks_everything() {
        let s = TheoryParams::new(2, 100, 0.8, 0.2, 1e6).unwrap().shrinkage();
        assert!(s.theta < 1e-4 && s.phi < 1e-4 && s.psi < 1e-4);
        assert!(s.theta > 0.0);
    }

    #[test]
    fn vanishing_class_gap_collapses_phi_onto_theta() {
        for eps in [1e-3, 1e-5, 1e-7] {
            let s = TheoryParams::new(2, 100, 0.5 + eps, 0.5, 0.01).unwrap().shrinkage();
            assert!(s.phi - s.theta < 30.0 * eps, "eps {eps}: gap {}", s.phi - s.theta);
        }
    }

    #[test]
    fn invalid_params() {
        assert!(TheoryParams::new(2, 100, 0.2, 0.2, 0.01).is_err());
        assert!(TheoryParams::new(2, 100, 0.2, 0.8, 0.01).is_err());
        assert!(TheoryParams::new(2, 100, 1.0, 0.2, 0.01).is_err());
        assert!(TheoryParams::new(2, 100, 0.8, 0.2, 0.0).is_err());
        assert!(TheoryParams::new(1, 100, 0.8, 0.2, 0.01).is_err());
    }

    #[test]
    fn f32_agrees_with_f64() {
        let p = TheoryParams::<f32>::new(2, 100, 0.8, 0.2, 0.01).unwrap();
        assert_abs_diff_eq!(p.phi() as f64, example().phi(), epsilon = 1e-6);
    }
}
