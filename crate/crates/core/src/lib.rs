//! Distilling candidate-set annotations into a single-label classifier,
//! plus the assessment metrics and the linearized-model noise-tolerance theory.

pub mod dataset;
pub mod error;
pub mod label;
pub mod metrics;
pub mod prob;
pub mod refinery;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod theory;

pub use dataset::{load_dataset, save_dataset, Dataset, DatasetLine, Sample};
pub use error::{Error, Result};
pub use label::{CandidateSet, LabelSpace};
pub use prob::ProbVector;
pub use scalar::Scalar;

pub type ProbVec = ProbVector<f64>;
pub type ProbVec32 = ProbVector<f32>;
pub type LinearSoftmax64 = refinery::LinearSoftmax<f64>;
pub type LinearSoftmax32 = refinery::LinearSoftmax<f32>;
pub type Mlp64 = refinery::Mlp<f64>;
pub type Mlp32 = refinery::Mlp<f32>;
pub type Classifier64 = refinery::AnyClassifier<f64>;
pub type Classifier32 = refinery::AnyClassifier<f32>;
pub type TheoryParams64 = theory::TheoryParams<f64>;
pub type TheoryParams32 = theory::TheoryParams<f32>;
pub type Matrix64 = theory::Matrix<f64>;
pub type NoiseMatrix64 = theory::NoiseMatrix<f64>;
