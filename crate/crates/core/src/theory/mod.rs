//! Noise tolerance of a linear model trained with ridge-regularized
//! cross-entropy on block-structured features, in closed form and by brute force.

pub mod closed_form;
pub mod linalg;
pub mod noise;
pub mod oracle;
pub mod params;
pub mod simulate;

pub use closed_form::{
    analytic_shrinkage_operator, balanced_labels, build_similarity, closed_form_predictions, quantified_prediction,
    quantified_prediction_general, shrinkage_operator, TargetMatrix,
};
pub use linalg::{symmetric_eigenvalues, Cholesky, Matrix};
pub use noise::{condition_top1, condition_top2, ConditionKind, ConditionReport, NoiseMatrix, PairCheck};
pub use oracle::{gd_oracle, OracleConfig, OracleInput, OracleMode, OracleResult};
pub use params::{Shrinkage, TheoryParams};
pub use simulate::{
    phase_sweep, simulate_finite, simulate_infinite, sweep_csv, symmetric_grid, Mode, Simulation, SweepRow,
    SWEEP_CSV_HEADER,
};
