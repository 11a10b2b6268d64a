//! Distillation of candidate annotations into a single-label classifier.

pub mod classifier;
pub mod loss;
pub mod model_file;
pub mod targets;
pub mod trainer;

pub use classifier::{AnyClassifier, Classifier, ClassifierSpec, LinearSoftmax, Mlp};
pub use loss::{consistency_losses, dr_loss, mixup_batch, mixup_with, BatchObjective, LossBreakdown};
pub use model_file::ModelFile;
pub use targets::{
    assemble_targets, partition_out_of_candidate, plan_epoch, renormalize_target, select_high_confidence,
    select_small_loss, sharpen, EpochPlan, Partition, Renormalized, Route, SelectionParams,
};
pub use trainer::{
    predict, predict_all, shuffled_batches, train, EpochRecord, History, Predictions, RefineryConfig, Trained,
};
