//! On-disk form of a trained classifier.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::classifier::{AnyClassifier, Classifier, ClassifierSpec};
use super::trainer::RefineryConfig;
use crate::error::{Error, Result};
use crate::label::LabelSpace;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub label_space: LabelSpace,
    pub feature_dim: usize,
    pub classifier: ClassifierSpec,
    /// Flat parameters in the classifier's layout, widened to f64.
    pub params: Vec<f64>,
    pub config: RefineryConfig,
    pub seed: u64,
}

impl ModelFile {
    pub fn from_model<T: Scalar, C: Classifier<T>>(
        model: &C,
        label_space: LabelSpace,
        config: RefineryConfig,
    ) -> Result<Self> {
        if label_space.num_classes() != model.num_classes() {
            return Err(Error::DimensionMismatch { expected: model.num_classes(), got: label_space.num_classes() });
        }
        Ok(Self {
            label_space,
            feature_dim: model.input_dim(),
            classifier: model.spec(),
            params: model.params().iter().map(|p| p.as_f64()).collect(),
            seed: config.seed,
            config,
        })
    }

    pub fn to_model<T: Scalar>(&self) -> Result<AnyClassifier<T>> {
        let model = AnyClassifier::from_spec(self.classifier, self.params.iter().map(|&p| T::of(p)).collect())?;
        if model.input_dim() != self.feature_dim {
            return Err(Error::DimensionMismatch { expected: model.input_dim(), got: self.feature_dim });
        }
        if model.num_classes() != self.label_space.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: model.num_classes(),
                got: self.label_space.num_classes(),
            });
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(s)?;
        file.label_space.validate()?;
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refinery::classifier::Mlp;

    #[test]
    fn json_round_trip_preserves_params_bitwise() {
        let mlp = Mlp::<f64>::init(3, 4, 2, 9);
        let file = ModelFile::from_model(&mlp, LabelSpace::numbered(2).unwrap(), RefineryConfig::default()).unwrap();
        let back = ModelFile::from_json(&file.to_json().unwrap()).unwrap();
        assert_eq!(back, file);
        let model: AnyClassifier<f64> = back.to_model().unwrap();
        assert_eq!(model.params(), mlp.params());
    }

    #[test]
    fn label_space_must_match() {
        let mlp = Mlp::<f64>::init(3, 4, 2, 9);
        assert!(ModelFile::from_model(&mlp, LabelSpace::numbered(3).unwrap(), RefineryConfig::default()).is_err());
    }
}
