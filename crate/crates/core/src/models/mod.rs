//! Model families: L2-regularised logistic regression, second-order gradient
//! boosted trees and Gini random forests, all accepting per-instance weights.

mod cv;
mod gbt;
mod logistic;
mod metrics;
mod rf;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing;
use crate::tabular::{FeatureMatrix, TabularError};

pub use cv::{cross_validate, stratified_folds, CvReport, FoldMetrics, MetricSummary};
pub use gbt::{train_gbt, train_gbt_traced};
pub use logistic::{train_logistic, LogisticModel, LogisticObjective};
pub(crate) use logistic::{newton_minimize, softplus};
pub use metrics::{auc, evaluate, PerfReport};
pub use rf::{fit_decision_tree, train_rf};
pub use tree::{Combine, Tree, TreeEnsemble};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("{what}: expected length {expected}, got {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("instance weights must be positive and finite")]
    InvalidWeights,
    #[error("training set is empty")]
    EmptyTraining,
    #[error("loss became non-finite")]
    NonfiniteLoss,
    #[error("feature width mismatch: model expects {expected}, input has {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("AUC needs at least one positive and one negative label")]
    SingleClassAUC,
    #[error("invalid fold count {k} for {n} rows")]
    InvalidFolds { k: usize, n: usize },
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Logistic,
    Gbt,
    Rf,
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" | "lr" => Ok(Family::Logistic),
            "gbt" | "xgboost" => Ok(Family::Gbt),
            "rf" | "random_forest" => Ok(Family::Rf),
            other => Err(format!("unknown model family `{other}`")),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Logistic => "logistic",
            Family::Gbt => "gbt",
            Family::Rf => "rf",
        })
    }
}

/// Features considered at each random-forest split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))`.
    Sqrt,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub family: Family,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Inverse L2 strength for logistic regression.
    pub c: f64,
    pub seed: u64,
    pub threshold: f64,
    /// Minimum hessian mass per boosting child (weights normalised to mean 1).
    pub min_child_weight: f64,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl TrainConfig {
    pub fn gbt() -> Self {
        Self {
            family: Family::Gbt,
            n_estimators: 100,
            max_depth: 3,
            learning_rate: 0.1,
            c: 1.0,
            seed: 42,
            threshold: 0.5,
            min_child_weight: 1.0,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
        }
    }

    pub fn rf() -> Self {
        Self {
            family: Family::Rf,
            n_estimators: 200,
            max_depth: 16,
            ..Self::gbt()
        }
    }

    pub fn logistic() -> Self {
        Self {
            family: Family::Logistic,
            n_estimators: 1,
            max_depth: 1,
            ..Self::gbt()
        }
    }

    pub fn for_family(family: Family) -> Self {
        match family {
            Family::Logistic => Self::logistic(),
            Family::Gbt => Self::gbt(),
            Family::Rf => Self::rf(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.n_estimators < 1 {
            return bad("n_estimators must be >= 1");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("C must be > 0");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if !(self.min_child_weight >= 0.0) {
            return bad("min_child_weight must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParams {
    Linear(LogisticModel),
    Trees(TreeEnsemble),
}

/// A trained model with the configuration and feature names it was fit on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub family: Family,
    pub config: TrainConfig,
    pub feature_names: Vec<String>,
    pub params: ModelParams,
}

impl Model {
    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    /// Score in the model's additive space: logit for logistic and boosting,
    /// probability for forests.
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Linear(m) => m.logit(row),
            ModelParams::Trees(e) => e.raw_output(row),
        }
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Linear(m) => sigmoid(m.logit(row)),
            ModelParams::Trees(e) => e.predict_proba(row),
        }
    }

    pub fn ensemble(&self) -> Option<&TreeEnsemble> {
        match &self.params {
            ModelParams::Trees(e) => Some(e),
            ModelParams::Linear(_) => None,
        }
    }

    pub fn linear(&self) -> Option<&LogisticModel> {
        match &self.params {
            ModelParams::Linear(m) => Some(m),
            ModelParams::Trees(_) => None,
        }
    }

    pub fn content_hash(&self) -> String {
        hashing::content_hash(self).expect("model serializes")
    }
}

/// Probabilities plus thresholded labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub proba: Vec<f64>,
    pub labels: Vec<u8>,
    pub threshold: f64,
}

impl Predictions {
    pub fn from_proba(proba: Vec<f64>, threshold: f64) -> Self {
        let labels = proba.iter().map(|&p| u8::from(p >= threshold)).collect();
        Self {
            proba,
            labels,
            threshold,
        }
    }

    pub fn len(&self) -> usize {
        self.proba.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proba.is_empty()
    }
}

/// Split comparison that treats gains equal up to rounding as tied, so the
/// earlier candidate wins regardless of weight scale or summation order.
pub(crate) fn beats(gain: f64, best: f64) -> bool {
    gain > best + 1e-10 * best.abs()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Check inputs shared by every trainer and return weights normalised to
/// mean one (all ones when none are given).
pub(crate) fn prepare_weights(
    x: &FeatureMatrix,
    y: &[u8],
    w: Option<&[f64]>,
) -> Result<Vec<f64>, ModelError> {
    if x.n_rows() == 0 {
        return Err(ModelError::EmptyTraining);
    }
    if y.len() != x.n_rows() {
        return Err(ModelError::LengthMismatch {
            what: "labels",
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    match w {
        None => Ok(vec![1.0; y.len()]),
        Some(w) => {
            if w.len() != y.len() {
                return Err(ModelError::LengthMismatch {
                    what: "weights",
                    expected: y.len(),
                    found: w.len(),
                });
            }
            if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(ModelError::InvalidWeights);
            }
            let total: f64 = w.iter().sum();
            let scale = y.len() as f64 / total;
            Ok(w.iter().map(|v| v * scale).collect())
        }
    }
}

/// Train the family named in `cfg`.
pub fn train(
    x: &FeatureMatrix,
    y: &[u8],
    w: Option<&[f64]>,
    cfg: &TrainConfig,
) -> Result<Model, ModelError> {
    let params = match cfg.family {
        Family::Logistic => ModelParams::Linear(train_logistic(x, y, w, cfg)?),
        Family::Gbt => ModelParams::Trees(train_gbt(x, y, w, cfg)?),
        Family::Rf => ModelParams::Trees(train_rf(x, y, w, cfg)?),
    };
    Ok(Model {
        family: cfg.family,
        config: cfg.clone(),
        feature_names: x.names().to_vec(),
        params,
    })
}

pub fn predict(model: &Model, x: &FeatureMatrix) -> Result<Predictions, ModelError> {
    if x.n_cols() != model.width() {
        return Err(ModelError::WidthMismatch {
            expected: model.width(),
            found: x.n_cols(),
        });
    }
    let proba = x.rows().map(|r| model.predict_proba_row(r)).collect();
    Ok(Predictions::from_proba(proba, model.config.threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ensemble_predicts_half() {
        let model = Model {
            family: Family::Gbt,
            config: TrainConfig::gbt(),
            feature_names: vec!["a".into(), "b".into()],
            params: ModelParams::Trees(TreeEnsemble::new(vec![], 0.0, Combine::AdditiveLogit, 0.1)),
        };
        let x = FeatureMatrix::from_rows(&[vec![0.0, 1.0], vec![5.0, -3.0]], None);
        let p = predict(&model, &x).unwrap();
        assert_eq!(p.proba, vec![0.5, 0.5]);
        assert_eq!(p.labels, vec![1, 1]);
    }

    #[test]
    fn zero_coefficient_logistic_is_constant() {
        let b = -0.7;
        let model = Model {
            family: Family::Logistic,
            config: TrainConfig::logistic(),
            feature_names: vec!["a".into()],
            params: ModelParams::Linear(LogisticModel {
                coefficients: vec![0.0],
                intercept: b,
            }),
        };
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![10.0]], None);
        let p = predict(&model, &x).unwrap();
        for v in p.proba {
            assert!((v - sigmoid(b)).abs() < 1e-15);
        }
    }

    #[test]
    fn width_mismatch() {
        let model = Model {
            family: Family::Logistic,
            config: TrainConfig::logistic(),
            feature_names: vec!["a".into()],
            params: ModelParams::Linear(LogisticModel {
                coefficients: vec![1.0],
                intercept: 0.0,
            }),
        };
        let x = FeatureMatrix::from_rows(&[vec![0.0, 1.0]], None);
        assert!(matches!(
            predict(&model, &x),
            Err(ModelError::WidthMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::gbt();
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::rf();
        c.n_estimators = 0;
        assert!(c.validate().is_err());
        assert!(TrainConfig::logistic().validate().is_ok());
    }

    #[test]
    fn table_two_defaults() {
        let g = TrainConfig::gbt();
        assert_eq!((g.n_estimators, g.max_depth, g.learning_rate), (100, 3, 0.1));
        assert_eq!(TrainConfig::rf().n_estimators, 200);
        assert_eq!(TrainConfig::logistic().c, 1.0);
    }
}
