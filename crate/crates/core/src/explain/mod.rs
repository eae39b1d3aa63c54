//! Explanation artifacts: TreeSHAP attributions and global importance,
//! local surrogates, and single-feature counterfactuals.

mod counterfactual;
mod importance;
mod lime;
mod treeshap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::ModelError;

pub use counterfactual::{counterfactual_delta, Counterfactual, CounterfactualQuery, Direction, RiskGoal};
pub use importance::{
    column_means, gain_importance, model_shap, model_shap_global, shap_global, shap_matrix, FeatureImportance,
    GlobalImportance, ImportanceMode, GLOBAL_SAMPLE,
};
pub use lime::{lime_local, Background, BackgroundFeature, LimeExplanation, MIN_SAMPLES};
pub use treeshap::{
    ensemble_expected_value, linear_shap, subset_shapley, tree_expected_value, tree_shap, ShapExplanation,
};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("tree {tree} node {node} has no usable cover")]
    MissingCover { tree: usize, node: usize },
    #[error("feature width mismatch: expected {expected}, got {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("explanation sample is empty")]
    EmptySample,
    #[error("need at least 50 perturbation samples, got {0}")]
    TooFewSamples(usize),
    #[error("all perturbations are identical")]
    DegenerateDesign,
    #[error("feature `{0}` is not numeric")]
    NonNumericFeature(String),
    #[error("counterfactual grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Local attribution record as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalShapArtifact {
    pub model_hash: String,
    pub instance_id: String,
    pub base_value: f64,
    pub phi: Vec<f64>,
    pub f_x: f64,
}

impl LocalShapArtifact {
    pub fn new(model_hash: &str, instance_id: impl Into<String>, e: &ShapExplanation) -> Self {
        Self {
            model_hash: model_hash.to_string(),
            instance_id: instance_id.into(),
            base_value: e.base_value,
            phi: e.phi.clone(),
            f_x: e.f_x,
        }
    }
}

/// One row of a global importance artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportanceRecord {
    pub model_hash: String,
    pub feature: String,
    pub importance: f64,
}

pub fn global_artifact(model_hash: &str, g: &GlobalImportance) -> Vec<GlobalImportanceRecord> {
    g.ranking
        .iter()
        .map(|r| GlobalImportanceRecord {
            model_hash: model_hash.to_string(),
            feature: r.feature.clone(),
            importance: r.importance,
        })
        .collect()
}

/// Counterfactual record with its rendered sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualArtifact {
    pub model_hash: String,
    pub instance_id: String,
    #[serde(flatten)]
    pub counterfactual: Counterfactual,
}
