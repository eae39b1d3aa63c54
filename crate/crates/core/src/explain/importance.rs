use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::treeshap::{check_covers, linear_shap, tree_shap_unchecked, ShapExplanation};
use super::ExplainError;
use crate::models::{Model, ModelParams, TreeEnsemble};
use crate::tabular::FeatureMatrix;

/// Rows used for global SHAP importance.
pub const GLOBAL_SAMPLE: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMode {
    Shap,
    Gain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub index: usize,
    pub importance: f64,
}

/// Importances ordered by decreasing value, ties by feature index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub mode: ImportanceMode,
    pub ranking: Vec<FeatureImportance>,
}

impl GlobalImportance {
    pub fn from_values(mode: ImportanceMode, names: &[String], values: &[f64]) -> Self {
        let mut ranking: Vec<FeatureImportance> = names
            .iter()
            .zip(values)
            .enumerate()
            .map(|(index, (n, &v))| FeatureImportance {
                feature: n.clone(),
                index,
                importance: v,
            })
            .collect();
        ranking.sort_by(|a, b| b.importance.total_cmp(&a.importance).then(a.index.cmp(&b.index)));
        Self { mode, ranking }
    }

    pub fn value_of(&self, feature: &str) -> Option<f64> {
        self.ranking.iter().find(|r| r.feature == feature).map(|r| r.importance)
    }

    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.ranking.iter().position(|r| r.feature == feature)
    }

    pub fn top(&self, k: usize) -> Vec<&str> {
        self.ranking.iter().take(k).map(|r| r.feature.as_str()).collect()
    }
}

/// SHAP values for every row of `x`, computed in parallel; order follows `x`.
pub fn shap_matrix(ensemble: &TreeEnsemble, x: &FeatureMatrix) -> Result<Vec<ShapExplanation>, ExplainError> {
    check_covers(ensemble)?;
    if let Some(m) = ensemble.trees.iter().filter_map(|t| t.max_feature()).max() {
        if m >= x.n_cols() {
            return Err(ExplainError::WidthMismatch {
                expected: m + 1,
                found: x.n_cols(),
            });
        }
    }
    let rows: Vec<&[f64]> = x.rows().collect();
    Ok(rows.par_iter().map(|r| tree_shap_unchecked(ensemble, r)).collect())
}

fn mean_abs(expl: &[ShapExplanation], d: usize) -> Vec<f64> {
    let mut acc = vec![0.0; d];
    for e in expl {
        for (a, p) in acc.iter_mut().zip(&e.phi) {
            *a += p.abs();
        }
    }
    let n = expl.len() as f64;
    acc.iter().map(|v| v / n).collect()
}

/// Mean `|phi|` per feature over the given rows.
pub fn shap_global(ensemble: &TreeEnsemble, x: &FeatureMatrix) -> Result<GlobalImportance, ExplainError> {
    if x.n_rows() == 0 {
        return Err(ExplainError::EmptySample);
    }
    let expl = shap_matrix(ensemble, x)?;
    Ok(GlobalImportance::from_values(
        ImportanceMode::Shap,
        x.names(),
        &mean_abs(&expl, x.n_cols()),
    ))
}

/// SHAP for any model: TreeSHAP for ensembles, exact linear SHAP against
/// `means` for logistic models.
pub fn model_shap(model: &Model, x: &FeatureMatrix, means: &[f64]) -> Result<Vec<ShapExplanation>, ExplainError> {
    if x.n_cols() != model.width() {
        return Err(ExplainError::WidthMismatch {
            expected: model.width(),
            found: x.n_cols(),
        });
    }
    match &model.params {
        ModelParams::Trees(e) => shap_matrix(e, x),
        ModelParams::Linear(m) => x.rows().map(|r| linear_shap(m, r, means)).collect(),
    }
}

pub fn model_shap_global(model: &Model, x: &FeatureMatrix, means: &[f64]) -> Result<GlobalImportance, ExplainError> {
    if x.n_rows() == 0 {
        return Err(ExplainError::EmptySample);
    }
    let expl = model_shap(model, x, means)?;
    Ok(GlobalImportance::from_values(
        ImportanceMode::Shap,
        x.names(),
        &mean_abs(&expl, x.n_cols()),
    ))
}

/// Total split gain per feature.
pub fn gain_importance(ensemble: &TreeEnsemble, names: &[String]) -> GlobalImportance {
    let mut gain = vec![0.0; names.len()];
    for t in &ensemble.trees {
        for node in 0..t.n_nodes() {
            if !t.is_leaf(node) {
                gain[t.feature[node] as usize] += t.gain[node].max(0.0);
            }
        }
    }
    GlobalImportance::from_values(ImportanceMode::Gain, names, &gain)
}

/// Column means, used as the linear SHAP background.
pub fn column_means(x: &FeatureMatrix) -> Vec<f64> {
    let n = x.n_rows().max(1) as f64;
    (0..x.n_cols()).map(|j| x.column(j).iter().sum::<f64>() / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Combine, Tree};

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn single_feature_model_ranks_first() {
        let mut t = Tree::leaf(0.0, 10.0);
        let l = t.push_leaf(-1.0, 5.0);
        let r = t.push_leaf(1.0, 5.0);
        t.set_split(0, 1, 0.5, l, r, 3.0);
        let e = TreeEnsemble::new(vec![t], 0.0, Combine::AdditiveLogit, 1.0);
        let x = FeatureMatrix::from_rows(&[vec![0.0, 0.2, 0.0], vec![1.0, 0.8, 1.0]], None);
        let g = shap_global(&e, &x).unwrap();
        assert_eq!(g.ranking[0].feature, "x1");
        assert_eq!(g.value_of("x0"), Some(0.0));
        assert_eq!(g.value_of("x2"), Some(0.0));
        let gain = gain_importance(&e, &names(3));
        assert_eq!(gain.ranking[0].importance, 3.0);
        assert_eq!(gain.value_of("x0"), Some(0.0));
    }

    #[test]
    fn constant_model_all_zero() {
        let e = TreeEnsemble::new(vec![Tree::leaf(0.4, 3.0)], 0.0, Combine::AdditiveLogit, 1.0);
        let x = FeatureMatrix::from_rows(&[vec![0.0, 1.0]], None);
        let g = shap_global(&e, &x).unwrap();
        assert!(g.ranking.iter().all(|r| r.importance == 0.0));
        assert_eq!(g.top(2), vec!["x0", "x1"]);
    }

    #[test]
    fn empty_sample_rejected() {
        let e = TreeEnsemble::new(vec![], 0.0, Combine::AdditiveLogit, 1.0);
        let x = FeatureMatrix::zeros(0, names(2));
        assert!(matches!(shap_global(&e, &x), Err(ExplainError::EmptySample)));
    }
}
