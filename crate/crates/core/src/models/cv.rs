//! Stratified k-fold cross-validation with per-fold preprocessing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, predict, train, ModelError, PerfReport, TrainConfig};
use crate::tabular::{composite_key, fit_preprocessor, transform, DataTable};

/// Fold index for every row. Rows are grouped by `z = 2*y + s`, each group
/// shuffled from one seeded stream (groups in increasing `z`) and dealt
/// round-robin, the dealing position carried across groups so fold sizes
/// differ by at most one.
pub fn stratified_folds(table: &DataTable, k: usize, seed: u64) -> Result<Vec<usize>, ModelError> {
    let n = table.n_rows();
    if k < 2 || k > n {
        return Err(ModelError::InvalidFolds { k, n });
    }
    let y = table.labels();
    let s = table.sensitive();
    for class in [0u8, 1] {
        if y.iter().filter(|&&v| v == class).count() < k {
            return Err(ModelError::InvalidFolds { k, n });
        }
    }
    let mut strata: [Vec<usize>; 4] = Default::default();
    for i in 0..n {
        strata[composite_key(y[i], s[i]) as usize].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0usize; n];
    let mut offset = 0;
    for members in strata.iter_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold[i] = offset % k;
            offset += 1;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: PerfReport,
}

/// Mean and sample standard deviation (n - 1 denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub sd: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldMetrics>,
    pub accuracy: MetricSummary,
    pub auc: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
}

pub fn cross_validate(
    table: &DataTable,
    k: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<CvReport, ModelError> {
    cfg.validate()?;
    let fold_of = stratified_folds(table, k, seed)?;
    let folds: Vec<FoldMetrics> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (test_idx, train_idx): (Vec<usize>, Vec<usize>) =
                (0..table.n_rows()).partition(|&i| fold_of[i] == f);
            let train_t = table.select(&train_idx);
            let test_t = table.select(&test_idx);
            let prep = fit_preprocessor(&train_t)?;
            let x_train = transform(&prep, &train_t)?;
            let x_test = transform(&prep, &test_t)?;
            let model = train(&x_train, &train_t.labels(), None, cfg)?;
            let pred = predict(&model, &x_test)?;
            Ok(FoldMetrics {
                fold: f,
                n_train: train_idx.len(),
                n_test: test_idx.len(),
                metrics: evaluate(&test_t.labels(), &pred)?,
            })
        })
        .collect::<Result<_, ModelError>>()?;

    let pick = |get: fn(&PerfReport) -> f64| {
        MetricSummary::of(&folds.iter().map(|f| get(&f.metrics)).collect::<Vec<_>>())
    };
    Ok(CvReport {
        k,
        seed,
        accuracy: pick(|m| m.accuracy),
        auc: pick(|m| m.auc),
        precision: pick(|m| m.precision),
        recall: pick(|m| m.recall),
        f1: pick(|m| m.f1),
        folds,
    })
}
