use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Cell, ColumnKind, DataTable, FeatureMatrix, TabularError};
use crate::hashing;

/// Category label used for missing categorical cells seen during fitting.
pub const MISSING_CATEGORY: &str = "__missing__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownCategoryPolicy {
    /// Unseen categories encode as an all-zero indicator block.
    Ignore,
}

/// One source column's contribution to the feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum FeatureSpec {
    /// Median-imputed, min-max scaled numeric column.
    Numeric {
        column: String,
        median: f64,
        min: f64,
        max: f64,
    },
    /// One indicator column per category.
    OneHot {
        column: String,
        categories: Vec<String>,
    },
    /// Audited 0/1 attribute passed through unchanged.
    Binary { column: String },
}

impl FeatureSpec {
    pub fn column(&self) -> &str {
        match self {
            FeatureSpec::Numeric { column, .. }
            | FeatureSpec::OneHot { column, .. }
            | FeatureSpec::Binary { column } => column,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FeatureSpec::OneHot { categories, .. } => categories.len(),
            _ => 1,
        }
    }
}

/// Training-set statistics that turn a [`DataTable`] into a [`FeatureMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPreprocessor {
    pub schema_hash: String,
    pub unknown_category: UnknownCategoryPolicy,
    pub features: Vec<FeatureSpec>,
    pub feature_names: Vec<String>,
}

impl FittedPreprocessor {
    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn content_hash(&self) -> String {
        hashing::content_hash(self).expect("preprocessor serializes")
    }

    /// Feature-matrix column range occupied by a source column.
    pub fn columns_of(&self, source: &str) -> Option<std::ops::Range<usize>> {
        let mut start = 0;
        for f in &self.features {
            if f.column() == source {
                return Some(start..start + f.width());
            }
            start += f.width();
        }
        None
    }

    pub fn numeric_spec(&self, source: &str) -> Option<(f64, f64, f64)> {
        self.features.iter().find_map(|f| match f {
            FeatureSpec::Numeric {
                column,
                median,
                min,
                max,
            } if column == source => Some((*median, *min, *max)),
            _ => None,
        })
    }

    /// Map a value in original units to its scaled feature value.
    pub fn scale(&self, source: &str, value: f64) -> Option<f64> {
        let (_, min, max) = self.numeric_spec(source)?;
        Some(min_max(value, min, max))
    }

    /// Inverse of [`FittedPreprocessor::scale`] for non-degenerate columns.
    pub fn unscale(&self, source: &str, scaled: f64) -> Option<f64> {
        let (_, min, max) = self.numeric_spec(source)?;
        Some(min + scaled * (max - min))
    }
}

fn min_max(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (x - min) / (max - min)
    } else {
        0.0
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Fit medians, ranges and category lists on the training partition.
pub fn fit_preprocessor(train: &DataTable) -> Result<FittedPreprocessor, TabularError> {
    if train.is_empty() {
        return Err(TabularError::EmptyTable);
    }
    let schema = &train.schema;
    let audited = schema.sensitive_index();
    let mut features = Vec::new();
    let mut names = Vec::new();

    for (c, col) in schema.columns.iter().enumerate() {
        match col.kind {
            ColumnKind::Target => {}
            ColumnKind::Sensitive if c == audited => {
                if col.feature != Some(false) {
                    features.push(FeatureSpec::Binary {
                        column: col.name.clone(),
                    });
                    names.push(col.name.clone());
                }
            }
            ColumnKind::Numeric | ColumnKind::Sensitive => {
                if col.feature == Some(false) {
                    continue;
                }
                let mut vals: Vec<f64> = train.rows.iter().filter_map(|r| r[c].as_number()).collect();
                if vals.is_empty() {
                    return Err(TabularError::AllMissingColumn(col.name.clone()));
                }
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let med = median(&mut vals);
                features.push(FeatureSpec::Numeric {
                    column: col.name.clone(),
                    median: med,
                    min,
                    max,
                });
                names.push(col.name.clone());
            }
            ColumnKind::Categorical => {
                let saw_missing = train.rows.iter().any(|r| r[c].is_missing());
                let mut categories: Vec<String> = match &col.categories {
                    Some(declared) => declared.clone(),
                    None => train
                        .rows
                        .iter()
                        .filter_map(|r| match &r[c] {
                            Cell::Label(s) => Some(s.clone()),
                            _ => None,
                        })
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect(),
                };
                if saw_missing && !categories.iter().any(|s| s == MISSING_CATEGORY) {
                    categories.push(MISSING_CATEGORY.to_string());
                }
                names.extend(categories.iter().map(|cat| format!("{}={cat}", col.name)));
                features.push(FeatureSpec::OneHot {
                    column: col.name.clone(),
                    categories,
                });
            }
        }
    }

    Ok(FittedPreprocessor {
        schema_hash: schema.hash(),
        unknown_category: UnknownCategoryPolicy::Ignore,
        features,
        feature_names: names,
    })
}

/// Apply a fitted preprocessor. Missing numerics take the training median;
/// unseen categories encode as zeros; degenerate ranges map to 0.0.
pub fn transform(prep: &FittedPreprocessor, table: &DataTable) -> Result<FeatureMatrix, TabularError> {
    if table.schema.hash() != prep.schema_hash {
        return Err(TabularError::SchemaMismatch(
            "table schema differs from the one the preprocessor was fitted on".into(),
        ));
    }
    let schema = &table.schema;
    let source: Vec<usize> = prep
        .features
        .iter()
        .map(|f| {
            schema
                .index_of(f.column())
                .ok_or_else(|| TabularError::MissingColumn(f.column().to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mut out = FeatureMatrix::zeros(table.n_rows(), prep.feature_names.clone());
    for (i, row) in table.rows.iter().enumerate() {
        let dst = out.row_mut(i);
        let mut j = 0;
        for (spec, &c) in prep.features.iter().zip(&source) {
            match spec {
                FeatureSpec::Numeric {
                    median, min, max, ..
                } => {
                    let x = row[c].as_number().unwrap_or(*median);
                    dst[j] = min_max(x, *min, *max);
                }
                FeatureSpec::Binary { .. } => {
                    dst[j] = row[c].as_number().unwrap_or(0.0);
                }
                FeatureSpec::OneHot { categories, .. } => {
                    let label = match &row[c] {
                        Cell::Label(s) => Some(s.as_str()),
                        Cell::Missing => Some(MISSING_CATEGORY),
                        Cell::Number(_) => None,
                    };
                    if let Some(k) = label.and_then(|l| categories.iter().position(|c| c == l)) {
                        dst[j + k] = 1.0;
                    }
                }
            }
            j += spec.width();
        }
    }
    Ok(out)
}
