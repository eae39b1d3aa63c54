//! Single-feature counterfactuals by grid scan in original units.

use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::models::Model;
use crate::tabular::FittedPreprocessor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Decrease,
    Increase,
}

/// What counts as a successful counterfactual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskGoal {
    /// Predicted risk moves down by at least this much.
    DecreaseBy(f64),
    /// Predicted risk moves up by at least this much.
    IncreaseBy(f64),
    /// The predicted label flips at the model threshold.
    CrossThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualQuery {
    pub feature: String,
    pub direction: Direction,
    /// Grid step in original units.
    pub step: f64,
    pub goal: RiskGoal,
    #[serde(default)]
    pub units: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub feature: String,
    pub found: bool,
    /// Signed change in original units (negative for a decrease).
    pub delta: f64,
    pub original_value: f64,
    pub new_value: f64,
    pub risk_before: f64,
    pub risk_after: f64,
    /// `risk_after - risk_before`.
    pub risk_change: f64,
    pub threshold_crossed: bool,
    pub text: String,
}

fn trim_number(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Scan `original +/- k * step` for `k = 1, 2, ...` within the training
/// range of `feature` and return the first value meeting the goal.
pub fn counterfactual_delta(
    model: &Model,
    prep: &FittedPreprocessor,
    row: &[f64],
    query: &CounterfactualQuery,
) -> Result<Counterfactual, ExplainError> {
    if !(query.step > 0.0 && query.step.is_finite()) {
        return Err(ExplainError::EmptyGrid);
    }
    if row.len() != model.width() {
        return Err(ExplainError::WidthMismatch {
            expected: model.width(),
            found: row.len(),
        });
    }
    let (_, min, max) = prep
        .numeric_spec(&query.feature)
        .ok_or_else(|| ExplainError::NonNumericFeature(query.feature.clone()))?;
    let col = prep
        .columns_of(&query.feature)
        .ok_or_else(|| ExplainError::NonNumericFeature(query.feature.clone()))?
        .start;
    let original = prep.unscale(&query.feature, row[col]).unwrap_or(min);
    let threshold = model.config.threshold;
    let before = model.predict_proba_row(row);
    let sign = match query.direction {
        Direction::Decrease => -1.0,
        Direction::Increase => 1.0,
    };

    let mut probe = row.to_vec();
    let mut k = 1u64;
    loop {
        let delta = sign * query.step * k as f64;
        let value = original + delta;
        if value < min - 1e-9 * (max - min).abs().max(1.0) || value > max + 1e-9 * (max - min).abs().max(1.0) {
            break;
        }
        probe[col] = prep.scale(&query.feature, value).expect("numeric feature");
        let after = model.predict_proba_row(&probe);
        let change = after - before;
        let crossed = (before >= threshold) != (after >= threshold);
        let hit = match query.goal {
            RiskGoal::DecreaseBy(a) => -change >= a,
            RiskGoal::IncreaseBy(a) => change >= a,
            RiskGoal::CrossThreshold => crossed,
        };
        if hit {
            let verb = if sign < 0.0 { "Reducing" } else { "Increasing" };
            let effect = if change <= 0.0 { "decreases" } else { "increases" };
            let units = query.units.as_deref().map(|u| format!(" {u}")).unwrap_or_default();
            let text = format!(
                "{verb} {} by {}{units} {effect} predicted risk by {:.1}%",
                query.feature,
                trim_number(delta.abs()),
                100.0 * change.abs()
            );
            return Ok(Counterfactual {
                feature: query.feature.clone(),
                found: true,
                delta,
                original_value: original,
                new_value: value,
                risk_before: before,
                risk_after: after,
                risk_change: change,
                threshold_crossed: crossed,
                text,
            });
        }
        k += 1;
    }
    Ok(Counterfactual {
        feature: query.feature.clone(),
        found: false,
        delta: 0.0,
        original_value: original,
        new_value: original,
        risk_before: before,
        risk_after: before,
        risk_change: 0.0,
        threshold_crossed: false,
        text: format!("no counterfactual in range for {}", query.feature),
    })
}
