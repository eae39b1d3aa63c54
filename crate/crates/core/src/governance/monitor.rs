use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate_drift_gate, GovernanceError, Policy, Registry, Stage, Verdict};
use crate::drift::{drift_day, windows_from_matrix, DayReport, DriftSeries, SampleWindow, Shift};
use crate::fairness::{audit, Status};
use crate::models::{self, Model};
use crate::tabular::{transform, Cell, ColumnKind, DataTable, FeatureMatrix, FittedPreprocessor};

/// Name of the extra drift channel tracking the model's output.
pub const PROBA_FEATURE: &str = "predicted_probability";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessCheck {
    pub day: usize,
    pub n: usize,
    pub dpd: f64,
    pub eo: f64,
    pub status: Status,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainEvent {
    pub day: usize,
    pub version_id: String,
    pub feature: String,
    pub ks: f64,
    pub threshold: f64,
    /// Labelled monitoring rows available to the retrain.
    pub accumulated_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickOutcome {
    pub day: DayReport,
    pub fairness: Option<FairnessCheck>,
    pub event: Option<RetrainEvent>,
    /// Flat `key=value` metrics for external scrapers.
    pub snapshot: String,
}

/// Monitoring state for one deployed version.
#[derive(Debug, Clone, Serialize)]
pub struct MonitorState {
    pub version_id: String,
    pub series: DriftSeries,
    pub fairness: Vec<FairnessCheck>,
    pub retrain_count: usize,
    #[serde(skip)]
    model: Model,
    #[serde(skip)]
    prep: FittedPreprocessor,
    #[serde(skip)]
    reference: Vec<SampleWindow>,
    #[serde(skip)]
    accumulated: Option<DataTable>,
}

fn proba_window(model: &Model, x: &FeatureMatrix, day: usize) -> Result<SampleWindow, GovernanceError> {
    Ok(SampleWindow {
        feature: PROBA_FEATURE.into(),
        day,
        values: models::predict(model, x)?.proba,
    })
}

impl MonitorState {
    /// Attach to the deployed entry of `registry`, using `reference` (the
    /// training rows) as the drift baseline.
    pub fn attach(registry: &Registry, reference: &DataTable, policy: &Policy) -> Result<Self, GovernanceError> {
        let entry = registry
            .list()?
            .into_iter()
            .rev()
            .find(|e| e.stage == Stage::Deployed)
            .ok_or(GovernanceError::NoDeployedModel)?;
        let model: Model = serde_json::from_slice(&registry.read_file(&entry.version_id, "model.json")?)?;
        let prep: FittedPreprocessor = serde_json::from_slice(&registry.read_file(&entry.version_id, "preprocessor.json")?)?;
        let x = transform(&prep, reference)?;
        let mut windows = windows_from_matrix(&x, 0);
        windows.push(proba_window(&model, &x, 0)?);
        Ok(Self {
            version_id: entry.version_id,
            series: DriftSeries::new(policy.drift.ks_max),
            fairness: Vec::new(),
            retrain_count: 0,
            model,
            prep,
            reference: windows,
            accumulated: None,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Monitoring rows seen so far, for a retrain.
    pub fn accumulated(&self) -> Option<&DataTable> {
        self.accumulated.as_ref()
    }

    /// Original training rows plus every monitoring window seen so far.
    pub fn retrain_data(&self, original: &DataTable) -> Result<DataTable, GovernanceError> {
        Ok(match &self.accumulated {
            Some(acc) => original.concat(acc)?,
            None => original.clone(),
        })
    }
}

fn snapshot(state: &MonitorState, stage: Stage, day: &DayReport, fairness: Option<&FairnessCheck>) -> String {
    let mut s = format!("day={}\nversion={}\nstage={}\n", day.day, state.version_id, stage.as_str());
    if let Some(f) = fairness {
        s.push_str(&format!("dpd={}\neo={}\nfairness_status={:?}\n", f.dpd, f.eo, f.status).to_lowercase());
    }
    s.push_str(&format!(
        "max_ks={}\nmax_ks_feature={}\ndrift_triggered={}\nretrain_count={}\n",
        day.max_ks, day.max_feature, day.triggered, state.retrain_count
    ));
    s
}

/// Process one day's window: drift for every feature plus the predicted
/// probability, a fairness recheck on the window's labels, and a retrain
/// event when the drift gate trips. Fairness rechecks are logged, never
/// blocking.
pub fn monitor_tick(
    state: &mut MonitorState,
    registry: &Registry,
    window: &DataTable,
    policy: &Policy,
) -> Result<TickOutcome, GovernanceError> {
    let stage = registry.show(&state.version_id)?.stage;
    if stage != Stage::Deployed {
        return Err(GovernanceError::NoDeployedModel);
    }
    let day = state.series.days.len() + 1;
    let x = transform(&state.prep, window)?;
    let mut windows = windows_from_matrix(&x, day);
    windows.push(proba_window(&state.model, &x, day)?);
    let report = drift_day(&state.reference, &windows, day, policy.drift.ks_max)?;

    let pred = models::predict(&state.model, &x)?;
    let fairness = match audit(&pred.labels, &window.labels(), &window.sensitive(), &policy.thresholds()) {
        Ok(r) => Some(FairnessCheck {
            day,
            n: r.n,
            dpd: r.dpd,
            eo: r.eo,
            status: r.status,
            degraded: r.degraded,
        }),
        Err(e) => {
            log::warn!("day {day}: fairness recheck skipped: {e}");
            None
        }
    };
    if let Some(f) = &fairness {
        log::info!("day {day}: dpd {:.4} eo {:.4} status {:?}", f.dpd, f.eo, f.status);
        state.fairness.push(f.clone());
    }

    state.accumulated = Some(match state.accumulated.take() {
        Some(acc) => acc.concat(window)?,
        None => window.clone(),
    });

    let mut one_day = DriftSeries::new(policy.drift.ks_max);
    one_day.push(report.clone());
    let gate = evaluate_drift_gate(&one_day, policy);
    state.series.push(report.clone());
    let event = if gate.verdict == Verdict::RetrainRequired {
        state.retrain_count += 1;
        let r = &gate.reasons[0];
        let feature = report
            .records
            .iter()
            .find(|rec| rec.ks > policy.drift.ks_max)
            .map(|rec| rec.feature.clone())
            .unwrap_or_default();
        log::warn!("day {day}: drift on {feature} (ks {:.4}); retrain required", r.value);
        Some(RetrainEvent {
            day,
            version_id: state.version_id.clone(),
            feature,
            ks: r.value,
            threshold: r.threshold,
            accumulated_rows: state.accumulated.as_ref().map_or(0, |a| a.n_rows()),
        })
    } else {
        None
    };
    Ok(TickOutcome {
        snapshot: snapshot(state, stage, &report, fairness.as_ref()),
        day: report,
        fairness,
        event,
    })
}

/// Seeded monitoring windows bootstrapped from the rows of `pool`. From
/// `shift.from_day` on, the named numeric columns (all numeric columns when
/// empty) move by `sd_multiple` of their pool standard deviation.
pub fn simulate_windows(
    pool: &DataTable,
    n_days: usize,
    window: usize,
    shift: Option<&Shift>,
    seed: u64,
) -> Vec<DataTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifted: Vec<(usize, f64)> = match shift {
        None => Vec::new(),
        Some(s) => pool
            .schema
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ColumnKind::Numeric && (s.features.is_empty() || s.features.contains(&c.name)))
            .map(|(j, _)| {
                let v: Vec<f64> = pool.rows.iter().filter_map(|r| r[j].as_number()).collect();
                let n = v.len() as f64;
                let m = v.iter().sum::<f64>() / n;
                let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
                (j, s.sd_multiple * sd)
            })
            .collect(),
    };
    (1..=n_days)
        .map(|day| {
            let idx: Vec<usize> = (0..window).map(|_| rng.random_range(0..pool.n_rows())).collect();
            let mut t = pool.select(&idx);
            if shift.is_some_and(|s| day >= s.from_day) {
                for row in &mut t.rows {
                    for &(j, delta) in &shifted {
                        if let Some(v) = row[j].as_number() {
                            row[j] = Cell::Number(v + delta);
                        }
                    }
                }
            }
            t
        })
        .collect()
}
