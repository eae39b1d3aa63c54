//! Two-sample Kolmogorov-Smirnov drift monitoring over daily windows.
//!
//! One-hot and 0/1 columns go through the same statistic: on a binary
//! sample the KS distance is exactly the absolute difference in the rate of
//! ones, so categorical drift is gated on rate difference without a
//! separate code path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tabular::FeatureMatrix;

pub const DEFAULT_KS_MAX: f64 = 0.20;
pub const DEFAULT_WINDOW: usize = 200;

#[derive(Debug, Error)]
pub enum DriftError {
    #[error("empty sample")]
    EmptySample,
    #[error("window for `{feature}` on day {day} is empty or has non-finite values")]
    EmptyWindow { feature: String, day: usize },
    #[error("features do not match the reference: {0}")]
    FeatureMismatch(String),
}

/// `sup_x |F_a(x) - F_b(x)|` over the empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, DriftError> {
    if a.is_empty() || b.is_empty() {
        return Err(DriftError::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d.min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWindow {
    pub feature: String,
    pub day: usize,
    pub values: Vec<f64>,
}

impl SampleWindow {
    fn check(&self) -> Result<(), DriftError> {
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(DriftError::EmptyWindow {
                feature: self.feature.clone(),
                day: self.day,
            });
        }
        Ok(())
    }
}

/// One window per column of `x`.
pub fn windows_from_matrix(x: &FeatureMatrix, day: usize) -> Vec<SampleWindow> {
    x.names()
        .iter()
        .enumerate()
        .map(|(j, name)| SampleWindow {
            feature: name.clone(),
            day,
            values: x.column(j),
        })
        .collect()
}

/// One JSONL line of the drift log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRecord {
    pub day: usize,
    pub feature: String,
    pub ks: f64,
    pub triggered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayReport {
    pub day: usize,
    pub records: Vec<DriftRecord>,
    pub max_ks: f64,
    pub max_feature: String,
    pub triggered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSeries {
    pub threshold: f64,
    pub days: Vec<DayReport>,
}

impl DriftSeries {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            days: Vec::new(),
        }
    }

    pub fn push(&mut self, day: DayReport) {
        self.days.push(day);
    }

    /// First `(day, feature)` whose KS exceeds the threshold.
    pub fn first_trigger(&self) -> Option<(usize, &str, f64)> {
        self.days
            .iter()
            .flat_map(|d| &d.records)
            .find(|r| r.triggered)
            .map(|r| (r.day, r.feature.as_str(), r.ks))
    }

    pub fn trigger_days(&self) -> Vec<usize> {
        self.days.iter().filter(|d| d.triggered).map(|d| d.day).collect()
    }

    pub fn max_ks(&self) -> f64 {
        self.days.iter().map(|d| d.max_ks).fold(0.0, f64::max)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in self.days.iter().flat_map(|d| &d.records) {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Plot data: one row per day with the largest KS and the gate.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("day,max_ks,max_feature,threshold,triggered\n");
        for d in &self.days {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                d.day, d.max_ks, d.max_feature, self.threshold, d.triggered
            ));
        }
        out
    }
}

/// KS of each of `day_windows` against the matching reference window.
pub fn drift_day(
    reference: &[SampleWindow],
    day_windows: &[SampleWindow],
    day: usize,
    threshold: f64,
) -> Result<DayReport, DriftError> {
    if reference.len() != day_windows.len() {
        return Err(DriftError::FeatureMismatch(format!(
            "{} reference features, {} on day {day}",
            reference.len(),
            day_windows.len()
        )));
    }
    for (r, w) in reference.iter().zip(day_windows) {
        if r.feature != w.feature {
            return Err(DriftError::FeatureMismatch(format!("expected `{}`, got `{}`", r.feature, w.feature)));
        }
        r.check()?;
        w.check()?;
    }
    let records: Vec<DriftRecord> = reference
        .par_iter()
        .zip(day_windows.par_iter())
        .map(|(r, w)| {
            let ks = ks_statistic(&r.values, &w.values).expect("checked nonempty");
            DriftRecord {
                day,
                feature: r.feature.clone(),
                ks,
                triggered: ks > threshold,
            }
        })
        .collect();
    let (max_ks, max_feature) = records
        .iter()
        .fold((f64::NEG_INFINITY, String::new()), |(m, f), r| {
            if r.ks > m {
                (r.ks, r.feature.clone())
            } else {
                (m, f)
            }
        });
    Ok(DayReport {
        day,
        triggered: records.iter().any(|r| r.triggered),
        records,
        max_ks,
        max_feature,
    })
}

/// Build the full series; days are numbered from 1 in input order.
pub fn daily_drift(
    reference: &[SampleWindow],
    days: &[Vec<SampleWindow>],
    threshold: f64,
) -> Result<DriftSeries, DriftError> {
    let mut series = DriftSeries::new(threshold);
    for (k, windows) in days.iter().enumerate() {
        series.push(drift_day(reference, windows, k + 1, threshold)?);
    }
    Ok(series)
}

/// A location shift applied from `from_day` onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub from_day: usize,
    /// Multiples of the reference standard deviation.
    pub sd_multiple: f64,
    /// Columns shifted; empty means all.
    pub features: Vec<String>,
}

/// Seeded Gaussian monitoring simulation: a `reference_n`-row N(0,1)
/// reference for each of `d` features and `n_days` windows of `window`
/// rows, optionally shifted.
pub fn simulate_gaussian(
    d: usize,
    reference_n: usize,
    n_days: usize,
    window: usize,
    shift: Option<&Shift>,
    seed: u64,
) -> (Vec<SampleWindow>, Vec<Vec<SampleWindow>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    let reference: Vec<SampleWindow> = names
        .iter()
        .map(|n| SampleWindow {
            feature: n.clone(),
            day: 0,
            values: (0..reference_n).map(|_| rng.sample(StandardNormal)).collect(),
        })
        .collect();
    let days = (1..=n_days)
        .map(|day| {
            names
                .iter()
                .map(|n| {
                    let offset = match shift {
                        Some(s) if day >= s.from_day && (s.features.is_empty() || s.features.contains(n)) => {
                            s.sd_multiple
                        }
                        _ => 0.0,
                    };
                    SampleWindow {
                        feature: n.clone(),
                        day,
                        values: (0..window)
                            .map(|_| offset + rng.sample::<f64, _>(StandardNormal))
                            .collect(),
                    }
                })
                .collect()
        })
        .collect();
    (reference, days)
}

/// Seeded bootstrap windows drawn from the rows of `reference`, with an
/// optional shift of `sd_multiple` column standard deviations.
pub fn simulate_bootstrap(
    reference: &FeatureMatrix,
    n_days: usize,
    window: usize,
    shift: Option<&Shift>,
    seed: u64,
) -> Vec<FeatureMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sds: Vec<f64> = (0..reference.n_cols())
        .map(|j| {
            let c = reference.column(j);
            let n = c.len() as f64;
            let m = c.iter().sum::<f64>() / n;
            (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
        })
        .collect();
    (1..=n_days)
        .map(|day| {
            let idx: Vec<usize> = (0..window).map(|_| rng.random_range(0..reference.n_rows())).collect();
            let mut m = reference.select_rows(&idx);
            if let Some(s) = shift.filter(|s| day >= s.from_day) {
                for (j, name) in reference.names().iter().enumerate() {
                    if s.features.is_empty() || s.features.contains(name) {
                        for i in 0..m.n_rows() {
                            m.set(i, j, m.get(i, j) + s.sd_multiple * sds[j]);
                        }
                    }
                }
            }
            m
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(a: &[f64], b: &[f64]) -> f64 {
        let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        a.iter().chain(b).map(|&x| (cdf(a, x) - cdf(b, x)).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn hand_examples() {
        assert_eq!(ks_statistic(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), 0.5);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[5.0, 6.0, 7.0]).unwrap(), 1.0);
        assert!(matches!(ks_statistic(&[], &[1.0]), Err(DriftError::EmptySample)));
    }

    #[test]
    fn binary_ks_is_rate_difference() {
        let a = [0.0, 1.0, 1.0, 0.0, 1.0];
        let b = [0.0, 0.0, 1.0, 0.0];
        assert!((ks_statistic(&a, &b).unwrap() - (0.6 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn matches_merged_support_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let na = rng.random_range(1..40);
            let nb = rng.random_range(1..40);
            let a: Vec<f64> = (0..na).map(|_| (rng.random::<f64>() * 10.0).floor()).collect();
            let b: Vec<f64> = (0..nb).map(|_| (rng.random::<f64>() * 12.0).floor()).collect();
            assert!((ks_statistic(&a, &b).unwrap() - oracle(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_and_shifted_simulation() {
        let (r, days) = simulate_gaussian(3, 1000, 30, 200, None, 42);
        let s = daily_drift(&r, &days, DEFAULT_KS_MAX).unwrap();
        assert!(s.trigger_days().is_empty());
        assert_eq!(s.days.len(), 30);
        let shift = Shift {
            from_day: 15,
            sd_multiple: 1.5,
            features: vec!["x1".into()],
        };
        let (r, days) = simulate_gaussian(3, 1000, 30, 200, Some(&shift), 42);
        let s = daily_drift(&r, &days, DEFAULT_KS_MAX).unwrap();
        let (day, feature, ks) = s.first_trigger().unwrap();
        assert_eq!((day, feature), (15, "x1"));
        assert!(ks > 0.2);
        let never = daily_drift(&r, &days, 1.0).unwrap();
        assert!(never.trigger_days().is_empty());
    }

    #[test]
    fn series_exports_are_deterministic() {
        let (r, days) = simulate_gaussian(2, 300, 5, 50, None, 7);
        let a = daily_drift(&r, &days, 0.2).unwrap();
        let b = daily_drift(&r, &days, 0.2).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(a.to_jsonl().lines().count(), 10);
        assert!(a.plot_csv().starts_with("day,max_ks"));
        let first: DriftRecord = serde_json::from_str(a.to_jsonl().lines().next().unwrap()).unwrap();
        assert_eq!((first.day, first.feature.as_str()), (1, "x0"));
    }

    #[test]
    fn mismatched_features() {
        let (r, mut days) = simulate_gaussian(2, 50, 1, 20, None, 3);
        days[0][1].feature = "other".into();
        assert!(matches!(daily_drift(&r, &days, 0.2), Err(DriftError::FeatureMismatch(_))));
        days[0][1].feature = "x1".into();
        days[0][1].values.clear();
        assert!(matches!(daily_drift(&r, &days, 0.2), Err(DriftError::EmptyWindow { .. })));
    }
}
