//! Decision-curve analysis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BAND: (f64, f64) = (0.10, 0.20);
pub const DEFAULT_DELTA_NB_MAX: f64 = 0.001;

#[derive(Debug, Error)]
pub enum UtilityError {
    #[error("threshold {0} outside (0, 1)")]
    ThresholdOutOfRange(f64),
    #[error("{what}: expected length {expected}, got {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("labels must be 0/1")]
    NonBinary,
    #[error("no rows")]
    Empty,
    #[error("curves do not share a threshold grid")]
    GridMismatch,
}

/// `0.01, 0.02, ..., 0.50`.
pub fn default_grid() -> Vec<f64> {
    (1..=50).map(|k| k as f64 / 100.0).collect()
}

fn check(proba: &[f64], y: &[u8]) -> Result<(), UtilityError> {
    if proba.len() != y.len() {
        return Err(UtilityError::LengthMismatch {
            what: "labels",
            expected: proba.len(),
            found: y.len(),
        });
    }
    if y.is_empty() {
        return Err(UtilityError::Empty);
    }
    if y.iter().any(|&v| v > 1) {
        return Err(UtilityError::NonBinary);
    }
    Ok(())
}

fn check_t(t: f64) -> Result<(), UtilityError> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(UtilityError::ThresholdOutOfRange(t))
    }
}

fn counts(proba: &[f64], y: &[u8], t: f64) -> (usize, usize) {
    let (mut tp, mut fp) = (0, 0);
    for (&p, &yi) in proba.iter().zip(y) {
        if p >= t {
            if yi == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    (tp, fp)
}

fn nb_formula(tp: usize, fp: usize, n: usize, t: f64) -> f64 {
    let n = n as f64;
    tp as f64 / n - fp as f64 / n * (t / (1.0 - t))
}

/// `TP/N - FP/N * t/(1-t)`, predicting positive when `p >= t`.
pub fn net_benefit(proba: &[f64], y: &[u8], t: f64) -> Result<f64, UtilityError> {
    check(proba, y)?;
    check_t(t)?;
    let (tp, fp) = counts(proba, y, t);
    Ok(nb_formula(tp, fp, y.len(), t))
}

/// Treat-All reference: `prev - (1 - prev) * t/(1-t)`.
pub fn treat_all(prevalence: f64, t: f64) -> f64 {
    prevalence - (1.0 - prevalence) * (t / (1.0 - t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionCurvePoint {
    pub t: f64,
    pub tp: usize,
    pub fp: usize,
    pub n: usize,
    pub nb: f64,
    pub nb_treat_all: f64,
    pub nb_treat_none: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionCurve {
    pub label: String,
    pub prevalence: f64,
    pub band: (f64, f64),
    pub points: Vec<DecisionCurvePoint>,
}

impl DecisionCurve {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn at(&self, t: f64) -> Option<&DecisionCurvePoint> {
        self.points.iter().find(|p| (p.t - t).abs() < 1e-12)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,nb_model,nb_treat_all,nb_treat_none\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.t, p.nb, p.nb_treat_all, p.nb_treat_none));
        }
        out
    }

    /// First grid threshold at which Treat-All is no longer positive.
    pub fn treat_all_zero_crossing(&self) -> Option<f64> {
        self.points.iter().find(|p| p.nb_treat_all <= 0.0).map(|p| p.t)
    }
}

pub fn decision_curve(
    label: impl Into<String>,
    proba: &[f64],
    y: &[u8],
    grid: &[f64],
    band: (f64, f64),
) -> Result<DecisionCurve, UtilityError> {
    check(proba, y)?;
    for &t in grid.iter().chain([&band.0, &band.1]) {
        check_t(t)?;
    }
    if !(band.0 <= band.1) {
        return Err(UtilityError::ThresholdOutOfRange(band.0));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(UtilityError::GridMismatch);
    }
    let n = y.len();
    let prevalence = y.iter().filter(|&&v| v == 1).count() as f64 / n as f64;
    let points = grid
        .iter()
        .map(|&t| {
            let (tp, fp) = counts(proba, y, t);
            DecisionCurvePoint {
                t,
                tp,
                fp,
                n,
                nb: nb_formula(tp, fp, n, t),
                nb_treat_all: treat_all(prevalence, t),
                nb_treat_none: 0.0,
            }
        })
        .collect();
    Ok(DecisionCurve {
        label: label.into(),
        prevalence,
        band,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub band: (f64, f64),
    pub bound: f64,
    pub max_abs_delta: f64,
    pub min_nb_baseline: f64,
    pub min_nb_mitigated: f64,
    pub both_positive: bool,
    pub utility_preserved: bool,
}

/// Compare two curves over their grid points inside `band`.
pub fn band_report(
    baseline: &DecisionCurve,
    mitigated: &DecisionCurve,
    band: (f64, f64),
    bound: f64,
) -> Result<BandReport, UtilityError> {
    if baseline.points.len() != mitigated.points.len()
        || baseline.points.iter().zip(&mitigated.points).any(|(a, b)| a.t != b.t)
    {
        return Err(UtilityError::GridMismatch);
    }
    let eps = 1e-12;
    let inside: Vec<(&DecisionCurvePoint, &DecisionCurvePoint)> = baseline
        .points
        .iter()
        .zip(&mitigated.points)
        .filter(|(a, _)| a.t >= band.0 - eps && a.t <= band.1 + eps)
        .collect();
    if inside.is_empty() {
        return Err(UtilityError::GridMismatch);
    }
    let max_abs_delta = inside.iter().map(|(a, b)| (a.nb - b.nb).abs()).fold(0.0, f64::max);
    let min_nb_baseline = inside.iter().map(|(a, _)| a.nb).fold(f64::INFINITY, f64::min);
    let min_nb_mitigated = inside.iter().map(|(_, b)| b.nb).fold(f64::INFINITY, f64::min);
    Ok(BandReport {
        band,
        bound,
        max_abs_delta,
        min_nb_baseline,
        min_nb_mitigated,
        both_positive: min_nb_baseline > 0.0 && min_nb_mitigated > 0.0,
        utility_preserved: max_abs_delta <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn formula_example() {
        // 30 TP, 10 FP among 100 rows at t = 0.15.
        let mut proba = vec![0.9; 40];
        proba.extend(vec![0.01; 60]);
        let mut y = vec![1u8; 30];
        y.extend(vec![0u8; 10]);
        y.extend(vec![0u8; 60]);
        let nb = net_benefit(&proba, &y, 0.15).unwrap();
        assert!((nb - (0.3 - 0.1 * 0.15 / 0.85)).abs() < 1e-15);
        assert!((nb - 0.28235).abs() < 1e-5);
    }

    #[test]
    fn trivial_cases() {
        let y = [1, 0, 1, 0, 0];
        assert_eq!(net_benefit(&[0.0; 5], &y, 0.2).unwrap(), 0.0);
        let perfect: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        for t in default_grid() {
            assert!((net_benefit(&perfect, &y, t).unwrap() - 0.4).abs() < 1e-15);
        }
        assert!(matches!(net_benefit(&[0.5], &[1], 1.0), Err(UtilityError::ThresholdOutOfRange(_))));
    }

    #[test]
    fn curve_matches_recount_and_treat_all_crosses_at_prevalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<u8> = (0..500).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
        let p: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let c = decision_curve("m", &p, &y, &default_grid(), DEFAULT_BAND).unwrap();
        for pt in &c.points {
            let tp = (0..500).filter(|&i| p[i] >= pt.t && y[i] == 1).count();
            let fp = (0..500).filter(|&i| p[i] >= pt.t && y[i] == 0).count();
            let nb = tp as f64 / 500.0 - fp as f64 / 500.0 * pt.t / (1.0 - pt.t);
            assert!((pt.nb - nb).abs() < 1e-12);
            assert!(pt.nb <= c.prevalence + 1e-15);
            assert_eq!(pt.nb_treat_none, 0.0);
        }
        let z = c.treat_all_zero_crossing().unwrap();
        assert!((z - c.prevalence).abs() <= 0.01 + 1e-12);
        assert!(treat_all(0.3, 0.3).abs() < 1e-15);
        assert!(c.to_csv().lines().count() == 51);
    }

    #[test]
    fn band_comparison() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10_000;
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let a = decision_curve("a", &p, &y, &default_grid(), DEFAULT_BAND).unwrap();
        let same = band_report(&a, &a, DEFAULT_BAND, DEFAULT_DELTA_NB_MAX).unwrap();
        assert_eq!(same.max_abs_delta, 0.0);
        assert!(same.utility_preserved);
        // Flip one prediction from certain-negative to certain-positive.
        let mut q = p.clone();
        let k = (0..n).find(|&i| p[i] < 0.01).unwrap();
        q[k] = 0.99;
        let b = decision_curve("b", &q, &y, &default_grid(), DEFAULT_BAND).unwrap();
        let r = band_report(&a, &b, DEFAULT_BAND, DEFAULT_DELTA_NB_MAX).unwrap();
        let bound = 2.0 / n as f64 * (0.2f64 / 0.8).max(1.0);
        assert!(r.max_abs_delta <= bound);
        let mut c = b.clone();
        c.points.pop();
        assert!(matches!(band_report(&a, &c, DEFAULT_BAND, 0.001), Err(UtilityError::GridMismatch)));
    }
}
