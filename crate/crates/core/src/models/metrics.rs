use serde::{Deserialize, Serialize};

use super::{ModelError, Predictions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub n: usize,
    pub accuracy: f64,
    pub auc: f64,
    /// Zero when nothing is predicted positive.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Rank-based AUC (Mann-Whitney), tied scores sharing their mid-rank and so
/// counting half a concordant pair.
pub fn auc(y: &[u8], scores: &[f64]) -> Result<f64, ModelError> {
    if y.len() != scores.len() {
        return Err(ModelError::LengthMismatch {
            what: "scores",
            expected: y.len(),
            found: scores.len(),
        });
    }
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ModelError::SingleClassAUC);
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of doubled ranks keeps the arithmetic in integers.
    let mut rank2_pos: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid2 = (i + 1 + j + 1) as u128;
        for &k in &order[i..=j] {
            if y[k] == 1 {
                rank2_pos += mid2;
            }
        }
        i = j + 1;
    }
    let (p, q) = (n_pos as u128, n_neg as u128);
    let u2 = rank2_pos - p * (p + 1);
    Ok(u2 as f64 / (2 * p * q) as f64)
}

pub fn evaluate(y: &[u8], pred: &Predictions) -> Result<PerfReport, ModelError> {
    if y.len() != pred.len() {
        return Err(ModelError::LengthMismatch {
            what: "predictions",
            expected: y.len(),
            found: pred.len(),
        });
    }
    let auc = auc(y, &pred.proba)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&t, &p) in y.iter().zip(&pred.labels) {
        match (t, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (0, _) => tn += 1,
            _ => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(PerfReport {
        n: y.len(),
        accuracy: ratio(tp + tn, y.len()),
        auc,
        precision,
        recall,
        f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairwise(y: &[u8], s: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == 1 && y[j] == 0 {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn perfect_and_tied() {
        let y = [0, 0, 1, 1];
        assert_eq!(auc(&y, &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(auc(&y, &[0.5; 4]).unwrap(), 0.5);
        assert!(matches!(auc(&[1, 1], &[0.1, 0.2]), Err(ModelError::SingleClassAUC)));
    }

    #[test]
    fn matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let y: Vec<u8> = (0..200).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        // Coarse grid so ties are common.
        let s: Vec<f64> = (0..200).map(|_| (rng.random::<f64>() * 20.0).floor() / 20.0).collect();
        assert!((auc(&y, &s).unwrap() - pairwise(&y, &s)).abs() < 1e-12);
        let s: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        assert!((auc(&y, &s).unwrap() - pairwise(&y, &s)).abs() < 1e-12);
    }

    #[test]
    fn confusion_metrics() {
        let y = [1, 1, 0, 0, 1];
        let pred = Predictions::from_proba(vec![0.9, 0.2, 0.7, 0.1, 0.6], 0.5);
        let r = evaluate(&y, &pred).unwrap();
        assert!((r.accuracy - 0.6).abs() < 1e-15);
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_positive_predictions() {
        let pred = Predictions::from_proba(vec![0.1, 0.2, 0.3], 0.5);
        let r = evaluate(&[1, 0, 1], &pred).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }
}
