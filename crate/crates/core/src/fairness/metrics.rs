use serde::{Deserialize, Serialize};

use super::{check_binary, check_len, FairnessError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl GroupCounts {
    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.fp + self.tn
    }

    /// `P(yhat = 1)` within the group.
    pub fn positive_rate(&self) -> Option<f64> {
        ratio(self.tp + self.fp, self.n())
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.positives())
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.negatives())
    }
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

/// Confusion counts for `s = 0` (index 0) and `s = 1` (index 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub groups: [GroupCounts; 2],
}

impl GroupConfusion {
    pub fn compute(pred: &[u8], y: &[u8], s: &[u8]) -> Result<Self, FairnessError> {
        check_len("labels", pred.len(), y.len())?;
        check_len("sensitive", pred.len(), s.len())?;
        check_binary("predictions", pred)?;
        check_binary("labels", y)?;
        check_binary("sensitive", s)?;
        let mut groups = [GroupCounts::default(); 2];
        for ((&p, &t), &g) in pred.iter().zip(y).zip(s) {
            let c = &mut groups[g as usize];
            match (t, p) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fn_ += 1,
                (_, 1) => c.fp += 1,
                _ => c.tn += 1,
            }
        }
        Ok(Self { groups })
    }

    pub fn require_groups(&self) -> Result<(), FairnessError> {
        for g in 0..2u8 {
            if self.groups[g as usize].n() == 0 {
                return Err(FairnessError::EmptyGroup(g));
            }
        }
        Ok(())
    }

    pub fn dpd(&self) -> Result<f64, FairnessError> {
        self.require_groups()?;
        let r0 = self.groups[0].positive_rate().unwrap_or(0.0);
        let r1 = self.groups[1].positive_rate().unwrap_or(0.0);
        Ok((r1 - r0).abs())
    }

    pub fn eo(&self) -> EoResult {
        let mut undefined = Vec::new();
        let mut gap = |class: LabelClass, rate: fn(&GroupCounts) -> Option<f64>| {
            let r: Vec<Option<f64>> = self.groups.iter().map(rate).collect();
            for (g, v) in r.iter().enumerate() {
                if v.is_none() {
                    undefined.push(UndefinedRate { group: g as u8, class });
                }
            }
            match (r[0], r[1]) {
                (Some(a), Some(b)) => Some((a - b).abs()),
                _ => None,
            }
        };
        let tpr_gap = gap(LabelClass::Positive, GroupCounts::tpr);
        let fpr_gap = gap(LabelClass::Negative, GroupCounts::fpr);
        let eo = tpr_gap.unwrap_or(0.0).max(fpr_gap.unwrap_or(0.0));
        EoResult {
            eo,
            tpr_gap,
            fpr_gap,
            degraded: !undefined.is_empty(),
            undefined,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelClass {
    /// TPR denominator (y = 1).
    Positive,
    /// FPR denominator (y = 0).
    Negative,
}

/// A rate whose denominator was zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndefinedRate {
    pub group: u8,
    pub class: LabelClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EoResult {
    pub eo: f64,
    pub tpr_gap: Option<f64>,
    pub fpr_gap: Option<f64>,
    /// Set when a gap could not be computed; `eo` then covers defined gaps only.
    pub degraded: bool,
    pub undefined: Vec<UndefinedRate>,
}

/// `|P(yhat=1 | s=1) - P(yhat=1 | s=0)|` on hard labels.
pub fn demographic_parity_difference(pred: &[u8], s: &[u8]) -> Result<f64, FairnessError> {
    check_len("sensitive", pred.len(), s.len())?;
    check_binary("predictions", pred)?;
    check_binary("sensitive", s)?;
    let mut n = [0usize; 2];
    let mut pos = [0usize; 2];
    for (&p, &g) in pred.iter().zip(s) {
        n[g as usize] += 1;
        pos[g as usize] += p as usize;
    }
    for g in 0..2 {
        if n[g] == 0 {
            return Err(FairnessError::EmptyGroup(g as u8));
        }
    }
    Ok((pos[1] as f64 / n[1] as f64 - pos[0] as f64 / n[0] as f64).abs())
}

/// `max(|TPR_1 - TPR_0|, |FPR_1 - FPR_0|)`.
pub fn equalized_odds(pred: &[u8], y: &[u8], s: &[u8]) -> Result<EoResult, FairnessError> {
    Ok(GroupConfusion::compute(pred, y, s)?.eo())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dpd_hand_example() {
        let pred = [1, 0, 0, 0, 1, 1, 0, 0];
        let s = [0, 0, 0, 0, 1, 1, 1, 1];
        assert!((demographic_parity_difference(&pred, &s).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(demographic_parity_difference(&[1, 0, 1, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(matches!(
            demographic_parity_difference(&[1, 0], &[1, 1]),
            Err(FairnessError::EmptyGroup(0))
        ));
    }

    #[test]
    fn eo_hand_example() {
        // Group 0: TPR 1.0 (2/2), FPR 0.2 (1/5). Group 1: TPR 0.5 (1/2), FPR 0.1 (1/10).
        let mut pred = vec![];
        let mut y = vec![];
        let mut s = vec![];
        let mut push = |g: u8, t: u8, p: u8, k: usize| {
            for _ in 0..k {
                pred.push(p);
                y.push(t);
                s.push(g);
            }
        };
        push(0, 1, 1, 2);
        push(0, 0, 1, 1);
        push(0, 0, 0, 4);
        push(1, 1, 1, 1);
        push(1, 1, 0, 1);
        push(1, 0, 1, 1);
        push(1, 0, 0, 9);
        let r = equalized_odds(&pred, &y, &s).unwrap();
        assert!((r.eo - 0.5).abs() < 1e-15);
        assert!((r.fpr_gap.unwrap() - 0.1).abs() < 1e-12);
        assert!(!r.degraded);
    }

    #[test]
    fn perfect_classifier_has_zero_eo() {
        let y = [1, 0, 1, 0, 1, 0];
        let s = [0, 0, 0, 1, 1, 1];
        assert_eq!(equalized_odds(&y, &y, &s).unwrap().eo, 0.0);
    }

    #[test]
    fn missing_positives_degrade() {
        // Group 1 has no positive labels, so its TPR is undefined.
        let r = equalized_odds(&[1, 0, 1, 0], &[1, 0, 0, 0], &[0, 0, 1, 1]).unwrap();
        assert!(r.degraded);
        assert_eq!(r.tpr_gap, None);
        assert_eq!(
            r.undefined,
            vec![UndefinedRate {
                group: 1,
                class: LabelClass::Positive
            }]
        );
        assert!((r.eo - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_binary() {
        assert!(matches!(
            demographic_parity_difference(&[2, 0], &[0, 1]),
            Err(FairnessError::NonBinary { .. })
        ));
    }
}
