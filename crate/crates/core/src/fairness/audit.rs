use serde::{Deserialize, Serialize};

use super::metrics::{GroupConfusion, UndefinedRate};
use super::{check_binary, check_len, FairnessError};

pub const REPORT_VERSION: u32 = 1;

/// Thresholds an audit is judged against. The deploy gate is strict; the
/// wider DPD band marks results worth attention but not blocking analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditThresholds {
    pub dpd_gate: f64,
    pub dpd_warn: f64,
    pub eo_gate: f64,
}

impl Default for AuditThresholds {
    fn default() -> Self {
        Self {
            dpd_gate: 0.05,
            dpd_warn: 0.10,
            eo_gate: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub version: u32,
    pub n: usize,
    pub dpd: f64,
    pub eo: f64,
    pub tpr_gap: Option<f64>,
    pub fpr_gap: Option<f64>,
    pub positive_rate: [f64; 2],
    pub confusion: GroupConfusion,
    pub thresholds: AuditThresholds,
    pub dpd_status: Status,
    pub eo_status: Status,
    pub status: Status,
    pub degraded: bool,
    pub undefined_rates: Vec<UndefinedRate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl FairnessReport {
    pub fn with_fingerprint(mut self, fp: impl Into<String>) -> Self {
        self.dataset_fingerprint = Some(fp.into());
        self
    }

    pub fn with_timestamp(mut self, ts: impl Into<String>) -> Self {
        self.timestamp = Some(ts.into());
        self
    }
}

/// Audit hard predictions. Status per metric is pass at or below the gate;
/// DPD between gate and warn level is a warning; anything above fails. An
/// undefined TPR or FPR downgrades a passing EO to a warning.
pub fn audit(
    pred: &[u8],
    y: &[u8],
    s: &[u8],
    thresholds: &AuditThresholds,
) -> Result<FairnessReport, FairnessError> {
    let confusion = GroupConfusion::compute(pred, y, s)?;
    let dpd = confusion.dpd()?;
    let eo = confusion.eo();
    let dpd_status = if dpd <= thresholds.dpd_gate {
        Status::Pass
    } else if dpd <= thresholds.dpd_warn {
        Status::Warn
    } else {
        Status::Fail
    };
    let mut eo_status = if eo.eo <= thresholds.eo_gate {
        Status::Pass
    } else {
        Status::Fail
    };
    if eo.degraded {
        eo_status = Status::Warn;
    }
    let rate = |g: usize| confusion.groups[g].positive_rate().unwrap_or(0.0);
    Ok(FairnessReport {
        version: REPORT_VERSION,
        n: pred.len(),
        dpd,
        eo: eo.eo,
        tpr_gap: eo.tpr_gap,
        fpr_gap: eo.fpr_gap,
        positive_rate: [rate(0), rate(1)],
        confusion,
        thresholds: *thresholds,
        dpd_status,
        eo_status,
        status: dpd_status.max(eo_status),
        degraded: eo.degraded,
        undefined_rates: eo.undefined,
        dataset_fingerprint: None,
        timestamp: None,
    })
}

/// Parity of the observed labels themselves, `|P(y=1|s=1) - P(y=1|s=0)|`.
pub fn label_parity(y: &[u8], s: &[u8]) -> Result<f64, FairnessError> {
    check_len("sensitive", y.len(), s.len())?;
    check_binary("labels", y)?;
    super::demographic_parity_difference(y, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Build predictions for 100 rows per group with a given number of
    /// positive predictions each; labels equal predictions so EO is 0.
    fn with_rates(r0: usize, r1: usize) -> (Vec<u8>, Vec<u8>) {
        let mut pred = Vec::new();
        let mut s = Vec::new();
        for (g, r) in [(0u8, r0), (1, r1)] {
            for i in 0..100 {
                pred.push(u8::from(i < r));
                s.push(g);
            }
        }
        (pred, s)
    }

    #[test]
    fn status_ladder() {
        let t = AuditThresholds::default();
        let (p, s) = with_rates(40, 44);
        let r = audit(&p, &p, &s, &t).unwrap();
        assert_eq!((r.dpd_status, r.eo_status, r.status), (Status::Pass, Status::Pass, Status::Pass));
        let (p, s) = with_rates(40, 47);
        let r = audit(&p, &p, &s, &t).unwrap();
        assert!((r.dpd - 0.07).abs() < 1e-12);
        assert_eq!(r.dpd_status, Status::Warn);
        let (p, s) = with_rates(20, 51);
        let r = audit(&p, &p, &s, &t).unwrap();
        assert_eq!(r.dpd_status, Status::Fail);
    }

    #[test]
    fn boundaries_are_inclusive() {
        // Exactly at the gate is a pass.
        let (p, s) = with_rates(40, 45);
        let r = audit(&p, &p, &s, &AuditThresholds::default()).unwrap();
        assert!(r.dpd <= 0.05 + 1e-15);
        assert_eq!(r.dpd_status, Status::Pass);
    }

    #[test]
    fn degraded_forces_warn() {
        let r = audit(&[1, 0, 1, 0], &[1, 0, 0, 0], &[0, 0, 1, 1], &AuditThresholds::default()).unwrap();
        assert!(r.degraded);
        assert_eq!(r.eo_status, Status::Warn);
    }

    #[test]
    fn serialization_is_stable() {
        let (p, s) = with_rates(30, 35);
        let a = audit(&p, &p, &s, &AuditThresholds::default()).unwrap().with_fingerprint("abc");
        let b = audit(&p, &p, &s, &AuditThresholds::default()).unwrap().with_fingerprint("abc");
        assert_eq!(
            crate::hashing::to_artifact_json(&a).unwrap(),
            crate::hashing::to_artifact_json(&b).unwrap()
        );
        let back: FairnessReport = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn label_parity_counts_labels() {
        assert!((label_parity(&[1, 0, 1, 1], &[0, 0, 1, 1]).unwrap() - 0.5).abs() < 1e-15);
    }
}
