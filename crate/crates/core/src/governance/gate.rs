use serde::{Deserialize, Serialize};

use super::{GovernanceError, Policy};
use crate::drift::DriftSeries;
use crate::fairness::FairnessReport;
use crate::hashing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Block,
    RetrainRequired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReason {
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub verdict: Verdict,
    /// Violated gates; empty on pass.
    pub reasons: Vec<GateReason>,
    /// Non-blocking observations such as a degraded EO.
    pub warnings: Vec<String>,
    pub policy_hash: String,
    pub report_hashes: Vec<String>,
    /// Registry version the decision applies to, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version_id: Option<String>,
}

impl GateDecision {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn for_version(mut self, version: &str) -> Self {
        self.version_id = Some(version.to_string());
        self
    }
}

/// Block when DPD or EO strictly exceeds its maximum.
pub fn evaluate_gate(report: &FairnessReport, policy: &Policy) -> Result<GateDecision, GovernanceError> {
    let t = &report.thresholds;
    if (t.dpd_gate - policy.gates.dpd_max).abs() > 1e-12 || (t.eo_gate - policy.gates.eo_max).abs() > 1e-12 {
        return Err(GovernanceError::IncompatibleReport(format!(
            "report audited at dpd {} / eo {}, policy gates are {} / {}",
            t.dpd_gate, t.eo_gate, policy.gates.dpd_max, policy.gates.eo_max
        )));
    }
    let mut reasons = Vec::new();
    if report.dpd > policy.gates.dpd_max {
        reasons.push(GateReason {
            metric: "dpd".into(),
            value: report.dpd,
            threshold: policy.gates.dpd_max,
            detail: None,
        });
    }
    if report.eo > policy.gates.eo_max {
        reasons.push(GateReason {
            metric: "eo".into(),
            value: report.eo,
            threshold: policy.gates.eo_max,
            detail: None,
        });
    }
    let mut warnings = Vec::new();
    if report.degraded {
        warnings.push(format!(
            "equalized odds computed over defined rates only ({} undefined)",
            report.undefined_rates.len()
        ));
    }
    Ok(GateDecision {
        verdict: if reasons.is_empty() { Verdict::Pass } else { Verdict::Block },
        reasons,
        warnings,
        policy_hash: policy.hash(),
        report_hashes: vec![hashing::content_hash(report).expect("report serializes")],
        version_id: None,
    })
}

/// Require retraining when any `(day, feature)` KS exceeds `drift.ks_max`.
pub fn evaluate_drift_gate(series: &DriftSeries, policy: &Policy) -> GateDecision {
    let ks_max = policy.drift.ks_max;
    let first = series
        .days
        .iter()
        .flat_map(|d| &d.records)
        .find(|r| r.ks > ks_max);
    let reasons: Vec<GateReason> = first
        .map(|r| GateReason {
            metric: "ks".into(),
            value: r.ks,
            threshold: ks_max,
            detail: Some(format!("day {} feature {}", r.day, r.feature)),
        })
        .into_iter()
        .collect();
    GateDecision {
        verdict: if reasons.is_empty() {
            Verdict::Pass
        } else {
            Verdict::RetrainRequired
        },
        reasons,
        warnings: Vec::new(),
        policy_hash: policy.hash(),
        report_hashes: vec![hashing::content_hash(series).expect("series serializes")],
        version_id: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{DayReport, DriftRecord};
    use crate::fairness::{audit, AuditThresholds};

    fn report_with(dpd: f64, eo: f64) -> FairnessReport {
        let mut r = audit(&[1, 0, 1, 0], &[1, 0, 1, 0], &[0, 0, 1, 1], &AuditThresholds::default()).unwrap();
        r.dpd = dpd;
        r.eo = eo;
        r
    }

    #[test]
    fn gate_examples() {
        let p = Policy::default();
        assert!(evaluate_gate(&report_with(0.04, 0.03), &p).unwrap().passed());
        let d = evaluate_gate(&report_with(0.31, 0.0), &p).unwrap();
        assert_eq!(d.verdict, Verdict::Block);
        assert_eq!(d.reasons.len(), 1);
        assert_eq!(d.reasons[0].metric, "dpd");
        assert!(evaluate_gate(&report_with(0.05, 0.05), &p).unwrap().passed());
        let both = evaluate_gate(&report_with(0.2, 0.2), &p).unwrap();
        assert_eq!(both.reasons.len(), 2);
    }

    #[test]
    fn incompatible_thresholds() {
        let p = Policy::from_yaml("gates: {dpd_max: 0.03}").unwrap();
        assert!(matches!(
            evaluate_gate(&report_with(0.01, 0.01), &p),
            Err(GovernanceError::IncompatibleReport(_))
        ));
    }

    fn series(ks: &[f64]) -> DriftSeries {
        let mut s = DriftSeries::new(0.2);
        for (i, &k) in ks.iter().enumerate() {
            s.push(DayReport {
                day: i + 1,
                records: vec![DriftRecord {
                    day: i + 1,
                    feature: "chol".into(),
                    ks: k,
                    triggered: k > 0.2,
                }],
                max_ks: k,
                max_feature: "chol".into(),
                triggered: k > 0.2,
            });
        }
        s
    }

    #[test]
    fn drift_gate_examples() {
        let p = Policy::default();
        assert!(evaluate_drift_gate(&series(&[0.1; 30]), &p).passed());
        assert!(evaluate_drift_gate(&series(&[0.18; 30]), &p).passed());
        let mut ks = vec![0.1; 30];
        ks[14] = 0.25;
        let d = evaluate_drift_gate(&series(&ks), &p);
        assert_eq!(d.verdict, Verdict::RetrainRequired);
        assert_eq!(d.reasons[0].detail.as_deref(), Some("day 15 feature chol"));
        let lenient = Policy::from_yaml("drift: {ks_max: 1.0}").unwrap();
        assert!(evaluate_drift_gate(&series(&[1.0; 3]), &lenient).passed());
    }
}
