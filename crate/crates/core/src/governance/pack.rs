use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{Artifact, GateDecision, GovernanceError, Policy, Verdict};
use crate::fairness::FairnessReport;
use crate::hashing;
use crate::models::{Model, PerfReport};
use crate::tabular::{FeatureSpec, FittedPreprocessor};

/// Facts about the data and intended use that the pack records but cannot
/// derive from the artifacts themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackInputs {
    pub dataset_name: String,
    pub dataset_source: String,
    pub n_rows: usize,
    pub dataset_fingerprint: String,
    pub split_seed: u64,
    pub split_sizes: [usize; 3],
    pub split_fingerprint: String,
    pub label_parity: Option<f64>,
    pub metrics: Option<PerfReport>,
    pub intended_use: String,
    /// What data a retrain uses.
    pub retrain_data: String,
    pub notes: Vec<String>,
}

impl Default for PackInputs {
    fn default() -> Self {
        Self {
            dataset_name: "unnamed".into(),
            dataset_source: "unspecified".into(),
            n_rows: 0,
            dataset_fingerprint: String::new(),
            split_seed: 0,
            split_sizes: [0; 3],
            split_fingerprint: String::new(),
            label_parity: None,
            metrics: None,
            intended_use: "Decision support for clinical risk screening; not a diagnostic device. \
                           Outputs must be reviewed by a clinician."
                .into(),
            retrain_data: "original training partition plus accumulated labelled monitoring windows".into(),
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attestation {
    pub version_id: String,
    pub policy_hash: String,
    pub verdict: Verdict,
    pub decision: GateDecision,
    /// Hash of every gate decision taken on the way, in order.
    pub decision_hashes: Vec<String>,
    pub audit_hashes: Vec<String>,
    /// Relative path to SHA-256 for every other file in the version.
    pub artifacts: BTreeMap<String, String>,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssurancePack {
    pub model_card: String,
    pub datasheet: String,
    pub attestation: Attestation,
}

impl AssurancePack {
    pub fn artifacts(&self) -> Vec<Artifact> {
        vec![
            Artifact::new("assurance/model_card.md", self.model_card.clone()),
            Artifact::new("assurance/datasheet.md", self.datasheet.clone()),
            Artifact::json(super::ATTESTATION, &self.attestation),
        ]
    }
}

fn find<'a>(artifacts: &'a [Artifact], path: &str, kind: &str) -> Result<&'a Artifact, GovernanceError> {
    artifacts
        .iter()
        .find(|a| a.path == path)
        .ok_or_else(|| GovernanceError::MissingArtifact(kind.into()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into())
}

/// Render the model card, datasheet and attestation for one version.
/// `decisions` is the gate history; the last one is the verdict attested.
#[allow(clippy::too_many_arguments)]
pub fn build_assurance_pack(
    version_id: &str,
    model: &Model,
    prep: &FittedPreprocessor,
    artifacts: &[Artifact],
    policy: &Policy,
    decisions: &[GateDecision],
    inputs: &PackInputs,
    timestamp: &str,
) -> Result<AssurancePack, GovernanceError> {
    let report_file = find(artifacts, "fairness_report.json", "fairness_report")?;
    find(artifacts, "shap_global.json", "shap_global")?;
    let decision = decisions
        .last()
        .cloned()
        .ok_or_else(|| GovernanceError::MissingArtifact("gate_decision".into()))?;
    let report: FairnessReport = serde_json::from_slice(&report_file.bytes)?;

    let mut card = String::new();
    let _ = writeln!(card, "# Model card: {version_id}\n");
    let _ = writeln!(card, "## Model\n");
    let _ = writeln!(card, "- family: {:?}", model.family);
    let _ = writeln!(card, "- features: {}", model.width());
    let _ = writeln!(card, "- configuration:\n\n```json\n{}\n```\n", serde_json::to_string_pretty(&model.config)?);
    let _ = writeln!(card, "## Metrics (held-out test partition)\n");
    match &inputs.metrics {
        Some(m) => {
            let _ = writeln!(
                card,
                "| n | accuracy | AUC | precision | recall | F1 |\n|---|---|---|---|---|---|\n| {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
                m.n, m.accuracy, m.auc, m.precision, m.recall, m.f1
            );
        }
        None => card.push_str("not recorded\n\n"),
    }
    let _ = writeln!(card, "## Fairness (validation partition)\n");
    let _ = writeln!(card, "- DPD: {:.4} ({:?})", report.dpd, report.dpd_status);
    let _ = writeln!(card, "- EO: {:.4} ({:?})", report.eo, report.eo_status);
    let _ = writeln!(card, "- TPR gap: {}, FPR gap: {}", fmt_opt(report.tpr_gap), fmt_opt(report.fpr_gap));
    let _ = writeln!(
        card,
        "- gates: DPD <= {}, EO <= {}; verdict {:?}\n",
        policy.gates.dpd_max, policy.gates.eo_max, decision.verdict
    );
    for w in &decision.warnings {
        let _ = writeln!(card, "- warning: {w}");
    }
    let _ = writeln!(card, "## Intended use\n\n{}", inputs.intended_use);

    let mut sheet = String::new();
    let _ = writeln!(sheet, "# Datasheet: {}\n", inputs.dataset_name);
    let _ = writeln!(sheet, "- source: {}", inputs.dataset_source);
    let _ = writeln!(sheet, "- rows: {}", inputs.n_rows);
    let _ = writeln!(sheet, "- fingerprint: {}", inputs.dataset_fingerprint);
    let _ = writeln!(sheet, "- protected attribute: {}", policy.protected_attribute);
    if let Some(p) = inputs.label_parity {
        let _ = writeln!(sheet, "- label parity |P(y=1|s=1) - P(y=1|s=0)|: {p:.4}");
    }
    let _ = writeln!(sheet, "\n## Split\n");
    let _ = writeln!(sheet, "- seed: {}", inputs.split_seed);
    let [a, b, c] = inputs.split_sizes;
    let _ = writeln!(sheet, "- train/validation/test rows: {a}/{b}/{c}");
    let _ = writeln!(sheet, "- split fingerprint: {}", inputs.split_fingerprint);
    let _ = writeln!(sheet, "\n## Preprocessing\n");
    for f in &prep.features {
        let line = match f {
            FeatureSpec::Numeric { column, median, min, max } => {
                format!("- {column}: median imputation ({median}), min-max scaling to [0, 1] over [{min}, {max}]")
            }
            FeatureSpec::OneHot { column, categories } => {
                format!("- {column}: one-hot over {} categories, missing as all-zero", categories.len())
            }
            FeatureSpec::Binary { column } => format!("- {column}: binary indicator"),
        };
        let _ = writeln!(sheet, "{line}");
    }
    let _ = writeln!(sheet, "\n## Retraining data\n\n{}", inputs.retrain_data);
    for n in &inputs.notes {
        let _ = writeln!(sheet, "- {n}");
    }

    let mut hashes: BTreeMap<String, String> = BTreeMap::new();
    for a in [Artifact::json("model.json", model), Artifact::json("preprocessor.json", prep)]
        .iter()
        .chain(artifacts)
    {
        hashes.insert(a.path.clone(), a.sha256());
    }
    hashes.insert("assurance/model_card.md".into(), hashing::sha256_hex(card.as_bytes()));
    hashes.insert("assurance/datasheet.md".into(), hashing::sha256_hex(sheet.as_bytes()));

    let audit_hashes = decisions.iter().flat_map(|d| d.report_hashes.iter().cloned()).collect();
    let decision_hashes = decisions
        .iter()
        .map(|d| hashing::content_hash(d))
        .collect::<Result<_, _>>()?;
    Ok(AssurancePack {
        model_card: card,
        datasheet: sheet,
        attestation: Attestation {
            version_id: version_id.into(),
            policy_hash: policy.hash(),
            verdict: decision.verdict,
            decision,
            decision_hashes,
            audit_hashes,
            artifacts: hashes,
            timestamp: timestamp.into(),
        },
    })
}
