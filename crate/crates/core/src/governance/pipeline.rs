use serde::{Deserialize, Serialize};

use super::{
    build_assurance_pack, evaluate_gate, Artifact, GateDecision, GovernanceError, PackInputs, Policy, Registry,
    RegistryEntry, Stage,
};
use crate::explain::{
    column_means, gain_importance, global_artifact, model_shap, model_shap_global, GlobalImportance,
    GlobalImportanceRecord, GLOBAL_SAMPLE,
};
use crate::fairness::{audit, label_parity, reweigh, FairnessReport};
use crate::models::{self, evaluate, Model, PerfReport, TrainConfig};
use crate::tabular::{fit_preprocessor, stratified_split, transform, DataTable, FeatureMatrix, SplitPlan};
use crate::utility::{band_report, decision_curve, default_grid, BandReport, DecisionCurve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub split_fractions: [f64; 3],
    pub dataset_name: String,
    pub dataset_source: String,
    /// Rows of the test partition explained for the global SHAP artifact.
    pub explain_rows: usize,
}

impl PipelineConfig {
    pub fn new(train: TrainConfig) -> Self {
        Self {
            train,
            split_fractions: SplitPlan::default().fractions,
            dataset_name: "unnamed".into(),
            dataset_source: "unspecified".into(),
            explain_rows: GLOBAL_SAMPLE,
        }
    }
}

/// One train/audit/gate pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// `baseline` or `reweighted`.
    pub name: String,
    pub model_hash: String,
    pub version_id: String,
    pub report: FairnessReport,
    pub decision: GateDecision,
    pub validation: PerfReport,
    pub test: PerfReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub stages: Vec<StageRecord>,
    /// Decision on the final model.
    pub decision: GateDecision,
    pub mitigated: bool,
    pub version_id: String,
    pub label_parity: f64,
    pub band: Option<BandReport>,
    pub shap_top: Vec<String>,
    /// Worst `|phi_0 + sum(phi) - f(x)|` over the explained rows.
    pub local_accuracy_gap: f64,
    pub entry: Option<RegistryEntry>,
    #[serde(skip)]
    pub model: Option<Model>,
}

impl PipelineOutcome {
    pub fn baseline(&self) -> &StageRecord {
        &self.stages[0]
    }

    pub fn last(&self) -> &StageRecord {
        self.stages.last().expect("at least one stage")
    }
}

struct Fitted {
    model: Model,
    record: StageRecord,
    val_proba: Vec<f64>,
}

#[derive(Serialize)]
struct ShapArtifact<'a> {
    model_hash: &'a str,
    rows_explained: usize,
    base_value: f64,
    shap: Vec<GlobalImportanceRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gain: Option<Vec<GlobalImportanceRecord>>,
}

#[allow(clippy::too_many_arguments)]
fn fit_stage(
    name: &str,
    x: [&FeatureMatrix; 3],
    y: [&[u8]; 3],
    s_val: &[u8],
    w: Option<&[f64]>,
    cfg: &TrainConfig,
    policy: &Policy,
    prep: &crate::tabular::FittedPreprocessor,
    validation_fp: &str,
) -> Result<Fitted, GovernanceError> {
    let model = models::train(x[0], y[0], w, cfg)?;
    let val = models::predict(&model, x[1])?;
    let report = audit(&val.labels, y[1], s_val, &policy.thresholds())?.with_fingerprint(validation_fp);
    let version_id = super::version_id_of(&super::content_hash(&model, prep));
    let mut decision = evaluate_gate(&report, policy)?;
    decision.version_id = Some(version_id.clone());
    let validation = evaluate(y[1], &val)?;
    let test = evaluate(y[2], &models::predict(&model, x[2])?)?;
    log::info!(
        "{name}: validation dpd {:.4} eo {:.4} accuracy {:.4}; verdict {:?}",
        report.dpd,
        report.eo,
        validation.accuracy,
        decision.verdict
    );
    Ok(Fitted {
        record: StageRecord {
            name: name.into(),
            model_hash: model.content_hash(),
            version_id,
            report,
            decision,
            validation,
            test,
        },
        model,
        val_proba: val.proba,
    })
}

/// Split, fit, audit on validation, gate; on a block reweigh and retrain
/// exactly once. The final model is registered (approved when it passes,
/// candidate otherwise) and [`GovernanceError::HardBlock`] is returned when
/// the mitigated model still blocks.
pub fn run_pipeline(
    data: &DataTable,
    policy: &Policy,
    cfg: &PipelineConfig,
    registry: Option<&Registry>,
) -> Result<PipelineOutcome, GovernanceError> {
    if data.schema.sensitive_name() != policy.protected_attribute {
        return Err(GovernanceError::MalformedPolicy(format!(
            "protected_attribute `{}` is not the audited column `{}`",
            policy.protected_attribute,
            data.schema.sensitive_name()
        )));
    }
    let mut train_cfg = cfg.train.clone();
    train_cfg.threshold = policy.label_threshold;
    train_cfg.validate()?;
    let plan = SplitPlan {
        fractions: cfg.split_fractions,
        seed: policy.seed,
    };
    let split = stratified_split(data, &plan)?;
    let prep = fit_preprocessor(&split.train)?;
    let xs = [
        transform(&prep, &split.train)?,
        transform(&prep, &split.validation)?,
        transform(&prep, &split.test)?,
    ];
    let ys = [split.train.labels(), split.validation.labels(), split.test.labels()];
    let s_train = split.train.sensitive();
    let s_val = split.validation.sensitive();
    let val_fp = split.validation.fingerprint();
    let x = [&xs[0], &xs[1], &xs[2]];
    let y = [&ys[0][..], &ys[1][..], &ys[2][..]];

    let baseline = fit_stage("baseline", x, y, &s_val, None, &train_cfg, policy, &prep, &val_fp)?;
    let mut stages = vec![baseline.record.clone()];
    let mut final_stage = baseline;
    let mut baseline_curve: Option<DecisionCurve> = None;
    let mut mitigated = false;
    if !final_stage.record.decision.passed() {
        let plan = reweigh(&ys[0], &s_train)?;
        baseline_curve = Some(decision_curve("baseline", &final_stage.val_proba, y[1], &default_grid(), policy.band())?);
        let rw = fit_stage("reweighted", x, y, &s_val, Some(&plan.weights), &train_cfg, policy, &prep, &val_fp)?;
        stages.push(rw.record.clone());
        final_stage = rw;
        mitigated = true;
    }

    let model = &final_stage.model;
    let version_id = final_stage.record.version_id.clone();
    let explain_x = xs[2].head(cfg.explain_rows.min(xs[2].n_rows()));
    let means = column_means(&xs[0]);
    let shap = model_shap(model, &explain_x, &means)?;
    let local_accuracy_gap = shap.iter().map(|e| e.local_accuracy_gap()).fold(0.0, f64::max);
    let shap_global: GlobalImportance = model_shap_global(model, &explain_x, &means)?;
    let model_hash = model.content_hash();
    let shap_artifact = ShapArtifact {
        model_hash: &model_hash,
        rows_explained: explain_x.n_rows(),
        base_value: shap.first().map(|e| e.base_value).unwrap_or(0.0),
        shap: global_artifact(&model_hash, &shap_global),
        gain: model
            .ensemble()
            .map(|e| global_artifact(&model_hash, &gain_importance(e, &model.feature_names))),
    };

    let curve = decision_curve(
        if mitigated { "reweighted" } else { "baseline" },
        &final_stage.val_proba,
        y[1],
        &default_grid(),
        policy.band(),
    )?;
    let band = match &baseline_curve {
        Some(b) => Some(band_report(b, &curve, policy.band(), policy.utility.delta_nb_max)?),
        None => None,
    };
    let parity = label_parity(&data.labels(), &data.sensitive())?;

    let decisions: Vec<GateDecision> = stages.iter().map(|s| s.decision.clone()).collect();
    let decision = final_stage.record.decision.clone();
    let mut outcome = PipelineOutcome {
        stages,
        decision: decision.clone(),
        mitigated,
        version_id: version_id.clone(),
        label_parity: parity,
        band,
        shap_top: shap_global.top(5).into_iter().map(String::from).collect(),
        local_accuracy_gap,
        entry: None,
        model: Some(model.clone()),
    };

    if let Some(reg) = registry {
        let mut artifacts = vec![
            Artifact::json("fairness_report.json", &final_stage.record.report),
            Artifact::json("shap_global.json", &shap_artifact),
            Artifact::new("decision_curve.csv", curve.to_csv()),
        ];
        let inputs = PackInputs {
            dataset_name: cfg.dataset_name.clone(),
            dataset_source: cfg.dataset_source.clone(),
            n_rows: data.n_rows(),
            dataset_fingerprint: data.fingerprint(),
            split_seed: policy.seed,
            split_sizes: [split.train.n_rows(), split.validation.n_rows(), split.test.n_rows()],
            split_fingerprint: split.fingerprint(),
            label_parity: Some(parity),
            metrics: Some(final_stage.record.test),
            notes: if mitigated {
                vec!["training rows reweighted by 1/P(s|y) after the baseline was blocked".into()]
            } else {
                Vec::new()
            },
            ..PackInputs::default()
        };
        let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        let pack = build_assurance_pack(&version_id, model, &prep, &artifacts, policy, &decisions, &inputs, &timestamp)?;
        artifacts.extend(pack.artifacts());
        let stage = if decision.passed() { Stage::Approved } else { Stage::Candidate };
        outcome.entry = Some(reg.register(model, &prep, &artifacts, stage, Some(&decision))?);
    }

    if mitigated && !decision.passed() {
        return Err(GovernanceError::HardBlock(Box::new(outcome)));
    }
    Ok(outcome)
}
