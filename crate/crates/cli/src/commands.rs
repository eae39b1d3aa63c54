use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use fairgate::drift::{daily_drift, simulate_gaussian, windows_from_matrix, DriftSeries, Shift};
use fairgate::explain::{
    column_means, counterfactual_delta, global_artifact, lime_local, model_shap, model_shap_global, Background,
    CounterfactualQuery, Direction, LocalShapArtifact, RiskGoal, GLOBAL_SAMPLE,
};
use fairgate::fairness::{adversarial_debias_logistic, audit, label_parity, reweigh, DebiasConfig, FairnessReport};
use fairgate::governance::{
    evaluate_drift_gate, evaluate_gate, monitor_tick, run_pipeline, simulate_windows, GateDecision, GovernanceError,
    MonitorState, PipelineConfig, PipelineOutcome, Policy, Registry, Stage, Verdict,
};
use fairgate::models::{self, evaluate, Family, Model, ModelParams, TrainConfig};
use fairgate::tabular::{
    fit_preprocessor, load_csv, stratified_split, transform, DataTable, FeatureMatrix, FittedPreprocessor, Schema,
    Split, SplitPlan,
};
use fairgate::utility::{band_report, decision_curve, default_grid};

use crate::{exit, CliError, Cli, Command, Common, DriftArgs, ExplainArgs, FamilyArg, GateArgs, MethodArg, MitigateArgs, ModelArgs, RegistryCommand, StageArg};

type Outcome = Result<(i32, Value), CliError>;

pub(crate) fn name(cmd: &Command) -> String {
    match cmd {
        Command::Ingest => "ingest",
        Command::Split => "split",
        Command::Train => "train",
        Command::Audit(_) => "audit",
        Command::Mitigate(_) => "mitigate",
        Command::Explain(_) => "explain",
        Command::Gate(_) => "gate",
        Command::Dca(_) => "dca",
        Command::Drift(_) => "drift",
        Command::Monitor(_) => "monitor",
        Command::Pipeline => "pipeline",
        Command::Registry { action } => match action {
            RegistryCommand::List => "registry list",
            RegistryCommand::Show { .. } => "registry show",
            RegistryCommand::Verify { .. } => "registry verify",
            RegistryCommand::Scan => "registry scan",
            RegistryCommand::Promote { .. } => "registry promote",
        },
    }
    .to_string()
}

pub(crate) fn dispatch(cli: &Cli) -> Outcome {
    let ctx = Ctx::new(&cli.common)?;
    match &cli.command {
        Command::Ingest => ingest(&ctx),
        Command::Split => split(&ctx),
        Command::Train => train(&ctx),
        Command::Audit(a) => audit_cmd(&ctx, a),
        Command::Mitigate(a) => mitigate(&ctx, a),
        Command::Explain(a) => explain(&ctx, a),
        Command::Gate(a) => gate(&ctx, a),
        Command::Dca(a) => dca(&ctx, a),
        Command::Drift(a) => drift(&ctx, a),
        Command::Monitor(a) => monitor(&ctx, a),
        Command::Pipeline => pipeline(&ctx),
        Command::Registry { action } => registry(&ctx, action),
    }
}

struct Ctx {
    common: Common,
    policy: Policy,
    policy_given: bool,
}

struct Prepared {
    table: DataTable,
    split: Split,
    prep: FittedPreprocessor,
    x: [FeatureMatrix; 3],
    y: [Vec<u8>; 3],
    s: [Vec<u8>; 3],
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    let p = p.as_deref().ok_or_else(|| CliError::input(format!("--{flag} is required")))?;
    if !p.exists() {
        return Err(CliError::input(format!("{} does not exist", p.display())));
    }
    Ok(p)
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

impl Ctx {
    fn new(common: &Common) -> Result<Self, CliError> {
        let (mut policy, policy_given) = match &common.policy {
            Some(p) => {
                if !p.is_file() {
                    return Err(CliError::input(format!("policy file {} not found", p.display())));
                }
                (Policy::load(p)?, true)
            }
            None => (Policy::default(), false),
        };
        if let Some(seed) = common.seed {
            policy.seed = seed;
        }
        Ok(Self {
            common: common.clone(),
            policy,
            policy_given,
        })
    }

    fn table(&mut self) -> Result<DataTable, CliError> {
        let schema = Schema::load(require(&self.common.schema, "schema")?)?;
        let table = load_csv(require(&self.common.data, "data")?, &schema)?;
        if !self.policy_given {
            self.policy.protected_attribute = schema.sensitive_name().to_string();
        }
        log::info!("loaded {} rows from {}", table.n_rows(), self.common.data.as_ref().unwrap().display());
        Ok(table)
    }

    fn family(&self) -> Family {
        match self.common.model_family.unwrap_or(FamilyArg::Gbt) {
            FamilyArg::Logistic => Family::Logistic,
            FamilyArg::Gbt => Family::Gbt,
            FamilyArg::Rf => Family::Rf,
        }
    }

    fn train_config(&self) -> TrainConfig {
        let mut cfg = TrainConfig::for_family(self.family()).with_seed(self.policy.seed);
        cfg.threshold = self.policy.label_threshold;
        cfg
    }

    fn prepared(&mut self) -> Result<Prepared, CliError> {
        let table = self.table()?;
        let split = stratified_split(&table, &SplitPlan::with_seed(self.policy.seed))?;
        let prep = fit_preprocessor(&split.train)?;
        let x = [
            transform(&prep, &split.train)?,
            transform(&prep, &split.validation)?,
            transform(&prep, &split.test)?,
        ];
        let y = [split.train.labels(), split.validation.labels(), split.test.labels()];
        let s = [split.train.sensitive(), split.validation.sensitive(), split.test.sensitive()];
        Ok(Prepared {
            table,
            split,
            prep,
            x,
            y,
            s,
        })
    }

    fn out_dir(&self) -> Result<Option<PathBuf>, CliError> {
        match &self.common.out {
            Some(d) => {
                fs::create_dir_all(d).map_err(|e| CliError::input(format!("{}: {e}", d.display())))?;
                Ok(Some(d.clone()))
            }
            None => Ok(None),
        }
    }

    fn write(&self, name: &str, contents: &[u8]) -> Result<Option<String>, CliError> {
        match self.out_dir()? {
            Some(d) => {
                let p = d.join(name);
                if let Some(parent) = p.parent() {
                    fs::create_dir_all(parent).map_err(|e| CliError::internal(format!("{}: {e}", parent.display())))?;
                }
                fs::write(&p, contents).map_err(|e| CliError::internal(format!("{}: {e}", p.display())))?;
                Ok(Some(p.display().to_string()))
            }
            None => Ok(None),
        }
    }

    fn write_json<T: Serialize>(&self, name: &str, v: &T) -> Result<Option<String>, CliError> {
        self.write(name, fairgate::hashing::to_artifact_json(v)?.as_bytes())
    }

    fn registry(&self) -> Result<Registry, CliError> {
        let root = self
            .common
            .registry
            .as_ref()
            .ok_or_else(|| CliError::input("--registry (or FAIRGATE_REGISTRY) is required"))?;
        Ok(Registry::open(root)?)
    }

    fn model(&self, p: &Prepared, dir: Option<&Path>) -> Result<(Model, FittedPreprocessor), CliError> {
        match dir {
            Some(d) => {
                let read = |f: &str| {
                    fs::read(d.join(f)).map_err(|e| CliError::input(format!("{}: {e}", d.join(f).display())))
                };
                let model: Model = serde_json::from_slice(&read("model.json")?)?;
                let prep: FittedPreprocessor = serde_json::from_slice(&read("preprocessor.json")?)?;
                if prep.schema_hash != p.prep.schema_hash {
                    return Err(CliError::input("model was fit on a different schema"));
                }
                Ok((model, prep))
            }
            None => Ok((models::train(&p.x[0], &p.y[0], None, &self.train_config())?, p.prep.clone())),
        }
    }
}

fn ingest(ctx: &Ctx) -> Outcome {
    let mut ctx = Ctx::new(&ctx.common)?;
    let t = ctx.table()?;
    let y = t.labels();
    let prevalence = y.iter().filter(|&&v| v == 1).count() as f64 / y.len().max(1) as f64;
    Ok((
        exit::OK,
        json!({
            "status": "ok",
            "rows": t.n_rows(),
            "columns": t.schema.columns.iter().map(|c| &c.name).collect::<Vec<_>>(),
            "schema_hash": t.schema.hash(),
            "fingerprint": t.fingerprint(),
            "target": t.schema.target_name(),
            "sensitive": t.schema.sensitive_name(),
            "prevalence": prevalence,
            "label_parity": label_parity(&y, &t.sensitive())?,
        }),
    ))
}

fn split(ctx: &Ctx) -> Outcome {
    let mut ctx = Ctx::new(&ctx.common)?;
    let t = ctx.table()?;
    let s = stratified_split(&t, &SplitPlan::with_seed(ctx.policy.seed))?;
    let written = ctx.write_json("split_manifest.json", &s.manifest())?;
    Ok((
        exit::OK,
        json!({
            "status": "ok",
            "seed": ctx.policy.seed,
            "sizes": [s.train.n_rows(), s.validation.n_rows(), s.test.n_rows()],
            "fingerprint": s.fingerprint(),
            "written": written,
        }),
    ))
}

fn perf(model: &Model, x: &FeatureMatrix, y: &[u8]) -> Result<Value, CliError> {
    Ok(to_json(&evaluate(y, &models::predict(model, x)?)?))
}

fn train(ctx: &Ctx) -> Outcome {
    let mut ctx = Ctx::new(&ctx.common)?;
    let p = ctx.prepared()?;
    let (model, prep) = ctx.model(&p, None)?;
    let vid = fairgate::governance::version_id_of(&fairgate::governance::content_hash(&model, &prep));
    let mut written = Vec::new();
    written.extend(ctx.write_json("model.json", &model)?);
    written.extend(ctx.write_json("preprocessor.json", &prep)?);
    written.extend(ctx.write_json("split_manifest.json", &p.split.manifest())?);
    Ok((
        exit::OK,
        json!({
            "status": "ok",
            "family": model.family,
            "model_hash": model.content_hash(),
            "version_id": vid,
            "validation": perf(&model, &p.x[1], &p.y[1])?,
            "test": perf(&model, &p.x[2], &p.y[2])?,
            "written": written,
        }),
    ))
}

fn audit_model(ctx: &Ctx, p: &Prepared, model: &Model) -> Result<FairnessReport, CliError> {
    let pred = models::predict(model, &p.x[1])?;
    Ok(audit(&pred.labels, &p.y[1], &p.s[1], &ctx.policy.thresholds())?.with_fingerprint(p.split.validation.fingerprint()))
}

fn fairness_plot(r: &FairnessReport) -> String {
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::from("group,n,positive_rate,tpr,fpr\n");
    for (g, c) in r.confusion.groups.iter().enumerate() {
        s.push_str(&format!("{g},{},{},{},{}\n", c.n(), f(c.positive_rate()), f(c.tpr()), f(c.fpr())));
    }
    s
}

fn audit_cmd(ctx: &Ctx, a: &ModelArgs) -> Outcome {
    let mut ctx = Ctx::new(&ctx.common)?;
    let p = ctx.prepared()?;
    let (model, _) = ctx.model(&p, a.model.as_deref())?;
    let report = audit_model(&ctx, &p, &model)?;
    let mut written = Vec::new();
    written.extend(ctx.write_json("fairness_report.json", &report)?);
    if a.plot_data {
        written.extend(ctx.write("fairness_plot.csv", fairness_plot(&report).as_bytes())?);
    }
    Ok((
        exit::OK,
        json!({ "status": report.status, "report": report, "written": written }),
    ))
}

fn mitigate(ctx: &Ctx, a: &MitigateArgs) -> Outcome {
    let mut ctx = Ctx::new(&ctx.common)?;
    let p = ctx.prepared()?;
    let cfg = ctx.train_config();
    let baseline = models::train(&p.x[0], &p.y[0], None, &cfg)?;
    let (mitigated, extra) = match a.method {
        MethodArg::Reweigh => {
            let plan = reweigh(&p.y[0], &p.s[0])?;
            let m = models::train(&p.x[0], &p.y[0], Some(&plan.weights), &cfg)?;
            (m, json!({ "cells": plan.cells }))
        }
        MethodArg::Adversarial => {
            if cfg.family != Family::Logistic {
                return Err(CliError::input("adversarial debiasing needs --model-family logistic"));
            }
            let debias = DebiasConfig {
                lambda: a.lambda,
                ..DebiasConfig::default()
            };
            let out = adversarial_debias_logistic(&p.x[0], &p.y[0], &p.s[0], None, &cfg, &debias)?;
            let m = Model {
                params: ModelParams::Linear(out.model.clone()),
                ..baseline.clone()
            };
            (
                m,
                json!({
                    "lambda": out.lambda,
                    "rounds_run": out.rounds_run,
                    "train_dpd_before": out.baseline_dpd,
                    "train_dpd_after": out.train_dpd,
                    "adversary_accuracy": out.adversary_accuracy,
                    "no_improvement": out.no_improvement,
                }),
            )
        }
    };
    let before = audit_model(&ctx, &p, &baseline)?;
    let after = audit_model(&ctx, &p, &mitigated)?;
    let mut written = Vec::new();
    written.extend(ctx.write_json("baseline/fairness_report.json", &before)?);
    written.extend(ctx.write_json("mitigated/fairness_report.json", &after)?);
    written.extend(ctx.write_json("mitigated/model.json", &mitigated)?);
    written.extend(ctx.write_json("mitigated/preprocessor.json", &p.prep)?);
    Ok((
        exit::OK,
        json!({
            "status": after.status,
            "method": format!("{:?}", a.method).to_lowercase(),
            "baseline": { "dpd": before.dpd, "eo": before.eo, "test": perf(&baseline, &p.x[2], &p.y[2])? },
            "mitigated": { "dpd": after.dpd, "eo": after.eo, "test": perf(&mitigated, &p.x[2], &p.y[2])? },
            "details": extra,
            "written": written,
        }),
    ))
}

fn explain(ctx: &Ctx, a: &ExplainArgs) -> Outcome {
    let mut ctx = Ctx::new(&ctx.common)?;
    let p = ctx.prepared()?;
    let (model, prep) = ctx.model(&p, a.model.as_deref())?;
    let test = &p.x[2];
    if a.row >= test.n_rows() {
        return Err(CliError::input(format!("--row {} outside the {}-row test partition", a.row, test.n_rows())));
    }
    let sample = test.head(GLOBAL_SAMPLE.min(test.n_rows()));
    let means = column_means(&p.x[0]);
    let global = model_shap_global(&model, &sample, &means)?;
    let hash = model.content_hash();
    let row = test.row(a.row);
    let one = FeatureMatrix::from_rows(&[row.to_vec()], Some(test.names().to_vec()));
    let local = model_shap(&model, &one, &means)?.remove(0);
    let instance = format!("test:{}", p.split.test.row_ids[a.row]);
    let local_art = LocalShapArtifact::new(&hash, instance.clone(), &local);
    let background = Background::from_training(&prep, &p.x[0]);
    let predict = |r: &[f64]| model.predict_proba_row(r);
    let lime = lime_local(&predict, row, &background, a.lime_samples, ctx.policy.seed)?;
    let cf = match &a.feature {
        Some(f) => {
            let units = p
                .table
                .schema
                .columns
                .iter()
                .find(|c| &c.name == f)
                .and_then(|c| c.units.clone());
            let q = CounterfactualQuery {
                feature: f.clone(),
                direction: if a.increase { Direction::Increase } else { Direction::Decrease },
                step: a.step,
                goal: RiskGoal::CrossThreshold,
                units,
            };
            Some(counterfactual_delta(&model, &prep, row, &q)?)
        }
        None => None,
    };
    let mut written = Vec::new();
    written.extend(ctx.write_json("shap_global.json", &global_artifact(&hash, &global))?);
    written.extend(ctx.write_json("shap_local.json", &local_art)?);
    written.extend(ctx.write_json("lime_local.json", &lime)?);
    if let Some(c) = &cf {
        written.extend(ctx.write_json("counterfactual.json", c)?);
    }
    Ok((
        exit::OK,
        json!({
            "status": "ok",
            "model_hash": hash,
            "global_top": global.top(5),
            "instance": instance,
            "local_accuracy_gap": local.local_accuracy_gap(),
            "shap_local": local_art,
            "lime": { "fidelity": lime.fidelity, "prediction": lime.prediction, "local_prediction": lime.local_prediction },
            "counterfactual": cf,
            "written": written,
        }),
    ))
}

fn gate(ctx: &Ctx, a: &GateArgs) -> Outcome {
    let read = |p: &Path| fs::read(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())));
    let decision: GateDecision = if let Some(r) = &a.report {
        let report: FairnessReport = serde_json::from_slice(&read(r)?)?;
        evaluate_gate(&report, &ctx.policy)?
    } else {
        let p = a.drift.as_ref().expect("clap requires one of --report/--drift");
        let series: DriftSeries = serde_json::from_slice(&read(p)?)?;
        if series.days.is_empty() {
            return Err(CliError::input("drift series is empty"));
        }
        evaluate_drift_gate(&series, &ctx.policy)
    };
    let decision = match &a.version {
        Some(v) => decision.for_version(v),
        None => decision,
    };
    let written = ctx.write_json("gate_decision.json", &decision)?;
    let code = match decision.verdict {
        Verdict::Pass => exit::OK,
        Verdict::Block => exit::BLOCK,
        Verdict::RetrainRequired => exit::RETRAIN,
    };
    for r in &decision.reasons {
        log::warn!("{} = {:.4} exceeds {:.4}", r.metric, r.value, r.threshold);
    }
    Ok((code, json!({ "status": decision.verdict, "decision": decision, "written": written })))
}

fn dca(ctx: &Ctx, a: &ModelArgs) -> Outcome {
    let mut ctx = Ctx::new(&ctx.common)?;
    let p = ctx.prepared()?;
    let (model, _) = ctx.model(&p, a.model.as_deref())?;
    let band = ctx.policy.band();
    let grid = default_grid();
    let curve = decision_curve("model", &models::predict(&model, &p.x[1])?.proba, &p.y[1], &grid, band)?;
    let plan = reweigh(&p.y[0], &p.s[0])?;
    let rw = models::train(&p.x[0], &p.y[0], Some(&plan.weights), &ctx.train_config())?;
    let rw_curve = decision_curve("reweighted", &models::predict(&rw, &p.x[1])?.proba, &p.y[1], &grid, band)?;
    let cmp = band_report(&curve, &rw_curve, band, ctx.policy.utility.delta_nb_max)?;
    let mut written = Vec::new();
    written.extend(ctx.write("decision_curve.csv", curve.to_csv().as_bytes())?);
    if a.plot_data {
        written.extend(ctx.write("decision_curve_reweighted.csv", rw_curve.to_csv().as_bytes())?);
    }
    let at = |t: f64| curve.at(t).map(|pt| pt.nb);
    Ok((
        exit::OK,
        json!({
            "status": if cmp.utility_preserved { "preserved" } else { "changed" },
            "prevalence": curve.prevalence,
            "nb_at_0_15": at(0.15),
            "treat_all_zero_crossing": curve.treat_all_zero_crossing(),
            "band": cmp,
            "written": written,
        }),
    ))
}

fn shift_of(a: &DriftArgs) -> Option<Shift> {
    a.shift_day.map(|d| Shift {
        from_day: d,
        sd_multiple: a.shift_sd,
        features: a.shift_feature.clone(),
    })
}

fn drift(ctx: &Ctx, a: &DriftArgs) -> Outcome {
    let mut ctx = Ctx::new(&ctx.common)?;
    if a.days == 0 || a.window == 0 {
        return Err(CliError::input("--days and --window must be positive"));
    }
    let shift = shift_of(a);
    let series = if ctx.common.data.is_some() {
        let p = ctx.prepared()?;
        let reference = windows_from_matrix(&p.x[0], 0);
        let days = simulate_windows(&p.table, a.days, a.window, shift.as_ref(), ctx.policy.seed)
            .iter()
            .enumerate()
            .map(|(k, t)| Ok(windows_from_matrix(&transform(&p.prep, t)?, k + 1)))
            .collect::<Result<Vec<_>, CliError>>()?;
        daily_drift(&reference, &days, ctx.policy.drift.ks_max)?
    } else {
        let (reference, days) = simulate_gaussian(5, 1000, a.days, a.window, shift.as_ref(), ctx.policy.seed);
        daily_drift(&reference, &days, ctx.policy.drift.ks_max)?
    };
    let decision = evaluate_drift_gate(&series, &ctx.policy);
    let mut written = Vec::new();
    written.extend(ctx.write_json("drift_series.json", &series)?);
    written.extend(ctx.write("drift.jsonl", series.to_jsonl().as_bytes())?);
    if a.plot_data {
        written.extend(ctx.write("drift_plot.csv", series.plot_csv().as_bytes())?);
    }
    let code = if decision.verdict == Verdict::RetrainRequired { exit::RETRAIN } else { exit::OK };
    Ok((
        code,
        json!({
            "status": decision.verdict,
            "days": series.days.len(),
            "max_ks": series.max_ks(),
            "trigger_days": series.trigger_days(),
            "first_trigger": series.first_trigger().map(|(d, f, k)| json!({"day": d, "feature": f, "ks": k})),
            "decision": decision,
            "written": written,
        }),
    ))
}

fn monitor(ctx: &Ctx, a: &DriftArgs) -> Outcome {
    let mut ctx = Ctx::new(&ctx.common)?;
    let reg = ctx.registry()?;
    let p = ctx.prepared()?;
    let mut state = MonitorState::attach(&reg, &p.split.train, &ctx.policy)?;
    let windows = simulate_windows(&p.table, a.days, a.window, shift_of(a).as_ref(), ctx.policy.seed);
    let mut event = None;
    let mut written = Vec::new();
    for w in &windows {
        let t = monitor_tick(&mut state, &reg, w, &ctx.policy)?;
        written.extend(ctx.write(&format!("metrics/day-{:03}.txt", t.day.day), t.snapshot.as_bytes())?);
        if t.event.is_some() {
            event = t.event;
            break;
        }
    }
    let mut retrain = Value::Null;
    if let Some(ev) = &event {
        let data = state.retrain_data(&p.table)?;
        let cfg = PipelineConfig {
            dataset_name: "retrain".into(),
            dataset_source: format!("original data plus {} monitoring rows", ev.accumulated_rows),
            ..PipelineConfig::new(ctx.train_config())
        };
        retrain = match run_pipeline(&data, &ctx.policy, &cfg, Some(&reg)) {
            Ok(o) => pipeline_summary(&o),
            Err(GovernanceError::HardBlock(o)) => pipeline_summary(&o),
            Err(e) => return Err(e.into()),
        };
    }
    let code = if event.is_some() { exit::RETRAIN } else { exit::OK };
    Ok((
        code,
        json!({
            "status": if event.is_some() { "retrain_required" } else { "pass" },
            "version_id": state.version_id,
            "days": state.series.days.len(),
            "max_ks": state.series.max_ks(),
            "fairness": state.fairness,
            "event": event,
            "retrain": retrain,
            "written": written.len(),
        }),
    ))
}

fn pipeline_summary(o: &PipelineOutcome) -> Value {
    json!({
        "verdict": o.decision.verdict,
        "version_id": o.version_id,
        "mitigated": o.mitigated,
        "stages": o.stages.iter().map(|s| json!({
            "name": s.name,
            "version_id": s.version_id,
            "dpd": s.report.dpd,
            "eo": s.report.eo,
            "verdict": s.decision.verdict,
            "reasons": s.decision.reasons,
            "validation_accuracy": s.validation.accuracy,
            "test_accuracy": s.test.accuracy,
        })).collect::<Vec<_>>(),
        "band": o.band,
        "label_parity": o.label_parity,
        "shap_top": o.shap_top,
        "local_accuracy_gap": o.local_accuracy_gap,
        "registered": o.entry.as_ref().map(|e| json!({"version_id": e.version_id, "stage": e.stage, "path": e.path})),
    })
}

fn pipeline(ctx: &Ctx) -> Outcome {
    let mut ctx = Ctx::new(&ctx.common)?;
    let data = ctx.table()?;
    let reg = match &ctx.common.registry {
        Some(_) => Some(ctx.registry()?),
        None => None,
    };
    let cfg = PipelineConfig {
        dataset_name: ctx
            .common
            .data
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        dataset_source: ctx.common.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        ..PipelineConfig::new(ctx.train_config())
    };
    let (code, outcome) = match run_pipeline(&data, &ctx.policy, &cfg, reg.as_ref()) {
        Ok(o) => (exit::OK, o),
        Err(GovernanceError::HardBlock(o)) => (exit::BLOCK, *o),
        Err(e) => return Err(e.into()),
    };
    let mut written = Vec::new();
    for s in &outcome.stages {
        written.extend(ctx.write_json(&format!("{}/fairness_report.json", s.name), &s.report)?);
        written.extend(ctx.write_json(&format!("{}/gate_decision.json", s.name), &s.decision)?);
    }
    let mut v = pipeline_summary(&outcome);
    v["status"] = to_json(&outcome.decision.verdict);
    v["written"] = json!(written);
    Ok((code, v))
}

fn registry(ctx: &Ctx, action: &RegistryCommand) -> Outcome {
    let reg = ctx.registry()?;
    match action {
        RegistryCommand::List => {
            let entries = reg.list()?;
            Ok((
                exit::OK,
                json!({
                    "status": "ok",
                    "entries": entries.iter().map(|e| json!({"version_id": e.version_id, "stage": e.stage})).collect::<Vec<_>>(),
                }),
            ))
        }
        RegistryCommand::Show { version } => Ok((exit::OK, json!({ "status": "ok", "entry": reg.show(version)? }))),
        RegistryCommand::Verify { version } => {
            let versions = match version {
                Some(v) => vec![v.clone()],
                None => reg.list()?.into_iter().map(|e| e.version_id).collect(),
            };
            let reports = versions.iter().map(|v| reg.verify(v)).collect::<Result<Vec<_>, _>>()?;
            let ok = reports.iter().all(|r| r.ok);
            Ok((
                if ok { exit::OK } else { exit::INPUT },
                json!({ "status": if ok { "verified" } else { "corrupt" }, "reports": reports }),
            ))
        }
        RegistryCommand::Scan => {
            let findings = reg.scan(&ctx.policy)?;
            let ok = findings.is_empty();
            Ok((
                if ok { exit::OK } else { exit::BLOCK },
                json!({ "status": if ok { "pass" } else { "block" }, "findings": findings }),
            ))
        }
        RegistryCommand::Promote {
            version,
            stage,
            decision,
        } => {
            let decision: Option<GateDecision> = match decision {
                Some(p) => Some(serde_json::from_slice(
                    &fs::read(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
                )?),
                None => None,
            };
            let stage = match stage {
                StageArg::Candidate => Stage::Candidate,
                StageArg::Approved => Stage::Approved,
                StageArg::Deployed => Stage::Deployed,
                StageArg::Retired => Stage::Retired,
            };
            let e = reg.promote(version, stage, decision.as_ref())?;
            Ok((exit::OK, json!({ "status": "ok", "version_id": e.version_id, "stage": e.stage })))
        }
    }
}
