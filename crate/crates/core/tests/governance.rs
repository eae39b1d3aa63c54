use std::fs;

use fairgate::governance::{
    build_assurance_pack, evaluate_gate, monitor_tick, run_pipeline, simulate_windows, Artifact, Fault,
    GovernanceError, MonitorState, PackInputs, PipelineConfig, Policy, Registry, Stage, Verdict,
};
use fairgate::drift::Shift;
use fairgate::fairness::{audit, AuditThresholds};
use fairgate::models::{self, TrainConfig};
use fairgate::synth::synthetic_cohort;
use fairgate::tabular::{fit_preprocessor, transform, DataTable};

fn small_model(table: &DataTable) -> (models::Model, fairgate::tabular::FittedPreprocessor) {
    let prep = fit_preprocessor(table).unwrap();
    let x = transform(&prep, table).unwrap();
    let cfg = TrainConfig {
        n_estimators: 5,
        ..TrainConfig::gbt()
    };
    (models::train(&x, &table.labels(), None, &cfg).unwrap(), prep)
}

fn report_artifacts(dpd: f64) -> Vec<Artifact> {
    let mut r = audit(&[1, 0, 1, 0], &[1, 0, 1, 0], &[0, 0, 1, 1], &AuditThresholds::default()).unwrap();
    r.dpd = dpd;
    vec![
        Artifact::json("fairness_report.json", &r),
        Artifact::new("shap_global.json", "[]"),
        Artifact::new("decision_curve.csv", "t,nb_model,nb_treat_all,nb_treat_none\n"),
    ]
}

fn tmp_entries(root: &std::path::Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(root)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().into_string().unwrap())
        .filter(|n| !n.starts_with('.'))
        .collect();
    v.sort();
    v
}

#[test]
fn register_is_idempotent_and_stage_guarded() {
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::open(dir.path()).unwrap();
    let data = synthetic_cohort(400, 0.0, 1);
    let (model, prep) = small_model(&data);
    let a = reg.register(&model, &prep, &report_artifacts(0.01), Stage::Candidate, None).unwrap();
    let b = reg.register(&model, &prep, &report_artifacts(0.01), Stage::Candidate, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(tmp_entries(dir.path()), vec![a.version_id.clone()]);
    assert!(a.manifest.files.iter().any(|f| f.path == "model.json"));

    // Approving needs a passing decision for exactly this version.
    let mut r = audit(&[1, 0, 1, 1], &[1, 0, 1, 0], &[0, 0, 1, 1], &AuditThresholds::default()).unwrap();
    r.dpd = 0.3;
    let block = evaluate_gate(&r, &Policy::default()).unwrap().for_version(&a.version_id);
    assert_eq!(block.verdict, Verdict::Block);
    assert!(matches!(
        reg.promote(&a.version_id, Stage::Approved, Some(&block)),
        Err(GovernanceError::StageViolation(_))
    ));
    r.dpd = 0.0;
    r.eo = 0.0;
    let pass = evaluate_gate(&r, &Policy::default()).unwrap();
    assert!(matches!(
        reg.promote(&a.version_id, Stage::Approved, Some(&pass.clone().for_version("0000000000000000"))),
        Err(GovernanceError::StageViolation(_))
    ));
    assert!(matches!(
        reg.promote(&a.version_id, Stage::Deployed, None),
        Err(GovernanceError::StageViolation(_))
    ));
    let approved = reg.promote(&a.version_id, Stage::Approved, Some(&pass.for_version(&a.version_id))).unwrap();
    assert_eq!(approved.stage, Stage::Approved);
    assert!(matches!(
        reg.register(
            &model,
            &prep,
            &report_artifacts(0.01),
            Stage::Approved,
            Some(&block)
        ),
        Err(GovernanceError::StageViolation(_))
    ));
}

#[test]
fn interrupted_writes_never_leave_partial_entries() {
    let data = synthetic_cohort(300, 0.0, 2);
    let (model, prep) = small_model(&data);
    let artifacts = report_artifacts(0.01);
    let total = artifacts.len() + 2;
    for k in 0..total {
        let dir = tempfile::tempdir().unwrap();
        let mut reg = Registry::open(dir.path()).unwrap();
        reg.fault = Some(Fault::AfterFiles(k));
        let e = reg.register(&model, &prep, &artifacts, Stage::Candidate, None).unwrap_err();
        assert!(matches!(e, GovernanceError::PartialWrite(_)), "{e}");
        assert!(tmp_entries(dir.path()).is_empty());
        assert!(reg.list().unwrap().is_empty());
        assert_eq!(fs::read_dir(dir.path().join(".quarantine")).unwrap().count(), 1);
        // A clean retry produces the complete entry.
        reg.fault = None;
        let entry = reg.register(&model, &prep, &artifacts, Stage::Candidate, None).unwrap();
        let v = reg.verify(&entry.version_id).unwrap();
        assert!(v.ok, "{:?}", v.problems);
    }
    let dir = tempfile::tempdir().unwrap();
    let mut reg = Registry::open(dir.path()).unwrap();
    reg.fault = Some(Fault::Corrupt("fairness_report.json".into()));
    assert!(matches!(
        reg.register(&model, &prep, &artifacts, Stage::Candidate, None),
        Err(GovernanceError::PartialWrite(_))
    ));
    assert!(reg.list().unwrap().is_empty());
}

#[test]
fn lock_serialises_writers_and_tampering_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::open(dir.path()).unwrap();
    let data = synthetic_cohort(300, 0.0, 3);
    let (model, prep) = small_model(&data);
    fs::write(dir.path().join(".lock"), "1").unwrap();
    assert!(matches!(
        reg.register(&model, &prep, &report_artifacts(0.0), Stage::Candidate, None),
        Err(GovernanceError::Locked(_))
    ));
    fs::remove_file(dir.path().join(".lock")).unwrap();
    let e = reg.register(&model, &prep, &report_artifacts(0.0), Stage::Candidate, None).unwrap();
    let v0 = reg.verify(&e.version_id).unwrap();
    assert!(v0.ok, "{:?}", v0.problems);
    fs::write(e.path.join("decision_curve.csv"), "tampered").unwrap();
    let v = reg.verify(&e.version_id).unwrap();
    assert!(!v.ok);
    assert!(v.problems.iter().any(|p| p.contains("decision_curve.csv")));
    assert!(matches!(reg.show("nope"), Err(GovernanceError::UnknownVersion(_))));
}

#[test]
fn pack_requires_explanations_and_hashes_reverify() {
    let data = synthetic_cohort(300, 0.0, 4);
    let (model, prep) = small_model(&data);
    let policy = Policy::default();
    let mut r = audit(&[1, 0, 1, 0], &[1, 0, 1, 0], &[0, 0, 1, 1], &AuditThresholds::default()).unwrap();
    r.dpd = 0.0;
    let vid = fairgate::governance::version_id_of(&fairgate::governance::content_hash(&model, &prep));
    let d = evaluate_gate(&r, &policy).unwrap().for_version(&vid);
    let mut missing = report_artifacts(0.0);
    missing.retain(|a| a.path != "shap_global.json");
    let e = build_assurance_pack(&vid, &model, &prep, &missing, &policy, &[d.clone()], &PackInputs::default(), "t")
        .unwrap_err();
    assert!(matches!(e, GovernanceError::MissingArtifact(k) if k == "shap_global"));

    let mut artifacts = report_artifacts(0.0);
    let p1 = build_assurance_pack(&vid, &model, &prep, &artifacts, &policy, &[d.clone()], &PackInputs::default(), "t1")
        .unwrap();
    let p2 = build_assurance_pack(&vid, &model, &prep, &artifacts, &policy, &[d.clone()], &PackInputs::default(), "t2")
        .unwrap();
    assert_eq!(p1.model_card, p2.model_card);
    assert_eq!(p1.datasheet, p2.datasheet);
    assert_eq!(p1.attestation.artifacts, p2.attestation.artifacts);
    assert_ne!(p1.attestation.timestamp, p2.attestation.timestamp);
    artifacts.extend(p1.artifacts());
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::open(dir.path()).unwrap();
    let entry = reg.register(&model, &prep, &artifacts, Stage::Approved, Some(&d)).unwrap();
    for (path, sha) in &p1.attestation.artifacts {
        let bytes = fs::read(entry.path.join(path)).unwrap();
        assert_eq!(&fairgate::hashing::sha256_hex(&bytes), sha, "{path}");
    }
    for f in ["assurance/model_card.md", "assurance/datasheet.md", "assurance/attestation.json"] {
        assert!(entry.manifest.files.iter().any(|m| m.path == f), "{f}");
    }
    assert!(reg.verify(&vid).unwrap().ok);
    assert!(reg.scan(&policy).unwrap().is_empty());
}

#[test]
fn fair_cohort_passes_without_mitigation_and_is_deterministic() {
    let data = synthetic_cohort(20_000, 0.0, 5);
    let mut policy = Policy::default();
    policy.protected_attribute = "gender".into();
    let cfg = PipelineConfig::new(TrainConfig {
        n_estimators: 30,
        ..TrainConfig::gbt()
    });
    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::open(dir.path()).unwrap();
    let a = run_pipeline(&data, &policy, &cfg, Some(&reg)).unwrap();
    assert!(a.decision.passed(), "{:?}", a.decision.reasons);
    assert!(!a.mitigated);
    assert_eq!(a.stages.len(), 1);
    assert!(a.local_accuracy_gap < 1e-9);
    let entry = a.entry.as_ref().unwrap();
    assert_eq!(entry.stage, Stage::Approved);
    let b = run_pipeline(&data, &policy, &cfg, Some(&reg)).unwrap();
    assert_eq!(a.version_id, b.version_id);
    assert_eq!(reg.list().unwrap().len(), 1);
    assert!(reg.scan(&policy).unwrap().is_empty());

    // Monitoring: stationary windows then a shift in systolic pressure.
    assert!(matches!(
        MonitorState::attach(&reg, &data, &policy),
        Err(GovernanceError::NoDeployedModel)
    ));
    reg.promote(&a.version_id, Stage::Deployed, None).unwrap();
    let pool = data.select(&(0..4000).collect::<Vec<_>>());
    let mut state = MonitorState::attach(&reg, &pool, &policy).unwrap();
    let calm = simulate_windows(&pool, 30, 200, None, 9);
    for w in &calm {
        let t = monitor_tick(&mut state, &reg, w, &policy).unwrap();
        assert!(t.event.is_none(), "day {} ks {}", t.day.day, t.day.max_ks);
        assert!(t.snapshot.contains("max_ks="));
        assert!(t.snapshot.contains("stage=deployed"));
    }
    assert_eq!(state.series.days.len(), 30);
    assert_eq!(state.fairness.len(), 30);
    let shift = Shift {
        from_day: 1,
        sd_multiple: 1.5,
        features: vec!["ap_hi".into()],
    };
    let shifted = simulate_windows(&pool, 1, 200, Some(&shift), 9);
    let t = monitor_tick(&mut state, &reg, &shifted[0], &policy).unwrap();
    let ev = t.event.expect("retrain event");
    assert_eq!(ev.feature, "ap_hi");
    assert_eq!(ev.day, 31);
    assert_eq!(state.retrain_count, 1);
    assert_eq!(state.retrain_data(&data).unwrap().n_rows(), data.n_rows() + 31 * 200);
}

#[test]
fn protected_attribute_must_match_schema() {
    let data = synthetic_cohort(200, 0.0, 6);
    let e = run_pipeline(&data, &Policy::default(), &PipelineConfig::new(TrainConfig::gbt()), None).unwrap_err();
    assert!(matches!(e, GovernanceError::MalformedPolicy(_)));
}
