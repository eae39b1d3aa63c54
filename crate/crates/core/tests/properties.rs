use proptest::collection::vec;
use proptest::prelude::*;

use fairgate::drift::{daily_drift, ks_statistic, SampleWindow};
use fairgate::explain::tree_shap;
use fairgate::fairness::{audit, demographic_parity_difference, equalized_odds, reweigh, AuditThresholds};
use fairgate::governance::{run_pipeline, PipelineConfig, Policy};
use fairgate::models::{self, auc, train_gbt, Tree, TrainConfig};
use fairgate::synth::synthetic_cohort;
use fairgate::tabular::{
    composite_key, fit_preprocessor, stratified_split, transform, Cell, ColumnSchema, DataTable, FeatureMatrix, FeatureSpec,
    Schema, SplitPlan,
};
use fairgate::utility::{decision_curve, default_grid};

fn binary(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<u8>> {
    vec(0u8..2, n)
}

/// Predictions, labels and groups of equal length with both groups present.
fn triples() -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<u8>)> {
    (4usize..120).prop_flat_map(|n| (binary(n..n + 1), binary(n..n + 1), binary(n..n + 1))).prop_map(
        |(p, y, mut s)| {
            s[0] = 0;
            s[1] = 1;
            (p, y, s)
        },
    )
}

fn flip(s: &[u8]) -> Vec<u8> {
    s.iter().map(|v| 1 - v).collect()
}

fn depth(t: &Tree, n: usize) -> usize {
    if t.feature[n] < 0 {
        0
    } else {
        1 + depth(t, t.left[n] as usize).max(depth(t, t.right[n] as usize))
    }
}

fn random_matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix::from_rows(rows, None)
}

fn data_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (1usize..5, 12usize..60).prop_flat_map(|(d, n)| {
        (vec(vec((0u8..8).prop_map(f64::from), d..d + 1), n..n + 1), binary(n..n + 1))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dpd_symmetric_and_bounded((p, y, s) in triples()) {
        let a = demographic_parity_difference(&p, &s).unwrap();
        let b = demographic_parity_difference(&p, &flip(&s)).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=1.0).contains(&a));
        let eo = equalized_odds(&p, &y, &s).unwrap();
        prop_assert!((0.0..=1.0).contains(&eo.eo));
    }

    #[test]
    fn eo_is_max_of_defined_gaps((p, y, s) in triples()) {
        let eo = equalized_odds(&p, &y, &s).unwrap();
        let gaps: Vec<f64> = [eo.tpr_gap, eo.fpr_gap].into_iter().flatten().collect();
        let max = gaps.iter().copied().fold(0.0, f64::max);
        prop_assert_eq!(eo.eo, max);
        prop_assert_eq!(eo.eo == 0.0, gaps.iter().all(|&g| g == 0.0));
        prop_assert_eq!(eo.degraded, gaps.len() < 2);
    }

    #[test]
    fn audit_serialization_is_deterministic((p, y, s) in triples()) {
        let t = AuditThresholds::default();
        let a = serde_json::to_vec(&audit(&p, &y, &s, &t).unwrap()).unwrap();
        let b = serde_json::to_vec(&audit(&p, &y, &s, &t).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn reweighting_balances_groups_within_labels((_, y, s) in triples()) {
        let n = y.len();
        let plan = reweigh(&y, &s).unwrap();
        prop_assert!((plan.weights.iter().sum::<f64>() - n as f64).abs() <= 1e-9);
        prop_assert!(plan.weights.iter().all(|&w| w > 0.0));
        for label in 0..2u8 {
            let mass = |g: u8| -> f64 {
                (0..n).filter(|&i| y[i] == label && s[i] == g).map(|i| plan.weights[i]).sum()
            };
            let present = |g: u8| (0..n).any(|i| y[i] == label && s[i] == g);
            if present(0) && present(1) {
                prop_assert!((mass(0) - mass(1)).abs() <= 1e-9);
                // Before normalisation both masses equal the label count.
                let n_y = y.iter().filter(|&&v| v == label).count() as f64;
                prop_assert!((mass(0) / plan.normalization - n_y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn balanced_cells_get_unit_weights(k in 1usize..20) {
        let mut y = Vec::new();
        let mut s = Vec::new();
        for _ in 0..k {
            for (yi, si) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                y.push(yi);
                s.push(si);
            }
        }
        let plan = reweigh(&y, &s).unwrap();
        prop_assert!(plan.weights.iter().all(|w| (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn auc_matches_pairwise_concordance(
        (y, scores) in (2usize..200).prop_flat_map(|n| (binary(n..n + 1), vec((0u8..20).prop_map(f64::from), n..n + 1)))
    ) {
        prop_assume!(y.contains(&0) && y.contains(&1));
        let mut num = 0.0;
        let mut pairs = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == 1 && y[j] == 0 {
                    pairs += 1.0;
                    num += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        prop_assert!((auc(&y, &scores).unwrap() - num / pairs).abs() < 1e-12);
    }

    #[test]
    fn ks_bounds_and_symmetry(
        a in vec((0u8..10).prop_map(f64::from), 1..60),
        b in vec((0u8..10).prop_map(f64::from), 1..60),
    ) {
        let ab = ks_statistic(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, ks_statistic(&b, &a).unwrap());
        prop_assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn raising_ks_threshold_never_adds_triggers(
        reference in vec(-3.0f64..3.0, 20..60),
        days in vec(vec(-4.0f64..4.0, 5..40), 1..8),
        lo in 0.05f64..0.5,
        bump in 0.0f64..0.4,
    ) {
        let r = [SampleWindow { feature: "x".into(), day: 0, values: reference }];
        let d: Vec<Vec<SampleWindow>> = days
            .into_iter()
            .enumerate()
            .map(|(k, v)| vec![SampleWindow { feature: "x".into(), day: k + 1, values: v }])
            .collect();
        let low = daily_drift(&r, &d, lo).unwrap();
        let high = daily_drift(&r, &d, lo + bump).unwrap();
        for (a, b) in low.days.iter().zip(&high.days) {
            prop_assert!(a.triggered || !b.triggered);
        }
        prop_assert_eq!(high.to_jsonl(), daily_drift(&r, &d, lo + bump).unwrap().to_jsonl());
    }

    #[test]
    fn net_benefit_never_exceeds_prevalence(
        (y, p) in (5usize..150).prop_flat_map(|n| (binary(n..n + 1), vec(0.0f64..1.0, n..n + 1)))
    ) {
        let c = decision_curve("m", &p, &y, &default_grid(), (0.10, 0.20)).unwrap();
        for pt in &c.points {
            prop_assert!(pt.nb <= c.prevalence + 1e-12);
            prop_assert_eq!(pt.nb_treat_none, 0.0);
        }
        let again = decision_curve("m", &p, &y, &default_grid(), (0.10, 0.20)).unwrap();
        prop_assert_eq!(c.to_csv(), again.to_csv());
    }

    #[test]
    fn weight_scale_leaves_predictions_unchanged((rows, y) in data_strategy(), scale in 0.1f64..50.0) {
        let x = random_matrix(&rows);
        let w: Vec<f64> = (0..y.len()).map(|i| 0.5 + (i % 3) as f64).collect();
        let scaled: Vec<f64> = w.iter().map(|v| v * scale).collect();
        // Trees are exact up to leaf rounding; logistic up to solver tolerance.
        for (cfg, tol) in [
            (TrainConfig { n_estimators: 5, ..TrainConfig::gbt() }, 1e-12),
            (TrainConfig { n_estimators: 5, ..TrainConfig::rf() }, 1e-12),
            (TrainConfig::logistic(), 1e-6),
        ] {
            let a = models::train(&x, &y, Some(&w), &cfg).unwrap();
            let b = models::train(&x, &y, Some(&scaled), &cfg).unwrap();
            let pa = models::predict(&a, &x).unwrap().proba;
            let pb = models::predict(&b, &x).unwrap().proba;
            for (u, v) in pa.iter().zip(&pb) {
                prop_assert!((u - v).abs() < tol, "{:?}: {} vs {}", cfg.family, u, v);
            }
        }
    }

    #[test]
    fn trees_respect_max_depth((rows, y) in data_strategy(), max_depth in 1usize..5) {
        let x = random_matrix(&rows);
        for base in [TrainConfig::gbt(), TrainConfig::rf()] {
            let cfg = TrainConfig { n_estimators: 4, max_depth, min_child_weight: 0.0, ..base };
            let m = models::train(&x, &y, None, &cfg).unwrap();
            for t in &m.ensemble().unwrap().trees {
                prop_assert!(depth(t, 0) <= max_depth);
            }
        }
    }

    #[test]
    fn shap_local_accuracy_and_dummy((rows, y) in data_strategy()) {
        // Append a constant column: no tree can split on it.
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r.push(1.0); r }).collect();
        let d = rows[0].len();
        let x = random_matrix(&rows);
        let cfg = TrainConfig { n_estimators: 6, max_depth: 3, min_child_weight: 0.0, ..TrainConfig::gbt() };
        let e = train_gbt(&x, &y, None, &cfg).unwrap();
        for row in x.rows() {
            let s = tree_shap(&e, row, d).unwrap();
            prop_assert!(s.local_accuracy_gap() <= 1e-9);
            prop_assert_eq!(s.phi[d - 1], 0.0);
        }
    }

    #[test]
    fn policy_yaml_round_trip(
        dpd in 0.01f64..0.5,
        warn_extra in 0.0f64..0.4,
        eo in 0.01f64..1.0,
        ks in 0.01f64..1.0,
        seed in any::<u64>(),
    ) {
        let mut p = Policy::default();
        p.gates.dpd_max = dpd;
        p.gates.eo_max = eo;
        p.audit.dpd_warn = (dpd + warn_extra).min(1.0);
        p.drift.ks_max = ks;
        p.seed = seed;
        p.validate().unwrap();
        let back = Policy::from_yaml(&p.to_yaml()).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.hash(), p.hash());
    }
}

fn stratum_counts(t: &DataTable) -> [usize; 4] {
    let mut c = [0; 4];
    for (y, s) in t.labels().into_iter().zip(t.sensitive()) {
        c[composite_key(y, s) as usize] += 1;
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn split_is_a_stratified_partition(n in 120usize..600, seed in any::<u64>()) {
        let table = synthetic_cohort(n, 0.8, seed % 1000);
        let split = stratified_split(&table, &SplitPlan::with_seed(seed)).unwrap();
        let mut all: Vec<usize> = split.positions.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let total = stratum_counts(&table);
        let train = stratum_counts(&split.train);
        for z in 0..4 {
            if total[z] > 0 {
                let frac = train[z] as f64 / total[z] as f64;
                prop_assert!((frac - 0.6).abs() <= 1.0 / total[z] as f64 + 1e-12);
            }
        }
        let again = stratified_split(&table, &SplitPlan::with_seed(seed)).unwrap();
        prop_assert_eq!(again.positions, split.positions);
    }

    #[test]
    fn preprocessor_ignores_held_out_rows(seed in 0u64..1000, bump in 1.0f64..500.0) {
        let table = synthetic_cohort(300, 0.5, seed);
        let split = stratified_split(&table, &SplitPlan::with_seed(seed)).unwrap();
        let before = fit_preprocessor(&split.train).unwrap();
        let mut mutated = table.clone();
        let col = mutated.schema.index_of("weight").unwrap();
        for &i in split.positions[1].iter().chain(&split.positions[2]) {
            mutated.rows[i][col] = Cell::Number(bump * 100.0);
        }
        let split2 = stratified_split(&mutated, &SplitPlan::with_seed(seed)).unwrap();
        prop_assert_eq!(&split2.positions, &split.positions);
        prop_assert_eq!(fit_preprocessor(&split2.train).unwrap(), before);
    }

    #[test]
    fn refitting_on_scaled_data_gives_unit_range(
        rows in vec(vec(-50.0f64..50.0, 3..4), 10..40),
        s in binary(10..40),
        y in binary(10..40),
    ) {
        let n = rows.len().min(s.len()).min(y.len());
        let mut cols: Vec<ColumnSchema> = (0..3).map(|j| ColumnSchema::numeric(format!("f{j}"))).collect();
        cols.push(ColumnSchema::sensitive("s"));
        cols.push(ColumnSchema::target("y"));
        let schema = Schema::new(cols).unwrap();
        let cells = |r: &[f64], si: f64, yi: f64| -> Vec<Cell> {
            r.iter().copied().chain([si, yi]).map(Cell::Number).collect()
        };
        let raw = DataTable::new(
            schema.clone(),
            (0..n).map(|i| cells(&rows[i], s[i].into(), y[i].into())).collect(),
        ).unwrap();
        let prep = fit_preprocessor(&raw).unwrap();
        let x = transform(&prep, &raw).unwrap();
        let numeric = prep.features.iter().filter(|f| matches!(f, FeatureSpec::Numeric { .. })).count();
        let scaled = DataTable::new(
            schema,
            (0..n).map(|i| cells(&x.row(i)[..numeric], s[i].into(), y[i].into())).collect(),
        ).unwrap();
        for f in fit_preprocessor(&scaled).unwrap().features {
            if let FeatureSpec::Numeric { min, max, column, .. } = f {
                let j: usize = column[1..].parse().unwrap();
                let degenerate = rows[..n].iter().all(|r| r[j] == rows[0][j]);
                if !degenerate {
                    prop_assert!(min.abs() < 1e-12 && (max - 1.0).abs() < 1e-12, "{} {} {}", column, min, max);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn pipeline_version_ids_are_deterministic(seed in 0u64..50) {
        let table = synthetic_cohort(600, 0.0, seed);
        let policy = Policy { protected_attribute: "gender".into(), seed, ..Policy::default() };
        let cfg = PipelineConfig::new(TrainConfig { n_estimators: 10, ..TrainConfig::gbt() });
        let run = || match run_pipeline(&table, &policy, &cfg, None) {
            Ok(o) => o,
            Err(fairgate::governance::GovernanceError::HardBlock(o)) => *o,
            Err(e) => panic!("{e}"),
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(&a.version_id, &b.version_id);
        let ha: Vec<_> = a.stages.iter().map(|s| s.model_hash.clone()).collect();
        let hb: Vec<_> = b.stages.iter().map(|s| s.model_hash.clone()).collect();
        prop_assert_eq!(ha, hb);
    }
}
