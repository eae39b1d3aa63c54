//! Seeded synthetic cohorts for tests, benchmarks and demos.
//!
//! The layout mimics a large cardiovascular screening table: a handful of
//! vitals, a categorical cholesterol grade, lifestyle flags and a binary
//! audited attribute. Labels come from a fixed logistic model, so any sex
//! effect in the data is exactly `sex_effect` on the logit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::models::sigmoid;
use crate::tabular::{Cell, ColumnSchema, DataTable, Schema};

pub const CHOLESTEROL: [&str; 3] = ["normal", "above_normal", "well_above_normal"];

pub fn cohort_schema() -> Schema {
    let mut sex = ColumnSchema::sensitive("gender");
    sex.audit = Some(true);
    Schema::new(vec![
        ColumnSchema::numeric("age").with_units("years"),
        sex,
        ColumnSchema::numeric("height").with_units("cm"),
        ColumnSchema::numeric("weight").with_units("kg"),
        ColumnSchema::numeric("ap_hi").with_units("mm Hg"),
        ColumnSchema::numeric("ap_lo").with_units("mm Hg"),
        ColumnSchema::categorical("cholesterol").with_categories(CHOLESTEROL),
        ColumnSchema::numeric("smoke"),
        ColumnSchema::numeric("active"),
        ColumnSchema::target("cardio"),
    ])
    .expect("static schema is valid")
}

/// `n` rows. With `sex_effect = 0` the label is independent of the audited
/// attribute given the other columns, and those columns are drawn
/// independently of it too.
pub fn synthetic_cohort(n: usize, sex_effect: f64, seed: u64) -> DataTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let age = Normal::new(53.0, 6.8).expect("sd > 0");
    let height = Normal::new(165.0, 8.0).expect("sd > 0");
    let weight = Normal::new(74.0, 14.0).expect("sd > 0");
    let noise = Normal::new(0.0, 1.0).expect("sd > 0");
    let rows = (0..n)
        .map(|_| {
            let a: f64 = age.sample(&mut rng);
            let s = u8::from(rng.random::<f64>() < 0.35);
            let h: f64 = height.sample(&mut rng);
            let w: f64 = weight.sample(&mut rng);
            let hi = 127.0 + 0.4 * (a - 53.0) + 0.3 * (w - 74.0) + 15.0 * noise.sample(&mut rng);
            let lo = 81.0 + 0.5 * (hi - 127.0) + 8.0 * noise.sample(&mut rng);
            let u: f64 = rng.random();
            let chol = if u < 0.75 {
                0
            } else if u < 0.89 {
                1
            } else {
                2
            };
            let smoke = u8::from(rng.random::<f64>() < 0.09);
            let active = u8::from(rng.random::<f64>() < 0.8);
            let bmi = w / (h / 100.0).powi(2);
            let logit = -0.2
                + 0.06 * (a - 53.0)
                + 0.045 * (hi - 127.0)
                + 0.04 * (bmi - 27.0)
                + 0.5 * chol as f64
                + 0.1 * f64::from(smoke)
                - 0.25 * f64::from(active)
                + sex_effect * f64::from(s);
            let y = u8::from(rng.random::<f64>() < sigmoid(logit));
            vec![
                Cell::Number(a.round()),
                Cell::Number(f64::from(s)),
                Cell::Number(h.round()),
                Cell::Number((w * 10.0).round() / 10.0),
                Cell::Number(hi.round()),
                Cell::Number(lo.round()),
                Cell::Label(CHOLESTEROL[chol].to_string()),
                Cell::Number(f64::from(smoke)),
                Cell::Number(f64::from(active)),
                Cell::Number(f64::from(y)),
            ]
        })
        .collect();
    DataTable::new(cohort_schema(), rows).expect("generated rows match the schema")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_roughly_balanced() {
        let a = synthetic_cohort(5000, 0.0, 1);
        assert_eq!(a, synthetic_cohort(5000, 0.0, 1));
        let y = a.labels();
        let prev = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
        assert!(prev > 0.3 && prev < 0.7, "{prev}");
        let parity = crate::fairness::label_parity(&y, &a.sensitive()).unwrap();
        assert!(parity < 0.05, "{parity}");
        let biased = synthetic_cohort(5000, 2.0, 1);
        assert!(crate::fairness::label_parity(&biased.labels(), &biased.sensitive()).unwrap() > 0.2);
    }
}
