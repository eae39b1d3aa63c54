//! Local surrogate explanations from kernel-weighted perturbations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::linalg::weighted_ridge;
use crate::tabular::{FeatureMatrix, FeatureSpec, FittedPreprocessor};

pub const MIN_SAMPLES: usize = 50;

/// How one source feature is perturbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackgroundFeature {
    /// Gaussian noise with the background standard deviation.
    Continuous { column: usize, sd: f64 },
    /// Resampled from observed frequencies. One column means a 0/1 flag with
    /// `frequencies[0] = P(1)`; several columns are a one-hot group, any
    /// leftover probability mass encoding as all zeros.
    Categorical { columns: Vec<usize>, frequencies: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub width: usize,
    pub features: Vec<BackgroundFeature>,
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

impl Background {
    /// Statistics of the encoded training matrix, grouped by source column.
    pub fn from_training(prep: &FittedPreprocessor, x: &FeatureMatrix) -> Self {
        let mut features = Vec::new();
        let mut j = 0;
        let n = x.n_rows().max(1) as f64;
        for spec in &prep.features {
            let w = spec.width();
            match spec {
                FeatureSpec::Numeric { .. } => features.push(BackgroundFeature::Continuous {
                    column: j,
                    sd: sample_sd(&x.column(j)),
                }),
                FeatureSpec::Binary { .. } | FeatureSpec::OneHot { .. } => {
                    let columns: Vec<usize> = (j..j + w).collect();
                    let frequencies = columns.iter().map(|&c| x.column(c).iter().sum::<f64>() / n).collect();
                    features.push(BackgroundFeature::Categorical { columns, frequencies });
                }
            }
            j += w;
        }
        Self { width: j, features }
    }

    /// All features continuous with the given standard deviations.
    pub fn continuous(sds: &[f64]) -> Self {
        Self {
            width: sds.len(),
            features: sds
                .iter()
                .enumerate()
                .map(|(column, &sd)| BackgroundFeature::Continuous { column, sd })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub kernel_width: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Weighted R^2 of the surrogate on its perturbations; `None` when the
    /// model output does not vary.
    pub fidelity: Option<f64>,
    pub prediction: f64,
    pub local_prediction: f64,
}

pub fn lime_local(
    predict_fn: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    background: &Background,
    n_samples: usize,
    seed: u64,
) -> Result<LimeExplanation, ExplainError> {
    if n_samples < MIN_SAMPLES {
        return Err(ExplainError::TooFewSamples(n_samples));
    }
    if x.len() != background.width {
        return Err(ExplainError::WidthMismatch {
            expected: background.width,
            found: x.len(),
        });
    }
    let d = x.len();
    let kernel_width = 0.75 * (d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_samples);
    let mut dist2 = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut z = x.to_vec();
        let mut ds = 0.0;
        for f in &background.features {
            match f {
                BackgroundFeature::Continuous { column, sd } => {
                    if *sd > 0.0 {
                        let e: f64 = rng.sample(StandardNormal);
                        z[*column] = x[*column] + sd * e;
                        ds += e * e;
                    }
                }
                BackgroundFeature::Categorical { columns, frequencies } => {
                    let u: f64 = rng.random();
                    if columns.len() == 1 {
                        z[columns[0]] = f64::from(u8::from(u < frequencies[0]));
                    } else {
                        let mut acc = 0.0;
                        let mut pick = None;
                        for (k, &p) in frequencies.iter().enumerate() {
                            acc += p;
                            if u < acc {
                                pick = Some(k);
                                break;
                            }
                        }
                        for (k, &c) in columns.iter().enumerate() {
                            z[c] = f64::from(u8::from(pick == Some(k)));
                        }
                    }
                    for &c in columns {
                        ds += (z[c] - x[c]).powi(2);
                    }
                }
            }
        }
        dist2.push(ds);
        samples.push(z);
    }
    if samples.iter().all(|z| z == &samples[0]) {
        return Err(ExplainError::DegenerateDesign);
    }

    let targets: Vec<f64> = samples.iter().map(|z| predict_fn(z)).collect();
    let raw_w: Vec<f64> = dist2.iter().map(|d2| (-d2 / (kernel_width * kernel_width)).exp()).collect();
    let wsum: f64 = raw_w.iter().sum();
    let weights: Vec<f64> = raw_w.iter().map(|w| w * n_samples as f64 / wsum).collect();
    let alpha = 1e-8 * n_samples as f64;
    let (intercept, coefficients) =
        weighted_ridge(&samples, &targets, &weights, alpha).ok_or(ExplainError::DegenerateDesign)?;

    let fitted: Vec<f64> = samples
        .iter()
        .map(|z| intercept + coefficients.iter().zip(z).map(|(b, v)| b * v).sum::<f64>())
        .collect();
    let wn: f64 = weights.iter().sum();
    let mean = weights.iter().zip(&targets).map(|(w, t)| w * t).sum::<f64>() / wn;
    let ss_tot: f64 = weights.iter().zip(&targets).map(|(w, t)| w * (t - mean).powi(2)).sum();
    let ss_res: f64 = weights
        .iter()
        .zip(targets.iter().zip(&fitted))
        .map(|(w, (t, f))| w * (t - f).powi(2))
        .sum();
    let fidelity = (ss_tot > 1e-12 * wn).then(|| (1.0 - ss_res / ss_tot).clamp(0.0, 1.0));

    Ok(LimeExplanation {
        local_prediction: intercept + coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>(),
        prediction: predict_fn(x),
        coefficients,
        intercept,
        kernel_width,
        n_samples,
        seed,
        fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_linear_function() {
        let beta = [0.8, -1.5, 0.3, 0.0];
        let f = |z: &[f64]| 0.2 + beta.iter().zip(z).map(|(b, v)| b * v).sum::<f64>();
        let bg = Background::continuous(&[0.2, 0.3, 0.1, 0.25]);
        let e = lime_local(&f, &[0.5, 0.4, 0.6, 0.1], &bg, 5000, 3).unwrap();
        for (c, b) in e.coefficients.iter().zip(beta) {
            assert!((c - b).abs() <= 0.1 * b.abs().max(1e-3), "{c} vs {b}");
        }
        assert!(e.fidelity.unwrap() > 0.999);
    }

    #[test]
    fn constant_function() {
        let bg = Background::continuous(&[0.2, 0.3]);
        let e = lime_local(&|_: &[f64]| 0.4, &[0.5, 0.5], &bg, 200, 1).unwrap();
        assert!(e.coefficients.iter().all(|c| c.abs() < 1e-9));
        assert_eq!(e.fidelity, None);
    }

    #[test]
    fn deterministic_per_seed() {
        let bg = Background {
            width: 4,
            features: vec![
                BackgroundFeature::Continuous { column: 0, sd: 0.3 },
                BackgroundFeature::Categorical {
                    columns: vec![1, 2, 3],
                    frequencies: vec![0.5, 0.3, 0.2],
                },
            ],
        };
        let f = |z: &[f64]| 1.0 / (1.0 + (-(z[0] + 2.0 * z[2])).exp());
        let a = lime_local(&f, &[0.4, 1.0, 0.0, 0.0], &bg, 300, 9).unwrap();
        let b = lime_local(&f, &[0.4, 1.0, 0.0, 0.0], &bg, 300, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.coefficients[2] > a.coefficients[1]);
    }

    #[test]
    fn degenerate_and_too_few() {
        let bg = Background::continuous(&[0.0, 0.0]);
        assert!(matches!(
            lime_local(&|_: &[f64]| 0.0, &[1.0, 1.0], &bg, 100, 0),
            Err(ExplainError::DegenerateDesign)
        ));
        assert!(matches!(
            lime_local(&|_: &[f64]| 0.0, &[1.0, 1.0], &bg, 10, 0),
            Err(ExplainError::TooFewSamples(10))
        ));
    }
}
