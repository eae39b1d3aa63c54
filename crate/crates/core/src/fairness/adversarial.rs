//! Logistic regression trained against an adversary that tries to recover
//! the sensitive attribute from the model's logits.
//!
//! With `A(theta) = min_a L_adv(theta, a)` the adversary's best achievable
//! loss, the main model minimises `F(theta) = L(theta) - lambda * A(theta)`.
//! Each round refits the adversary, then takes one Hessian-preconditioned
//! step on `F` with backtracking. The step direction uses the gradient of
//! `L_adv` at the fitted adversary, which is the gradient of `A`.

use serde::{Deserialize, Serialize};

use super::{check_binary, check_len, demographic_parity_difference, FairnessError};
use crate::linalg::solve_spd;
use crate::models::{newton_minimize, sigmoid, softplus, train_logistic, LogisticModel, LogisticObjective, TrainConfig};
use crate::tabular::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebiasConfig {
    pub lambda: f64,
    pub rounds: usize,
    /// Inverse L2 strength of the adversary's slope.
    pub adversary_c: f64,
}

impl Default for DebiasConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            rounds: 20,
            adversary_c: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasOutcome {
    pub model: LogisticModel,
    /// Adversary `sigmoid(a0 + a1 * logit)`, one coefficient.
    pub adversary: LogisticModel,
    pub lambda: f64,
    pub rounds_run: usize,
    /// Objective `F` before the first round and after each accepted step.
    pub objective: Vec<f64>,
    pub baseline_dpd: f64,
    pub train_dpd: f64,
    pub adversary_accuracy: f64,
    /// Set when the debiased model's training DPD exceeds the plain fit's.
    pub no_improvement: bool,
}

struct Adversary {
    a0: f64,
    a1: f64,
    loss: f64,
}

fn logits(x: &FeatureMatrix, theta: &[f64]) -> Vec<f64> {
    x.rows()
        .map(|r| theta[0] + theta[1..].iter().zip(r).map(|(b, v)| b * v).sum::<f64>())
        .collect()
}

fn fit_adversary(z: &[f64], s: &[f64], c: f64) -> Result<Adversary, FairnessError> {
    let n = z.len() as f64;
    let pen = 1.0 / (c * n);
    let value = |a: &[f64]| {
        z.iter()
            .zip(s)
            .map(|(&zi, &si)| {
                let u = a[0] + a[1] * zi;
                softplus(u) - si * u
            })
            .sum::<f64>()
            / n
            + pen * a[1] * a[1]
    };
    let gradient = |a: &[f64]| {
        let mut g = vec![0.0, 2.0 * pen * a[1]];
        for (&zi, &si) in z.iter().zip(s) {
            let r = (sigmoid(a[0] + a[1] * zi) - si) / n;
            g[0] += r;
            g[1] += r * zi;
        }
        g
    };
    let hessian = |a: &[f64]| {
        let mut h = vec![0.0, 0.0, 0.0, 2.0 * pen];
        for &zi in z {
            let p = sigmoid(a[0] + a[1] * zi);
            let c = p * (1.0 - p) / n;
            h[0] += c;
            h[1] += c * zi;
            h[3] += c * zi * zi;
        }
        h[2] = h[1];
        h
    };
    let a = newton_minimize(vec![0.0, 0.0], value, gradient, hessian)?;
    Ok(Adversary {
        a0: a[0],
        a1: a[1],
        loss: value(&a),
    })
}

fn hard_labels(z: &[f64], threshold: f64) -> Vec<u8> {
    z.iter().map(|&v| u8::from(sigmoid(v) >= threshold)).collect()
}

pub fn adversarial_debias_logistic(
    x: &FeatureMatrix,
    y: &[u8],
    s: &[u8],
    w: Option<&[f64]>,
    cfg: &TrainConfig,
    debias: &DebiasConfig,
) -> Result<DebiasOutcome, FairnessError> {
    check_len("sensitive", x.n_rows(), s.len())?;
    check_binary("sensitive", s)?;
    check_binary("labels", y)?;
    if !(debias.lambda >= 0.0 && debias.lambda.is_finite()) {
        return Err(crate::models::ModelError::InvalidConfig("lambda must be >= 0".into()).into());
    }
    let baseline = train_logistic(x, y, w, cfg)?;
    let obj = LogisticObjective::new(x, y, w, cfg.c)?;
    let sf: Vec<f64> = s.iter().map(|&v| f64::from(v)).collect();
    let lambda = debias.lambda;

    let objective_at = |theta: &[f64]| -> Result<(f64, Adversary), FairnessError> {
        let adv = fit_adversary(&logits(x, theta), &sf, debias.adversary_c)?;
        Ok((obj.value(theta) - lambda * adv.loss, adv))
    };

    let mut theta = baseline.packed();
    let (mut f, mut adv) = objective_at(&theta)?;
    let mut trace = vec![f];
    let mut rounds_run = 0;

    if lambda > 0.0 {
        for _ in 0..debias.rounds {
            rounds_run += 1;
            // Gradient of F: dL - lambda * dL_adv / dtheta at the fitted adversary.
            let z = logits(x, &theta);
            let n = z.len() as f64;
            let mut g = obj.gradient(&theta);
            for (i, (&zi, &si)) in z.iter().zip(&sf).enumerate() {
                let r = lambda * (sigmoid(adv.a0 + adv.a1 * zi) - si) * adv.a1 / n;
                g[0] -= r;
                for (gj, v) in g[1..].iter_mut().zip(x.row(i)) {
                    *gj -= r * v;
                }
            }
            if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-8 {
                break;
            }
            let dir = solve_spd(&obj.hessian(&theta), &g).unwrap_or_else(|| g.clone());
            let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-10 {
                let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t - step * d).collect();
                let (ft, at) = objective_at(&trial)?;
                if ft.is_finite() && ft <= f - 1e-4 * step * slope {
                    theta = trial;
                    f = ft;
                    adv = at;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            trace.push(f);
        }
    }

    let model = if lambda > 0.0 {
        LogisticModel::from_packed(&theta)
    } else {
        baseline.clone()
    };
    let z = logits(x, &model.packed());
    let baseline_dpd = demographic_parity_difference(&hard_labels(&logits(x, &baseline.packed()), cfg.threshold), s)?;
    let train_dpd = demographic_parity_difference(&hard_labels(&z, cfg.threshold), s)?;
    let correct = z
        .iter()
        .zip(s)
        .filter(|(&zi, &si)| u8::from(sigmoid(adv.a0 + adv.a1 * zi) >= 0.5) == si)
        .count();
    log::debug!("adversarial debias: lambda={lambda} rounds={rounds_run} dpd {baseline_dpd:.4} -> {train_dpd:.4}");
    Ok(DebiasOutcome {
        model,
        adversary: LogisticModel {
            coefficients: vec![adv.a1],
            intercept: adv.a0,
        },
        lambda,
        rounds_run,
        objective: trace,
        baseline_dpd,
        train_dpd,
        adversary_accuracy: correct as f64 / z.len() as f64,
        no_improvement: train_dpd > baseline_dpd,
    })
}
