//! Weighted L2-regularised logistic regression, full-batch Newton.

use serde::{Deserialize, Serialize};

use super::{prepare_weights, sigmoid, ModelError, TrainConfig};
use crate::linalg::solve_spd;
use crate::tabular::FeatureMatrix;

pub const MAX_ITER: usize = 1000;
pub const GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    pub fn logit(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    /// Parameters packed as `[intercept, coefficients...]`.
    pub fn packed(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.coefficients.len() + 1);
        p.push(self.intercept);
        p.extend_from_slice(&self.coefficients);
        p
    }

    pub fn from_packed(p: &[f64]) -> Self {
        Self {
            intercept: p[0],
            coefficients: p[1..].to_vec(),
        }
    }
}

pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `J(b, beta) = (1/n) sum_i w_i logloss_i + |beta|^2 / (C n)`, with weights
/// normalised to mean one. Parameters are packed `[b, beta...]`.
pub struct LogisticObjective<'a> {
    pub x: &'a FeatureMatrix,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    /// `1 / (C n)`.
    pub penalty: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: &'a FeatureMatrix, y: &[u8], w: Option<&[f64]>, c: f64) -> Result<Self, ModelError> {
        let w = prepare_weights(x, y, w)?;
        Ok(Self {
            x,
            y: y.iter().map(|&v| f64::from(v)).collect(),
            w,
            penalty: 1.0 / (c * x.n_rows() as f64),
        })
    }

    fn dim(&self) -> usize {
        self.x.n_cols() + 1
    }

    fn logit(&self, params: &[f64], i: usize) -> f64 {
        params[0] + params[1..].iter().zip(self.x.row(i)).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        let n = self.x.n_rows() as f64;
        let data: f64 = (0..self.x.n_rows())
            .map(|i| {
                let z = self.logit(params, i);
                self.w[i] * (softplus(z) - self.y[i] * z)
            })
            .sum();
        data / n + self.penalty * params[1..].iter().map(|b| b * b).sum::<f64>()
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let n = self.x.n_rows() as f64;
        let mut g = vec![0.0; self.dim()];
        for i in 0..self.x.n_rows() {
            let r = self.w[i] * (sigmoid(self.logit(params, i)) - self.y[i]) / n;
            g[0] += r;
            for (gj, v) in g[1..].iter_mut().zip(self.x.row(i)) {
                *gj += r * v;
            }
        }
        for (gj, b) in g[1..].iter_mut().zip(&params[1..]) {
            *gj += 2.0 * self.penalty * b;
        }
        g
    }

    /// Row-major `(d+1) x (d+1)` Hessian.
    pub fn hessian(&self, params: &[f64]) -> Vec<f64> {
        let n = self.x.n_rows() as f64;
        let p = self.dim();
        let mut h = vec![0.0; p * p];
        let mut aug = vec![0.0; p];
        for i in 0..self.x.n_rows() {
            let s = sigmoid(self.logit(params, i));
            let c = self.w[i] * s * (1.0 - s) / n;
            aug[0] = 1.0;
            aug[1..].copy_from_slice(self.x.row(i));
            for a in 0..p {
                let ca = c * aug[a];
                for b in 0..=a {
                    h[a * p + b] += ca * aug[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[b * p + a] = h[a * p + b];
            }
        }
        for j in 1..p {
            h[j * p + j] += 2.0 * self.penalty;
        }
        h
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimise a smooth objective with Newton steps and Armijo backtracking,
/// falling back to steepest descent when the Hessian is unusable.
pub(crate) fn newton_minimize(
    mut params: Vec<f64>,
    value: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    hessian: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Vec<f64>, ModelError> {
    let mut f = value(&params);
    if !f.is_finite() {
        return Err(ModelError::NonfiniteLoss);
    }
    for _ in 0..MAX_ITER {
        let g = gradient(&params);
        if max_norm(&g) < GRAD_TOL {
            break;
        }
        let newton = solve_spd(&hessian(&params), &g)
            .filter(|d| d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() > 0.0);
        let mut accepted = false;
        for dir in [newton, Some(g.clone())].into_iter().flatten() {
            let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            let mut step = 1.0;
            while step > 1e-12 {
                let trial: Vec<f64> = params.iter().zip(&dir).map(|(p, d)| p - step * d).collect();
                let ft = value(&trial);
                if ft.is_finite() && ft <= f - 1e-4 * step * slope {
                    params = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            // No representable decrease left: we are at the optimum to
            // floating-point precision.
            break;
        }
    }
    Ok(params)
}

pub fn train_logistic(
    x: &FeatureMatrix,
    y: &[u8],
    w: Option<&[f64]>,
    cfg: &TrainConfig,
) -> Result<LogisticModel, ModelError> {
    cfg.validate()?;
    let obj = LogisticObjective::new(x, y, w, cfg.c)?;
    let start = vec![0.0; x.n_cols() + 1];
    let p = newton_minimize(start, |p| obj.value(p), |p| obj.gradient(p), |p| obj.hessian(p))?;
    Ok(LogisticModel::from_packed(&p))
}
