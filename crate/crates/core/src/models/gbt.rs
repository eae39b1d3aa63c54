//! Logistic-loss gradient boosting with Newton leaves.
//!
//! Trees grow level by level over feature orders sorted once per fit, so a
//! level costs one pass per feature regardless of how many nodes it holds.
//! Split gain is `0.5 * (GL^2/HL + GR^2/HR - G^2/H)` with no shrinkage term;
//! a child is admissible only when its hessian mass reaches
//! `min_child_weight`. Ties keep the lowest feature, then the lowest
//! threshold; gains equal up to rounding count as ties.

use super::tree::{Combine, Tree, TreeEnsemble};
use super::{beats, prepare_weights, sigmoid, ModelError, TrainConfig};
use crate::tabular::FeatureMatrix;

const MIN_GAIN: f64 = 1e-12;

pub fn train_gbt(
    x: &FeatureMatrix,
    y: &[u8],
    w: Option<&[f64]>,
    cfg: &TrainConfig,
) -> Result<TreeEnsemble, ModelError> {
    train_gbt_traced(x, y, w, cfg).map(|(e, _)| e)
}

/// Like [`train_gbt`], also returning the weighted training loss before the
/// first round and after every round (`n_estimators + 1` values).
pub fn train_gbt_traced(
    x: &FeatureMatrix,
    y: &[u8],
    w: Option<&[f64]>,
    cfg: &TrainConfig,
) -> Result<(TreeEnsemble, Vec<f64>), ModelError> {
    cfg.validate()?;
    let w = prepare_weights(x, y, w)?;
    let n = x.n_rows();
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();

    let pos: f64 = w.iter().zip(&yf).map(|(wi, yi)| wi * yi).sum::<f64>() / n as f64;
    let prior = pos.clamp(1e-6, 1.0 - 1e-6);
    let base = (prior / (1.0 - prior)).ln();

    let orders = presort(x);
    let mut score = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    let mut losses = Vec::with_capacity(cfg.n_estimators + 1);
    losses.push(weighted_logloss(&score, &yf, &w)?);

    for _ in 0..cfg.n_estimators {
        for i in 0..n {
            let p = sigmoid(score[i]);
            grad[i] = w[i] * (p - yf[i]);
            hess[i] = w[i] * p * (1.0 - p);
        }
        let (tree, leaf_of) = grow(x, &orders, &grad, &hess, cfg.max_depth, cfg.min_child_weight);
        for i in 0..n {
            score[i] += cfg.learning_rate * tree.value[leaf_of[i] as usize];
        }
        losses.push(weighted_logloss(&score, &yf, &w)?);
        trees.push(tree);
    }
    Ok((
        TreeEnsemble::new(trees, base, Combine::AdditiveLogit, cfg.learning_rate),
        losses,
    ))
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn weighted_logloss(score: &[f64], y: &[f64], w: &[f64]) -> Result<f64, ModelError> {
    let total: f64 = score
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&f, &yi), &wi)| wi * (softplus(f) - yi * f))
        .sum();
    let wsum: f64 = w.iter().sum();
    let loss = total / wsum;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(ModelError::NonfiniteLoss)
    }
}

fn presort(x: &FeatureMatrix) -> Vec<Vec<u32>> {
    (0..x.n_cols())
        .map(|f| {
            let mut idx: Vec<u32> = (0..x.n_rows() as u32).collect();
            idx.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)));
            idx
        })
        .collect()
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Clone, Copy, Default)]
struct Sweep {
    g: f64,
    h: f64,
    count: usize,
    last: f64,
}

/// Grow one tree and return it with the final leaf of every row.
fn grow(
    x: &FeatureMatrix,
    orders: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    max_depth: usize,
    min_child_weight: f64,
) -> (Tree, Vec<u32>) {
    let n = x.n_rows();
    let mut tree = Tree::leaf(0.0, n as f64);
    let mut node_g = vec![grad.iter().sum::<f64>()];
    let mut node_h = vec![hess.iter().sum::<f64>()];
    let mut node_of = vec![0u32; n];
    let mut active = vec![0usize];

    for _depth in 0..max_depth {
        if active.is_empty() {
            break;
        }
        let mut slot_of = vec![usize::MAX; tree.n_nodes()];
        for (s, &node) in active.iter().enumerate() {
            slot_of[node] = s;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; active.len()];
        let mut sweep = vec![Sweep::default(); active.len()];

        for (f, order) in orders.iter().enumerate() {
            sweep.iter_mut().for_each(|s| *s = Sweep::default());
            for &i in order {
                let i = i as usize;
                let s = slot_of[node_of[i] as usize];
                if s == usize::MAX {
                    continue;
                }
                let v = x.get(i, f);
                let acc = &mut sweep[s];
                if acc.count > 0 && v > acc.last {
                    let node = active[s];
                    let (g, h) = (node_g[node], node_h[node]);
                    let (gl, hl) = (acc.g, acc.h);
                    let (gr, hr) = (g - gl, h - hl);
                    if hl >= min_child_weight && hr >= min_child_weight && hl > 0.0 && hr > 0.0 {
                        let gain = 0.5 * (gl * gl / hl + gr * gr / hr - g * g / h);
                        if best[s].map_or(true, |b| beats(gain, b.gain)) {
                            let mut threshold = acc.last + 0.5 * (v - acc.last);
                            if threshold <= acc.last {
                                threshold = v;
                            }
                            best[s] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold,
                            });
                        }
                    }
                }
                acc.g += grad[i];
                acc.h += hess[i];
                acc.count += 1;
                acc.last = v;
            }
        }

        // children[node] = (feature, threshold, left, right)
        let mut split_of: Vec<Option<(usize, f64, usize, usize)>> = vec![None; tree.n_nodes()];
        let mut next_active = Vec::new();
        for (s, &node) in active.iter().enumerate() {
            if let Some(c) = best[s] {
                if c.gain > MIN_GAIN {
                    let l = tree.push_leaf(0.0, 0.0);
                    let r = tree.push_leaf(0.0, 0.0);
                    tree.set_split(node, c.feature, c.threshold, l, r, c.gain);
                    node_g.extend([0.0, 0.0]);
                    node_h.extend([0.0, 0.0]);
                    split_of.push(None);
                    split_of.push(None);
                    split_of[node] = Some((c.feature, c.threshold, l, r));
                    next_active.extend([l, r]);
                }
            }
        }
        if next_active.is_empty() {
            break;
        }
        for i in 0..n {
            if let Some((f, thr, l, r)) = split_of[node_of[i] as usize] {
                let child = if x.get(i, f) < thr { l } else { r };
                node_of[i] = child as u32;
                node_g[child] += grad[i];
                node_h[child] += hess[i];
                tree.cover[child] += 1.0;
            }
        }
        active = next_active;
    }

    for node in 0..tree.n_nodes() {
        if tree.is_leaf(node) {
            let h = node_h[node];
            tree.value[node] = if h > 0.0 { -node_g[node] / h } else { 0.0 };
        }
    }
    (tree, node_of)
}
