//! Path-dependent TreeSHAP: exact Shapley values of the cover-weighted
//! conditional expectation, in time polynomial in tree depth.

use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::models::{LogisticModel, Tree, TreeEnsemble};

/// Attributions in the model's additive space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub base_value: f64,
    pub phi: Vec<f64>,
    pub f_x: f64,
}

impl ShapExplanation {
    /// `|base + sum(phi) - f(x)|`.
    pub fn local_accuracy_gap(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.f_x).abs()
    }
}

#[derive(Clone, Copy, Debug)]
struct PathElement {
    feature: i64,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn extend(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: i64) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) as f64 / d1;
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) as f64 / d1;
    }
}

fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let PathElement {
        zero_fraction,
        one_fraction,
        ..
    } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next_one = path[depth].pweight;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * d1 / ((i + 1) as f64 * one_fraction);
            next_one = tmp - path[i].pweight * zero_fraction * (depth - i) as f64 / d1;
        } else {
            path[i].pweight = path[i].pweight * d1 / (zero_fraction * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

/// Total permutation weight of the path with element `index` removed.
fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let PathElement {
        zero_fraction,
        one_fraction,
        ..
    } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next_one = path[depth].pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = next_one * d1 / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next_one = path[i].pweight - tmp * zero_fraction * (depth - i) as f64 / d1;
        } else {
            total += path[i].pweight / (zero_fraction * (depth - i) as f64 / d1);
        }
    }
    total
}

struct Walker<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    phi: &'a mut [f64],
    scale: f64,
}

impl Walker<'_> {
    fn recurse(&mut self, node: usize, mut path: Vec<PathElement>, zero: f64, one: f64, feature: i64) {
        extend(&mut path, zero, one, feature);
        let t = self.tree;
        if t.is_leaf(node) {
            let v = t.value[node] * self.scale;
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let el = path[i];
                self.phi[el.feature as usize] += w * (el.one_fraction - el.zero_fraction) * v;
            }
            return;
        }
        let f = t.feature[node] as usize;
        let (l, r) = (t.left[node] as usize, t.right[node] as usize);
        let (hot, cold) = if self.x[f] < t.threshold[node] { (l, r) } else { (r, l) };
        let hot_zero = t.cover[hot] / t.cover[node];
        let cold_zero = t.cover[cold] / t.cover[node];
        let (mut in_zero, mut in_one) = (1.0, 1.0);
        if let Some(k) = (1..path.len()).find(|&k| path[k].feature == f as i64) {
            in_zero = path[k].zero_fraction;
            in_one = path[k].one_fraction;
            unwind(&mut path, k);
        }
        self.recurse(hot, path.clone(), hot_zero * in_zero, in_one, f as i64);
        self.recurse(cold, path, cold_zero * in_zero, 0.0, f as i64);
    }
}

pub(crate) fn check_covers(ensemble: &TreeEnsemble) -> Result<(), ExplainError> {
    for (ti, t) in ensemble.trees.iter().enumerate() {
        if t.cover.len() != t.n_nodes() {
            return Err(ExplainError::MissingCover { tree: ti, node: t.cover.len() });
        }
        if let Some(node) = t.cover.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(ExplainError::MissingCover { tree: ti, node });
        }
    }
    Ok(())
}

/// Cover-weighted mean leaf value of one tree.
pub fn tree_expected_value(t: &Tree) -> f64 {
    fn walk(t: &Tree, node: usize) -> f64 {
        if t.is_leaf(node) {
            return t.value[node];
        }
        let (l, r) = (t.left[node] as usize, t.right[node] as usize);
        (t.cover[l] * walk(t, l) + t.cover[r] * walk(t, r)) / t.cover[node]
    }
    if t.n_nodes() == 0 {
        0.0
    } else {
        walk(t, 0)
    }
}

pub fn ensemble_expected_value(e: &TreeEnsemble) -> f64 {
    e.base_score + e.tree_scale * e.trees.iter().map(tree_expected_value).sum::<f64>()
}

/// SHAP values of `x` for a tree ensemble. `width` is the feature count.
pub fn tree_shap(ensemble: &TreeEnsemble, x: &[f64], width: usize) -> Result<ShapExplanation, ExplainError> {
    if x.len() != width {
        return Err(ExplainError::WidthMismatch {
            expected: width,
            found: x.len(),
        });
    }
    if let Some(m) = ensemble.trees.iter().filter_map(Tree::max_feature).max() {
        if m >= width {
            return Err(ExplainError::WidthMismatch {
                expected: m + 1,
                found: width,
            });
        }
    }
    check_covers(ensemble)?;
    Ok(tree_shap_unchecked(ensemble, x))
}

pub(crate) fn tree_shap_unchecked(ensemble: &TreeEnsemble, x: &[f64]) -> ShapExplanation {
    let mut phi = vec![0.0; x.len()];
    for t in &ensemble.trees {
        if t.n_nodes() == 0 {
            continue;
        }
        let mut w = Walker {
            tree: t,
            x,
            phi: &mut phi,
            scale: ensemble.tree_scale,
        };
        w.recurse(0, Vec::with_capacity(t.depth() + 2), 1.0, 1.0, -1);
    }
    ShapExplanation {
        base_value: ensemble_expected_value(ensemble),
        phi,
        f_x: ensemble.raw_output(x),
    }
}

/// Exact SHAP for a linear logit against background feature means:
/// `phi_j = beta_j * (x_j - mean_j)`.
pub fn linear_shap(model: &LogisticModel, x: &[f64], means: &[f64]) -> Result<ShapExplanation, ExplainError> {
    let d = model.coefficients.len();
    for len in [x.len(), means.len()] {
        if len != d {
            return Err(ExplainError::WidthMismatch { expected: d, found: len });
        }
    }
    let phi: Vec<f64> = model
        .coefficients
        .iter()
        .zip(x.iter().zip(means))
        .map(|(b, (xi, mi))| b * (xi - mi))
        .collect();
    Ok(ShapExplanation {
        base_value: model.logit(means),
        phi,
        f_x: model.logit(x),
    })
}

/// Reference Shapley values by enumerating all `2^d` coalitions of the
/// path-dependent value function. Exponential; intended as a test oracle.
pub fn subset_shapley(ensemble: &TreeEnsemble, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    assert!(d <= 20, "subset enumeration is exponential in d");
    let value = |mask: u32| -> f64 {
        fn walk(t: &Tree, node: usize, x: &[f64], mask: u32) -> f64 {
            if t.is_leaf(node) {
                return t.value[node];
            }
            let f = t.feature[node] as usize;
            let (l, r) = (t.left[node] as usize, t.right[node] as usize);
            if mask & (1 << f) != 0 {
                walk(t, if x[f] < t.threshold[node] { l } else { r }, x, mask)
            } else {
                (t.cover[l] * walk(t, l, x, mask) + t.cover[r] * walk(t, r, x, mask)) / t.cover[node]
            }
        }
        ensemble.base_score
            + ensemble.tree_scale
                * ensemble
                    .trees
                    .iter()
                    .map(|t| walk(t, 0, x, mask))
                    .sum::<f64>()
    };
    let values: Vec<f64> = (0..1u32 << d).map(value).collect();
    let mut fact = vec![1.0f64; d + 1];
    for k in 1..=d {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        for mask in 0..1u32 << d {
            if mask & (1 << i) != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact[s] * fact[d - s - 1] / fact[d];
            *p += w * (values[(mask | (1 << i)) as usize] - values[mask as usize]);
        }
    }
    phi
}
