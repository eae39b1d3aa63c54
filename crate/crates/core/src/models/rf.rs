//! Bootstrap forests of weighted Gini trees.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{Combine, Tree, TreeEnsemble};
use super::{beats, prepare_weights, MaxFeatures, ModelError, TrainConfig};
use crate::tabular::FeatureMatrix;

const MIN_GAIN: f64 = 1e-12;

/// Random forest: each tree sees a bootstrap sample (when enabled) and draws
/// its split candidates from a per-tree seeded stream, so trees can be
/// built in parallel with results identical to a sequential build.
pub fn train_rf(
    x: &FeatureMatrix,
    y: &[u8],
    w: Option<&[f64]>,
    cfg: &TrainConfig,
) -> Result<TreeEnsemble, ModelError> {
    cfg.validate()?;
    let w = prepare_weights(x, y, w)?;
    let n = x.n_rows();
    let d = x.n_cols();
    let k = match cfg.max_features {
        MaxFeatures::Sqrt => ((d as f64).sqrt().ceil() as usize).clamp(1, d.max(1)),
        MaxFeatures::All => d,
    };

    let trees: Vec<Tree> = (0..cfg.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64);
            let mut multiplicity = vec![0u32; n];
            if cfg.bootstrap {
                for _ in 0..n {
                    multiplicity[rng.random_range(0..n)] += 1;
                }
            } else {
                multiplicity.iter_mut().for_each(|m| *m = 1);
            }
            let mut builder = GiniBuilder {
                x,
                y,
                w: &w,
                multiplicity: &multiplicity,
                max_depth: cfg.max_depth,
                max_features: k,
                rng,
                tree: Tree::empty(),
            };
            let rows: Vec<usize> = (0..n).filter(|&i| multiplicity[i] > 0).collect();
            builder.build(rows)
        })
        .collect();

    let scale = 1.0 / trees.len() as f64;
    Ok(TreeEnsemble::new(trees, 0.0, Combine::ProbabilityAverage, scale))
}

/// A single weighted Gini tree on all rows and all features.
pub fn fit_decision_tree(
    x: &FeatureMatrix,
    y: &[u8],
    w: Option<&[f64]>,
    max_depth: usize,
) -> Result<Tree, ModelError> {
    let w = prepare_weights(x, y, w)?;
    let multiplicity = vec![1u32; x.n_rows()];
    let mut builder = GiniBuilder {
        x,
        y,
        w: &w,
        multiplicity: &multiplicity,
        max_depth,
        max_features: x.n_cols(),
        rng: ChaCha8Rng::seed_from_u64(0),
        tree: Tree::empty(),
    };
    Ok(builder.build((0..x.n_rows()).collect()))
}

struct GiniBuilder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [u8],
    w: &'a [f64],
    multiplicity: &'a [u32],
    max_depth: usize,
    max_features: usize,
    rng: ChaCha8Rng,
    tree: Tree,
}

struct NodeStats {
    weight: f64,
    positive: f64,
    cover: f64,
}

fn gini_mass(weight: f64, positive: f64) -> f64 {
    if weight <= 0.0 {
        return 0.0;
    }
    let p = positive / weight;
    weight * 2.0 * p * (1.0 - p)
}

impl GiniBuilder<'_> {
    fn build(&mut self, rows: Vec<usize>) -> Tree {
        self.node(rows, 0);
        std::mem::replace(&mut self.tree, Tree::empty())
    }

    fn stats(&self, rows: &[usize]) -> NodeStats {
        let mut s = NodeStats {
            weight: 0.0,
            positive: 0.0,
            cover: 0.0,
        };
        for &i in rows {
            let m = f64::from(self.multiplicity[i]);
            let wi = self.w[i] * m;
            s.weight += wi;
            s.positive += wi * f64::from(self.y[i]);
            s.cover += m;
        }
        s
    }

    fn node(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let stats = self.stats(&rows);
        let value = if stats.weight > 0.0 {
            stats.positive / stats.weight
        } else {
            0.0
        };
        let id = self.tree.push_leaf(value, stats.cover);
        let pure = stats.positive <= 0.0 || stats.positive >= stats.weight;
        if depth >= self.max_depth || pure || rows.len() < 2 {
            return id;
        }

        let d = self.x.n_cols();
        let mut features: Vec<usize> = if self.max_features >= d {
            (0..d).collect()
        } else {
            index::sample(&mut self.rng, d, self.max_features).into_vec()
        };
        features.sort_unstable();

        let parent = gini_mass(stats.weight, stats.positive);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = rows.clone();
        for &f in &features {
            sorted.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)).then(a.cmp(&b)));
            let (mut wl, mut pl) = (0.0, 0.0);
            for pair in 0..sorted.len() - 1 {
                let i = sorted[pair];
                let wi = self.w[i] * f64::from(self.multiplicity[i]);
                wl += wi;
                pl += wi * f64::from(self.y[i]);
                let (v, next) = (self.x.get(i, f), self.x.get(sorted[pair + 1], f));
                if next <= v {
                    continue;
                }
                let gain = parent - gini_mass(wl, pl) - gini_mass(stats.weight - wl, stats.positive - pl);
                if best.map_or(true, |(g, _, _)| beats(gain, g)) {
                    let mut thr = v + 0.5 * (next - v);
                    if thr <= v {
                        thr = next;
                    }
                    best = Some((gain, f, thr));
                }
            }
        }

        match best {
            Some((gain, f, thr)) if gain > MIN_GAIN => {
                let (left, right): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&i| self.x.get(i, f) < thr);
                let l = self.node(left, depth + 1);
                let r = self.node(right, depth + 1);
                self.tree.set_split(id, f, thr, l, r, gain);
                id
            }
            _ => id,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{predict, sigmoid, train, Family};

    fn synthetic(n: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let r: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
            let logit = 4.0 * (r[0] - 0.5) + 2.0 * (r[3] - 0.5);
            y.push(u8::from(rng.random::<f64>() < sigmoid(logit)));
            rows.push(r);
        }
        (FeatureMatrix::from_rows(&rows, None), y)
    }

    #[test]
    fn degenerate_forest_is_one_tree() {
        let (x, y) = synthetic(200, 1);
        let w: Vec<f64> = (0..200).map(|i| 0.5 + (i % 3) as f64).collect();
        let mut cfg = TrainConfig::rf();
        cfg.n_estimators = 1;
        cfg.bootstrap = false;
        cfg.max_features = MaxFeatures::All;
        cfg.max_depth = 3;
        let forest = train_rf(&x, &y, Some(&w), &cfg).unwrap();
        let tree = fit_decision_tree(&x, &y, Some(&w), 3).unwrap();
        assert_eq!(forest.trees[0], tree);
        for r in x.rows() {
            assert_eq!(forest.predict_proba(r), tree.predict(r));
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = synthetic(150, 2);
        let mut cfg = TrainConfig::rf();
        cfg.n_estimators = 20;
        let a = train(&x, &y, None, &cfg).unwrap();
        let b = train(&x, &y, None, &cfg).unwrap();
        assert_eq!(predict(&a, &x).unwrap(), predict(&b, &x).unwrap());
        assert_eq!(a.content_hash(), b.content_hash());
        let c = train(&x, &y, None, &cfg.clone().with_seed(7)).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
        assert_eq!(a.family, Family::Rf);
    }

    #[test]
    fn weight_scale_leaves_forest_unchanged() {
        let (x, y) = synthetic(150, 4);
        let mut cfg = TrainConfig::rf();
        cfg.n_estimators = 10;
        let a = train(&x, &y, None, &cfg).unwrap();
        let b = train(&x, &y, Some(&vec![4.0; 150]), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn probabilities_and_depth() {
        let (x, y) = synthetic(300, 6);
        let mut cfg = TrainConfig::rf();
        cfg.n_estimators = 25;
        cfg.max_depth = 4;
        let e = train_rf(&x, &y, None, &cfg).unwrap();
        assert!(e.max_depth() <= 4);
        for r in x.rows() {
            let p = e.predict_proba(r);
            assert!((0.0..=1.0).contains(&p));
        }
        for t in &e.trees {
            assert!(t.cover.iter().all(|&c| c > 0.0));
        }
    }
}
