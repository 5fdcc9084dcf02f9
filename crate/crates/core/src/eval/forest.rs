//! Bagged CART trees with Gini splits and per-split feature subsampling.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::par;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// 0 means unlimited.
    pub max_depth: usize,
    /// Features tried per split; `None` is `⌈√d⌉`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 12,
            max_features: None,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<Tree>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    // lowest class index wins ties
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    mtry: usize,
    params: &'a ForestParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: 0 });
        let mut counts = vec![0; self.n_classes];
        for &r in rows.iter() {
            counts[self.y[r]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth > 0 && depth >= self.params.max_depth;
        if pure || depth_capped || rows.len() < self.params.min_samples_split {
            self.nodes[id] = Node::Leaf {
                class: majority(&counts),
            };
            return id;
        }
        match self.best_split(rows, &counts, rng) {
            None => {
                self.nodes[id] = Node::Leaf {
                    class: majority(&counts),
                };
                id
            }
            Some((feature, threshold)) => {
                let mid = partition(rows, |r| self.x.get(r, feature) <= threshold);
                let (l, r) = rows.split_at_mut(mid);
                let left = self.build(l, depth + 1, rng);
                let right = self.build(r, depth + 1, rng);
                self.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                id
            }
        }
    }

    /// Best (feature, threshold) over a random feature subset. Splits with
    /// zero gain are accepted so that XOR-like patterns can still be carved.
    fn best_split(
        &self,
        rows: &[usize],
        parent: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Option<(usize, f64)> {
        let n = rows.len();
        let parent_gini = gini(parent, n);
        let candidates = index::sample(rng, self.x.cols(), self.mtry);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut left = vec![0; self.n_classes];
        let mut right = vec![0; self.n_classes];
        for f in candidates.iter() {
            order.clear();
            order.extend(rows.iter().map(|&r| (self.x.get(r, f), self.y[r])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            left.iter_mut().for_each(|c| *c = 0);
            right.copy_from_slice(parent);
            for i in 0..n - 1 {
                let (v, c) = order[i];
                left[c] += 1;
                right[c] -= 1;
                let next = order[i + 1].0;
                if next <= v {
                    continue;
                }
                let nl = i + 1;
                let nr = n - nl;
                let child = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                let gain = parent_gini - child;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some((gain, f, threshold));
                }
            }
        }
        best.filter(|(g, _, _)| *g > -1e-12).map(|(_, f, t)| (f, t))
    }
}

/// In-place partition; returns the count of rows satisfying `pred`.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut k = 0;
    for i in 0..rows.len() {
        if pred(rows[i]) {
            rows.swap(i, k);
            k += 1;
        }
    }
    k
}

pub fn train_random_forest(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
    seed: u64,
) -> Result<RandomForest> {
    train_random_forest_with(x, y, n_classes, params, seed, par::parallel_available())
}

/// Tree `i` draws from the ChaCha stream `i` of `seed`, so the forest is the
/// same whether trees are grown in parallel or not.
pub fn train_random_forest_with(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
    seed: u64,
    parallel: bool,
) -> Result<RandomForest> {
    let n = x.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if y.len() != n {
        return Err(Error::LengthMismatch { left: y.len(), right: n });
    }
    if n_classes < 2 {
        return Err(Error::InvalidArgument("random forest needs at least two classes".into()));
    }
    if y.iter().any(|&t| t >= n_classes) {
        return Err(Error::InvalidArgument("label out of range".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
    }
    let d = x.cols();
    if d == 0 {
        return Err(Error::InvalidArgument("no features".into()));
    }
    let mtry = params
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let trees = par::map_range(params.n_trees, parallel, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut rows: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut b = Builder {
            x,
            y,
            n_classes,
            mtry,
            params,
            nodes: Vec::new(),
        };
        b.build(&mut rows, 0, &mut rng);
        Tree { nodes: b.nodes }
    });
    Ok(RandomForest {
        n_features: d,
        n_classes,
        trees,
    })
}

impl RandomForest {
    /// Vote fractions over the trees.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        if x.cols() != self.n_features {
            return Err(Error::LengthMismatch {
                left: x.cols(),
                right: self.n_features,
            });
        }
        let t = self.trees.len() as f64;
        Ok(par::map_range(x.rows(), par::parallel_available(), |r| {
            let mut votes = vec![0usize; self.n_classes];
            for tree in &self.trees {
                votes[tree.predict(x.row(r))] += 1;
            }
            votes.into_iter().map(|v| v as f64 / t).collect()
        }))
    }
}
