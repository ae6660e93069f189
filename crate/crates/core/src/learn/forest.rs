use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_columns, check_inputs, ForestParams, LearnError};
use crate::features::FeatureMatrix;
use crate::seed;

/// Tree node. Rows with `x[column] <= threshold` go left. Leaves keep the
/// (bootstrap-weighted) class counts of their training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split { column: usize, threshold: f64, left: usize, right: usize },
    Leaf { neg: f64, pos: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub seed: u64,
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Split { column, threshold, left, right } => {
                    k = if row(column) <= threshold { left } else { right };
                }
                Node::Leaf { neg, pos } => return pos / (pos + neg),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestFit {
    pub columns: Vec<String>,
    pub params: ForestParams,
    pub mtry: usize,
    pub seed: u64,
    pub trees: Vec<Tree>,
    /// Gini decrease per column, as a fraction of each tree's root weight,
    /// averaged over trees.
    pub importance: Vec<f64>,
}

impl ForestFit {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

/// Sum of squared class counts over the total: the part of the weighted
/// Gini impurity that a split changes.
fn purity(neg: f64, pos: f64) -> f64 {
    let t = neg + pos;
    if t > 0.0 {
        (neg * neg + pos * pos) / t
    } else {
        0.0
    }
}

struct Split {
    column: usize,
    threshold: f64,
    score: f64,
}

struct Builder<'a> {
    x: &'a [f64],
    n: usize,
    y: &'a [bool],
    mtry: usize,
    min_leaf: f64,
    max_depth: usize,
    rng: ChaCha8Rng,
    cols: Vec<usize>,
    nodes: Vec<Node>,
    importance: Vec<f64>,
    buf: Vec<(f64, f64, bool)>,
}

impl Builder<'_> {
    fn value(&self, i: usize, j: usize) -> f64 {
        self.x[j * self.n + i]
    }

    fn best_split(&mut self, rows: &[(usize, f64)], neg: f64, pos: f64) -> Option<Split> {
        let p = self.cols.len();
        let mut best: Option<Split> = None;
        let mut informative = 0;
        let mut drawn = 0;
        let total = neg + pos;
        while informative < self.mtry && drawn < p {
            // partial Fisher-Yates: any starting order still yields a uniform draw
            let pick = self.rng.random_range(drawn..p);
            self.cols.swap(drawn, pick);
            let j = self.cols[drawn];
            drawn += 1;

            self.buf.clear();
            for &(i, w) in rows {
                self.buf.push((self.value(i, j), w, self.y[i]));
            }
            self.buf.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.buf[0].0 == self.buf[self.buf.len() - 1].0 {
                continue;
            }
            informative += 1;
            let (mut wl, mut pl) = (0.0, 0.0);
            for k in 0..self.buf.len() - 1 {
                let (v, w, lab) = self.buf[k];
                wl += w;
                if lab {
                    pl += w;
                }
                let next = self.buf[k + 1].0;
                if v == next || wl < self.min_leaf || total - wl < self.min_leaf {
                    continue;
                }
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                let score = purity(wl - pl, pl) + purity(total - wl - (pos - pl), pos - pl);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        score > b.score + 1e-12
                            || ((score - b.score).abs() <= 1e-12 && (j, threshold) < (b.column, b.threshold))
                    }
                };
                if better {
                    best = Some(Split { column: j, threshold, score });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<(usize, f64)>, depth: usize) -> usize {
        let (mut neg, mut pos) = (0.0, 0.0);
        for &(i, w) in &rows {
            if self.y[i] {
                pos += w;
            } else {
                neg += w;
            }
        }
        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf { neg, pos });
        if pos == 0.0 || neg == 0.0 || depth >= self.max_depth || neg + pos < 2.0 * self.min_leaf {
            return idx;
        }
        let Some(split) = self.best_split(&rows, neg, pos) else {
            return idx;
        };
        self.importance[split.column] += split.score - purity(neg, pos);
        let (left, right): (Vec<_>, Vec<_>) =
            rows.into_iter().partition(|&(i, _)| self.value(i, split.column) <= split.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[idx] = Node::Split { column: split.column, threshold: split.threshold, left: l, right: r };
        idx
    }
}

/// Bagged CART trees with Gini splits on `mtry` sampled columns per node.
/// Tree `t` draws all of its randomness from a seed derived from `(seed, t)`.
pub fn fit_forest(x: &FeatureMatrix, y: &[bool], params: &ForestParams, seed: u64) -> Result<ForestFit, LearnError> {
    check_inputs(x, y)?;
    if params.n_trees == 0 || params.min_leaf == 0 || params.max_depth == Some(0) {
        return Err(LearnError::InvalidParam("forest counts must be at least 1".into()));
    }
    let n = x.n_rows();
    let p = x.n_cols();
    let dense = x.matrix.to_dense_col_major();
    let mtry = params.mtry_for(p);
    let fitted: Vec<(Tree, Vec<f64>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = seed::derive_seed(seed, t as u64);
            let mut rng = seed::rng(tree_seed);
            let rows: Vec<(usize, f64)> = if params.bootstrap {
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i, c as f64)).collect()
            } else {
                (0..n).map(|i| (i, 1.0)).collect()
            };
            let root_weight: f64 = rows.iter().map(|r| r.1).sum();
            let mut b = Builder {
                x: &dense,
                n,
                y,
                mtry,
                min_leaf: params.min_leaf as f64,
                max_depth: params.max_depth.unwrap_or(usize::MAX),
                rng,
                cols: (0..p).collect(),
                nodes: Vec::new(),
                importance: vec![0.0; p],
                buf: Vec::with_capacity(n),
            };
            if p > 0 {
                b.grow(rows, 0);
            } else {
                let pos = rows.iter().filter(|r| y[r.0]).map(|r| r.1).sum::<f64>();
                b.nodes.push(Node::Leaf { neg: root_weight - pos, pos });
            }
            let imp = b.importance.iter().map(|v| v / root_weight).collect();
            (Tree { seed: tree_seed, nodes: b.nodes }, imp)
        })
        .collect();
    let mut importance = vec![0.0; p];
    for (_, imp) in &fitted {
        for (a, b) in importance.iter_mut().zip(imp) {
            *a += b;
        }
    }
    let k = fitted.len() as f64;
    importance.iter_mut().for_each(|v| *v /= k);
    Ok(ForestFit {
        columns: x.columns.clone(),
        params: params.clone(),
        mtry,
        seed,
        trees: fitted.into_iter().map(|(t, _)| t).collect(),
        importance,
    })
}

/// Mean over trees of the positive fraction in the leaf each row reaches.
pub fn predict_proba_forest(fit: &ForestFit, x: &FeatureMatrix) -> Result<Vec<f64>, LearnError> {
    check_columns(&fit.columns, x)?;
    Ok((0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let total: f64 = fit.trees.iter().map(|t| t.predict_row(|j| x.matrix.get(i, j))).sum();
            total / fit.trees.len() as f64
        })
        .collect())
}

/// The `k` columns with the largest nonzero importance, ties ordered by name.
pub fn forest_importance(fit: &ForestFit, k: usize) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> =
        fit.columns.iter().cloned().zip(fit.importance.iter().copied()).filter(|(_, v)| *v > 0.0).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out.truncate(k);
    out
}
