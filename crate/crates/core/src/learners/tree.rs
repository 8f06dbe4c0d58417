//! Greedy entropy (log-loss) decision trees and bootstrap ensembles.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        score: f64,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { score } => return score,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Binary entropy in nats.
fn entropy(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.ln();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).ln();
    }
    h
}

/// Minimum total log-loss reduction (nats summed over rows) for a split.
const MIN_GAIN: f64 = 1e-10;

pub(crate) struct TreeBuilder<'a> {
    ds: &'a Dataset,
    max_depth: usize,
    /// Features drawn per split; `None` means all.
    features_per_split: Option<usize>,
    rng: Option<ChaCha8Rng>,
    nodes: Vec<TreeNode>,
}

impl<'a> TreeBuilder<'a> {
    pub(crate) fn new(ds: &'a Dataset, max_depth: usize) -> Self {
        TreeBuilder {
            ds,
            max_depth,
            features_per_split: None,
            rng: None,
            nodes: Vec::new(),
        }
    }

    pub(crate) fn with_feature_sampling(mut self, per_split: usize, rng: ChaCha8Rng) -> Self {
        self.features_per_split = Some(per_split);
        self.rng = Some(rng);
        self
    }

    /// `rows` may repeat indices (bootstrap samples).
    pub(crate) fn fit(mut self, rows: &[usize]) -> DecisionTree {
        let mut rows = rows.to_vec();
        self.grow(&mut rows, 0);
        DecisionTree { nodes: self.nodes }
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let total = rows.len() as f64;
        let pos = rows.iter().filter(|&&i| self.ds.labels()[i] == 1).count() as f64;
        self.nodes.push(TreeNode::Leaf { score: pos / total });
        if depth >= self.max_depth || pos == 0.0 || pos == total || rows.len() < 2 {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, pos) else {
            return id;
        };

        // Stable partition keeps the row order deterministic.
        let (mut left, mut right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.ds.row(i).features()[feature] <= threshold);
        let l = self.grow(&mut left, depth + 1);
        let r = self.grow(&mut right, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left: l,
            right: r,
        };
        id
    }

    /// Highest-gain split; ties go to the lowest feature index, then the
    /// lowest threshold.
    fn best_split(&mut self, rows: &[usize], pos: f64) -> Option<(usize, f64)> {
        let d = self.ds.n_features();
        let candidates: Vec<usize> = match (self.features_per_split, self.rng.as_mut()) {
            (Some(k), Some(rng)) if k < d => {
                let mut f = sample(rng, d, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let total = rows.len() as f64;
        let parent_loss = total * entropy(pos, total);

        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
        for f in candidates {
            pairs.clear();
            pairs.extend(
                rows.iter()
                    .map(|&i| (self.ds.row(i).features()[f], self.ds.labels()[i])),
            );
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_n = 0.0;
            let mut left_pos = 0.0;
            for k in 0..pairs.len() - 1 {
                left_n += 1.0;
                left_pos += pairs[k].1 as f64;
                let (a, b) = (pairs[k].0, pairs[k + 1].0);
                if a == b {
                    continue;
                }
                let right_n = total - left_n;
                let right_pos = pos - left_pos;
                let child_loss =
                    left_n * entropy(left_pos, left_n) + right_n * entropy(right_pos, right_n);
                let gain = parent_loss - child_loss;
                if gain > MIN_GAIN && best.is_none_or(|(g, _, _)| gain > g) {
                    let mut threshold = a + (b - a) / 2.0;
                    if !(threshold < b) {
                        threshold = a;
                    }
                    best = Some((gain, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

pub(crate) fn fit_bagged(
    ds: &Dataset,
    rows: &[usize],
    trees: usize,
    max_depth: usize,
    feature_fraction: f64,
    seed: u64,
) -> Vec<DecisionTree> {
    let d = ds.n_features();
    let per_split = ((feature_fraction * d as f64).round() as usize).clamp(1, d);
    (0..trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let boot: Vec<usize> = (0..rows.len())
                .map(|_| rows[rng.gen_range(0..rows.len())])
                .collect();
            TreeBuilder::new(ds, max_depth)
                .with_feature_sampling(per_split, rng)
                .fit(&boot)
        })
        .collect()
}
