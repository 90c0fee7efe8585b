//! CART trees grown to pure leaves.

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;

/// Relative gain margin below which two candidate splits count as tied.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// Mean target vector in original units.
    Leaf { value: Vec<f64> },
    /// Per-class sample counts.
    ClassLeaf { counts: Vec<u32> },
}

/// Nodes in pre-order; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> &Node {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                leaf => return leaf,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                _ => 0,
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| !matches!(n, Node::Split { .. })).count()
    }
}

/// Split criterion over the rows of a node. `impurity` is the node's total
/// (size-weighted) impurity, so a split's gain is
/// `impurity(parent) - impurity(left) - impurity(right)`.
pub(crate) trait Criterion: Sync {
    type Stats: Clone;
    fn empty(&self) -> Self::Stats;
    fn add(&self, stats: &mut Self::Stats, row: usize);
    fn minus(&self, whole: &Self::Stats, part: &Self::Stats) -> Self::Stats;
    fn impurity(&self, stats: &Self::Stats) -> f64;
    fn is_pure(&self, rows: &[usize]) -> bool;
    fn leaf(&self, rows: &[usize]) -> Node;
}

/// Summed SSE over standardized outputs.
pub(crate) struct VarianceReduction<'a> {
    pub raw: &'a [[f64; 2]],
    pub standardized: Vec<[f64; 2]>,
}

#[derive(Clone)]
pub(crate) struct MomentStats {
    n: f64,
    sum: [f64; 2],
    sum_sq: [f64; 2],
}

impl Criterion for VarianceReduction<'_> {
    type Stats = MomentStats;

    fn empty(&self) -> MomentStats {
        MomentStats { n: 0.0, sum: [0.0; 2], sum_sq: [0.0; 2] }
    }

    fn add(&self, s: &mut MomentStats, row: usize) {
        s.n += 1.0;
        for k in 0..2 {
            let v = self.standardized[row][k];
            s.sum[k] += v;
            s.sum_sq[k] += v * v;
        }
    }

    fn minus(&self, whole: &MomentStats, part: &MomentStats) -> MomentStats {
        MomentStats {
            n: whole.n - part.n,
            sum: [whole.sum[0] - part.sum[0], whole.sum[1] - part.sum[1]],
            sum_sq: [whole.sum_sq[0] - part.sum_sq[0], whole.sum_sq[1] - part.sum_sq[1]],
        }
    }

    fn impurity(&self, s: &MomentStats) -> f64 {
        if s.n == 0.0 {
            return 0.0;
        }
        (0..2).map(|k| s.sum_sq[k] - s.sum[k] * s.sum[k] / s.n).sum()
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.raw[rows[0]];
        rows.iter().all(|&r| self.raw[r] == first)
    }

    fn leaf(&self, rows: &[usize]) -> Node {
        // Incremental mean: exact when all rows are identical.
        let mut mean = [0.0f64; 2];
        for (i, &r) in rows.iter().enumerate() {
            for (m, v) in mean.iter_mut().zip(self.raw[r]) {
                *m += (v - *m) / (i + 1) as f64;
            }
        }
        Node::Leaf { value: mean.to_vec() }
    }
}

/// Size-weighted Gini impurity, `n - Σ c²/n`.
pub(crate) struct GiniReduction<'a> {
    pub labels: &'a [usize],
    pub n_classes: usize,
}

impl Criterion for GiniReduction<'_> {
    type Stats = Vec<u32>;

    fn empty(&self) -> Vec<u32> {
        vec![0; self.n_classes]
    }

    fn add(&self, s: &mut Vec<u32>, row: usize) {
        s[self.labels[row]] += 1;
    }

    fn minus(&self, whole: &Vec<u32>, part: &Vec<u32>) -> Vec<u32> {
        whole.iter().zip(part).map(|(a, b)| a - b).collect()
    }

    fn impurity(&self, s: &Vec<u32>) -> f64 {
        let n: f64 = s.iter().map(|&c| f64::from(c)).sum();
        if n == 0.0 {
            return 0.0;
        }
        n - s.iter().map(|&c| f64::from(c) * f64::from(c)).sum::<f64>() / n
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.labels[rows[0]];
        rows.iter().all(|&r| self.labels[r] == first)
    }

    fn leaf(&self, rows: &[usize]) -> Node {
        let mut counts = vec![0u32; self.n_classes];
        for &r in rows {
            counts[self.labels[r]] += 1;
        }
        Node::ClassLeaf { counts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Midpoint of two consecutive distinct values that still separates them.
#[inline]
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi { lo } else { m }
}

pub(crate) struct Builder<'a, C: Criterion> {
    pub x: &'a [Vec<f64>],
    pub criterion: &'a C,
    /// Features examined per node; `None` means all.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
}

impl<C: Criterion> Builder<'_, C> {
    pub fn grow(&self, rows: Vec<usize>, rng: &mut SplitMix64) -> Tree {
        let mut nodes = Vec::new();
        self.grow_node(rows, rng, &mut nodes);
        Tree { nodes }
    }

    fn grow_node(&self, mut rows: Vec<usize>, rng: &mut SplitMix64, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        if rows.len() < 2 * self.min_leaf.max(1) || self.criterion.is_pure(&rows) {
            nodes.push(self.criterion.leaf(&rows));
            return id;
        }
        let features = self.candidate_features(rng);
        let Some(split) = self.best_split(&mut rows, &features) else {
            nodes.push(self.criterion.leaf(&rows));
            return id;
        };
        nodes.push(Node::Split { feature: split.feature, threshold: split.threshold, left: 0, right: 0 });
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x[r][split.feature] <= split.threshold);
        drop(rows);
        let left = self.grow_node(left_rows, rng, nodes);
        let right = self.grow_node(right_rows, rng, nodes);
        if let Node::Split { left: l, right: r, .. } = &mut nodes[id] {
            *l = left;
            *r = right;
        }
        id
    }

    fn candidate_features(&self, rng: &mut SplitMix64) -> Vec<usize> {
        let dim = self.x[0].len();
        match self.mtry {
            Some(k) if k < dim => {
                let mut f = rng.sample_indices(dim, k);
                f.sort_unstable();
                f
            }
            _ => (0..dim).collect(),
        }
    }

    /// Best split over `features` (ascending). Ties within
    /// [`GAIN_TIE_TOLERANCE`] keep the earlier candidate, i.e. the lowest
    /// feature index and then the lowest threshold. Reorders `rows`.
    pub fn best_split(&self, rows: &mut [usize], features: &[usize]) -> Option<SplitChoice> {
        let crit = self.criterion;
        let mut parent = crit.empty();
        for &r in rows.iter() {
            crit.add(&mut parent, r);
        }
        let parent_impurity = crit.impurity(&parent);
        let tol = GAIN_TIE_TOLERANCE * parent_impurity.abs().max(f64::MIN_POSITIVE);
        let n = rows.len();
        let min_leaf = self.min_leaf.max(1);

        let mut best: Option<SplitChoice> = None;
        for &f in features {
            rows.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = crit.empty();
            for i in 0..n - 1 {
                crit.add(&mut left, rows[i]);
                let (lo, hi) = (self.x[rows[i]][f], self.x[rows[i + 1]][f]);
                if lo == hi || i + 1 < min_leaf || n - i - 1 < min_leaf {
                    continue;
                }
                let right = crit.minus(&parent, &left);
                let gain = parent_impurity - crit.impurity(&left) - crit.impurity(&right);
                if best.is_none_or(|b| gain > b.gain + tol) {
                    best = Some(SplitChoice { feature: f, threshold: midpoint(lo, hi), gain });
                }
            }
        }
        best
    }
}
