//! Greedy top-down tree growth shared by both tree kinds.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{Node, SplitMode, Tree};
use crate::rng::Rng;

/// Additive sufficient statistics plus an impurity defined on them.
///
/// `cost` returns `count * impurity`, so the weighted impurity decrease of a
/// split is `(cost(parent) - cost(left) - cost(right)) / count`.
pub(crate) trait Criterion: Sync {
    type Leaf: Send;

    /// Length of the statistics vector.
    fn width(&self) -> usize;
    fn scratch_len(&self) -> usize;
    fn add(&self, stats: &mut [f64], sample: usize);
    fn cost(&self, stats: &[f64], count: usize, scratch: &mut [f64]) -> f64;
    /// Round-off scale of `cost` for these statistics. Costs at or below it
    /// count as pure and gains must exceed it.
    fn tolerance(&self, stats: &[f64], count: usize) -> f64;
    fn leaf(&self, stats: &[f64], count: usize) -> Self::Leaf;
}

/// Column-major copy of a feature matrix for cache-friendly column scans.
pub(crate) struct ColumnMajor {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl ColumnMajor {
    pub(crate) fn from_view(x: ArrayView2<'_, f64>) -> Self {
        let (n_rows, n_cols) = x.dim();
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for col in x.columns() {
            data.extend(col.iter().copied());
        }
        ColumnMajor {
            data,
            n_rows,
            n_cols,
        }
    }

    #[inline]
    fn column(&self, f: usize) -> &[f64] {
        &self.data[f * self.n_rows..(f + 1) * self.n_rows]
    }

    pub(crate) fn n_cols(&self) -> usize {
        self.n_cols
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub max_features: usize,
    pub split_mode: SplitMode,
    /// Shuffle candidate features at every node. Off only when every
    /// feature is scanned anyway.
    pub shuffle_features: bool,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// Higher gain wins; exact ties go to the lower feature index, then the
    /// lower threshold.
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.gain > o.gain
                    || (self.gain == o.gain
                        && (self.feature, self.threshold) < (o.feature, o.threshold))
            }
        }
    }
}

struct Builder<'a, C: Criterion> {
    x: &'a ColumnMajor,
    criterion: &'a C,
    params: GrowParams,
    nodes: Vec<Node<C::Leaf>>,
    features: Vec<usize>,
    pairs: Vec<(f64, usize)>,
    left: Vec<f64>,
    right: Vec<f64>,
    scratch: Vec<f64>,
}

/// Grows one tree on `samples` (row indices into `x`, repeats allowed).
pub(crate) fn grow<C: Criterion>(
    x: &ColumnMajor,
    criterion: &C,
    mut samples: Vec<usize>,
    params: GrowParams,
    rng: &mut Rng,
) -> Tree<C::Leaf> {
    debug_assert!(!samples.is_empty());
    let width = criterion.width();
    let mut builder = Builder {
        x,
        criterion,
        params,
        nodes: Vec::new(),
        features: (0..x.n_cols()).collect(),
        pairs: Vec::with_capacity(samples.len()),
        left: vec![0.0; width],
        right: vec![0.0; width],
        scratch: vec![0.0; criterion.scratch_len()],
    };
    builder.grow_node(&mut samples, 0, rng);
    Tree::from_nodes(x.n_cols(), builder.nodes)
}

impl<C: Criterion> Builder<'_, C> {
    fn grow_node(&mut self, samples: &mut [usize], depth: usize, rng: &mut Rng) -> usize {
        let count = samples.len();
        let mut stats = vec![0.0; self.criterion.width()];
        for &s in samples.iter() {
            self.criterion.add(&mut stats, s);
        }
        let cost = self.criterion.cost(&stats, count, &mut self.scratch);
        let tol = self.criterion.tolerance(&stats, count);

        let splittable =
            depth < self.params.max_depth && count >= 2 * self.params.min_leaf && cost > tol;
        let split = if splittable {
            self.best_split(samples, &stats, cost, tol, rng)
        } else {
            None
        };

        let Some(best) = split else {
            let value = self.criterion.leaf(&stats, count);
            self.nodes.push(Node::Leaf {
                value,
                samples: count,
            });
            return self.nodes.len() - 1;
        };

        let column = self.x.column(best.feature);
        let mut boundary = 0;
        for i in 0..count {
            if column[samples[i]] <= best.threshold {
                samples.swap(i, boundary);
                boundary += 1;
            }
        }
        let index = self.nodes.len();
        self.nodes.push(Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: 0,
            right: 0,
        });
        let (lo, hi) = samples.split_at_mut(boundary);
        let left = self.grow_node(lo, depth + 1, rng);
        let right = self.grow_node(hi, depth + 1, rng);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[index]
        {
            *l = left;
            *r = right;
        }
        index
    }

    fn best_split(
        &mut self,
        samples: &[usize],
        parent: &[f64],
        parent_cost: f64,
        tol: f64,
        rng: &mut Rng,
    ) -> Option<Candidate> {
        if self.params.shuffle_features {
            self.features.shuffle(rng);
        }
        let mut best: Option<Candidate> = None;
        let mut visited = 0;
        for k in 0..self.features.len() {
            if visited >= self.params.max_features {
                break;
            }
            let feature = self.features[k];
            // constant features do not use up the quota
            let usable = match self.params.split_mode {
                SplitMode::Exhaustive => {
                    self.scan_exhaustive(samples, feature, parent, parent_cost, &mut best)
                }
                SplitMode::RandomThreshold => {
                    self.scan_random(samples, feature, parent, parent_cost, &mut best, rng)
                }
            };
            if usable {
                visited += 1;
            }
        }
        let count = samples.len() as f64;
        best.filter(|b| b.gain * count > tol)
    }

    fn scan_exhaustive(
        &mut self,
        samples: &[usize],
        feature: usize,
        parent: &[f64],
        parent_cost: f64,
        best: &mut Option<Candidate>,
    ) -> bool {
        let column = self.x.column(feature);
        self.pairs.clear();
        self.pairs.extend(samples.iter().map(|&s| (column[s], s)));
        self.pairs
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = self.pairs.len();
        if self.pairs[0].0 == self.pairs[n - 1].0 {
            return false;
        }
        let min_leaf = self.params.min_leaf;
        let count = n as f64;
        self.left.fill(0.0);
        for i in 0..n - 1 {
            self.criterion.add(&mut self.left, self.pairs[i].1);
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_right < min_leaf {
                break;
            }
            let (lo, hi) = (self.pairs[i].0, self.pairs[i + 1].0);
            if n_left < min_leaf || lo == hi {
                continue;
            }
            for ((r, p), l) in self.right.iter_mut().zip(parent).zip(&self.left) {
                *r = p - l;
            }
            let cost_left = self.criterion.cost(&self.left, n_left, &mut self.scratch);
            let cost_right = self.criterion.cost(&self.right, n_right, &mut self.scratch);
            let gain = (parent_cost - cost_left - cost_right) / count;
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            let cand = Candidate {
                gain,
                feature,
                threshold,
            };
            if cand.beats(best) {
                *best = Some(cand);
            }
        }
        true
    }

    fn scan_random(
        &mut self,
        samples: &[usize],
        feature: usize,
        parent: &[f64],
        parent_cost: f64,
        best: &mut Option<Candidate>,
        rng: &mut Rng,
    ) -> bool {
        let column = self.x.column(feature);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &s in samples {
            let v = column[s];
            min = min.min(v);
            max = max.max(v);
        }
        if min == max {
            return false;
        }
        let threshold = rng.random_range(min..max);
        self.left.fill(0.0);
        let mut n_left = 0;
        for &s in samples {
            if column[s] <= threshold {
                self.criterion.add(&mut self.left, s);
                n_left += 1;
            }
        }
        let n = samples.len();
        let n_right = n - n_left;
        if n_left < self.params.min_leaf || n_right < self.params.min_leaf {
            return true;
        }
        for ((r, p), l) in self.right.iter_mut().zip(parent).zip(&self.left) {
            *r = p - l;
        }
        let cost_left = self.criterion.cost(&self.left, n_left, &mut self.scratch);
        let cost_right = self.criterion.cost(&self.right, n_right, &mut self.scratch);
        let cand = Candidate {
            gain: (parent_cost - cost_left - cost_right) / n as f64,
            feature,
            threshold,
        };
        if cand.beats(best) {
            *best = Some(cand);
        }
        true
    }
}
