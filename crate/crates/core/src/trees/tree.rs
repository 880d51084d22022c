use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::{self, LabRng};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Regression tree with vector-valued leaves. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    leaf_count: usize,
    n_outputs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_leaves: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(d))`.
    pub mtry: Option<usize>,
}

pub fn default_mtry(d: usize) -> usize {
    ((d as f64).sqrt().ceil() as usize).clamp(1, d.max(1))
}

#[derive(Debug, Clone)]
struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

struct Candidate {
    node: usize,
    order: usize,
    split: Split,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Max-heap on gain; equal gains pop the older leaf first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.split
            .gain
            .total_cmp(&other.split.gain)
            .then_with(|| other.order.cmp(&self.order))
    }
}

struct Grower<'a> {
    x: &'a [f64],
    y: &'a DMatrix<f64>,
    n: usize,
    d: usize,
    k: usize,
    mtry: usize,
    rng: LabRng,
}

impl Grower<'_> {
    fn mean(&self, rows: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.k];
        for &r in rows {
            for (j, v) in m.iter_mut().enumerate() {
                *v += self.y[(r, j)];
            }
        }
        let len = rows.len() as f64;
        m.iter_mut().for_each(|v| *v /= len);
        m
    }

    fn value(&self, row: usize, feature: usize) -> f64 {
        self.x[feature * self.n + row]
    }

    /// Best split of `rows` on one feature, if the feature is not constant.
    fn best_on_feature(&self, rows: &[usize], feature: usize, total: &[f64]) -> Option<Split> {
        let mut sorted = rows.to_vec();
        sorted.sort_by(|&a, &b| self.value(a, feature).total_cmp(&self.value(b, feature)));
        let m = sorted.len();
        let parent: f64 = total.iter().map(|s| s * s).sum::<f64>() / m as f64;
        let mut left_sum = vec![0.0; self.k];
        let mut best: Option<(f64, usize)> = None;
        for i in 0..m - 1 {
            for (j, s) in left_sum.iter_mut().enumerate() {
                *s += self.y[(sorted[i], j)];
            }
            let (lo, hi) = (
                self.value(sorted[i], feature),
                self.value(sorted[i + 1], feature),
            );
            if lo == hi {
                continue;
            }
            let nl = (i + 1) as f64;
            let nr = (m - i - 1) as f64;
            let score: f64 = left_sum
                .iter()
                .zip(total)
                .map(|(l, t)| l * l / nl + (t - l) * (t - l) / nr)
                .sum();
            let gain = (score - parent).max(0.0);
            // strict: the lowest threshold wins ties within a feature
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, i));
            }
        }
        let (gain, i) = best?;
        let (lo, hi) = (
            self.value(sorted[i], feature),
            self.value(sorted[i + 1], feature),
        );
        let mut threshold = 0.5 * (lo + hi);
        if threshold >= hi {
            threshold = lo;
        }
        let (left, right) = sorted.split_at(i + 1);
        Some(Split {
            feature,
            threshold,
            gain,
            left: left.to_vec(),
            right: right.to_vec(),
        })
    }

    /// Examines `mtry` random features; keeps drawing further features only
    /// while none of the drawn ones can separate the rows.
    fn best_split(&mut self, rows: &[usize]) -> Option<Split> {
        if rows.len() < 2 {
            return None;
        }
        let mut total = vec![0.0; self.k];
        for &r in rows {
            for (j, t) in total.iter_mut().enumerate() {
                *t += self.y[(r, j)];
            }
        }
        let mut features: Vec<usize> = (0..self.d).collect();
        features.shuffle(&mut self.rng);
        let mut best: Option<Split> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some(s) = self.best_on_feature(rows, f, &total) {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        s.gain > b.gain
                            || (s.gain == b.gain
                                && (s.feature, s.threshold) < (b.feature, b.threshold))
                    }
                };
                if better {
                    best = Some(s);
                }
            }
        }
        best
    }
}

impl RegressionTree {
    /// Grows a tree best-first on `rows` of `(x, y)` (repeats allowed, as in
    /// bootstrap samples): the leaf whose best split removes the most squared
    /// error is split next, until `max_leaves` leaves exist or no leaf can
    /// be split.
    pub fn fit(
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        rows: &[usize],
        params: TreeParams,
        seed: u64,
    ) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::Dimension(format!(
                "{} feature rows, {} target rows",
                x.nrows(),
                y.nrows()
            )));
        }
        if rows.is_empty() || x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "cannot fit a tree on empty data".into(),
            ));
        }
        if params.max_leaves == 0 {
            return Err(Error::InvalidArgument("max_leaves must be >= 1".into()));
        }
        let d = x.ncols();
        let mtry = params.mtry.unwrap_or_else(|| default_mtry(d));
        if mtry == 0 || mtry > d {
            return Err(Error::InvalidArgument(format!(
                "mtry {mtry} outside 1..={d}"
            )));
        }
        let mut g = Grower {
            x: x.as_slice(),
            y,
            n: x.nrows(),
            d,
            k: y.ncols(),
            mtry,
            rng: seed::rng(seed),
        };
        let mut nodes = vec![Node::Leaf {
            value: g.mean(rows),
        }];
        let mut leaf_count = 1;
        let mut heap = BinaryHeap::new();
        let mut order = 0;
        if params.max_leaves > 1 {
            if let Some(split) = g.best_split(rows) {
                heap.push(Candidate {
                    node: 0,
                    order,
                    split,
                });
                order += 1;
            }
        }
        while leaf_count < params.max_leaves {
            let Some(Candidate { node, split, .. }) = heap.pop() else {
                break;
            };
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf {
                value: g.mean(&split.left),
            });
            nodes.push(Node::Leaf {
                value: g.mean(&split.right),
            });
            nodes[node] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
            leaf_count += 1;
            if leaf_count < params.max_leaves {
                for (child, part) in [(left, &split.left), (right, &split.right)] {
                    if let Some(s) = g.best_split(part) {
                        heap.push(Candidate {
                            node: child,
                            order,
                            split: s,
                        });
                        order += 1;
                    }
                }
            }
        }
        Ok(RegressionTree {
            nodes,
            leaf_count,
            n_outputs: y.ncols(),
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// The first split, if any: `(feature, threshold)`.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }

    fn leaf_for(&self, x: &DMatrix<f64>, row: usize) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[(row, *feature)] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Adds `scale * prediction` into `out` (`n x K`).
    pub fn accumulate(&self, x: &DMatrix<f64>, scale: f64, out: &mut DMatrix<f64>) {
        for i in 0..x.nrows() {
            let leaf = self.leaf_for(x, i);
            for (j, v) in leaf.iter().enumerate() {
                out[(i, j)] += scale * v;
            }
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), self.n_outputs);
        self.accumulate(x, 1.0, &mut out);
        out
    }
}

/// Fits on all rows of `(x, y)`.
pub fn fit_tree(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    max_leaves: usize,
    mtry: Option<usize>,
    seed: u64,
) -> Result<RegressionTree> {
    let rows: Vec<usize> = (0..x.nrows()).collect();
    RegressionTree::fit(x, y, &rows, TreeParams { max_leaves, mtry }, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sq_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm_squared() / a.nrows() as f64
    }

    #[test]
    fn single_leaf_predicts_mean() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let y = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 3.0, 1.0, 5.0, 0.0, 7.0, 1.0]);
        let t = fit_tree(&x, &y, 1, None, 0).unwrap();
        assert_eq!(t.leaf_count(), 1);
        let p = t.predict(&x);
        for i in 0..4 {
            assert_eq!(p[(i, 0)], 4.0);
            assert_eq!(p[(i, 1)], 0.5);
        }
    }

    #[test]
    fn interpolates_distinct_one_dimensional_points() {
        let mut rng = seed::rng(1);
        let x = DMatrix::from_fn(30, 1, |_, _| rng.random::<f64>());
        let y = DMatrix::from_fn(30, 1, |_, _| rng.random::<f64>());
        let t = fit_tree(&x, &y, 30, Some(1), 2).unwrap();
        assert_eq!(t.leaf_count(), 30);
        assert_eq!(sq_err(&t.predict(&x), &y), 0.0);
    }

    #[test]
    fn interpolates_with_default_mtry_in_higher_dimension() {
        let mut rng = seed::rng(3);
        let x = DMatrix::from_fn(40, 9, |_, _| (rng.random::<f64>() * 4.0).floor());
        let y = DMatrix::from_fn(40, 2, |_, _| rng.random::<f64>());
        let t = fit_tree(&x, &y, 40, None, 4).unwrap();
        // duplicate rows can exist in this coarse grid; check per distinct row
        let p = t.predict(&x);
        for i in 0..40 {
            let dup: Vec<usize> = (0..40).filter(|&j| x.row(j) == x.row(i)).collect();
            if dup.len() == 1 {
                assert!((p.row(i) - y.row(i)).amax() == 0.0);
            }
        }
    }

    /// Exhaustive oracle: every feature, every midpoint between consecutive
    /// distinct values, total SSE after the split.
    fn brute_force_first_split(x: &DMatrix<f64>, y: &DMatrix<f64>) -> (usize, f64) {
        let sse = |rows: &[usize]| -> f64 {
            let mut s = 0.0;
            for j in 0..y.ncols() {
                let m = rows.iter().map(|&r| y[(r, j)]).sum::<f64>() / rows.len() as f64;
                s += rows.iter().map(|&r| (y[(r, j)] - m).powi(2)).sum::<f64>();
            }
            s
        };
        let mut best = (f64::INFINITY, 0, 0.0);
        for f in 0..x.ncols() {
            let mut vals: Vec<f64> = x.column(f).iter().copied().collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = 0.5 * (w[0] + w[1]);
                let (l, r): (Vec<usize>, Vec<usize>) =
                    (0..x.nrows()).partition(|&i| x[(i, f)] <= thr);
                let total = sse(&l) + sse(&r);
                if total < best.0 - 1e-12 {
                    best = (total, f, thr);
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn first_split_matches_exhaustive_search() {
        let x = DMatrix::from_row_slice(
            6,
            2,
            &[0.1, 5.0, 0.4, 3.0, 0.35, 1.0, 0.8, 4.0, 0.9, 2.0, 0.2, 0.5],
        );
        let y = DMatrix::from_column_slice(6, 1, &[1.0, 0.0, 2.5, 0.3, 2.0, 1.2]);
        let oracle = brute_force_first_split(&x, &y);
        for seed in 0..5 {
            let t = fit_tree(&x, &y, 2, Some(2), seed).unwrap();
            let (f, thr) = t.root_split().unwrap();
            assert_eq!(f, oracle.0);
            assert!((thr - oracle.1).abs() < 1e-15);
        }
    }

    #[test]
    fn respects_leaf_budget_and_rejects_bad_params() {
        let mut rng = seed::rng(9);
        let x = DMatrix::from_fn(50, 3, |_, _| rng.random::<f64>());
        let y = DMatrix::from_fn(50, 1, |_, _| rng.random::<f64>());
        for max_leaves in [2, 7, 13] {
            assert_eq!(
                fit_tree(&x, &y, max_leaves, None, 0).unwrap().leaf_count(),
                max_leaves
            );
        }
        assert!(fit_tree(&x, &y, 0, None, 0).is_err());
        assert!(fit_tree(&x, &y, 3, Some(4), 0).is_err());
        let empty: Vec<usize> = vec![];
        assert!(RegressionTree::fit(
            &x,
            &y,
            &empty,
            TreeParams {
                max_leaves: 2,
                mtry: None
            },
            0
        )
        .is_err());
    }

    #[test]
    fn identical_rows_stop_growth() {
        let x = DMatrix::from_element(5, 2, 1.0);
        let y = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let t = fit_tree(&x, &y, 5, None, 0).unwrap();
        assert_eq!(t.leaf_count(), 1);
    }

    #[test]
    fn deterministic_per_seed() {
        let mut rng = seed::rng(5);
        let x = DMatrix::from_fn(60, 6, |_, _| rng.random::<f64>());
        let y = DMatrix::from_fn(60, 2, |_, _| rng.random::<f64>());
        let a = fit_tree(&x, &y, 20, None, 77).unwrap();
        let b = fit_tree(&x, &y, 20, None, 77).unwrap();
        assert_eq!(a, b);
    }
}
