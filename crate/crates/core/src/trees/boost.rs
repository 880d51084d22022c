use nalgebra::{DMatrix, RowDVector};
use rayon::prelude::*;

use super::forest::tree_seed;
use super::tree::{RegressionTree, TreeParams};
use crate::error::{Error, Result};
use crate::seed;

/// One boosting sequence: `f_T = mean + shrinkage * sum_t tree_t`.
#[derive(Debug, Clone)]
pub struct BoostedSequence {
    pub init: Vec<f64>,
    pub trees: Vec<RegressionTree>,
    /// Training squared risk (mean over rows, summed over outputs) of
    /// `f_0, f_1, ..., f_T`.
    pub train_history: Vec<f64>,
}

/// Average of independently seeded boosting sequences.
#[derive(Debug, Clone)]
pub struct BoostedForest {
    pub forests: Vec<BoostedSequence>,
    pub shrinkage: f64,
    pub trees_per_forest: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostParams {
    pub n_tree: usize,
    pub shrinkage: f64,
    pub max_leaves: usize,
    pub mtry: Option<usize>,
    pub n_forest: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_tree: 10,
            shrinkage: 0.85,
            max_leaves: 10,
            mtry: None,
            n_forest: 1,
        }
    }
}

fn risk(residual: &DMatrix<f64>) -> f64 {
    residual.norm_squared() / residual.nrows() as f64
}

fn fit_sequence(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    params: &BoostParams,
    seed: u64,
) -> Result<BoostedSequence> {
    let n = x.nrows();
    let rows: Vec<usize> = (0..n).collect();
    let init: Vec<f64> = y.column_iter().map(|c| c.mean()).collect();
    let mut residual = y - DMatrix::from_rows(&vec![RowDVector::from_row_slice(&init); n]);
    let mut trees = Vec::with_capacity(params.n_tree);
    let mut train_history = vec![risk(&residual)];
    let tree_params = TreeParams {
        max_leaves: params.max_leaves,
        mtry: params.mtry,
    };
    for t in 0..params.n_tree {
        let tree = RegressionTree::fit(x, &residual, &rows, tree_params, tree_seed(seed, t))?;
        tree.accumulate(x, -params.shrinkage, &mut residual);
        train_history.push(risk(&residual));
        trees.push(tree);
    }
    Ok(BoostedSequence {
        init,
        trees,
        train_history,
    })
}

/// L2-boosting: each round fits a tree to the current residuals and adds
/// `shrinkage` times it; `n_forest` independently seeded runs are averaged.
pub fn fit_l2_boost(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    params: BoostParams,
    seed: u64,
) -> Result<BoostedForest> {
    if !(params.shrinkage > 0.0 && params.shrinkage <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "shrinkage {} outside (0, 1]",
            params.shrinkage
        )));
    }
    if params.n_tree == 0 || params.n_forest == 0 {
        return Err(Error::InvalidArgument(
            "n_tree and n_forest must be >= 1".into(),
        ));
    }
    if x.nrows() != y.nrows() || x.nrows() == 0 {
        return Err(Error::Dimension(
            "features and targets must share a nonzero row count".into(),
        ));
    }
    let forests = (0..params.n_forest)
        .into_par_iter()
        .map(|f| {
            fit_sequence(
                x,
                y,
                &params,
                seed::derive_seed(seed, &[seed::fnv1a("forest"), f as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoostedForest {
        forests,
        shrinkage: params.shrinkage,
        trees_per_forest: params.n_tree,
    })
}

impl BoostedSequence {
    pub fn predict(&self, x: &DMatrix<f64>, shrinkage: f64) -> DMatrix<f64> {
        let mut out = DMatrix::from_rows(&vec![RowDVector::from_row_slice(&self.init); x.nrows()]);
        for t in &self.trees {
            t.accumulate(x, shrinkage, &mut out);
        }
        out
    }
}

impl BoostedForest {
    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.forests[0].predict(x, self.shrinkage);
        for f in &self.forests[1..] {
            out += f.predict(x, self.shrinkage);
        }
        out / self.forests.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::noisy_two_class;

    #[test]
    fn full_shrinkage_interpolating_tree_clears_residual() {
        let ds = noisy_two_class(40, 3, 0.2, 1).unwrap();
        let b = fit_l2_boost(
            ds.features(),
            ds.labels(),
            BoostParams {
                n_tree: 1,
                shrinkage: 1.0,
                max_leaves: 40,
                ..Default::default()
            },
            2,
        )
        .unwrap();
        assert!(b.forests[0].train_history[1] < 1e-28);
    }

    #[test]
    fn constant_target_needs_no_correction() {
        let x = DMatrix::from_fn(12, 2, |i, j| (i * 3 + j) as f64);
        let y = DMatrix::from_element(12, 1, 2.5);
        let b = fit_l2_boost(
            &x,
            &y,
            BoostParams {
                n_tree: 4,
                shrinkage: 0.5,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert_eq!(b.forests[0].init, vec![2.5]);
        for t in &b.forests[0].trees {
            assert!(t.predict(&x).iter().all(|&v| v == 0.0));
        }
        assert!(b.predict(&x).iter().all(|&v| v == 2.5));
    }

    #[test]
    fn telescoping_prediction() {
        let ds = noisy_two_class(70, 4, 0.1, 3).unwrap();
        let nu = 0.3;
        let b = fit_l2_boost(
            ds.features(),
            ds.labels(),
            BoostParams {
                n_tree: 6,
                shrinkage: nu,
                ..Default::default()
            },
            4,
        )
        .unwrap();
        let seq = &b.forests[0];
        let mut sum = DMatrix::zeros(70, 2);
        for t in &seq.trees {
            sum += t.predict(ds.features());
        }
        let manual = DMatrix::from_fn(70, 2, |i, j| seq.init[j] + nu * sum[(i, j)]);
        assert!((b.predict(ds.features()) - manual).amax() < 1e-12);
        let resid = ds.labels() - b.predict(ds.features());
        assert!((resid.norm_squared() / 70.0 - seq.train_history[6]).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        let ds = noisy_two_class(10, 2, 0.0, 0).unwrap();
        for p in [
            BoostParams {
                shrinkage: 0.0,
                ..Default::default()
            },
            BoostParams {
                shrinkage: 1.5,
                ..Default::default()
            },
            BoostParams {
                n_tree: 0,
                ..Default::default()
            },
            BoostParams {
                n_forest: 0,
                ..Default::default()
            },
        ] {
            assert!(fit_l2_boost(ds.features(), ds.labels(), p, 0).is_err());
        }
    }
}
