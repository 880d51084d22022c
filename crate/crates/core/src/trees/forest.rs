use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use super::tree::{RegressionTree, TreeParams};
use crate::error::{Error, Result};
use crate::seed;

/// Unweighted average of regression trees.
#[derive(Debug, Clone)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
    pub bootstrap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_tree: usize,
    pub max_leaves: usize,
    pub mtry: Option<usize>,
    /// `false` fits every tree on the full sample (PERT-style);
    /// `true` on a with-replacement resample of size n.
    pub bootstrap: bool,
}

pub fn tree_seed(seed: u64, member: usize) -> u64 {
    seed::derive_seed(seed, &[member as u64])
}

pub fn fit_forest(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    params: ForestParams,
    seed: u64,
) -> Result<Forest> {
    if params.n_tree == 0 {
        return Err(Error::InvalidArgument("n_tree must be >= 1".into()));
    }
    let n = x.nrows();
    let tree_params = TreeParams {
        max_leaves: params.max_leaves,
        mtry: params.mtry,
    };
    let trees = (0..params.n_tree)
        .into_par_iter()
        .map(|t| {
            let s = tree_seed(seed, t);
            let rows: Vec<usize> = if params.bootstrap {
                let mut rng = seed::rng(seed::derive_seed(s, &[seed::fnv1a("bootstrap")]));
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            RegressionTree::fit(x, y, &rows, tree_params, s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        bootstrap: params.bootstrap,
    })
}

impl Forest {
    pub fn predict(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let k = match self.trees.first() {
            Some(t) => t
                .predict(&x.rows(0, x.nrows().min(1)).clone_owned())
                .ncols(),
            None => return DMatrix::zeros(x.nrows(), 0),
        };
        let mut out = DMatrix::zeros(x.nrows(), k);
        let w = 1.0 / self.trees.len() as f64;
        for t in &self.trees {
            t.accumulate(x, w, &mut out);
        }
        out
    }
}
