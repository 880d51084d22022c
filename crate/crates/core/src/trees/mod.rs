//! Capacity-indexed tree ensembles.
//!
//! Below the interpolation threshold capacity grows with the leaf budget of
//! a single tree; beyond it, with the number of averaged interpolating
//! trees (forests) or of averaged boosting runs (L2-boosting). The hybrid
//! index is the total leaf budget, see [`ensemble_capacity`].

mod boost;
mod forest;
mod tree;

pub use boost::{fit_l2_boost, BoostParams, BoostedForest, BoostedSequence};
pub use forest::{fit_forest, Forest, ForestParams};
pub use tree::{default_mtry, fit_tree, Node, RegressionTree, TreeParams};

/// Hybrid capacity index: `members * max_leaves`, where `members` is the
/// number of trees in a forest or `n_forest * n_tree` for boosting. A single
/// tree's capacity is its leaf budget, and every ensemble of interpolating
/// trees (`max_leaves = n`) lands after all single-tree capacities.
pub fn ensemble_capacity(members: usize, max_leaves: usize) -> usize {
    members * max_leaves
}
