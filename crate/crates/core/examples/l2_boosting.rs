//! L2-boosting on a noisy two-class task: training risk over rounds for two
//! shrinkage values, then averaging independent boosting runs.
//!
//! cargo run --release -p ddlab --example l2_boosting

use ddlab::dataset::noisy_two_class;
use ddlab::sweep::compute_risks;
use ddlab::trees::{fit_l2_boost, BoostParams};

fn main() -> ddlab::Result<()> {
    let train = noisy_two_class(500, 5, 0.2, 1)?;
    let test = noisy_two_class(2000, 5, 0.2, 2)?;
    for shrinkage in [0.85, 0.1] {
        let b = fit_l2_boost(
            train.features(),
            train.labels(),
            BoostParams {
                n_tree: 20,
                shrinkage,
                max_leaves: 10,
                mtry: None,
                n_forest: 1,
            },
            5,
        )?;
        let h = &b.forests[0].train_history;
        println!(
            "shrinkage {shrinkage}: train risk {:.4} -> {:.4} -> {:.4} (rounds 0, 5, 20)",
            h[0], h[5], h[20]
        );
    }
    println!("{:>8} {:>10} {:>10}", "n_forest", "test sq", "test 0-1");
    for n_forest in [1, 2, 5, 10, 20] {
        let b = fit_l2_boost(
            train.features(),
            train.labels(),
            BoostParams {
                n_tree: 20,
                shrinkage: 0.85,
                max_leaves: 10,
                mtry: None,
                n_forest,
            },
            9,
        )?;
        let (sq, zo) = compute_risks(&b.predict(test.features()), test.labels(), test.class_ids())?;
        println!("{n_forest:>8} {sq:>10.4} {zo:>10.4}");
    }
    Ok(())
}
