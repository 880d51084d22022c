//! Tree and forest capacity sweep on a noisy two-class task: a single tree
//! grows to interpolation, then interpolating trees are averaged.
//!
//! cargo run --release -p ddlab --example pert_forest

use ddlab::sweep::{self, DatasetConfig, DatasetSource, Family, SweepConfig};

fn main() -> ddlab::Result<()> {
    let n = 500;
    let mut cfg = SweepConfig::new(
        Family::TreeForest,
        vec![
            2,
            5,
            10,
            20,
            50,
            100,
            200,
            350,
            500,
            2 * n,
            5 * n,
            10 * n,
            20 * n,
            50 * n,
        ],
    );
    cfg.dataset = Some(DatasetConfig {
        source: DatasetSource::NoisyTwoClass {
            train_size: n,
            test_size: 2000,
            dim: 5,
            flip: 0.2,
            seed: 1,
        },
        n_train: None,
        n_test: None,
        scaling: Default::default(),
        subsample_seed: 0,
    });
    let result = sweep::run_sweep(&cfg)?;
    println!(
        "{:>8} {:>11} {:>11} {:>9}",
        "capacity", "train sq", "test sq", "test 0-1"
    );
    for p in result.curve() {
        let m = |s: Option<sweep::Stat>| s.map_or(f64::NAN, |s| s.mean);
        println!(
            "{:>8} {:>11.3e} {:>11.4} {:>9.4}",
            p.capacity,
            m(p.train_sq),
            m(p.test_sq),
            m(p.test_01)
        );
    }
    println!("interpolation threshold: {:?}", result.threshold());
    Ok(())
}
