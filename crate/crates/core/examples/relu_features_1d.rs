//! Random ReLU features on a one-dimensional regression problem: minimum
//! norm fits of a noisy sine as the number of features crosses n.
//!
//! cargo run --release -p ddlab --example relu_features_1d

use ddlab::features::{FeatureKind, FeatureMap, FeatureSpec};
use ddlab::minnorm::{solve_min_norm, DEFAULT_RANK_TOL};
use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};

fn main() -> ddlab::Result<()> {
    let n = 40;
    let mut rng = ddlab::seed::rng(3);
    let noise = Normal::new(0.0, 0.1).expect("valid std");
    // Appending a constant 1 lets the unit-norm ReLU directions act as
    // hinge functions with varying knots.
    let lift = |x: f64| [x, 1.0];
    // Equispaced inputs: with random ones a few tiny gaps dominate the
    // conditioning, since a gap needs a hinge knot inside it to be fitted.
    let xs: Vec<f64> = (0..n)
        .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
        .collect();
    let x = DMatrix::from_fn(n, 2, |i, j| lift(xs[i])[j]);
    let y = DMatrix::from_fn(n, 1, |i, _| (3.0 * xs[i]).sin() + noise.sample(&mut rng));
    let grid: Vec<f64> = (0..400).map(|i| -1.0 + 2.0 * i as f64 / 399.0).collect();
    let xg = DMatrix::from_fn(grid.len(), 2, |i, j| lift(grid[i])[j]);
    let truth = DMatrix::from_fn(grid.len(), 1, |i, _| (3.0 * grid[i]).sin());

    println!(
        "{:>6} {:>12} {:>12} {:>12}",
        "N", "train mse", "grid mse", "|a|"
    );
    for big_n in [5, 10, 20, 30, 40, 60, 80, 120, 160, 320, 640, 2560, 10240] {
        let map = FeatureMap::sample(FeatureSpec {
            kind: FeatureKind::Relu,
            n_features: big_n,
            sigma: 1.0,
            input_dim: 2,
            seed: 100 + big_n as u64,
        })?;
        let fit = solve_min_norm(&map.featurize(&x)?, &y, DEFAULT_RANK_TOL, None)?;
        let grid_mse =
            (map.predict(&fit.coefficients, &xg)? - &truth).norm_squared() / grid.len() as f64;
        println!(
            "{big_n:>6} {:>12.3e} {grid_mse:>12.4e} {:>12.4e}",
            fit.residual_sq / n as f64,
            fit.coefficient_norm
        );
    }
    Ok(())
}
