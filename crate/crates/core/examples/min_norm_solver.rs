//! Minimum-norm least squares on an underdetermined system, its weighted
//! variant, and the ridge path approaching it as lambda shrinks.
//!
//! cargo run --release -p ddlab --example min_norm_solver

use ddlab::minnorm::{solve_min_norm, solve_ridge, DEFAULT_RANK_TOL};
use nalgebra::DMatrix;
use rand::Rng;

fn main() -> ddlab::Result<()> {
    let mut rng = ddlab::seed::rng(11);
    let (n, d) = (20, 60);
    let a = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() - 0.5);
    let y = DMatrix::from_fn(n, 1, |_, _| rng.random::<f64>());

    let fit = solve_min_norm(&a, &y, DEFAULT_RANK_TOL, None)?;
    println!(
        "{n}x{d} system: rank {}, residual {:.2e}, |a| = {:.6}, condition {:.2e}",
        fit.rank, fit.residual_sq, fit.coefficient_norm, fit.condition
    );

    // Cheaper on the first half of the columns: the weighted solution moves
    // its mass there.
    let weights: Vec<f64> = (0..d).map(|j| if j < d / 2 { 10.0 } else { 0.1 }).collect();
    let w = solve_min_norm(&a, &y, DEFAULT_RANK_TOL, Some(&weights))?;
    let head = w.coefficients.rows(0, d / 2).norm();
    let tail = w.coefficients.rows(d / 2, d - d / 2).norm();
    println!(
        "weighted: |head| = {head:.4}, |tail| = {tail:.4}, residual {:.2e}",
        w.residual_sq
    );

    println!("{:>10} {:>12} {:>12}", "lambda", "|a_lambda|", "train mse");
    for e in [0, -2, -4, -6, -8, -10] {
        let lambda = 10f64.powi(e);
        let r = solve_ridge(&a, &y, lambda)?;
        println!(
            "{lambda:>10.0e} {:>12.6} {:>12.3e}",
            r.coefficient_norm,
            r.residual_sq / n as f64
        );
    }
    Ok(())
}
