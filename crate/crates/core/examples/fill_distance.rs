//! Fill distance of uniform samples in the unit square and interval, and
//! the noiseless Gaussian-kernel interpolation experiment.
//!
//! cargo run --release -p ddlab --example fill_distance

use ddlab::theory::{self, ApproxConfig};

fn main() -> ddlab::Result<()> {
    let ns: Vec<usize> = (5..=12).map(|e| 1usize << e).collect();
    for d in [1, 2] {
        let rows = theory::fill_scaling(d, &ns, 20, 1)?;
        let kappas: Vec<f64> = rows.iter().map(|r| r.kappa_geo_mean).collect();
        println!(
            "d = {d}: slope of log kappa on log(n / ln n) = {:.3}",
            theory::scaling_slope(&ns, &kappas)
        );
        for r in &rows {
            println!("  n {:>5}  kappa {:.4e}", r.n, r.kappa_geo_mean);
        }
    }

    let report = theory::noiseless_approx_experiment(&ApproxConfig {
        d: 1,
        sigma: 0.1,
        centers: 12,
        n_grid: vec![8, 16, 32, 64, 128, 256, 512],
        trials: 20,
        probes_per_side: 4001,
        seed: 3,
    })?;
    println!(
        "{:>5} {:>10} {:>11} {:>10} {:>10}",
        "n", "kappa", "sup error", "|h|", "|h*|"
    );
    for r in &report.rows {
        println!(
            "{:>5} {:>10.4e} {:>11.4e} {:>10.6} {:>10.6}",
            r.n, r.kappa_mean, r.sup_error_mean, r.norm_h_mean, r.norm_hstar
        );
    }
    Ok(())
}
