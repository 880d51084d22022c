//! Synthetic Fourier model on the circle: excess risk and weighted norm of
//! the fitted function as the number of random frequencies N crosses n.
//!
//! cargo run --release -p ddlab --example synthetic_circle

use ddlab::circle::{run_cell, CircleSpec, DEFAULT_GRID};
use rayon::prelude::*;

fn main() -> ddlab::Result<()> {
    let n = 256;
    let trials = 20u64;
    let grid = [
        16, 32, 64, 128, 192, 224, 256, 288, 320, 384, 512, 1024, 2048,
    ];
    for snr in [f64::INFINITY, 20.0] {
        let spec = CircleSpec::with_snr(DEFAULT_GRID, DEFAULT_GRID, snr, 0)?;
        println!("SNR = {snr}  (noise variance {:.3e})", spec.noise_variance);
        println!(
            "{:>6} {:>14} {:>14} {:>14}",
            "N", "excess risk", "weighted norm", "train sq"
        );
        for &big_n in &grid {
            let cells: Vec<_> = (0..trials)
                .into_par_iter()
                .map(|t| run_cell(&spec, n, big_n, 2019, t))
                .collect::<ddlab::Result<_>>()?;
            let mean = |f: fn(&ddlab::circle::CircleOutcome) -> f64| {
                cells.iter().map(f).sum::<f64>() / trials as f64
            };
            println!(
                "{big_n:>6} {:>14.4e} {:>14.4e} {:>14.4e}",
                mean(|c| c.excess_risk),
                mean(|c| c.weighted_norm),
                mean(|c| c.train_sq)
            );
        }
    }
    Ok(())
}
