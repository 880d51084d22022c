//! Random Fourier feature sweep on a 1000-image MNIST subset with the
//! Gaussian kernel machine as reference. Writes CSV, SVG and metadata to
//! `target/rff_mnist/`.
//!
//! cargo run --release -p ddlab --example rff_mnist

use std::path::Path;

use ddlab::sweep::{self, SweepConfig};

fn main() -> ddlab::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let cfg = SweepConfig::load(&root.join("configs/rff_mnist.toml"))?;
    let result = sweep::run_sweep(&cfg)?;

    println!(
        "{:>8} {:>11} {:>11} {:>9} {:>11}",
        "capacity", "train sq", "test sq", "test 0-1", "|a|"
    );
    for p in &result.points {
        let m = |s: Option<sweep::Stat>| s.map_or(f64::NAN, |s| s.mean);
        println!(
            "{:>8} {:>11.3e} {:>11.4} {:>9.4} {:>11.4e}  {}",
            p.capacity,
            m(p.train_sq),
            m(p.test_sq),
            m(p.test_01),
            m(p.norm),
            p.family
        );
    }
    println!("interpolation threshold: {:?}", result.threshold());

    let out = root.join("target/rff_mnist");
    std::fs::create_dir_all(&out).map_err(|e| ddlab::Error::io(&out, e))?;
    sweep::emit_csv(&result, &out.join("sweep.csv"))?;
    sweep::emit_plot(&result, &out.join("sweep.svg"))?;
    sweep::emit_metadata(&result, &out.join("metadata.json"))?;
    println!("wrote {}", out.display());
    Ok(())
}
