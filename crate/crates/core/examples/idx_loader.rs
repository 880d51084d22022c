//! Reads the bundled MNIST subset from gzipped IDX files and prints shapes,
//! class counts and pixel ranges before and after scaling.
//!
//! cargo run --release -p ddlab --example idx_loader

use std::path::Path;

use ddlab::dataset::{load_idx_pair, preprocess, Scaling};

fn main() -> ddlab::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-5k");
    for (images, labels) in [
        ("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz"),
        ("t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"),
    ] {
        let ds = load_idx_pair(&root.join(images), &root.join(labels), 10)?;
        let mut counts = [0usize; 10];
        for &c in ds.class_ids() {
            counts[c] += 1;
        }
        let scaled = preprocess(
            ds.features(),
            Scaling::FixedRange {
                min: 0.0,
                max: 255.0,
            },
        )?;
        println!("{images}: {} x {}", ds.n(), ds.dim());
        println!("  per class {counts:?}");
        println!(
            "  raw pixels in [{}, {}], scaled in [{}, {}]",
            ds.features().min(),
            ds.features().max(),
            scaled.min(),
            scaled.max()
        );
    }
    Ok(())
}
