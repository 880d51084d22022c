//! Gaussian kernel interpolation on the MNIST subset: training fit, test
//! risks and RKHS norm for a few bandwidths.
//!
//! cargo run --release -p ddlab --example kernel_reference

use std::path::Path;

use ddlab::dataset::Scaling;
use ddlab::kernel::fit_with_fallback;
use ddlab::sweep::{compute_risks, load_data, DatasetConfig, DatasetSource};

fn main() -> ddlab::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-5k");
    let tt = load_data(&DatasetConfig {
        source: DatasetSource::Idx {
            train_images: data.join("train-images-idx3-ubyte.gz"),
            train_labels: data.join("train-labels-idx1-ubyte.gz"),
            test_images: data.join("t10k-images-idx3-ubyte.gz"),
            test_labels: data.join("t10k-labels-idx1-ubyte.gz"),
            n_classes: 10,
        },
        n_train: Some(1000),
        n_test: None,
        scaling: Scaling::FixedRange {
            min: 0.0,
            max: 255.0,
        },
        subsample_seed: 7,
    })?;
    println!(
        "{:>6} {:>10} {:>10} {:>9} {:>10}",
        "sigma", "train sq", "test sq", "test 0-1", "rkhs norm"
    );
    for sigma in [2.5, 5.0, 10.0] {
        let model = fit_with_fallback(tt.train.features(), tt.train.labels(), sigma, 0.0)?;
        let (train_sq, _) = compute_risks(
            &model.predict(tt.train.features())?,
            tt.train.labels(),
            tt.train.class_ids(),
        )?;
        let (test_sq, test_01) = compute_risks(
            &model.predict(tt.test.features())?,
            tt.test.labels(),
            tt.test.class_ids(),
        )?;
        println!(
            "{sigma:>6} {train_sq:>10.2e} {test_sq:>10.4} {test_01:>9.4} {:>10.4}",
            model.rkhs_norm()
        );
    }
    Ok(())
}
