//! Small two-layer nets on 300 MNIST digits, widened one step at a time.
//! Each net either starts from the previous one's weights or from a fresh
//! Glorot draw; final training risks are printed side by side.
//!
//! cargo run --release -p ddlab --example weight_reuse_net

use std::path::Path;

use ddlab::dataset::Scaling;
use ddlab::nn::{self, InitMode, Regime, TrainConfig, TwoLayerNet};
use ddlab::sweep::{load_data, DatasetConfig, DatasetSource};

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
        n_train: Some(300),
        n_test: None,
        scaling: Scaling::FixedRange {
            min: 0.0,
            max: 255.0,
        },
        subsample_seed: 7,
    })?;
    let (d, k) = (tt.train.dim(), tt.train.n_classes());
    let cfg = TrainConfig {
        base_step: 0.003,
        batch_size: 32,
        epochs_max: 300,
        decay_every: 100,
        regime: Regime::Underparam,
        ..TrainConfig::default()
    };

    println!(
        "{:>3} {:>7} {:>14} {:>14} {:>8}",
        "H", "params", "reuse 0-1/sq", "fresh 0-1/sq", "epochs"
    );
    let mut donor: Option<TwoLayerNet> = None;
    for (i, h) in [1usize, 2, 3, 4, 6].into_iter().enumerate() {
        let seed = 40 + i as u64;
        let mode = if donor.is_some() {
            InitMode::WeightReuse
        } else {
            InitMode::Glorot
        };
        let start = TwoLayerNet::init(d, h, k, mode, donor.as_ref(), seed)?;
        let (reused, hist) = nn::train(start, &tt.train, &cfg, seed)?;
        let fresh = TwoLayerNet::init(d, h, k, InitMode::Glorot, None, seed)?;
        let (fresh, _) = nn::train(fresh, &tt.train, &cfg, seed)?;
        let (rs, r01) = reused.risks(&tt.train);
        let (fs, f01) = fresh.risks(&tt.train);
        println!(
            "{h:>3} {:>7} {r01:>6.3}/{rs:<7.3} {f01:>6.3}/{fs:<7.3} {:>8}",
            nn::param_count(d, h, k),
            hist.epochs()
        );
        donor = Some(reused);
    }
    Ok(())
}
