//! Two-layer fully connected ReLU networks trained with heavy-ball momentum
//! SGD on the squared loss against one-hot targets.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Standard deviation of the `N(0, 0.01)` initialisation.
pub const SMALL_INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet {
    /// `H x d`
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// `K x H`
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

/// `(d + 1) H + (H + 1) K`.
pub fn param_count(d: usize, h: usize, k: usize) -> usize {
    (d + 1) * h + (h + 1) * k
}

/// Smallest hidden width whose parameter count reaches `target`.
pub fn hidden_for_params(d: usize, k: usize, target: usize) -> usize {
    let per_unit = d + 1 + k;
    target.saturating_sub(k).div_ceil(per_unit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    Glorot,
    WeightReuse,
    RandomSmall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Step decay and early stop at zero training classification error.
    Underparam,
    /// Fixed step for `epochs_max` epochs.
    Overparam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub momentum: f64,
    pub base_step: f64,
    pub batch_size: usize,
    pub epochs_max: usize,
    /// Fractional step reduction applied every `decay_every` epochs.
    pub decay_rate: f64,
    pub decay_every: usize,
    pub regime: Regime,
    pub init: InitMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            momentum: 0.95,
            base_step: 0.01,
            batch_size: 128,
            epochs_max: 6000,
            decay_rate: 0.1,
            decay_every: 500,
            regime: Regime::Underparam,
            init: InitMode::Glorot,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if !(self.base_step >= 0.0 && self.base_step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step {} must be >= 0",
                self.base_step
            )));
        }
        if self.batch_size == 0 || self.decay_every == 0 {
            return Err(Error::InvalidArgument(
                "batch_size and decay_every must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.decay_rate) {
            return Err(Error::InvalidArgument(format!(
                "decay rate {} outside [0, 1)",
                self.decay_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    /// Training squared risk after each epoch (mean over rows, summed over outputs).
    pub train_sq: Vec<f64>,
    pub train_01: Vec<f64>,
    pub steps: Vec<f64>,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.train_sq.len()
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
        w.write_record(["epoch", "step", "train_sq", "train_01"])
            .map_err(|e| Error::Csv(e.to_string()))?;
        for e in 0..self.epochs() {
            w.write_record([
                (e + 1).to_string(),
                self.steps[e].to_string(),
                self.train_sq[e].to_string(),
                self.train_01[e].to_string(),
            ])
            .map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn uniform(rows: usize, cols: usize, limit: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..=limit))
}

fn small(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let normal = Normal::new(0.0, SMALL_INIT_STD).expect("valid std");
    DMatrix::from_fn(rows, cols, |_, _| normal.sample(rng))
}

/// Argmax per row, ties to the lowest index.
pub fn argmax_rows(m: &DMatrix<f64>) -> Vec<usize> {
    m.row_iter()
        .map(|r| {
            let mut best = 0;
            for j in 1..r.len() {
                if r[j] > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

impl TwoLayerNet {
    /// Glorot-uniform layers with zero biases, N(0, 0.01) everywhere, or
    /// a donor's hidden units copied into the first slots and the rest
    /// drawn from N(0, 0.01).
    pub fn init(
        d: usize,
        h: usize,
        k: usize,
        mode: InitMode,
        donor: Option<&TwoLayerNet>,
        seed: u64,
    ) -> Result<Self> {
        if d == 0 || k == 0 {
            return Err(Error::InvalidArgument(
                "input and output sizes must be positive".into(),
            ));
        }
        let mut rng = seed::rng(seed);
        match mode {
            InitMode::Glorot => {
                let l1 = (6.0 / (d + h) as f64).sqrt();
                let l2 = if h > 0 {
                    (6.0 / (h + k) as f64).sqrt()
                } else {
                    0.0
                };
                Ok(TwoLayerNet {
                    w1: uniform(h, d, l1, &mut rng),
                    b1: DVector::zeros(h),
                    w2: uniform(k, h, l2, &mut rng),
                    b2: DVector::zeros(k),
                })
            }
            InitMode::RandomSmall => Ok(TwoLayerNet {
                w1: small(h, d, &mut rng),
                b1: small(h, 1, &mut rng).column(0).into(),
                w2: small(k, h, &mut rng),
                b2: small(k, 1, &mut rng).column(0).into(),
            }),
            InitMode::WeightReuse => {
                let donor = donor.ok_or_else(|| {
                    Error::InvalidArgument("weight reuse needs a donor network".into())
                })?;
                let h1 = donor.hidden();
                if donor.input_dim() != d || donor.outputs() != k {
                    return Err(Error::Dimension(
                        "donor has different input or output size".into(),
                    ));
                }
                if h1 > h {
                    return Err(Error::InvalidArgument(format!(
                        "donor with {h1} hidden units is larger than target {h}"
                    )));
                }
                let mut net = TwoLayerNet::init(d, h, k, InitMode::RandomSmall, None, seed)?;
                net.w1.rows_mut(0, h1).copy_from(&donor.w1);
                net.b1.rows_mut(0, h1).copy_from(&donor.b1);
                net.w2.columns_mut(0, h1).copy_from(&donor.w2);
                net.b2.copy_from(&donor.b2);
                Ok(net)
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w2.nrows()
    }

    pub fn param_count(&self) -> usize {
        param_count(self.input_dim(), self.hidden(), self.outputs())
    }

    fn hidden_pre(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * self.w1.transpose();
        for mut row in z.row_iter_mut() {
            row += self.b1.transpose();
        }
        z
    }

    fn head(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = a * self.w2.transpose();
        for mut row in out.row_iter_mut() {
            row += self.b2.transpose();
        }
        out
    }

    /// `n x K` network outputs.
    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.head(&self.hidden_pre(x).map(|v| v.max(0.0)))
    }

    /// Mean over rows of the summed squared error, and its gradient.
    pub fn loss_and_grad(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> (f64, TwoLayerNet) {
        let b = x.nrows() as f64;
        let z = self.hidden_pre(x);
        let a = z.map(|v| v.max(0.0));
        let diff = self.head(&a) - y;
        let loss = diff.norm_squared() / b;
        let g = diff * (2.0 / b);
        let gw2 = g.transpose() * &a;
        let gb2 = g.row_sum().transpose();
        let mut dz = &g * &self.w2;
        dz.zip_apply(&z, |v, zv| {
            if zv <= 0.0 {
                *v = 0.0
            }
        });
        let gw1 = dz.transpose() * x;
        let gb1 = dz.row_sum().transpose();
        (
            loss,
            TwoLayerNet {
                w1: gw1,
                b1: gb1,
                w2: gw2,
                b2: gb2,
            },
        )
    }

    /// Parameters in the order `w1, b1, w2, b2` (column-major matrices).
    pub fn to_flat(&self) -> Vec<f64> {
        [
            self.w1.as_slice(),
            self.b1.as_slice(),
            self.w2.as_slice(),
            self.b2.as_slice(),
        ]
        .concat()
    }

    pub fn set_flat(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut at = 0;
        for s in [
            self.w1.as_mut_slice(),
            self.b1.as_mut_slice(),
            self.w2.as_mut_slice(),
            self.b2.as_mut_slice(),
        ] {
            s.copy_from_slice(&p[at..at + s.len()]);
            at += s.len();
        }
    }

    fn axpy(&mut self, alpha: f64, other: &TwoLayerNet) {
        self.w1.zip_apply(&other.w1, |a, b| *a += alpha * b);
        self.b1.axpy(alpha, &other.b1, 1.0);
        self.w2.zip_apply(&other.w2, |a, b| *a += alpha * b);
        self.b2.axpy(alpha, &other.b2, 1.0);
    }

    fn scale(&mut self, s: f64) {
        self.w1 *= s;
        self.b1 *= s;
        self.w2 *= s;
        self.b2 *= s;
    }

    fn zeros_like(&self) -> TwoLayerNet {
        TwoLayerNet {
            w1: DMatrix::zeros(self.hidden(), self.input_dim()),
            b1: DVector::zeros(self.hidden()),
            w2: DMatrix::zeros(self.outputs(), self.hidden()),
            b2: DVector::zeros(self.outputs()),
        }
    }

    /// `(squared, zero_one)` training-style risks on `ds`.
    pub fn risks(&self, ds: &Dataset) -> (f64, f64) {
        let out = self.forward(ds.features());
        let sq = (&out - ds.labels()).norm_squared() / ds.n() as f64;
        let wrong = argmax_rows(&out)
            .iter()
            .zip(ds.class_ids())
            .filter(|(p, c)| p != c)
            .count();
        (sq, wrong as f64 / ds.n() as f64)
    }
}

/// Minibatch heavy-ball SGD: `v <- mu v - eta grad`, `theta <- theta + v`.
pub fn train(
    mut net: TwoLayerNet,
    ds: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(TwoLayerNet, TrainHistory)> {
    cfg.validate()?;
    if ds.dim() != net.input_dim() || ds.n_classes() != net.outputs() {
        return Err(Error::Dimension(format!(
            "network is {}->{}, data is {}->{}",
            net.input_dim(),
            net.outputs(),
            ds.dim(),
            ds.n_classes()
        )));
    }
    let mut rng = seed::rng(seed);
    let mut order: Vec<usize> = (0..ds.n()).collect();
    let mut velocity = net.zeros_like();
    let mut history = TrainHistory::default();
    let mut step = cfg.base_step;
    for epoch in 1..=cfg.epochs_max {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xb = ds.features().select_rows(batch);
            let yb = ds.labels().select_rows(batch);
            let (loss, grad) = net.loss_and_grad(&xb, &yb);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            velocity.scale(cfg.momentum);
            velocity.axpy(-step, &grad);
            net.axpy(1.0, &velocity);
        }
        let (sq, zo) = net.risks(ds);
        if !sq.is_finite() {
            return Err(Error::Divergence { epoch, loss: sq });
        }
        history.train_sq.push(sq);
        history.train_01.push(zo);
        history.steps.push(step);
        if cfg.regime == Regime::Underparam {
            if zo == 0.0 {
                break;
            }
            if epoch % cfg.decay_every == 0 {
                step *= 1.0 - cfg.decay_rate;
            }
        }
    }
    Ok((net, history))
}
