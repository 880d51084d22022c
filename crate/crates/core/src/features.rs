//! Random feature expansions.
//!
//! A [`FeatureMap`] holds `N` sampled weight vectors `v_1..v_N` and expands
//! an input `x` either into Fourier features (the real and imaginary parts
//! of `exp(i <v_k, x>)`, giving `2N` real columns) or into ReLU features
//! `max(<v_k, x>, 0)` (`N` columns).

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Weights ~ N(0, sigma^-2 I); columns `cos <v,x>`, `sin <v,x>`.
    Fourier,
    /// Weights uniform on the unit sphere; columns `max(<v,x>, 0)`.
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub kind: FeatureKind,
    pub n_features: usize,
    /// Bandwidth; ignored by ReLU features.
    pub sigma: f64,
    pub input_dim: usize,
    pub seed: u64,
}

impl FeatureSpec {
    /// Number of real parameters per output: `2N` for Fourier, `N` for ReLU.
    pub fn real_params(&self) -> usize {
        match self.kind {
            FeatureKind::Fourier => 2 * self.n_features,
            FeatureKind::Relu => self.n_features,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureMap {
    spec: FeatureSpec,
    /// `N x d`, row `k` is `v_k`.
    weights: DMatrix<f64>,
}

impl FeatureMap {
    pub fn sample(spec: FeatureSpec) -> Result<Self> {
        if spec.n_features == 0 || spec.input_dim == 0 {
            return Err(Error::InvalidArgument(
                "feature count and input dimension must be positive".into(),
            ));
        }
        if spec.kind == FeatureKind::Fourier && !(spec.sigma > 0.0 && spec.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth {} must be positive",
                spec.sigma
            )));
        }
        let (n, d) = (spec.n_features, spec.input_dim);
        let mut rng = seed::rng(spec.seed);
        // Drawn row by row so that row k does not depend on N.
        let mut rows = vec![0.0; n * d];
        for v in rows.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let mut weights = DMatrix::from_row_slice(n, d, &rows);
        match spec.kind {
            FeatureKind::Fourier => weights /= spec.sigma,
            FeatureKind::Relu => {
                for mut row in weights.row_iter_mut() {
                    let norm = row.norm();
                    // A zero draw has probability zero; keep e_1 for safety.
                    if norm > 0.0 {
                        row /= norm;
                    } else {
                        row[0] = 1.0;
                    }
                }
            }
        }
        Ok(FeatureMap { spec, weights })
    }

    /// Builds a map from explicit weight rows.
    pub fn from_weights(kind: FeatureKind, weights: DMatrix<f64>, sigma: f64) -> Self {
        let spec = FeatureSpec {
            kind,
            n_features: weights.nrows(),
            sigma,
            input_dim: weights.ncols(),
            seed: 0,
        };
        FeatureMap { spec, weights }
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Number of columns produced by [`featurize`](Self::featurize).
    pub fn width(&self) -> usize {
        self.spec.real_params()
    }

    pub fn featurize(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.spec.input_dim {
            return Err(Error::Dimension(format!(
                "input has {} columns, feature map expects {}",
                x.ncols(),
                self.spec.input_dim
            )));
        }
        let proj = x * self.weights.transpose();
        match self.spec.kind {
            FeatureKind::Relu => Ok(proj.map(|v| v.max(0.0))),
            FeatureKind::Fourier => {
                let n = x.nrows();
                let mut out = DMatrix::zeros(n, 2 * self.spec.n_features);
                out.as_mut_slice()
                    .par_chunks_mut(2 * n)
                    .zip(proj.as_slice().par_chunks(n))
                    .for_each(|(pair, p)| {
                        let (c, s) = pair.split_at_mut(n);
                        for i in 0..n {
                            let (sin, cos) = p[i].sin_cos();
                            c[i] = cos;
                            s[i] = sin;
                        }
                    });
                Ok(out)
            }
        }
    }

    pub fn predict(&self, coefficients: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if coefficients.nrows() != self.width() {
            return Err(Error::Dimension(format!(
                "{} coefficient rows for {} feature columns",
                coefficients.nrows(),
                self.width()
            )));
        }
        Ok(self.featurize(x)? * coefficients)
    }
}
