//! Gaussian kernel interpolation: the `N -> infinity` limit of the random
//! Fourier feature models.

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};

/// Relative jitter used when the exact gram factorization fails:
/// `FALLBACK_JITTER * trace / n` is added to the diagonal.
pub const FALLBACK_JITTER: f64 = 1e-10;

/// `exp(-||a_i - b_j||^2 / (2 sigma^2))` for every row pair.
pub fn gaussian_gram(a: &DMatrix<f64>, b: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "point sets have dimensions {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma {sigma} must be positive"
        )));
    }
    ensure_finite(a.iter().chain(b.iter()), "kernel inputs")?;
    let (n, m, d) = (a.nrows(), b.nrows(), a.ncols());
    // Row-major copies keep the distance loop contiguous.
    let ar: Vec<f64> = a.transpose().as_slice().to_vec();
    let br: Vec<f64> = b.transpose().as_slice().to_vec();
    let scale = -0.5 / (sigma * sigma);
    let mut out = vec![0.0; n * m];
    out.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let ai = &ar[i * d..(i + 1) * d];
        for (j, slot) in row.iter_mut().enumerate() {
            let bj = &br[j * d..(j + 1) * d];
            let dist2: f64 = ai.iter().zip(bj).map(|(x, y)| (x - y) * (x - y)).sum();
            *slot = (scale * dist2).exp();
        }
    });
    Ok(DMatrix::from_row_slice(n, m, &out))
}

#[derive(Debug, Clone)]
pub struct KernelModel {
    pub support: DMatrix<f64>,
    /// `n x K` dual coefficients.
    pub alpha: DMatrix<f64>,
    pub sigma: f64,
    pub jitter: f64,
}

/// Solves `(K + jitter I) alpha = targets` by Cholesky; fails if the
/// shifted gram is not numerically positive definite.
pub fn fit_interpolating(
    x: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    sigma: f64,
    jitter: f64,
) -> Result<KernelModel> {
    if x.nrows() != targets.nrows() || x.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{} points but {} target rows",
            x.nrows(),
            targets.nrows()
        )));
    }
    if !(jitter >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "jitter {jitter} must be >= 0"
        )));
    }
    ensure_finite(targets.iter(), "kernel targets")?;
    let mut gram = gaussian_gram(x, x, sigma)?;
    for i in 0..gram.nrows() {
        gram[(i, i)] += jitter;
    }
    let chol = Cholesky::new(gram).ok_or_else(|| {
        Error::Solver(format!(
            "gram matrix is not positive definite with jitter {jitter:e}"
        ))
    })?;
    Ok(KernelModel {
        support: x.clone(),
        alpha: chol.solve(targets),
        sigma,
        jitter,
    })
}

/// [`fit_interpolating`] with `jitter`, retrying once with
/// `FALLBACK_JITTER * trace / n` (trace / n = 1 for the Gaussian kernel)
/// when the factorization breaks down.
pub fn fit_with_fallback(
    x: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    sigma: f64,
    jitter: f64,
) -> Result<KernelModel> {
    match fit_interpolating(x, targets, sigma, jitter) {
        Err(Error::Solver(_)) => fit_interpolating(x, targets, sigma, jitter.max(FALLBACK_JITTER)),
        other => other,
    }
}

impl KernelModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(gaussian_gram(x, &self.support, self.sigma)? * &self.alpha)
    }

    /// `sqrt(sum over outputs of alpha^T K alpha)`.
    pub fn rkhs_norm(&self) -> f64 {
        let gram = gaussian_gram(&self.support, &self.support, self.sigma)
            .expect("support points were validated at fit time");
        let quad = (self.alpha.transpose() * gram * &self.alpha).trace();
        quad.max(0.0).sqrt()
    }
}
