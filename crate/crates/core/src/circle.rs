//! Random Fourier model on the circle.
//!
//! Functions are complex trigonometric polynomials
//! `h(x) = sum_k a_k e_k(x)`, `e_k(x) = exp(i (k - 1) x)`, observed on the
//! `M`-point grid `{2 pi j / M}`. A model of capacity `N` is the span of
//! `N` distinct frequencies drawn from `p_k ~ 1/k^2`; the target has
//! coefficients `a*_k = p_k`. Underparameterized fits are ordinary least
//! squares; from `N >= n` on, the interpolant minimizing
//! `sum_k |a_k|^2 / p_k` is selected.
//!
//! Because the `e_k` with `k <= M` are orthonormal under the uniform grid
//! measure, excess risk can be computed either on the grid or as a
//! coefficient-space distance; [`excess_risk`] does both.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minnorm::{solve_min_norm, DEFAULT_RANK_TOL};
use crate::seed;

pub const DEFAULT_GRID: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleSpec {
    /// Grid size `M`.
    pub grid_size: usize,
    /// Highest target frequency index; at most `grid_size`.
    pub k_max: usize,
    pub noise_variance: f64,
    pub seed: u64,
}

impl CircleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size == 0 || self.k_max == 0 {
            return Err(Error::InvalidArgument(
                "grid size and k_max must be positive".into(),
            ));
        }
        if self.k_max > self.grid_size {
            return Err(Error::InvalidArgument(format!(
                "k_max {} exceeds grid size {}: frequencies would alias",
                self.k_max, self.grid_size
            )));
        }
        if !(self.noise_variance >= 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::InvalidArgument(
                "noise variance must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Spec whose noise variance gives the requested signal-to-noise ratio
    /// `E|h*(x)|^2 / sigma^2` for the default target (`snr = inf` is noiseless).
    pub fn with_snr(grid_size: usize, k_max: usize, snr: f64, seed: u64) -> Result<Self> {
        if !(snr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "snr {snr} must be positive"
            )));
        }
        let target = CircleTarget::from_distribution(&FrequencyDistribution::new(k_max)?);
        let spec = CircleSpec {
            grid_size,
            k_max,
            noise_variance: target.signal_power() / snr,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct FrequencyDistribution {
    /// `p[k - 1]` for `k = 1..=k_max`.
    p: Vec<f64>,
    cdf: Vec<f64>,
}

impl FrequencyDistribution {
    pub fn new(k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::InvalidArgument("k_max must be positive".into()));
        }
        let raw: Vec<f64> = (1..=k_max).map(|k| 1.0 / (k as f64).powi(2)).collect();
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let mut acc = 0.0;
        let cdf = p
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        Ok(FrequencyDistribution { p, cdf })
    }

    pub fn k_max(&self) -> usize {
        self.p.len()
    }

    /// Probability of frequency index `k` (1-based).
    pub fn prob(&self, k: usize) -> f64 {
        self.p[k - 1]
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    fn draw(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        self.cdf.partition_point(|&c| c <= u).min(self.p.len() - 1) + 1
    }

    /// Draws from `p` until `n` distinct indices are seen; returned sorted.
    pub fn sample_indices(&self, n: usize, seed: u64) -> Result<Vec<usize>> {
        let k_max = self.k_max();
        if n > k_max {
            return Err(Error::InvalidArgument(format!(
                "cannot pick {n} distinct frequencies out of {k_max}"
            )));
        }
        if n == k_max {
            return Ok((1..=k_max).collect());
        }
        let mut rng = seed::rng(seed);
        let mut seen = vec![false; k_max];
        let mut count = 0;
        while count < n {
            let k = self.draw(&mut rng);
            if !seen[k - 1] {
                seen[k - 1] = true;
                count += 1;
            }
        }
        Ok((1..=k_max).filter(|&k| seen[k - 1]).collect())
    }
}

#[derive(Debug, Clone)]
pub struct CircleTarget {
    /// `a*_k` for `k = 1..=k_max`.
    pub coefficients: Vec<Complex64>,
}

impl CircleTarget {
    pub fn from_distribution(dist: &FrequencyDistribution) -> Self {
        CircleTarget {
            coefficients: dist
                .probs()
                .iter()
                .map(|&p| Complex64::new(p, 0.0))
                .collect(),
        }
    }

    /// `E|h*(x)|^2` under the uniform grid measure.
    pub fn signal_power(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Evaluates `sum_k c_k e_k` on the `m`-point grid with one inverse FFT.
pub struct GridEvaluator {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl GridEvaluator {
    pub fn new(m: usize) -> Self {
        GridEvaluator {
            m,
            fft: FftPlanner::new().plan_fft_inverse(m),
        }
    }

    /// `terms` are `(k, c_k)` pairs with `1 <= k <= m`.
    pub fn eval(&self, terms: impl IntoIterator<Item = (usize, Complex64)>) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.m];
        for (k, c) in terms {
            buf[k - 1] += c;
        }
        self.fft.process(&mut buf);
        buf
    }
}

#[derive(Debug, Clone)]
pub struct CircleSample {
    pub grid_index: Vec<usize>,
    pub x: Vec<f64>,
    pub y: Vec<Complex64>,
}

/// `n` grid points drawn uniformly with replacement, labelled by the target
/// plus real Gaussian noise of variance `spec.noise_variance`.
pub fn generate_data(
    spec: &CircleSpec,
    target: &CircleTarget,
    n: usize,
    seed: u64,
) -> Result<CircleSample> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be positive".into(),
        ));
    }
    if target.coefficients.len() > spec.grid_size {
        return Err(Error::InvalidArgument(
            "target has aliased frequencies".into(),
        ));
    }
    let m = spec.grid_size;
    let clean = GridEvaluator::new(m).eval(
        target
            .coefficients
            .iter()
            .copied()
            .enumerate()
            .map(|(i, c)| (i + 1, c)),
    );
    let noise = Normal::new(0.0, spec.noise_variance.sqrt())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = seed::rng(seed);
    let mut out = CircleSample {
        grid_index: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let j = rng.random_range(0..m);
        let eps = if spec.noise_variance > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        out.grid_index.push(j);
        out.x.push(2.0 * std::f64::consts::PI * j as f64 / m as f64);
        out.y.push(clean[j] + eps);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CircleFit {
    /// Frequency indices (1-based) spanning the model.
    pub indices: Vec<usize>,
    pub coefficients: Vec<Complex64>,
    pub rank: usize,
    pub condition: f64,
    /// Mean of `|h(x_i) - y_i|^2` over the sample.
    pub train_sq: f64,
}

impl CircleFit {
    pub fn terms(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.coefficients.iter().copied())
    }
}

fn basis(k: usize, x: f64) -> Complex64 {
    Complex64::from_polar(1.0, (k as f64 - 1.0) * x)
}

/// Least squares over the span of `e_k, k in indices`; weighted minimum norm
/// (`w_k = p_k`) once the model can interpolate (`N >= n`).
pub fn fit_circle(
    data: &CircleSample,
    indices: &[usize],
    dist: &FrequencyDistribution,
) -> Result<CircleFit> {
    let (n, big_n) = (data.x.len(), indices.len());
    if n == 0 || big_n == 0 {
        return Err(Error::InvalidArgument("empty data or model".into()));
    }
    if indices.iter().any(|&k| k == 0 || k > dist.k_max()) {
        return Err(Error::InvalidArgument(
            "frequency index outside 1..=k_max".into(),
        ));
    }
    // Complex system Phi a = y as the real block system
    // [Re -Im; Im Re] [Re a; Im a] = [Re y; Im y].
    let mut design = DMatrix::zeros(2 * n, 2 * big_n);
    for (i, &x) in data.x.iter().enumerate() {
        for (j, &k) in indices.iter().enumerate() {
            let e = basis(k, x);
            design[(i, j)] = e.re;
            design[(i, big_n + j)] = -e.im;
            design[(n + i, j)] = e.im;
            design[(n + i, big_n + j)] = e.re;
        }
    }
    let mut rhs = DMatrix::zeros(2 * n, 1);
    for (i, y) in data.y.iter().enumerate() {
        rhs[i] = y.re;
        rhs[n + i] = y.im;
    }
    let weights: Option<Vec<f64>> = (big_n >= n).then(|| {
        indices
            .iter()
            .chain(indices.iter())
            .map(|&k| dist.prob(k))
            .collect()
    });
    let sol = solve_min_norm(&design, &rhs, DEFAULT_RANK_TOL, weights.as_deref())?;
    let coefficients = (0..big_n)
        .map(|j| Complex64::new(sol.coefficients[j], sol.coefficients[big_n + j]))
        .collect();
    Ok(CircleFit {
        indices: indices.to_vec(),
        coefficients,
        rank: sol.rank / 2,
        condition: sol.condition,
        train_sq: sol.residual_sq / n as f64,
    })
}

/// Tolerance for the grid / Parseval agreement check, relative to
/// `max(1, risk)`.
pub const PARSEVAL_TOL: f64 = 1e-8;

/// `(1/M) sum_grid |h - h*|^2`, cross-checked against
/// `sum_k |a_k - a*_k|^2`.
pub fn excess_risk(fit: &CircleFit, target: &CircleTarget, spec: &CircleSpec) -> Result<f64> {
    let m = spec.grid_size;
    if fit.indices.iter().any(|&k| k > m) || target.coefficients.len() > m {
        return Err(Error::InvalidArgument(
            "frequency index exceeds grid size".into(),
        ));
    }
    let eval = GridEvaluator::new(m);
    let h = eval.eval(fit.terms());
    let h_star = eval.eval(
        target
            .coefficients
            .iter()
            .copied()
            .enumerate()
            .map(|(i, c)| (i + 1, c)),
    );
    let grid = h
        .iter()
        .zip(&h_star)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / m as f64;

    let len = m.max(target.coefficients.len());
    let mut diff = vec![Complex64::new(0.0, 0.0); len];
    for (i, c) in target.coefficients.iter().enumerate() {
        diff[i] -= c;
    }
    for (k, c) in fit.terms() {
        diff[k - 1] += c;
    }
    let parseval: f64 = diff.iter().map(|c| c.norm_sqr()).sum();
    if (grid - parseval).abs() > PARSEVAL_TOL * grid.max(1.0) {
        return Err(Error::Solver(format!(
            "grid risk {grid:e} disagrees with coefficient-space risk {parseval:e}"
        )));
    }
    Ok(grid)
}

/// `sqrt(sum_j |a_j|^2 / p_{k_j})`.
pub fn weighted_norm(fit: &CircleFit, dist: &FrequencyDistribution) -> f64 {
    fit.terms()
        .map(|(k, c)| c.norm_sqr() / dist.prob(k))
        .sum::<f64>()
        .sqrt()
}

/// Outcome of one (trial, N) cell of the circle experiment.
#[derive(Debug, Clone, Copy)]
pub struct CircleOutcome {
    pub excess_risk: f64,
    pub weighted_norm: f64,
    pub train_sq: f64,
    pub rank: usize,
}

/// Seed of trial `trial`'s data; shared by every capacity in that trial.
pub fn data_seed(base: u64, trial: u64) -> u64 {
    seed::derive_seed(base, &[seed::fnv1a("circle-data"), trial])
}

/// Seed of the frequency subset drawn for capacity `n_features` in `trial`.
pub fn index_seed(base: u64, trial: u64, n_features: u64) -> u64 {
    seed::derive_seed(base, &[seed::fnv1a("circle-indices"), trial, n_features])
}

/// Runs one cell: data from `data_seed(base, trial)`, frequencies from
/// `index_seed(base, trial, n_features)`.
pub fn run_cell(
    spec: &CircleSpec,
    n: usize,
    n_features: usize,
    base_seed: u64,
    trial: u64,
) -> Result<CircleOutcome> {
    let dist = FrequencyDistribution::new(spec.k_max)?;
    let target = CircleTarget::from_distribution(&dist);
    let data = generate_data(spec, &target, n, data_seed(base_seed, trial))?;
    let indices =
        dist.sample_indices(n_features, index_seed(base_seed, trial, n_features as u64))?;
    let fit = fit_circle(&data, &indices, &dist)?;
    Ok(CircleOutcome {
        excess_risk: excess_risk(&fit, &target, spec)?,
        weighted_norm: weighted_norm(&fit, &dist),
        train_sq: fit.train_sq,
        rank: fit.rank,
    })
}
