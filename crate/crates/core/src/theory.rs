//! Fill distance of point sets in the unit cube and a noiseless kernel
//! interpolation experiment relating the sup-norm error of the minimum-norm
//! interpolant to the fill distance and the RKHS norms.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{self, KernelModel};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FillEstimate {
    pub kappa: f64,
    pub n: usize,
    pub d: usize,
    pub probe_count: usize,
}

/// Uniform bucket grid over the unit cube for nearest-point queries.
struct CellIndex<'a> {
    points: &'a [Vec<f64>],
    d: usize,
    side: usize,
    cells: Vec<Vec<usize>>,
}

impl<'a> CellIndex<'a> {
    fn new(points: &'a [Vec<f64>], d: usize) -> Self {
        let side = ((points.len() as f64).powf(1.0 / d as f64).ceil() as usize).max(1);
        let mut idx = CellIndex {
            points,
            d,
            side,
            cells: vec![Vec::new(); side.pow(d as u32)],
        };
        for (i, p) in points.iter().enumerate() {
            let c = idx.cell_of(p);
            idx.cells[c].push(i);
        }
        idx
    }

    fn coord(&self, v: f64) -> usize {
        ((v * self.side as f64).floor().max(0.0) as usize).min(self.side - 1)
    }

    fn cell_of(&self, p: &[f64]) -> usize {
        p.iter().fold(0, |acc, &v| acc * self.side + self.coord(v))
    }

    /// Nearest distance, searching rings of cells outward until the ring
    /// can no longer hold a closer point.
    fn nearest(&self, q: &[f64]) -> f64 {
        let h = 1.0 / self.side as f64;
        let home: Vec<i64> = q.iter().map(|&v| self.coord(v) as i64).collect();
        let mut best = f64::INFINITY;
        for ring in 0..=self.side as i64 {
            // every point outside the current block is at least this far
            if ring > 0 && best <= (ring - 1) as f64 * h {
                break;
            }
            let mut offset = vec![-ring; self.d];
            loop {
                if offset.iter().any(|o| o.abs() == ring) {
                    let mut cell = 0usize;
                    let mut inside = true;
                    for (c, o) in home.iter().zip(&offset) {
                        let v = c + o;
                        if v < 0 || v >= self.side as i64 {
                            inside = false;
                            break;
                        }
                        cell = cell * self.side + v as usize;
                    }
                    if inside {
                        for &i in &self.cells[cell] {
                            let d2: f64 = self.points[i]
                                .iter()
                                .zip(q)
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum();
                            best = best.min(d2.sqrt());
                        }
                    }
                }
                // odometer over [-ring, ring]^d
                let mut k = 0;
                while k < self.d {
                    offset[k] += 1;
                    if offset[k] <= ring {
                        break;
                    }
                    offset[k] = -ring;
                    k += 1;
                }
                if k == self.d {
                    break;
                }
            }
        }
        best
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `max over probes of min over points ||probe - point||`.
pub fn fill_distance(points: &DMatrix<f64>, probes: &DMatrix<f64>) -> Result<FillEstimate> {
    if points.nrows() == 0 || probes.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "fill distance needs points and probes".into(),
        ));
    }
    if points.ncols() != probes.ncols() || points.ncols() == 0 {
        return Err(Error::Dimension(
            "points and probes must share a positive dimension".into(),
        ));
    }
    let d = points.ncols();
    let pts = rows_of(points);
    let index = CellIndex::new(&pts, d);
    let qs = rows_of(probes);
    let kappa = qs
        .par_iter()
        .map(|q| index.nearest(q))
        .reduce(|| 0.0, f64::max);
    Ok(FillEstimate {
        kappa,
        n: points.nrows(),
        d,
        probe_count: probes.nrows(),
    })
}

/// Regular grid with `per_side` nodes per axis, endpoints included.
pub fn grid_probes(d: usize, per_side: usize) -> DMatrix<f64> {
    let per_side = per_side.max(2);
    let total = per_side.pow(d as u32);
    let step = 1.0 / (per_side - 1) as f64;
    DMatrix::from_fn(total, d, |i, j| {
        let idx = (i / per_side.pow((d - 1 - j) as u32)) % per_side;
        idx as f64 * step
    })
}

pub fn uniform_points(n: usize, d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let flat: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
    DMatrix::from_row_slice(n, d, &flat)
}

/// Fill distance over the unit cube on a regular grid plus `random_probes`
/// uniform points, refining the grid until its spacing is at most
/// `kappa / 20`.
pub fn fill_distance_unit_cube(
    points: &DMatrix<f64>,
    random_probes: usize,
    seed: u64,
) -> Result<FillEstimate> {
    let d = points.ncols();
    let mut rng = seed::rng(seed);
    let extra = uniform_points(random_probes, d, &mut rng);
    let mut per_side = 33usize;
    loop {
        let grid = grid_probes(d, per_side);
        let probes = if random_probes > 0 {
            let mut all = DMatrix::zeros(grid.nrows() + extra.nrows(), d);
            all.rows_mut(0, grid.nrows()).copy_from(&grid);
            all.rows_mut(grid.nrows(), extra.nrows()).copy_from(&extra);
            all
        } else {
            grid
        };
        let est = fill_distance(points, &probes)?;
        let spacing = 1.0 / (per_side - 1) as f64;
        if spacing <= est.kappa / 20.0 || est.kappa == 0.0 {
            return Ok(est);
        }
        per_side = ((20.0 / est.kappa).ceil() as usize + 1).max(per_side + 1);
    }
}

/// Exact fill distance in one dimension: half the largest gap, or the
/// distance from the outermost points to the ends of `[0, 1]`.
pub fn fill_distance_1d_exact(points: &[f64]) -> f64 {
    let mut p = points.to_vec();
    p.sort_by(f64::total_cmp);
    let mut best = p[0].max(1.0 - p[p.len() - 1]);
    for w in p.windows(2) {
        best = best.max(0.5 * (w[1] - w[0]));
    }
    best
}

/// `A exp(-B (n / ln n)^(1/d)) (norm_hstar + norm_h)`.
pub fn interpolation_error_bound(
    n: usize,
    d: usize,
    norm_hstar: f64,
    norm_h: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("bound needs n >= 2".into()));
    }
    if d == 0 || !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument(
            "bound needs d >= 1 and A, B > 0".into(),
        ));
    }
    let nf = n as f64;
    Ok(a * (-b * (nf / nf.ln()).powf(1.0 / d as f64)).exp() * (norm_hstar + norm_h))
}

/// Least-squares slope of `log kappa` against `log(n / ln n)`.
pub fn scaling_slope(ns: &[usize], kappas: &[f64]) -> f64 {
    let xs: Vec<f64> = ns
        .iter()
        .map(|&n| (n as f64 / (n as f64).ln()).ln())
        .collect();
    let ys: Vec<f64> = kappas.iter().map(|k| k.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FillScalingRow {
    pub n: usize,
    pub mean_log_kappa: f64,
    pub kappa_geo_mean: f64,
}

/// Geometric-mean fill distance of `trials` uniform samples per `n`.
pub fn fill_scaling(
    d: usize,
    ns: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<FillScalingRow>> {
    ns.iter()
        .map(|&n| {
            let logs = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let s = seed::derive_seed(
                        seed,
                        &[seed::fnv1a("fill"), d as u64, n as u64, t as u64],
                    );
                    let pts = uniform_points(n, d, &mut seed::rng(s));
                    let est = if d == 1 {
                        fill_distance_1d_exact(pts.as_slice())
                    } else {
                        fill_distance_unit_cube(&pts, 256, s ^ 1)?.kappa
                    };
                    Ok(est.ln())
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = logs.iter().sum::<f64>() / trials as f64;
            Ok(FillScalingRow {
                n,
                mean_log_kappa: mean,
                kappa_geo_mean: mean.exp(),
            })
        })
        .collect()
}

/// Gaussian-kernel expansion `h*(x) = sum_j c_j k(x, z_j)`.
#[derive(Debug, Clone)]
pub struct KernelTarget {
    pub model: KernelModel,
}

impl KernelTarget {
    pub fn random(d: usize, centers: usize, sigma: f64, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let z = uniform_points(centers, d, &mut rng);
        let c = DMatrix::from_fn(centers, 1, |_, _| StandardNormal.sample(&mut rng));
        KernelTarget {
            model: KernelModel {
                support: z,
                alpha: c,
                sigma,
                jitter: 0.0,
            },
        }
    }

    pub fn eval(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.model.predict(x)
    }

    pub fn norm(&self) -> f64 {
        self.model.rkhs_norm()
    }
}

/// RKHS norm of a fitted interpolant from `K alpha = y - jitter alpha`,
/// which avoids forming `alpha^T K alpha` with a badly conditioned gram.
pub fn interpolant_norm(model: &KernelModel, y: &DMatrix<f64>) -> f64 {
    let q = (model.alpha.transpose() * (y - &model.alpha * model.jitter)).trace();
    q.max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxConfig {
    pub d: usize,
    pub sigma: f64,
    pub centers: usize,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    /// Nodes per axis of the probe grid for sup errors and fill distances.
    pub probes_per_side: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxRow {
    pub n: usize,
    pub kappa_mean: f64,
    pub sup_error_mean: f64,
    pub sup_error_std: f64,
    pub norm_h_mean: f64,
    pub norm_hstar: f64,
    /// Trials whose interpolant norm exceeded the target norm by more than 1e-8.
    pub norm_violations: usize,
    pub solver_failures: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxReport {
    pub config: ApproxConfig,
    pub rows: Vec<ApproxRow>,
}

struct TrialOutcome {
    kappa: f64,
    sup_error: f64,
    norm_h: f64,
}

fn approx_trial(
    target: &KernelTarget,
    probes: &DMatrix<f64>,
    truth: &DMatrix<f64>,
    d: usize,
    n: usize,
    s: u64,
) -> Result<TrialOutcome> {
    let x = uniform_points(n, d, &mut seed::rng(s));
    let y = target.eval(&x)?;
    let fit = kernel::fit_with_fallback(&x, &y, target.model.sigma, 0.0)?;
    let pred = fit.predict(probes)?;
    let sup_error = (pred - truth).amax();
    Ok(TrialOutcome {
        kappa: fill_distance(&x, probes)?.kappa,
        sup_error,
        norm_h: interpolant_norm(&fit, &y),
    })
}

/// For each `n`, interpolates `h*` on `trials` uniform samples and records
/// the sup-norm error on the probe grid, the fill distance and both norms.
pub fn noiseless_approx_experiment(cfg: &ApproxConfig) -> Result<ApproxReport> {
    if !(1..=2).contains(&cfg.d) {
        return Err(Error::InvalidArgument(format!(
            "dimension {} not in 1..=2",
            cfg.d
        )));
    }
    if cfg.trials == 0 || cfg.centers == 0 || !(cfg.sigma > 0.0) {
        return Err(Error::InvalidArgument(
            "need trials, centers and sigma > 0".into(),
        ));
    }
    let target = KernelTarget::random(
        cfg.d,
        cfg.centers,
        cfg.sigma,
        seed::derive_seed(cfg.seed, &[seed::fnv1a("target")]),
    );
    let norm_hstar = target.norm();
    let probes = grid_probes(cfg.d, cfg.probes_per_side);
    let truth = target.eval(&probes)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let outcomes: Vec<Result<TrialOutcome>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let s = seed::derive_seed(cfg.seed, &[seed::fnv1a("sample"), n as u64, t as u64]);
                approx_trial(&target, &probes, &truth, cfg.d, n, s)
            })
            .collect();
        let ok: Vec<&TrialOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
        let m = ok.len().max(1) as f64;
        let mean = |f: &dyn Fn(&TrialOutcome) -> f64| ok.iter().map(|o| f(o)).sum::<f64>() / m;
        let err_mean = mean(&|o| o.sup_error);
        let err_var = mean(&|o| (o.sup_error - err_mean).powi(2));
        rows.push(ApproxRow {
            n,
            kappa_mean: mean(&|o| o.kappa),
            sup_error_mean: err_mean,
            sup_error_std: err_var.sqrt(),
            norm_h_mean: mean(&|o| o.norm_h),
            norm_hstar,
            norm_violations: ok.iter().filter(|o| o.norm_h > norm_hstar + 1e-8).count(),
            solver_failures: outcomes.len() - ok.len(),
            trials: cfg.trials,
        });
    }
    Ok(ApproxReport {
        config: cfg.clone(),
        rows,
    })
}

/// Solves `log(err / norms) = log A - B (n / ln n)^(1/d)` through the first
/// two rows and returns `(A, B)`.
pub fn fit_bound_constants(report: &ApproxReport) -> Result<(f64, f64)> {
    if report.rows.len() < 2 {
        return Err(Error::InvalidArgument(
            "need two rows to fit the bound".into(),
        ));
    }
    let d = report.config.d as f64;
    let point = |r: &ApproxRow| {
        let nf = r.n as f64;
        let t = (nf / nf.ln()).powf(1.0 / d);
        (t, (r.sup_error_mean / (r.norm_hstar + r.norm_h_mean)).ln())
    };
    let (t0, l0) = point(&report.rows[0]);
    let (t1, l1) = point(&report.rows[1]);
    let b = (l0 - l1) / (t1 - t0);
    let a = (l0 + b * t0).exp();
    if !(a > 0.0 && b > 0.0 && a.is_finite()) {
        return Err(Error::Solver(format!(
            "fitted constants A={a}, B={b} are not positive"
        )));
    }
    Ok((a, b))
}
