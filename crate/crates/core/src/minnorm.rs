//! Minimum-norm least squares.
//!
//! All solves go through a thin SVD of the design obtained by first taking a
//! Householder QR of its tall orientation (the design itself when `n >= D`,
//! its transpose otherwise) and then decomposing the small square triangular
//! factor with faer. Singular values below `rank_tol * s_max` are treated as
//! zero, so the returned coefficients are the pseudoinverse solution: the least
//! squares minimizer of smallest norm.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, Error, Result};

pub const DEFAULT_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// `D x K`, one column per output.
    pub coefficients: DMatrix<f64>,
    pub rank: usize,
    /// Frobenius norm of `coefficients` (unweighted).
    pub coefficient_norm: f64,
    /// Sum of squared residuals over all rows and outputs.
    pub residual_sq: f64,
    /// Ratio of the largest to the smallest retained singular value.
    pub condition: f64,
}

/// Thin SVD `design = U diag(s) V^T`, `U: n x r`, `V: D x r`, `r = min(n, D)`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// `(U, s, V)` of a small square matrix, singular values nonincreasing.
///
/// Goes through faer: nalgebra's SVD loses accuracy (reconstruction errors
/// around 1e-1) on exactly rank-deficient inputs.
fn square_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let k = m.nrows();
    let fm = faer::Mat::<f64>::from_fn(k, m.ncols(), |i, j| m[(i, j)]);
    let svd = fm
        .thin_svd()
        .map_err(|e| Error::Solver(format!("SVD did not converge: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    Ok((
        DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        DVector::from_fn(s.nrows(), |i, _| s[i]),
        DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    ))
}

impl ThinSvd {
    pub fn new(design: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = design.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument("empty design matrix".into()));
        }
        ensure_finite(design.iter(), "design matrix")?;
        let tall = n >= d;
        let qr = if tall {
            design.clone().qr()
        } else {
            design.transpose().qr()
        };
        let q = qr.q();
        let r = qr.r();
        if tall {
            // design = Q R,  R = Ur S Vr^T
            let (ur, s, vr) = square_svd(&r)?;
            Ok(ThinSvd { u: &q * ur, s, v: vr })
        } else {
            // design = R^T Q^T,  R^T = Ur S Vr^T
            let (ur, s, vr) = square_svd(&r.transpose())?;
            Ok(ThinSvd { u: ur, s, v: &q * vr })
        }
    }

    pub fn rank(&self, rank_tol: f64) -> usize {
        let cut = rank_tol * self.s.max();
        self.s.iter().filter(|&&s| s > cut).count()
    }

    /// Component of `z` orthogonal to the row space of the design: a vector
    /// in its (numerical) null space.
    pub fn project_to_null_space(&self, z: &DVector<f64>, rank_tol: f64) -> DVector<f64> {
        let cut = rank_tol * self.s.max();
        let mut out = z.clone();
        for (j, &s) in self.s.iter().enumerate() {
            if s > cut {
                let vj = self.v.column(j);
                let c = vj.dot(z);
                out.axpy(-c, &vj, 1.0);
            }
        }
        out
    }

    /// `V diag(f(s)) U^T targets` for a spectral filter `f`.
    fn filtered_solve(&self, targets: &DMatrix<f64>, filter: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut ut_y = self.u.transpose() * targets;
        for (i, mut row) in ut_y.row_iter_mut().enumerate() {
            row *= filter(self.s[i]);
        }
        &self.v * ut_y
    }
}

fn check_system(design: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<()> {
    if design.nrows() == 0 || design.ncols() == 0 || targets.ncols() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if design.nrows() != targets.nrows() {
        return Err(Error::Dimension(format!(
            "design has {} rows, targets {}",
            design.nrows(),
            targets.nrows()
        )));
    }
    ensure_finite(design.iter(), "design matrix")?;
    ensure_finite(targets.iter(), "targets")
}

fn finish(
    design: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    coefficients: DMatrix<f64>,
    rank: usize,
    condition: f64,
) -> Result<SolveResult> {
    ensure_finite(coefficients.iter(), "solution coefficients")
        .map_err(|_| Error::Solver(format!("non-finite solution (condition {condition:e})")))?;
    let residual_sq = (design * &coefficients - targets).norm_squared();
    Ok(SolveResult {
        coefficient_norm: coefficients.norm(),
        coefficients,
        rank,
        residual_sq,
        condition,
    })
}

/// Minimum-norm least squares solution of `design * A ~ targets`.
///
/// With `weights`, the selected minimizer minimizes `sum_j a_j^2 / w_j`
/// instead: column `j` is scaled by `sqrt(w_j)`, the unweighted problem is
/// solved, and the solution is scaled back.
pub fn solve_min_norm(
    design: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    rank_tol: f64,
    weights: Option<&[f64]>,
) -> Result<SolveResult> {
    check_system(design, targets)?;
    if !(rank_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rank_tol {rank_tol} must be >= 0"
        )));
    }
    let scale: Option<Vec<f64>> = match weights {
        None => None,
        Some(w) => {
            if w.len() != design.ncols() {
                return Err(Error::Dimension(format!(
                    "{} weights for {} columns",
                    w.len(),
                    design.ncols()
                )));
            }
            if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::InvalidArgument(
                    "weights must be positive and finite".into(),
                ));
            }
            Some(w.iter().map(|x| x.sqrt()).collect())
        }
    };
    let scaled;
    let work = match &scale {
        None => design,
        Some(sc) => {
            let mut m = design.clone();
            for (j, mut col) in m.column_iter_mut().enumerate() {
                col *= sc[j];
            }
            scaled = m;
            &scaled
        }
    };
    let svd = ThinSvd::new(work)?;
    let cut = rank_tol * svd.s.max();
    let rank = svd.rank(rank_tol);
    let smallest = svd
        .s
        .iter()
        .copied()
        .filter(|&s| s > cut)
        .fold(f64::INFINITY, f64::min);
    let condition = svd.s.max() / smallest;
    let mut coef = svd.filtered_solve(targets, |s| if s > cut { 1.0 / s } else { 0.0 });
    if let Some(sc) = &scale {
        for (j, mut row) in coef.row_iter_mut().enumerate() {
            row *= sc[j];
        }
    }
    finish(design, targets, coef, rank, condition)
}

/// Ridge regression: minimizes `(1/n) ||design A - targets||^2 + lambda ||A||^2`,
/// i.e. `||design A - targets||^2 + lambda n ||A||^2`.
pub fn solve_ridge(
    design: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    lambda: f64,
) -> Result<SolveResult> {
    check_system(design, targets)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda {lambda} must be positive"
        )));
    }
    let shift = lambda * design.nrows() as f64;
    let svd = ThinSvd::new(design)?;
    let coef = svd.filtered_solve(targets, |s| s / (s * s + shift));
    let rank = svd.rank(DEFAULT_RANK_TOL);
    let smin = svd.s.min();
    let condition = (svd.s.max().powi(2) + shift) / (smin * smin + shift);
    finish(design, targets, coef, rank, condition)
}

/// Frobenius norm of the coefficients, times `sqrt(D)` when requested.
pub fn coefficient_norm(result: &SolveResult, scale_by_sqrt_n_features: bool) -> f64 {
    let norm = result.coefficients.norm();
    if scale_by_sqrt_n_features {
        norm * (result.coefficients.nrows() as f64).sqrt()
    } else {
        norm
    }
}

/// `sqrt(sum_j |a_j|^2 / w_j)` summed over outputs.
pub fn weighted_norm(coefficients: &DMatrix<f64>, weights: &[f64]) -> f64 {
    coefficients
        .row_iter()
        .zip(weights)
        .map(|(row, w)| row.norm_squared() / w)
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seed::rng(seed);
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn identity_system() {
        let r = solve_min_norm(
            &DMatrix::identity(2, 2),
            &DMatrix::from_column_slice(2, 1, &[1.0, 2.0]),
            DEFAULT_RANK_TOL,
            None,
        )
        .unwrap();
        assert!((r.coefficients[0] - 1.0).abs() < 1e-14);
        assert!((r.coefficients[1] - 2.0).abs() < 1e-14);
        assert!(r.residual_sq < 1e-28);
        assert_eq!(r.rank, 2);
    }

    #[test]
    fn min_norm_point_on_line() {
        let r = solve_min_norm(
            &DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            &DMatrix::from_element(1, 1, 2.0),
            DEFAULT_RANK_TOL,
            None,
        )
        .unwrap();
        assert!((r.coefficients[0] - 1.0).abs() < 1e-14);
        assert!((r.coefficients[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wide_system_matches_row_space_normal_equations() {
        let a = gaussian(5, 8, 11);
        let y = gaussian(5, 1, 12);
        let r = solve_min_norm(&a, &y, DEFAULT_RANK_TOL, None).unwrap();
        let gram = &a * a.transpose();
        let oracle = a.transpose() * gram.lu().solve(&y).unwrap();
        assert!((&r.coefficients - oracle).amax() < 1e-8);
    }

    #[test]
    fn rank_deficient_tall_system() {
        // third column duplicates the first: rank 2
        let mut a = gaussian(6, 3, 5);
        let c0 = a.column(0).clone_owned();
        a.set_column(2, &c0);
        let y = gaussian(6, 1, 6);
        let r = solve_min_norm(&a, &y, 1e-10, None).unwrap();
        assert_eq!(r.rank, 2);
        // min norm splits the shared weight evenly between the twin columns
        assert!((r.coefficients[0] - r.coefficients[2]).abs() < 1e-10);
    }

    #[test]
    fn unit_weights_match_unweighted() {
        let a = gaussian(4, 9, 1);
        let y = gaussian(4, 2, 2);
        let plain = solve_min_norm(&a, &y, DEFAULT_RANK_TOL, None).unwrap();
        let weighted = solve_min_norm(&a, &y, DEFAULT_RANK_TOL, Some(&[1.0; 9])).unwrap();
        assert!((plain.coefficients - weighted.coefficients).amax() < 1e-10);
    }

    #[test]
    fn weighted_min_norm_single_constraint() {
        // x + y = 1 with weights (4, 1): minimize x^2/4 + y^2 -> x = 4/5, y = 1/5
        let r = solve_min_norm(
            &DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            &DMatrix::from_element(1, 1, 1.0),
            DEFAULT_RANK_TOL,
            Some(&[4.0, 1.0]),
        )
        .unwrap();
        assert!((r.coefficients[0] - 0.8).abs() < 1e-14);
        assert!((r.coefficients[1] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn ridge_closed_forms() {
        // 1x1 identity, n = 1: a = 1 / (1 + lambda)
        for lambda in [0.5, 1.0, 3.0] {
            let r = solve_ridge(
                &DMatrix::identity(1, 1),
                &DMatrix::from_element(1, 1, 1.0),
                lambda,
            )
            .unwrap();
            assert!((r.coefficients[0] - 1.0 / (1.0 + lambda)).abs() < 1e-15);
        }
        let a = gaussian(7, 3, 3);
        let y = gaussian(7, 2, 4);
        let huge = solve_ridge(&a, &y, 1e9).unwrap();
        assert!(huge.coefficients.amax() < 1e-6);

        let at = a.transpose();
        let ols = (&at * &a).lu().solve(&(&at * &y)).unwrap();
        let tiny = solve_ridge(&a, &y, 1e-12).unwrap();
        assert!((tiny.coefficients - ols).amax() < 1e-6);
    }

    #[test]
    fn norm_helpers() {
        let r = SolveResult {
            coefficients: DMatrix::from_column_slice(2, 1, &[3.0, 4.0]),
            rank: 1,
            coefficient_norm: 5.0,
            residual_sq: 0.0,
            condition: 1.0,
        };
        assert_eq!(coefficient_norm(&r, false), 5.0);
        let ones = SolveResult {
            coefficients: DMatrix::from_element(4, 1, 1.0),
            ..r.clone()
        };
        assert_eq!(coefficient_norm(&ones, true), 4.0);
        let zero = SolveResult {
            coefficients: DMatrix::zeros(3, 2),
            ..r
        };
        assert_eq!(coefficient_norm(&zero, true), 0.0);
        assert_eq!(
            weighted_norm(&DMatrix::from_element(1, 1, 0.5), &[0.25]),
            1.0
        );
    }

    #[test]
    fn rejects_bad_input() {
        let a = DMatrix::from_element(2, 2, f64::NAN);
        let y = DMatrix::zeros(2, 1);
        assert!(matches!(
            solve_min_norm(&a, &y, DEFAULT_RANK_TOL, None),
            Err(Error::NonFinite(_))
        ));
        assert!(solve_min_norm(&DMatrix::zeros(0, 2), &DMatrix::zeros(0, 1), 1e-12, None).is_err());
        assert!(
            solve_min_norm(&DMatrix::identity(2, 2), &DMatrix::zeros(3, 1), 1e-12, None).is_err()
        );
        assert!(solve_ridge(&DMatrix::identity(2, 2), &y, 0.0).is_err());
        assert!(solve_min_norm(&DMatrix::identity(2, 2), &y, 1e-12, Some(&[1.0, -1.0])).is_err());
    }
}
