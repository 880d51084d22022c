//! Capacity sweeps: run a model family over a capacity grid, aggregate
//! risks and norms over repeats, locate the interpolation threshold and
//! write CSV, JSON metadata and SVG plots.

mod config;
mod output;
mod plot;
mod run;

pub use config::{
    BoostConfig, CapacityUnit, DatasetConfig, DatasetSource, Family, ForestConfig, ForestMode,
    KernelConfig, NetConfig, NormKind, RandomFeatureConfig, SweepConfig, SyntheticConfig,
    ThresholdCriterion,
};
pub use output::{emit_csv, emit_metadata, read_csv, write_csv, CSV_HEADER};
pub use plot::{emit_plot, render_svg, PlotData};
pub use run::{load_data, run_sweep, CellOutcome, NetHistory, TrainTest};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::argmax_rows;

/// `(squared, zero_one)`: squared is the mean over rows of the summed
/// squared error over outputs; zero-one counts rows whose argmax (ties to
/// the lowest index) differs from the class id.
pub fn compute_risks(
    predictions: &DMatrix<f64>,
    labels_onehot: &DMatrix<f64>,
    class_ids: &[usize],
) -> Result<(f64, f64)> {
    if predictions.shape() != labels_onehot.shape() || predictions.nrows() != class_ids.len() {
        return Err(Error::Dimension(format!(
            "predictions {:?}, labels {:?}, {} class ids",
            predictions.shape(),
            labels_onehot.shape(),
            class_ids.len()
        )));
    }
    if predictions.nrows() == 0 {
        return Err(Error::InvalidArgument("no rows to score".into()));
    }
    crate::error::ensure_finite(predictions.iter(), "predictions")?;
    let n = predictions.nrows() as f64;
    let squared = (predictions - labels_onehot).norm_squared() / n;
    let wrong = argmax_rows(predictions)
        .iter()
        .zip(class_ids)
        .filter(|(p, c)| p != c)
        .count();
    Ok((squared, wrong as f64 / n))
}

/// Mean and population standard deviation over repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        Some(Stat {
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskPoint {
    pub family: String,
    /// Model capacity; `-1` on reference rows.
    pub capacity: i64,
    /// Repeats that completed.
    pub repeat_count: usize,
    pub train_sq: Option<Stat>,
    pub test_sq: Option<Stat>,
    pub train_01: Option<Stat>,
    pub test_01: Option<Stat>,
    pub norm: Option<Stat>,
    pub norm_kind: NormKind,
    /// `ok`, or a description of the failed repeats.
    pub status: String,
}

impl RiskPoint {
    pub fn is_reference(&self) -> bool {
        self.capacity < 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Capacity-ordered rows followed by reference rows.
    pub points: Vec<RiskPoint>,
    pub threshold_squared: Option<i64>,
    pub threshold_zero_one: Option<i64>,
    pub metadata: Metadata,
    #[serde(skip)]
    pub histories: Vec<NetHistory>,
}

impl SweepResult {
    pub fn curve(&self) -> impl Iterator<Item = &RiskPoint> {
        self.points.iter().filter(|p| !p.is_reference())
    }

    pub fn references(&self) -> impl Iterator<Item = &RiskPoint> {
        self.points.iter().filter(|p| p.is_reference())
    }

    /// The threshold under the configured criterion.
    pub fn threshold(&self) -> Option<i64> {
        match self.config.criterion() {
            ThresholdCriterion::Squared => self.threshold_squared,
            ThresholdCriterion::ZeroOne => self.threshold_zero_one,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub crate_version: String,
    pub base_seed: u64,
    /// Formula used for per-cell seeds.
    pub seed_rule: String,
    pub squared_risk: String,
    pub capacity_meaning: String,
    pub norm_meaning: String,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub notes: Vec<String>,
}

/// Smallest capacity whose mean training risk meets the criterion: squared
/// risk `<= tol`, or zero-one risk `== 0`.
pub fn detect_interpolation_threshold(
    points: &[RiskPoint],
    criterion: ThresholdCriterion,
    tol: f64,
) -> Option<i64> {
    points
        .iter()
        .filter(|p| !p.is_reference())
        .find(|p| match criterion {
            ThresholdCriterion::Squared => p.train_sq.is_some_and(|s| s.mean <= tol),
            ThresholdCriterion::ZeroOne => p.train_01.is_some_and(|s| s.mean == 0.0),
        })
        .map(|p| p.capacity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMetric {
    TestSquared,
    TestZeroOne,
}

impl RiskMetric {
    fn of(self, p: &RiskPoint) -> Option<Stat> {
        match self {
            RiskMetric::TestSquared => p.test_sq,
            RiskMetric::TestZeroOne => p.test_01,
        }
    }
}

/// Outcome of the double-descent shape check around a threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeCheck {
    pub threshold: i64,
    /// Test risk at the threshold exceeds both neighbours.
    pub peak_at_threshold: bool,
    /// Best test risk beyond the threshold is no worse than the best before it.
    pub second_descent: bool,
    /// Norm is largest at the threshold.
    pub norm_peak: bool,
    /// Norm never rises by more than `slack` standard deviations past the threshold.
    pub norm_nonincreasing_after: bool,
}

impl ShapeCheck {
    pub fn holds(&self) -> bool {
        self.peak_at_threshold
            && self.second_descent
            && self.norm_peak
            && self.norm_nonincreasing_after
    }
}

/// Checks the double-descent pattern at `threshold`, allowing comparisons
/// to be off by `slack` repeat standard deviations.
pub fn check_double_descent(
    points: &[RiskPoint],
    threshold: i64,
    metric: RiskMetric,
    slack: f64,
) -> Result<ShapeCheck> {
    let curve: Vec<&RiskPoint> = points.iter().filter(|p| !p.is_reference()).collect();
    let at = curve
        .iter()
        .position(|p| p.capacity == threshold)
        .ok_or_else(|| Error::InvalidArgument(format!("threshold {threshold} not on the grid")))?;
    let risk = |i: usize| metric.of(curve[i]);
    let norm = |i: usize| curve[i].norm;
    let peak = risk(at).ok_or_else(|| Error::InvalidArgument("no risk at the threshold".into()))?;
    let neighbours = [at.checked_sub(1), (at + 1 < curve.len()).then_some(at + 1)];
    let peak_at_threshold = neighbours
        .iter()
        .flatten()
        .all(|&j| risk(j).is_some_and(|r| r.mean < peak.mean + slack * (r.std + peak.std)));
    let best = |range: std::ops::Range<usize>| {
        range
            .filter_map(risk)
            .min_by(|a, b| a.mean.total_cmp(&b.mean))
    };
    let second_descent = match (best(0..at), best(at + 1..curve.len())) {
        (Some(before), Some(after)) => after.mean <= before.mean + slack * (after.std + before.std),
        _ => false,
    };
    let norm_peak = match norm(at) {
        Some(n_at) => (0..curve.len())
            .filter(|&j| j != at)
            .all(|j| norm(j).is_none_or(|n| n.mean <= n_at.mean)),
        None => false,
    };
    let norm_nonincreasing_after =
        (at..curve.len().saturating_sub(1)).all(|j| match (norm(j), norm(j + 1)) {
            (Some(a), Some(b)) => b.mean <= a.mean + slack * a.std.max(b.std),
            _ => false,
        });
    Ok(ShapeCheck {
        threshold,
        peak_at_threshold,
        second_descent,
        norm_peak,
        norm_nonincreasing_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(capacity: i64, train: f64, test: f64, norm: f64) -> RiskPoint {
        let s = |v: f64| Some(Stat { mean: v, std: 0.0 });
        RiskPoint {
            family: "rff".into(),
            capacity,
            repeat_count: 1,
            train_sq: s(train),
            test_sq: s(test),
            train_01: s(train),
            test_01: s(test),
            norm: s(norm),
            norm_kind: NormKind::CoefL2,
            status: "ok".into(),
        }
    }

    #[test]
    fn risk_examples() {
        let labels = crate::dataset::one_hot_encode(&[0, 1, 1], 2).unwrap();
        assert_eq!(
            compute_risks(&labels, &labels, &[0, 1, 1]).unwrap(),
            (0.0, 0.0)
        );

        let p = DMatrix::from_row_slice(3, 2, &[0.9, 0.1, 0.2, 0.8, 0.6, 0.4]);
        let (sq, zo) = compute_risks(&p, &labels, &[0, 1, 1]).unwrap();
        assert!((sq - (0.02 + 0.08 + 0.72) / 3.0).abs() < 1e-15);
        assert!((zo - 1.0 / 3.0).abs() < 1e-15);

        let uniform = DMatrix::from_element(4, 10, 0.1);
        let onehot = crate::dataset::one_hot_encode(&[0; 4], 10).unwrap();
        assert_eq!(compute_risks(&uniform, &onehot, &[0; 4]).unwrap().1, 0.0);

        assert!(compute_risks(&p, &onehot, &[0; 4]).is_err());
        let mut bad = p.clone();
        bad[0] = f64::NAN;
        assert!(compute_risks(&bad, &labels, &[0, 1, 1]).is_err());
    }

    #[test]
    fn threshold_examples() {
        let pts: Vec<RiskPoint> = [0.5, 0.1, 0.0, 0.0]
            .iter()
            .enumerate()
            .map(|(i, &t)| point(i as i64 + 1, t, 0.0, 0.0))
            .collect();
        assert_eq!(
            detect_interpolation_threshold(&pts, ThresholdCriterion::Squared, 1e-6),
            Some(3)
        );
        assert_eq!(
            detect_interpolation_threshold(&pts, ThresholdCriterion::ZeroOne, 0.0),
            Some(3)
        );
        let never: Vec<RiskPoint> = (1..4).map(|c| point(c, 0.2, 0.0, 0.0)).collect();
        assert_eq!(
            detect_interpolation_threshold(&never, ThresholdCriterion::Squared, 1e-6),
            None
        );
    }

    #[test]
    fn shape_check_on_textbook_curve() {
        let pts = vec![
            point(1, 0.5, 0.40, 1.0),
            point(2, 0.2, 0.30, 2.0),
            point(3, 0.0, 0.90, 9.0),
            point(4, 0.0, 0.35, 4.0),
            point(5, 0.0, 0.25, 3.0),
        ];
        let c = check_double_descent(&pts, 3, RiskMetric::TestSquared, 0.0).unwrap();
        assert!(c.holds(), "{c:?}");
        let mut flat = pts.clone();
        flat[4].norm = Some(Stat {
            mean: 5.0,
            std: 0.0,
        });
        assert!(
            !check_double_descent(&flat, 3, RiskMetric::TestSquared, 0.0)
                .unwrap()
                .norm_nonincreasing_after
        );
        assert!(check_double_descent(&pts, 7, RiskMetric::TestSquared, 0.0).is_err());
    }

    #[test]
    fn stats() {
        assert_eq!(Stat::of(&[]), None);
        let s = Stat::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }
}
