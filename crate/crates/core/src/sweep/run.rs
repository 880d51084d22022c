use nalgebra::DMatrix;
use rayon::prelude::*;

use super::config::{
    CapacityUnit, DatasetConfig, DatasetSource, Family, ForestMode, NormKind, SweepConfig,
};
use super::{
    compute_risks, detect_interpolation_threshold, Metadata, RiskPoint, Stat, SweepResult,
    ThresholdCriterion,
};
use crate::circle::{self, CircleSpec};
use crate::dataset::{self, ColumnScaler, Dataset};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMap, FeatureSpec};
use crate::kernel;
use crate::minnorm::{coefficient_norm, solve_min_norm};
use crate::nn::{self, InitMode, Regime, TrainHistory, TwoLayerNet};
use crate::seed;
use crate::trees::{self, BoostParams, ForestParams};

#[derive(Debug, Clone)]
pub struct TrainTest {
    pub train: Dataset,
    pub test: Dataset,
}

fn align_classes(a: Dataset, b: Dataset) -> Result<(Dataset, Dataset)> {
    let k = a.n_classes().max(b.n_classes());
    let widen = |d: Dataset| -> Result<Dataset> {
        if d.n_classes() == k {
            Ok(d)
        } else {
            Dataset::new(d.features().clone(), d.class_ids().to_vec(), k)
        }
    };
    Ok((widen(a)?, widen(b)?))
}

/// Loads, subsamples and scales the train/test pair. Scaling statistics
/// come from the training rows only.
pub fn load_data(cfg: &DatasetConfig) -> Result<TrainTest> {
    let (train, test) = match &cfg.source {
        DatasetSource::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            n_classes,
        } => (
            dataset::load_idx_pair(train_images, train_labels, *n_classes)?,
            dataset::load_idx_pair(test_images, test_labels, *n_classes)?,
        ),
        DatasetSource::Csv { train, test } => {
            align_classes(dataset::load_csv(train)?, dataset::load_csv(test)?)?
        }
        DatasetSource::NoisyTwoClass {
            train_size,
            test_size,
            dim,
            flip,
            seed,
        } => (
            dataset::noisy_two_class(*train_size, *dim, *flip, seed::derive_seed(*seed, &[0]))?,
            dataset::noisy_two_class(*test_size, *dim, *flip, seed::derive_seed(*seed, &[1]))?,
        ),
    };
    if train.dim() != test.dim() {
        return Err(Error::Dimension(format!(
            "train has {} features, test {}",
            train.dim(),
            test.dim()
        )));
    }
    let train = match cfg.n_train {
        Some(n) => dataset::subsample(&train, n, cfg.subsample_seed)?,
        None => train,
    };
    let test = match cfg.n_test {
        Some(n) => dataset::subsample(&test, n, seed::derive_seed(cfg.subsample_seed, &[1]))?,
        None => test,
    };
    let scaler = ColumnScaler::fit(train.features(), cfg.scaling)?;
    Ok(TrainTest {
        train: train.with_features(scaler.apply(train.features())?)?,
        test: test.with_features(scaler.apply(test.features())?)?,
    })
}

/// Risks and norm of one fitted model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOutcome {
    pub train_sq: f64,
    pub test_sq: f64,
    pub train_01: Option<f64>,
    pub test_01: Option<f64>,
    pub norm: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct NetHistory {
    pub hidden: usize,
    pub capacity: usize,
    pub repeat: usize,
    pub history: TrainHistory,
}

fn scored(
    data: &TrainTest,
    train_pred: &DMatrix<f64>,
    test_pred: &DMatrix<f64>,
    norm: Option<f64>,
) -> Result<CellOutcome> {
    let (train_sq, train_01) =
        compute_risks(train_pred, data.train.labels(), data.train.class_ids())?;
    let (test_sq, test_01) = compute_risks(test_pred, data.test.labels(), data.test.class_ids())?;
    Ok(CellOutcome {
        train_sq,
        test_sq,
        train_01: Some(train_01),
        test_01: Some(test_01),
        norm,
    })
}

fn random_features(
    cfg: &SweepConfig,
    data: &TrainTest,
    capacity: usize,
    repeat: usize,
) -> Result<CellOutcome> {
    let kind = match cfg.family {
        Family::Rff => FeatureKind::Fourier,
        _ => FeatureKind::Relu,
    };
    let n_features = match (kind, cfg.rff.capacity_unit) {
        (FeatureKind::Fourier, CapacityUnit::RealParams) => {
            if capacity % 2 != 0 {
                return Err(Error::Config(format!(
                    "capacity {capacity} is odd but Fourier features carry two real parameters"
                )));
            }
            capacity / 2
        }
        _ => capacity,
    };
    let map = FeatureMap::sample(FeatureSpec {
        kind,
        n_features,
        sigma: cfg.rff.sigma,
        input_dim: data.train.dim(),
        seed: seed::cell_seed(
            cfg.base_seed,
            cfg.family.name(),
            capacity as u64,
            repeat as u64,
        ),
    })?;
    let design = map.featurize(data.train.features())?;
    let fit = solve_min_norm(&design, data.train.labels(), cfg.rff.rank_tol, None)?;
    let train_pred = &design * &fit.coefficients;
    drop(design);
    let test_pred = map.predict(&fit.coefficients, data.test.features())?;
    let norm = coefficient_norm(&fit, cfg.rff.norm == NormKind::CoefL2Scaled);
    scored(data, &train_pred, &test_pred, Some(norm))
}

fn kernel_machine(cfg: &SweepConfig, data: &TrainTest) -> Result<CellOutcome> {
    let model = kernel::fit_with_fallback(
        data.train.features(),
        data.train.labels(),
        cfg.kernel_sigma(),
        cfg.kernel.jitter,
    )?;
    let train_pred = model.predict(data.train.features())?;
    let test_pred = model.predict(data.test.features())?;
    scored(data, &train_pred, &test_pred, Some(model.rkhs_norm()))
}

fn forest(
    cfg: &SweepConfig,
    data: &TrainTest,
    capacity: usize,
    repeat: usize,
) -> Result<CellOutcome> {
    let n = data.train.n();
    let (n_tree, max_leaves) = if capacity <= n {
        (1, capacity)
    } else if capacity % n == 0 {
        (capacity / n, n)
    } else {
        return Err(Error::Config(format!(
            "forest capacity {capacity} above n = {n} must be a multiple of n"
        )));
    };
    let f = trees::fit_forest(
        data.train.features(),
        data.train.labels(),
        ForestParams {
            n_tree,
            max_leaves,
            mtry: cfg.forest.mtry,
            bootstrap: cfg.forest.mode == ForestMode::Bootstrap,
        },
        seed::cell_seed(
            cfg.base_seed,
            cfg.family.name(),
            capacity as u64,
            repeat as u64,
        ),
    )?;
    scored(
        data,
        &f.predict(data.train.features()),
        &f.predict(data.test.features()),
        None,
    )
}

/// Splits a boosting capacity into `(n_tree, n_forest)` at fixed leaves.
pub(crate) fn boost_layout(
    capacity: usize,
    max_leaves: usize,
    n_tree_max: usize,
) -> Result<(usize, usize)> {
    let bad = || {
        Error::Config(format!(
            "boosting capacity {capacity} must be a multiple of {max_leaves} leaves, and of \
             {} once it exceeds {n_tree_max} trees",
            max_leaves * n_tree_max
        ))
    };
    if capacity % max_leaves != 0 {
        return Err(bad());
    }
    let members = capacity / max_leaves;
    if members <= n_tree_max {
        Ok((members, 1))
    } else if members % n_tree_max == 0 {
        Ok((n_tree_max, members / n_tree_max))
    } else {
        Err(bad())
    }
}

fn boost(
    cfg: &SweepConfig,
    data: &TrainTest,
    capacity: usize,
    repeat: usize,
) -> Result<CellOutcome> {
    let (n_tree, n_forest) = boost_layout(capacity, cfg.boost.max_leaves, cfg.boost.n_tree_max)?;
    let b = trees::fit_l2_boost(
        data.train.features(),
        data.train.labels(),
        BoostParams {
            n_tree,
            shrinkage: cfg.boost.shrinkage,
            max_leaves: cfg.boost.max_leaves,
            mtry: cfg.boost.mtry,
            n_forest,
        },
        seed::cell_seed(
            cfg.base_seed,
            cfg.family.name(),
            capacity as u64,
            repeat as u64,
        ),
    )?;
    scored(
        data,
        &b.predict(data.train.features()),
        &b.predict(data.test.features()),
        None,
    )
}

fn synthetic(cfg: &SweepConfig, capacity: usize, repeat: usize) -> Result<CellOutcome> {
    let s = &cfg.synthetic;
    let spec = CircleSpec::with_snr(s.grid_size, s.k_max, s.snr, 0)?;
    let out = circle::run_cell(&spec, s.n, capacity, cfg.base_seed, repeat as u64)?;
    Ok(CellOutcome {
        train_sq: out.train_sq,
        test_sq: out.excess_risk,
        train_01: None,
        test_01: None,
        norm: Some(out.weighted_norm),
    })
}

fn net_seed(cfg: &SweepConfig, capacity: usize, repeat: usize) -> u64 {
    seed::cell_seed(
        cfg.base_seed,
        cfg.family.name(),
        capacity as u64,
        repeat as u64,
    )
}

fn train_net(
    cfg: &SweepConfig,
    data: &TrainTest,
    hidden: usize,
    repeat: usize,
    init: InitMode,
    donor: Option<&TwoLayerNet>,
    regime: Regime,
) -> Result<(TwoLayerNet, TrainHistory, CellOutcome)> {
    let (d, k) = (data.train.dim(), data.train.n_classes());
    let capacity = nn::param_count(d, hidden, k);
    let s = net_seed(cfg, capacity, repeat);
    let net = TwoLayerNet::init(d, hidden, k, init, donor, s)?;
    let tc = nn::TrainConfig {
        regime,
        ..cfg.net.train.clone()
    };
    let (net, history) = nn::train(
        net,
        &data.train,
        &tc,
        seed::derive_seed(s, &[seed::fnv1a("sgd")]),
    )?;
    let out = scored(
        data,
        &net.forward(data.train.features()),
        &net.forward(data.test.features()),
        None,
    )?;
    Ok((net, history, out))
}

type CellResult = std::result::Result<CellOutcome, String>;

enum Job {
    Cell {
        index: usize,
        repeat: usize,
    },
    /// Under-parameterized nets of one repeat, trained in order with each
    /// net seeding the next.
    Chain {
        indices: Vec<usize>,
        repeat: usize,
    },
}

struct JobOutput {
    cells: Vec<(usize, usize, CellResult)>,
    histories: Vec<NetHistory>,
}

fn run_job(cfg: &SweepConfig, data: Option<&TrainTest>, grid: &[usize], job: &Job) -> JobOutput {
    let mut histories = Vec::new();
    let cells = match job {
        Job::Cell { index, repeat } => {
            let capacity = grid[*index];
            let res = match (cfg.family, data) {
                (Family::Synthetic, _) => synthetic(cfg, capacity, *repeat),
                (Family::Rff | Family::ReluRf, Some(d)) => {
                    random_features(cfg, d, capacity, *repeat)
                }
                (Family::TreeForest, Some(d)) => forest(cfg, d, capacity, *repeat),
                (Family::L2Boost, Some(d)) => boost(cfg, d, capacity, *repeat),
                (Family::TwoLayerNet, Some(d)) => train_net(
                    cfg,
                    d,
                    capacity,
                    *repeat,
                    cfg.net.fresh_init,
                    None,
                    Regime::Overparam,
                )
                .map(|(_, history, out)| {
                    histories.push(NetHistory {
                        hidden: capacity,
                        capacity: nn::param_count(d.train.dim(), capacity, d.train.n_classes()),
                        repeat: *repeat,
                        history,
                    });
                    out
                }),
                (Family::KernelRef, Some(d)) => kernel_machine(cfg, d),
                _ => Err(Error::Config("family needs a dataset".into())),
            };
            vec![(*index, *repeat, res.map_err(|e| e.to_string()))]
        }
        Job::Chain { indices, repeat } => {
            let d = data.expect("net sweeps always load data");
            let mut donor: Option<TwoLayerNet> = None;
            let mut out = Vec::new();
            for &index in indices {
                let hidden = grid[index];
                let init = match (cfg.net.reuse, &donor) {
                    (true, Some(_)) => InitMode::WeightReuse,
                    (true, None) => InitMode::Glorot,
                    (false, _) => cfg.net.fresh_init,
                };
                let res = train_net(
                    cfg,
                    d,
                    hidden,
                    *repeat,
                    init,
                    donor.as_ref(),
                    Regime::Underparam,
                );
                match res {
                    Ok((net, history, cell)) => {
                        histories.push(NetHistory {
                            hidden,
                            capacity: net.param_count(),
                            repeat: *repeat,
                            history,
                        });
                        if cfg.net.reuse {
                            donor = Some(net);
                        }
                        out.push((index, *repeat, Ok(cell)));
                    }
                    // A failed width leaves the previous donor in place.
                    Err(e) => out.push((index, *repeat, Err(e.to_string()))),
                }
            }
            out
        }
    };
    JobOutput { cells, histories }
}

fn aggregate(
    family: &str,
    capacity: i64,
    norm_kind: NormKind,
    results: &[&CellResult],
) -> RiskPoint {
    let ok: Vec<&CellOutcome> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let collect = |f: &dyn Fn(&CellOutcome) -> Option<f64>| -> Option<Stat> {
        let vals: Option<Vec<f64>> = ok.iter().map(|o| f(o)).collect();
        vals.and_then(|v| Stat::of(&v))
    };
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let status = match failures.first() {
        None => "ok".to_string(),
        Some(first) => format!("failed {}/{}: {}", failures.len(), results.len(), first),
    };
    let has_norm = ok.iter().any(|o| o.norm.is_some());
    RiskPoint {
        family: family.to_string(),
        capacity,
        repeat_count: ok.len(),
        train_sq: collect(&|o| Some(o.train_sq)),
        test_sq: collect(&|o| Some(o.test_sq)),
        train_01: collect(&|o| o.train_01),
        test_01: collect(&|o| o.test_01),
        norm: collect(&|o| o.norm),
        norm_kind: if has_norm { norm_kind } else { NormKind::None },
        status,
    }
}

fn norm_kind(cfg: &SweepConfig) -> NormKind {
    match cfg.family {
        Family::Rff | Family::ReluRf => cfg.rff.norm,
        Family::KernelRef => NormKind::Rkhs,
        Family::Synthetic => NormKind::WeightedCircle,
        _ => NormKind::None,
    }
}

fn metadata(cfg: &SweepConfig, data: Option<&TrainTest>) -> Metadata {
    let capacity_meaning = match cfg.family {
        Family::Rff => match cfg.rff.capacity_unit {
            CapacityUnit::RealParams => "real parameters per output (2 per Fourier feature)",
            CapacityUnit::Features => "sampled Fourier feature vectors",
        },
        Family::ReluRf => "ReLU features",
        Family::KernelRef => "none (reference only)",
        Family::Synthetic => "number of distinct frequencies N",
        Family::TreeForest => "n_tree * max_leaves",
        Family::L2Boost => "n_forest * n_tree * max_leaves",
        Family::TwoLayerNet => "(d + 1) H + (H + 1) K",
    };
    let mut notes = vec![format!(
        "threshold criterion: {:?}, tol {}",
        cfg.criterion(),
        cfg.threshold_tol
    )];
    match cfg.family {
        Family::Synthetic => notes.push(
            "test_sq is the excess risk (1/M) sum over the grid of |h - h*|^2; train_sq is the mean squared residual".into(),
        ),
        Family::TwoLayerNet => notes.push("hidden activation: relu".into()),
        _ => {}
    }
    Metadata {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        base_seed: cfg.base_seed,
        seed_rule: "cell seed = splitmix64 fold of (base_seed, fnv1a(family), capacity, repeat); \
                    synthetic data seed = fold of (base_seed, fnv1a(\"circle-data\"), trial), \
                    frequency seed = fold of (base_seed, fnv1a(\"circle-indices\"), trial, N)"
            .into(),
        squared_risk: "mean over samples of the squared error summed over outputs".into(),
        capacity_meaning: capacity_meaning.into(),
        norm_meaning: norm_kind(cfg).name().into(),
        n_train: data.map(|d| d.train.n()),
        n_test: data.map(|d| d.test.n()),
        notes,
    }
}

/// Runs every (capacity, repeat) cell and assembles the result. Per-cell
/// failures are kept in the rows' status; configuration and data errors
/// abort.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let data = match cfg.family {
        Family::Synthetic => None,
        _ => Some(load_data(cfg.dataset.as_ref().expect("validated"))?),
    };
    let data = data.as_ref();
    let repeats = cfg.repeats();
    let grid: Vec<usize> = match cfg.family {
        Family::TwoLayerNet => cfg.net.hidden.clone(),
        Family::KernelRef => Vec::new(),
        _ => cfg.capacities.clone(),
    };

    let mut jobs = Vec::new();
    if cfg.family == Family::TwoLayerNet {
        let d = data.expect("nets load data");
        let target = d.train.n() * d.train.n_classes();
        let (dim, k) = (d.train.dim(), d.train.n_classes());
        let under: Vec<usize> = (0..grid.len())
            .filter(|&i| nn::param_count(dim, grid[i], k) < target)
            .collect();
        for repeat in 0..repeats {
            if !under.is_empty() {
                jobs.push(Job::Chain {
                    indices: under.clone(),
                    repeat,
                });
            }
            for index in under.len()..grid.len() {
                jobs.push(Job::Cell { index, repeat });
            }
        }
    } else {
        for index in 0..grid.len() {
            for repeat in 0..repeats {
                jobs.push(Job::Cell { index, repeat });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let outputs: Vec<JobOutput> = pool.install(|| {
        jobs.par_iter()
            .map(|j| run_job(cfg, data, &grid, j))
            .collect()
    });

    let mut table: Vec<Vec<Option<CellResult>>> = vec![vec![None; repeats]; grid.len()];
    let mut histories = Vec::new();
    for out in outputs {
        for (index, repeat, res) in out.cells {
            table[index][repeat] = Some(res);
        }
        histories.extend(out.histories);
    }
    histories.sort_by_key(|h| (h.capacity, h.repeat));

    let kind = norm_kind(cfg);
    let family = cfg.family.name();
    let mut points: Vec<RiskPoint> = grid
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let capacity = match (cfg.family, data) {
                (Family::TwoLayerNet, Some(d)) => {
                    nn::param_count(d.train.dim(), c, d.train.n_classes())
                }
                _ => c,
            };
            let results: Vec<&CellResult> = table[i]
                .iter()
                .map(|r| r.as_ref().expect("every cell ran"))
                .collect();
            aggregate(family, capacity as i64, kind, &results)
        })
        .collect();

    let reference = match cfg.family {
        Family::KernelRef => Some(NormKind::Rkhs),
        Family::Rff if cfg.rff.kernel_reference => Some(NormKind::Rkhs),
        _ => None,
    };
    if let Some(rk) = reference {
        let d = data.expect("reference families load data");
        let res = pool
            .install(|| kernel_machine(cfg, d))
            .map_err(|e| e.to_string());
        points.push(aggregate(&format!("{family}_inf"), -1, rk, &[&res]));
    }

    Ok(SweepResult {
        threshold_squared: detect_interpolation_threshold(
            &points,
            ThresholdCriterion::Squared,
            cfg.threshold_tol,
        ),
        threshold_zero_one: detect_interpolation_threshold(
            &points,
            ThresholdCriterion::ZeroOne,
            0.0,
        ),
        metadata: metadata(cfg, data),
        config: cfg.clone(),
        points,
        histories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::config::{DatasetConfig, DatasetSource};

    fn two_class(n_train: usize) -> DatasetConfig {
        DatasetConfig {
            source: DatasetSource::NoisyTwoClass {
                train_size: n_train,
                test_size: 60,
                dim: 3,
                flip: 0.1,
                seed: 4,
            },
            n_train: None,
            n_test: None,
            scaling: Default::default(),
            subsample_seed: 0,
        }
    }

    #[test]
    fn boost_layouts() {
        assert_eq!(boost_layout(50, 10, 20).unwrap(), (5, 1));
        assert_eq!(boost_layout(200, 10, 20).unwrap(), (20, 1));
        assert_eq!(boost_layout(2000, 10, 20).unwrap(), (20, 10));
        assert!(boost_layout(55, 10, 20).is_err());
        assert!(boost_layout(210, 10, 20).is_err());
    }

    #[test]
    fn rff_toy_threshold_at_n() {
        let mut cfg = SweepConfig::new(Family::Rff, vec![20, 40, 60, 80, 100, 120, 160]);
        cfg.dataset = Some(two_class(40));
        cfg.rff.sigma = 0.5;
        let r = run_sweep(&cfg).unwrap();
        // 40 training points need 40 real parameters
        assert_eq!(r.threshold_squared, Some(40));
        let reference = r.references().next().unwrap();
        assert_eq!(reference.family, "rff_inf");
        assert_eq!(reference.capacity, -1);
        assert_eq!(reference.norm_kind, NormKind::Rkhs);
        assert!(r.curve().all(|p| p.status == "ok"));
    }

    #[test]
    fn failed_cells_stay_in_the_table() {
        let mut cfg = SweepConfig::new(Family::Rff, vec![20, 21]);
        cfg.dataset = Some(two_class(30));
        cfg.rff.kernel_reference = false;
        let r = run_sweep(&cfg).unwrap();
        assert_eq!(r.points.len(), 2);
        assert_eq!(r.points[1].repeat_count, 0);
        assert!(r.points[1].status.starts_with("failed 1/1"));
        assert!(r.points[1].test_sq.is_none());
    }

    #[test]
    fn net_capacities_are_parameter_counts() {
        let mut cfg = SweepConfig::new(Family::TwoLayerNet, vec![]);
        cfg.dataset = Some(two_class(30));
        cfg.net.hidden = vec![1, 2, 20];
        cfg.net.train.epochs_max = 3;
        cfg.repeats = Some(2);
        let r = run_sweep(&cfg).unwrap();
        let caps: Vec<i64> = r.points.iter().map(|p| p.capacity).collect();
        assert_eq!(caps, vec![8, 14, 122]);
        assert_eq!(r.histories.len(), 6);
        assert!(r.points.iter().all(|p| p.repeat_count == 2));
    }
}
