use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Scaling;
use crate::error::{Error, Result};
use crate::minnorm::DEFAULT_RANK_TOL;
use crate::nn::{InitMode, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Rff,
    ReluRf,
    KernelRef,
    Synthetic,
    TreeForest,
    L2Boost,
    TwoLayerNet,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Rff => "rff",
            Family::ReluRf => "relu_rf",
            Family::KernelRef => "kernel_ref",
            Family::Synthetic => "synthetic",
            Family::TreeForest => "tree_forest",
            Family::L2Boost => "l2_boost",
            Family::TwoLayerNet => "two_layer_net",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        [
            Family::Rff,
            Family::ReluRf,
            Family::KernelRef,
            Family::Synthetic,
            Family::TreeForest,
            Family::L2Boost,
            Family::TwoLayerNet,
        ]
        .into_iter()
        .find(|f| f.name() == name)
    }

    pub fn default_repeats(self) -> usize {
        match self {
            Family::Rff | Family::ReluRf | Family::KernelRef => 1,
            Family::Synthetic => 20,
            Family::TreeForest | Family::L2Boost | Family::TwoLayerNet => 5,
        }
    }

    /// Nets stop at zero classification error, everything else is judged
    /// on the squared loss.
    pub fn default_criterion(self) -> ThresholdCriterion {
        match self {
            Family::TwoLayerNet => ThresholdCriterion::ZeroOne,
            _ => ThresholdCriterion::Squared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdCriterion {
    Squared,
    ZeroOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    CoefL2,
    CoefL2Scaled,
    Rkhs,
    WeightedCircle,
    /// Families without a natural norm.
    None,
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::CoefL2 => "coef_l2",
            NormKind::CoefL2Scaled => "coef_l2_scaled",
            NormKind::Rkhs => "rkhs",
            NormKind::WeightedCircle => "weighted_circle",
            NormKind::None => "none",
        }
    }

    pub fn from_name(name: &str) -> Option<NormKind> {
        [
            NormKind::CoefL2,
            NormKind::CoefL2Scaled,
            NormKind::Rkhs,
            NormKind::WeightedCircle,
            NormKind::None,
        ]
        .into_iter()
        .find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    /// IDX image/label files, optionally gzipped.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default = "ten")]
        n_classes: usize,
    },
    /// CSV files with the class id in the last column.
    Csv { train: PathBuf, test: PathBuf },
    /// Seeded two-class task with label noise.
    NoisyTwoClass {
        train_size: usize,
        test_size: usize,
        dim: usize,
        flip: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    #[serde(flatten)]
    pub source: DatasetSource,
    /// Training rows kept after a seeded subsample.
    #[serde(default)]
    pub n_train: Option<usize>,
    #[serde(default)]
    pub n_test: Option<usize>,
    #[serde(default)]
    pub scaling: Scaling,
    #[serde(default)]
    pub subsample_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityUnit {
    /// Capacity counts real parameters: a Fourier feature contributes two.
    RealParams,
    /// Capacity counts sampled feature vectors.
    Features,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomFeatureConfig {
    pub sigma: f64,
    pub capacity_unit: CapacityUnit,
    pub rank_tol: f64,
    pub norm: NormKind,
    /// Attach the kernel machine as the `_inf` reference row.
    pub kernel_reference: bool,
}

impl Default for RandomFeatureConfig {
    fn default() -> Self {
        RandomFeatureConfig {
            sigma: 5.0,
            capacity_unit: CapacityUnit::RealParams,
            rank_tol: DEFAULT_RANK_TOL,
            norm: NormKind::CoefL2,
            kernel_reference: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    /// Bandwidth; defaults to the random-feature bandwidth when absent.
    pub sigma: Option<f64>,
    pub jitter: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            sigma: None,
            jitter: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n: usize,
    /// Signal-to-noise ratio; `inf` for noiseless labels.
    pub snr: f64,
    pub grid_size: usize,
    pub k_max: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 256,
            snr: 20.0,
            grid_size: crate::circle::DEFAULT_GRID,
            k_max: crate::circle::DEFAULT_GRID,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestMode {
    Pert,
    Bootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub mode: ForestMode,
    pub mtry: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            mode: ForestMode::Pert,
            mtry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub shrinkage: f64,
    pub max_leaves: usize,
    /// Rounds per boosting run; capacities beyond `n_tree_max * max_leaves`
    /// average several runs.
    pub n_tree_max: usize,
    pub mtry: Option<usize>,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            shrinkage: 0.85,
            max_leaves: 10,
            n_tree_max: 20,
            mtry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    /// Hidden widths, strictly increasing; capacities are the parameter counts.
    pub hidden: Vec<usize>,
    /// Chain under-parameterized widths through weight reuse.
    pub reuse: bool,
    /// Initialisation of nets at or beyond `n K` parameters, and of every
    /// net when `reuse` is off.
    pub fresh_init: InitMode,
    pub train: TrainConfig,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            hidden: Vec::new(),
            reuse: true,
            fresh_init: InitMode::RandomSmall,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub family: Family,
    #[serde(default)]
    pub capacities: Vec<usize>,
    #[serde(default)]
    pub repeats: Option<usize>,
    #[serde(default)]
    pub base_seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_tol")]
    pub threshold_tol: f64,
    #[serde(default)]
    pub threshold_criterion: Option<ThresholdCriterion>,
    #[serde(default)]
    pub dataset: Option<DatasetConfig>,
    #[serde(default)]
    pub rff: RandomFeatureConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub synthetic: SyntheticConfig,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub boost: BoostConfig,
    #[serde(default)]
    pub net: NetConfig,
}

fn default_tol() -> f64 {
    1e-6
}

impl SweepConfig {
    pub fn new(family: Family, capacities: Vec<usize>) -> Self {
        SweepConfig {
            family,
            capacities,
            repeats: None,
            base_seed: 0,
            workers: 0,
            threshold_tol: default_tol(),
            threshold_criterion: None,
            dataset: None,
            rff: RandomFeatureConfig::default(),
            kernel: KernelConfig::default(),
            synthetic: SyntheticConfig::default(),
            forest: ForestConfig::default(),
            boost: BoostConfig::default(),
            net: NetConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML config; relative dataset paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let Some(ds) = &mut self.dataset {
            match &mut ds.source {
                DatasetSource::Idx {
                    train_images,
                    train_labels,
                    test_images,
                    test_labels,
                    ..
                } => {
                    fix(train_images);
                    fix(train_labels);
                    fix(test_images);
                    fix(test_labels);
                }
                DatasetSource::Csv { train, test } => {
                    fix(train);
                    fix(test);
                }
                DatasetSource::NoisyTwoClass { .. } => {}
            }
        }
    }

    pub fn repeats(&self) -> usize {
        self.repeats
            .unwrap_or_else(|| self.family.default_repeats())
    }

    pub fn criterion(&self) -> ThresholdCriterion {
        self.threshold_criterion
            .unwrap_or_else(|| self.family.default_criterion())
    }

    pub fn kernel_sigma(&self) -> f64 {
        self.kernel.sigma.unwrap_or(self.rff.sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats() == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        let grid: &[usize] = if self.family == Family::TwoLayerNet {
            if !self.capacities.is_empty() {
                return Err(Error::Config(
                    "two_layer_net capacities are derived from net.hidden; leave `capacities` empty".into(),
                ));
            }
            &self.net.hidden
        } else {
            &self.capacities
        };
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "capacity grid must be strictly increasing".into(),
            ));
        }
        if self.family != Family::TwoLayerNet
            && self.family != Family::KernelRef
            && grid.first() == Some(&0)
        {
            return Err(Error::Config("capacities must be positive".into()));
        }
        if !(self.threshold_tol >= 0.0) {
            return Err(Error::Config("threshold_tol must be >= 0".into()));
        }
        let needs_data = !matches!(self.family, Family::Synthetic);
        if needs_data && self.dataset.is_none() {
            return Err(Error::Config(format!(
                "family {} needs a [dataset] table",
                self.family.name()
            )));
        }
        match self.family {
            Family::Rff | Family::KernelRef
                if !(self.rff.sigma > 0.0) || !(self.kernel_sigma() > 0.0) =>
            {
                Err(Error::Config("bandwidths must be positive".into()))
            }
            Family::TwoLayerNet => self
                .net
                .train
                .validate()
                .map_err(|e| Error::Config(e.to_string())),
            Family::L2Boost if self.boost.max_leaves == 0 || self.boost.n_tree_max == 0 => Err(
                Error::Config("boost.max_leaves and boost.n_tree_max must be >= 1".into()),
            ),
            Family::Synthetic => crate::circle::CircleSpec::with_snr(
                self.synthetic.grid_size,
                self.synthetic.k_max,
                self.synthetic.snr,
                0,
            )
            .map(|_| ())
            .map_err(|e| Error::Config(e.to_string())),
            _ => Ok(()),
        }
    }
}
