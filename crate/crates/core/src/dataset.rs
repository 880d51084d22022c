//! Dataset loading and preprocessing.
//!
//! Every trainer consumes a [`Dataset`]: a dense feature matrix, a one-hot
//! label matrix and the integer class ids behind it. Sources are IDX files
//! (the MNIST distribution format, optionally gzipped), CSV tables whose last
//! column holds the class id, and the seeded synthetic task in
//! [`noisy_two_class`].

use std::fs;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::seed;

pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: DMatrix<f64>,
    class_ids: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, class_ids: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.nrows() != class_ids.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                class_ids.len()
            )));
        }
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        ensure_finite(features.iter(), "dataset features")?;
        let labels = one_hot_encode(&class_ids, n_classes)?;
        Ok(Dataset {
            features,
            labels,
            class_ids,
            n_classes,
        })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &DMatrix<f64> {
        &self.labels
    }

    pub fn class_ids(&self) -> &[usize] {
        &self.class_ids
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Rows `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices.iter()),
            labels: self.labels.select_rows(indices.iter()),
            class_ids: indices.iter().map(|&i| self.class_ids[i]).collect(),
            n_classes: self.n_classes,
        }
    }

    /// Replaces the features, keeping labels. Used after preprocessing.
    pub fn with_features(&self, features: DMatrix<f64>) -> Result<Dataset> {
        if features.nrows() != self.n() {
            return Err(Error::Dimension("row count changed".into()));
        }
        ensure_finite(features.iter(), "dataset features")?;
        Ok(Dataset {
            features,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Scaling {
    /// Each column mapped affinely onto [0, 1] by its own extremes.
    Interval01,
    /// Each column mapped onto [0, 1] from a known value range shared by all
    /// columns, e.g. `[0, 255]` for 8-bit pixels.
    FixedRange { min: f64, max: f64 },
    /// Each column to zero mean and unit population variance.
    Zscore,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub scaling: Scaling,
    pub seed: u64,
    pub subsample_n: Option<usize>,
}

/// Decoded IDX tensor: declared dimensions plus the raw `u8` payload in
/// row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxKind {
    Images,
    Labels,
}

impl IdxKind {
    fn magic(self) -> u32 {
        match self {
            IdxKind::Images => IDX_IMAGES_MAGIC,
            IdxKind::Labels => IDX_LABELS_MAGIC,
        }
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Idx(format!("header truncated at byte {at}")))
}

pub fn parse_idx(bytes: &[u8], expected: IdxKind) -> Result<IdxTensor> {
    let magic = be_u32(bytes, 0)?;
    let kind = match magic {
        IDX_IMAGES_MAGIC => IdxKind::Images,
        IDX_LABELS_MAGIC => IdxKind::Labels,
        other => return Err(Error::Idx(format!("unknown magic number {other:#010x}"))),
    };
    if kind != expected {
        return Err(Error::Idx(format!(
            "expected {expected:?} file (magic {:#010x}) but found {kind:?} (magic {magic:#010x})",
            expected.magic()
        )));
    }
    let rank = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(rank);
    for i in 0..rank {
        dims.push(be_u32(bytes, 4 + 4 * i)? as usize);
    }
    let header = 4 + 4 * rank;
    let expected_len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Idx("dimension product overflows".into()))?;
    let payload = &bytes[header..];
    if payload.len() != expected_len {
        return Err(Error::Idx(format!(
            "payload has {} bytes, header declares {expected_len}",
            payload.len()
        )));
    }
    Ok(IdxTensor {
        dims,
        data: payload.to_vec(),
    })
}

pub fn serialize_idx(tensor: &IdxTensor) -> Vec<u8> {
    let magic = 0x0000_0800 | tensor.dims.len() as u32;
    let mut out = Vec::with_capacity(4 + 4 * tensor.dims.len() + tensor.data.len());
    out.extend_from_slice(&magic.to_be_bytes());
    for &d in &tensor.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&tensor.data);
    out
}

/// Reads a file, transparently inflating gzip content.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Loads an IDX image/label pair. Features are raw pixel values, one image
/// per row; labels must lie in `0..n_classes`.
pub fn load_idx_pair(images: &Path, labels: &Path, n_classes: usize) -> Result<Dataset> {
    let img = parse_idx(&read_maybe_gz(images)?, IdxKind::Images)?;
    let lab = parse_idx(&read_maybe_gz(labels)?, IdxKind::Labels)?;
    if img.dims[0] != lab.dims[0] {
        return Err(Error::Idx(format!(
            "{} images but {} labels",
            img.dims[0], lab.dims[0]
        )));
    }
    let n = img.dims[0];
    let d = img.dims[1] * img.dims[2];
    let features = DMatrix::from_fn(n, d, |i, j| f64::from(img.data[i * d + j]));
    let ids = lab.data.iter().map(|&b| b as usize).collect();
    Dataset::new(features, ids, n_classes)
}

/// Loads a numeric CSV table whose last column is the class id. A first
/// row that does not parse as numbers is treated as a header.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) => rows.push(values),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Csv(format!("line {}: {e}", line + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Csv("no data rows".into()));
    }
    let width = rows[0].len();
    if width < 2 || rows.iter().any(|r| r.len() != width) {
        return Err(Error::Csv("rows must share a width of at least 2".into()));
    }
    let mut ids = Vec::with_capacity(rows.len());
    for r in &rows {
        let id = r[width - 1];
        if id < 0.0 || id.fract() != 0.0 {
            return Err(Error::Csv(format!(
                "class id {id} is not a non-negative integer"
            )));
        }
        ids.push(id as usize);
    }
    let k = ids.iter().max().map_or(1, |m| m + 1);
    let features = DMatrix::from_fn(rows.len(), width - 1, |i, j| rows[i][j]);
    Dataset::new(features, ids, k)
}

/// Per-column affine map `v -> (v - offset) / spread`, fitted on one matrix
/// and applicable to others (e.g. training statistics applied to test data).
/// A zero spread maps the column to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaler {
    pub offset: Vec<f64>,
    pub spread: Vec<f64>,
}

impl ColumnScaler {
    /// Constant columns get spread 0 under the data-driven scalings.
    pub fn fit(features: &DMatrix<f64>, scaling: Scaling) -> Result<Self> {
        ensure_finite(features.iter(), "preprocess input")?;
        let d = features.ncols();
        let n = features.nrows() as f64;
        let (offset, spread) = match scaling {
            Scaling::None => (vec![0.0; d], vec![1.0; d]),
            Scaling::FixedRange { min, max } => {
                if !(max > min) {
                    return Err(Error::InvalidArgument(format!(
                        "fixed range [{min}, {max}] is empty"
                    )));
                }
                (vec![min; d], vec![max - min; d])
            }
            Scaling::Interval01 => features
                .column_iter()
                .map(|col| {
                    let (lo, hi) = (col.min(), col.max());
                    (lo, hi - lo)
                })
                .unzip(),
            Scaling::Zscore => features
                .column_iter()
                .map(|col| {
                    let mean = col.sum() / n;
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    (mean, var.sqrt())
                })
                .unzip(),
        };
        Ok(ColumnScaler { offset, spread })
    }

    pub fn apply(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if features.ncols() != self.offset.len() {
            return Err(Error::Dimension(format!(
                "scaler fitted on {} columns, got {}",
                self.offset.len(),
                features.ncols()
            )));
        }
        ensure_finite(features.iter(), "preprocess input")?;
        let mut out = features.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (o, s) = (self.offset[j], self.spread[j]);
            if s > 0.0 {
                col.apply(|v| *v = (*v - o) / s);
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }
}

pub fn preprocess(features: &DMatrix<f64>, scaling: Scaling) -> Result<DMatrix<f64>> {
    ColumnScaler::fit(features, scaling)?.apply(features)
}

pub fn one_hot_encode(class_ids: &[usize], n_classes: usize) -> Result<DMatrix<f64>> {
    if n_classes == 0 {
        return Err(Error::InvalidArgument(
            "number of classes must be positive".into(),
        ));
    }
    if let Some(&bad) = class_ids.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidArgument(format!(
            "class id {bad} out of range 0..{n_classes}"
        )));
    }
    Ok(DMatrix::from_fn(class_ids.len(), n_classes, |i, k| {
        if class_ids[i] == k {
            1.0
        } else {
            0.0
        }
    }))
}

/// First `n` entries of a seeded Fisher-Yates shuffle of `0..total`.
pub fn subsample_indices(total: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > total {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {n} rows from {total}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut idx: Vec<usize> = (0..total).collect();
    for i in 0..n {
        let j = rng.random_range(i..total);
        idx.swap(i, j);
    }
    idx.truncate(n);
    Ok(idx)
}

pub fn subsample(ds: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    let idx = subsample_indices(ds.n(), n, seed)?;
    Ok(ds.select(&idx))
}

/// Noisy two-class task on the unit cube.
///
/// Class 1 when `sin(2 pi x0) + 2 x1 - 1 + 0.5 (x2 - 0.5) > 0` (only the
/// coordinates that exist are used), class 0 otherwise; each label is then
/// flipped with probability `flip`. Trained with squared loss on the one-hot
/// targets this is a noisy regression problem.
pub fn noisy_two_class(n: usize, d: usize, flip: f64, seed: u64) -> Result<Dataset> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidArgument("n and d must be positive".into()));
    }
    let mut rng = seed::rng(seed);
    let x = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
    let ids = (0..n)
        .map(|i| {
            let mut s = (2.0 * std::f64::consts::PI * x[(i, 0)]).sin();
            if d > 1 {
                s += 2.0 * x[(i, 1)] - 1.0;
            }
            if d > 2 {
                s += 0.5 * (x[(i, 2)] - 0.5);
            }
            let clean = usize::from(s > 0.0);
            if rng.random::<f64>() < flip {
                1 - clean
            } else {
                clean
            }
        })
        .collect();
    Dataset::new(x, ids, 2)
}
