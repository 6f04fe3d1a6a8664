//! Dataset assembly: min-max normalization, sliding windows, random
//! splits, and cross-validation folds. Everything here is deterministic
//! given a seed.

use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::util;

/// Per-feature minima and maxima for min-max scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormStats {
    pub fn feature_count(&self) -> usize {
        self.mins.len()
    }
}

/// Fit min-max statistics over the rows of an n x k matrix.
pub fn fit_minmax(rows: &ArrayView2<f64>) -> Result<NormStats> {
    if rows.nrows() == 0 {
        return Err(Error::Argument("cannot fit normalization on zero rows".into()));
    }
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in normalization input".into()));
    }
    let mut mins = vec![f64::INFINITY; rows.ncols()];
    let mut maxs = vec![f64::NEG_INFINITY; rows.ncols()];
    for row in rows.rows() {
        for (j, &v) in row.iter().enumerate() {
            mins[j] = mins[j].min(v);
            maxs[j] = maxs[j].max(v);
        }
    }
    Ok(NormStats { mins, maxs })
}

/// Scale one value into [0, 1]. A constant feature (max == min) maps to 0;
/// out-of-range values clamp, which only happens when the statistics were
/// fitted on other data (streaming, leakage-free splits).
pub fn normalize_value(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((v - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Apply min-max scaling to every row.
pub fn apply_minmax(rows: &ArrayView2<f64>, stats: &NormStats) -> Result<Array2<f64>> {
    if rows.ncols() != stats.feature_count() {
        return Err(Error::Shape(format!(
            "matrix has {} features but statistics cover {}",
            rows.ncols(),
            stats.feature_count()
        )));
    }
    let mut out = rows.to_owned();
    for mut row in out.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = normalize_value(*v, stats.mins[j], stats.maxs[j]);
        }
    }
    Ok(out)
}

/// Sliding windows over normalized rows. Window `w` covers rows
/// `[w, w + time_step)` and carries the label of row `w + time_step`: the
/// model always predicts the next second from the preceding `time_step`
/// seconds. With `n` rows there are exactly `n - time_step` windows.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    /// Shape: (windows, time_step, features).
    pub inputs: Array3<f64>,
    /// One label per window: the label of the second being predicted.
    pub labels: Vec<u8>,
    pub time_step: usize,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.inputs.shape()[2]
    }

    pub fn window(&self, idx: usize) -> ArrayView2<'_, f64> {
        self.inputs.index_axis(ndarray::Axis(0), idx)
    }

    /// Serialize to a small binary container (all little-endian): magic
    /// `OLWS`, version, then window/time-step/feature counts, row-major
    /// f64 inputs, and one byte per label.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(24 + self.inputs.len() * 8 + self.labels.len());
        bytes.extend_from_slice(b"OLWS");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        for dim in [self.len(), self.time_step, self.feature_count()] {
            bytes.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for v in self.inputs.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&self.labels);
        util::write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<WindowSet> {
        let bytes = util::read_bytes(path)?;
        let fail = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
        if bytes.len() < 32 {
            return Err(fail("truncated header"));
        }
        if &bytes[0..4] != b"OLWS" {
            return Err(fail("bad magic, not a window container"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != 1 {
            return Err(fail(&format!("unsupported version {version}")));
        }
        let dim = |off: usize| u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize;
        let (count, time_step, features) = (dim(8), dim(16), dim(24));
        let float_bytes = count
            .checked_mul(time_step)
            .and_then(|v| v.checked_mul(features))
            .and_then(|v| v.checked_mul(8))
            .ok_or_else(|| fail("dimension overflow"))?;
        let expected = 32 + float_bytes + count;
        if bytes.len() != expected {
            return Err(fail(&format!(
                "expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let mut data = Vec::with_capacity(count * time_step * features);
        for chunk in bytes[32..32 + float_bytes].chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        let labels = bytes[32 + float_bytes..].to_vec();
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(fail(&format!("label byte {bad} is not 0 or 1")));
        }
        let inputs = Array3::from_shape_vec((count, time_step, features), data)
            .map_err(|e| fail(&e.to_string()))?;
        Ok(WindowSet {
            inputs,
            labels,
            time_step,
        })
    }
}

/// Build stride-1 windows. Requires at least `time_step + 1` rows so that
/// the first window has a next-second label.
pub fn build_windows(rows: &ArrayView2<f64>, labels: &[u8], time_step: usize) -> Result<WindowSet> {
    if time_step == 0 {
        return Err(Error::Argument("time_step must be at least 1".into()));
    }
    if labels.len() != rows.nrows() {
        return Err(Error::Argument(format!(
            "{} rows but {} labels",
            rows.nrows(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Argument(format!("label {bad} is not 0 or 1")));
    }
    if rows.nrows() < time_step + 1 {
        return Err(Error::Argument(format!(
            "need at least {} rows for time_step {}, got {}",
            time_step + 1,
            time_step,
            rows.nrows()
        )));
    }
    let count = rows.nrows() - time_step;
    let features = rows.ncols();
    let mut inputs = Array3::zeros((count, time_step, features));
    let mut window_labels = Vec::with_capacity(count);
    for w in 0..count {
        for t in 0..time_step {
            for f in 0..features {
                inputs[[w, t, f]] = rows[[w + t, f]];
            }
        }
        window_labels.push(labels[w + time_step]);
    }
    Ok(WindowSet {
        inputs,
        labels: window_labels,
        time_step,
    })
}

/// A random 80/20 split of window indices. Both sides keep the shuffled
/// order they were drawn in.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| {
            v.iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!("train\t{}\ntest\t{}\n", join(&self.train), join(&self.test))
    }
}

/// Shuffle `0..count` and cut at round(0.8 * count). The rounding is
/// literal, so tiny inputs can leave the test side empty (count 2 gives a
/// 2/0 split); callers that need test samples must bring enough windows.
pub fn split_80_20(count: usize, seed: u64) -> Result<SplitIndices> {
    if count < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 windows to split, got {count}"
        )));
    }
    let mut indices: Vec<usize> = (0..count).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (0.8 * count as f64).round() as usize;
    let test = indices.split_off(cut);
    Ok(SplitIndices {
        train: indices,
        test,
    })
}

/// Cross-validation folds over a set of indices: shuffled, then dealt into
/// `k` contiguous chunks whose sizes differ by at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Indices used for fitting when `fold` is held out, in plan order.
    pub fn training_for(&self, fold: usize) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, fold) in self.folds.iter().enumerate() {
            out.push_str(&format!(
                "fold{}\t{}\n",
                i,
                fold.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
            ));
        }
        out
    }
}

pub fn make_folds(indices: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k}")));
    }
    if indices.len() < k {
        return Err(Error::Argument(format!(
            "cannot deal {} indices into {k} folds",
            indices.len()
        )));
    }
    let mut shuffled = indices.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = shuffled.len() / k;
    let extra = shuffled.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + (i < extra) as usize;
        folds.push(shuffled[start..start + size].to_vec());
        start += size;
    }
    Ok(FoldPlan { folds })
}
