//! Model file: a self-contained JSON artifact holding the network weights
//! plus everything needed to reproduce its inputs at inference time (the
//! feature list, the frozen normalization statistics, the window length,
//! the decision threshold, and the training provenance).
//!
//! Serialization is deterministic: field order is fixed by declaration
//! and floats round-trip exactly, so saving the same model twice yields
//! byte-identical files.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::NormStats;
use crate::error::{Error, Result};
use crate::loss::CostMatrix;
use crate::lstm::{LstmLayerParams, NetworkParams, OutputSquash};
use crate::train::CostMode;
use crate::util;

pub const MODEL_FORMAT: &str = "overlimit-model";
pub const MODEL_VERSION: u32 = 1;

/// Everything about a trained model that is not a weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub time_step: usize,
    pub units: usize,
    /// Input features, in the exact column order the network expects.
    pub features: Vec<String>,
    /// Name of the monitored channel the labels came from.
    pub g_column: String,
    /// Per-feature normalization minima, frozen at training time.
    pub mins: Vec<f64>,
    /// Per-feature normalization maxima, frozen at training time.
    pub maxs: Vec<f64>,
    /// Master seed the training run derived its streams from.
    pub seed: u64,
    pub threshold: f64,
    pub squash: String,
    pub cost_mode: String,
    pub cost_01: f64,
    pub cost_10: f64,
}

impl ModelMeta {
    pub fn norm_stats(&self) -> NormStats {
        NormStats {
            mins: self.mins.clone(),
            maxs: self.maxs.clone(),
        }
    }

    pub fn output_squash(&self) -> Result<OutputSquash> {
        OutputSquash::parse(&self.squash)
    }

    pub fn cost_matrix(&self) -> Result<CostMatrix> {
        CostMatrix::new(self.cost_01, self.cost_10)
    }

    pub fn cost_mode(&self) -> Result<CostMode> {
        CostMode::parse(&self.cost_mode)
    }

    fn validate(&self) -> Result<()> {
        if self.time_step == 0 {
            return Err(Error::Format("meta: time_step must be at least 1".into()));
        }
        if self.units == 0 {
            return Err(Error::Format("meta: units must be at least 1".into()));
        }
        if self.features.is_empty() {
            return Err(Error::Format("meta: feature list is empty".into()));
        }
        if self.mins.len() != self.features.len() || self.maxs.len() != self.features.len() {
            return Err(Error::Format(format!(
                "meta: {} features but {}/{} normalization bounds",
                self.features.len(),
                self.mins.len(),
                self.maxs.len()
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Format(format!(
                "meta: decision threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        self.output_squash()
            .and(self.cost_mode())
            .map_err(|e| Error::Format(format!("meta: {e}")))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MatrixData {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixData {
    fn from_array(a: &Array2<f64>) -> Self {
        MatrixData {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }

    fn to_array(&self, name: &str) -> Result<Array2<f64>> {
        if self.rows * self.cols != self.data.len() {
            return Err(Error::Format(format!(
                "{name}: {}x{} matrix with {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone())
            .map_err(|e| Error::Format(format!("{name}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LayerWeights {
    w_xi: MatrixData,
    w_hi: MatrixData,
    w_ci: Vec<f64>,
    b_i: Vec<f64>,
    w_xf: MatrixData,
    w_hf: MatrixData,
    w_cf: Vec<f64>,
    b_f: Vec<f64>,
    w_xg: MatrixData,
    w_hg: MatrixData,
    b_g: Vec<f64>,
    w_xo: MatrixData,
    w_ho: MatrixData,
    w_co: Vec<f64>,
    b_o: Vec<f64>,
}

impl LayerWeights {
    fn from_params(p: &LstmLayerParams) -> Self {
        let vec1 = |a: &Array1<f64>| a.to_vec();
        LayerWeights {
            w_xi: MatrixData::from_array(&p.w_xi),
            w_hi: MatrixData::from_array(&p.w_hi),
            w_ci: vec1(&p.w_ci),
            b_i: vec1(&p.b_i),
            w_xf: MatrixData::from_array(&p.w_xf),
            w_hf: MatrixData::from_array(&p.w_hf),
            w_cf: vec1(&p.w_cf),
            b_f: vec1(&p.b_f),
            w_xg: MatrixData::from_array(&p.w_xg),
            w_hg: MatrixData::from_array(&p.w_hg),
            b_g: vec1(&p.b_g),
            w_xo: MatrixData::from_array(&p.w_xo),
            w_ho: MatrixData::from_array(&p.w_ho),
            w_co: vec1(&p.w_co),
            b_o: vec1(&p.b_o),
        }
    }

    fn to_params(&self, which: &str) -> Result<LstmLayerParams> {
        let name = |field: &str| format!("{which}.{field}");
        let params = LstmLayerParams {
            w_xi: self.w_xi.to_array(&name("w_xi"))?,
            w_hi: self.w_hi.to_array(&name("w_hi"))?,
            w_ci: Array1::from_vec(self.w_ci.clone()),
            b_i: Array1::from_vec(self.b_i.clone()),
            w_xf: self.w_xf.to_array(&name("w_xf"))?,
            w_hf: self.w_hf.to_array(&name("w_hf"))?,
            w_cf: Array1::from_vec(self.w_cf.clone()),
            b_f: Array1::from_vec(self.b_f.clone()),
            w_xg: self.w_xg.to_array(&name("w_xg"))?,
            w_hg: self.w_hg.to_array(&name("w_hg"))?,
            b_g: Array1::from_vec(self.b_g.clone()),
            w_xo: self.w_xo.to_array(&name("w_xo"))?,
            w_ho: self.w_ho.to_array(&name("w_ho"))?,
            w_co: Array1::from_vec(self.w_co.clone()),
            b_o: Array1::from_vec(self.b_o.clone()),
        };
        params
            .check()
            .map_err(|e| Error::Format(format!("{which}: {e}")))?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    meta: ModelMeta,
    layer1: LayerWeights,
    layer2: LayerWeights,
    w_out: Vec<f64>,
    b_out: f64,
}

/// Serialize the model and its metadata. The write is atomic and the
/// bytes depend only on the weights and metadata.
pub fn save_model(path: &Path, params: &NetworkParams, meta: &ModelMeta) -> Result<()> {
    params.check()?;
    meta.validate()?;
    if meta.units != params.units() {
        return Err(Error::Argument(format!(
            "meta says {} units but the network has {}",
            meta.units,
            params.units()
        )));
    }
    if meta.features.len() != params.input_features() {
        return Err(Error::Argument(format!(
            "meta lists {} features but the network reads {}",
            meta.features.len(),
            params.input_features()
        )));
    }
    if meta.output_squash()? != params.squash {
        return Err(Error::Argument(format!(
            "meta says squash {} but the network uses {}",
            meta.squash,
            params.squash.as_str()
        )));
    }
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        meta: meta.clone(),
        layer1: LayerWeights::from_params(&params.layer1),
        layer2: LayerWeights::from_params(&params.layer2),
        w_out: params.w_out.to_vec(),
        b_out: params.b_out,
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Format(format!("serializing model: {e}")))?;
    util::write_atomic(path, json.as_bytes())
}

/// Load a model file, validating its format tag, version, and shapes.
pub fn load_model(path: &Path) -> Result<(NetworkParams, ModelMeta)> {
    let text = util::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Format(format!(
            "{}: format tag {:?} is not {MODEL_FORMAT:?}",
            path.display(),
            file.format
        )));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {}",
            path.display(),
            file.version
        )));
    }
    file.meta.validate()?;
    let params = NetworkParams {
        layer1: file.layer1.to_params("layer1")?,
        layer2: file.layer2.to_params("layer2")?,
        w_out: Array1::from_vec(file.w_out.clone()),
        b_out: file.b_out,
        squash: file.meta.output_squash()?,
    };
    params.check()?;
    if file.meta.units != params.units() || file.meta.features.len() != params.input_features() {
        return Err(Error::Format(format!(
            "{}: metadata shapes disagree with the weights",
            path.display()
        )));
    }
    if file.meta.time_step == 0 {
        return Err(Error::Format(format!("{}: zero time_step", path.display())));
    }
    Ok((params, file.meta))
}
