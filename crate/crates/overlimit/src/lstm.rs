//! From-scratch peephole LSTM: two stacked recurrent layers and a sigmoid
//! output head producing the over-limit probability for the next second.
//!
//! Each layer's cells carry diagonal peephole connections: the input and
//! forget gates see the previous cell state, the output gate sees the
//! freshly updated state. Cell blocks hold one cell each, so peephole
//! weights are vectors. The cell output is `o * squash(s)` where the
//! squash is the identity by default (the raw state passes through,
//! scaled by the gate) with tanh available as an option.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::WindowSet;
use crate::error::{Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Squashing applied to the cell state on its way out of the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputSquash {
    Identity,
    Tanh,
}

impl OutputSquash {
    pub fn apply(self, s: f64) -> f64 {
        match self {
            OutputSquash::Identity => s,
            OutputSquash::Tanh => s.tanh(),
        }
    }

    pub fn derivative(self, s: f64) -> f64 {
        match self {
            OutputSquash::Identity => 1.0,
            OutputSquash::Tanh => {
                let t = s.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutputSquash::Identity => "identity",
            OutputSquash::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(OutputSquash::Identity),
            "tanh" => Ok(OutputSquash::Tanh),
            other => Err(Error::Argument(format!(
                "unknown output squash {other:?}, expected identity or tanh"
            ))),
        }
    }
}

/// One recurrent layer's weights. `w_x*` read the layer input, `w_h*` the
/// previous output, `w_c*` are the diagonal peephole weights reading the
/// cell state, `b_*` the biases. Gates: `i` input, `f` forget, `o` output;
/// `g` is the tanh-squashed cell input.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub w_xi: Array2<f64>,
    pub w_hi: Array2<f64>,
    pub w_ci: Array1<f64>,
    pub b_i: Array1<f64>,
    pub w_xf: Array2<f64>,
    pub w_hf: Array2<f64>,
    pub w_cf: Array1<f64>,
    pub b_f: Array1<f64>,
    pub w_xg: Array2<f64>,
    pub w_hg: Array2<f64>,
    pub b_g: Array1<f64>,
    pub w_xo: Array2<f64>,
    pub w_ho: Array2<f64>,
    pub w_co: Array1<f64>,
    pub b_o: Array1<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, units: usize) -> Self {
        LstmLayerParams {
            w_xi: Array2::zeros((units, input_size)),
            w_hi: Array2::zeros((units, units)),
            w_ci: Array1::zeros(units),
            b_i: Array1::zeros(units),
            w_xf: Array2::zeros((units, input_size)),
            w_hf: Array2::zeros((units, units)),
            w_cf: Array1::zeros(units),
            b_f: Array1::zeros(units),
            w_xg: Array2::zeros((units, input_size)),
            w_hg: Array2::zeros((units, units)),
            b_g: Array1::zeros(units),
            w_xo: Array2::zeros((units, input_size)),
            w_ho: Array2::zeros((units, units)),
            w_co: Array1::zeros(units),
            b_o: Array1::zeros(units),
        }
    }

    pub fn units(&self) -> usize {
        self.w_xi.nrows()
    }

    pub fn input_size(&self) -> usize {
        self.w_xi.ncols()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.units();
        let k = self.input_size();
        let m2 = [
            ("w_xi", &self.w_xi, (n, k)),
            ("w_hi", &self.w_hi, (n, n)),
            ("w_xf", &self.w_xf, (n, k)),
            ("w_hf", &self.w_hf, (n, n)),
            ("w_xg", &self.w_xg, (n, k)),
            ("w_hg", &self.w_hg, (n, n)),
            ("w_xo", &self.w_xo, (n, k)),
            ("w_ho", &self.w_ho, (n, n)),
        ];
        for (name, m, want) in m2 {
            if m.dim() != want {
                return Err(Error::Shape(format!(
                    "{name} is {:?}, expected {:?}",
                    m.dim(),
                    want
                )));
            }
        }
        let v1 = [
            ("w_ci", &self.w_ci),
            ("b_i", &self.b_i),
            ("w_cf", &self.w_cf),
            ("b_f", &self.b_f),
            ("b_g", &self.b_g),
            ("w_co", &self.w_co),
            ("b_o", &self.b_o),
        ];
        for (name, v) in v1 {
            if v.len() != n {
                return Err(Error::Shape(format!(
                    "{name} has length {}, expected {n}",
                    v.len()
                )));
            }
        }
        Ok(())
    }

    fn for_each_slice<'a>(&'a self, mut f: impl FnMut(&'a [f64])) {
        // Canonical order: gate blocks as declared, matrices row-major.
        f(self.w_xi.as_slice().expect("standard layout"));
        f(self.w_hi.as_slice().expect("standard layout"));
        f(self.w_ci.as_slice().expect("standard layout"));
        f(self.b_i.as_slice().expect("standard layout"));
        f(self.w_xf.as_slice().expect("standard layout"));
        f(self.w_hf.as_slice().expect("standard layout"));
        f(self.w_cf.as_slice().expect("standard layout"));
        f(self.b_f.as_slice().expect("standard layout"));
        f(self.w_xg.as_slice().expect("standard layout"));
        f(self.w_hg.as_slice().expect("standard layout"));
        f(self.b_g.as_slice().expect("standard layout"));
        f(self.w_xo.as_slice().expect("standard layout"));
        f(self.w_ho.as_slice().expect("standard layout"));
        f(self.w_co.as_slice().expect("standard layout"));
        f(self.b_o.as_slice().expect("standard layout"));
    }

    fn for_each_slice_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        f(self.w_xi.as_slice_mut().expect("standard layout"));
        f(self.w_hi.as_slice_mut().expect("standard layout"));
        f(self.w_ci.as_slice_mut().expect("standard layout"));
        f(self.b_i.as_slice_mut().expect("standard layout"));
        f(self.w_xf.as_slice_mut().expect("standard layout"));
        f(self.w_hf.as_slice_mut().expect("standard layout"));
        f(self.w_cf.as_slice_mut().expect("standard layout"));
        f(self.b_f.as_slice_mut().expect("standard layout"));
        f(self.w_xg.as_slice_mut().expect("standard layout"));
        f(self.w_hg.as_slice_mut().expect("standard layout"));
        f(self.b_g.as_slice_mut().expect("standard layout"));
        f(self.w_xo.as_slice_mut().expect("standard layout"));
        f(self.w_ho.as_slice_mut().expect("standard layout"));
        f(self.w_co.as_slice_mut().expect("standard layout"));
        f(self.b_o.as_slice_mut().expect("standard layout"));
    }
}

/// Full network: two stacked layers plus the scalar sigmoid head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layer1: LstmLayerParams,
    pub layer2: LstmLayerParams,
    pub w_out: Array1<f64>,
    pub b_out: f64,
    pub squash: OutputSquash,
}

impl NetworkParams {
    pub fn zeros(input_features: usize, units: usize) -> Self {
        NetworkParams {
            layer1: LstmLayerParams::zeros(input_features, units),
            layer2: LstmLayerParams::zeros(units, units),
            w_out: Array1::zeros(units),
            b_out: 0.0,
            squash: OutputSquash::Identity,
        }
    }

    pub fn units(&self) -> usize {
        self.layer1.units()
    }

    pub fn input_features(&self) -> usize {
        self.layer1.input_size()
    }

    pub fn check(&self) -> Result<()> {
        self.layer1.check()?;
        self.layer2.check()?;
        if self.layer2.input_size() != self.layer1.units() {
            return Err(Error::Shape(format!(
                "layer 2 reads {} inputs but layer 1 emits {}",
                self.layer2.input_size(),
                self.layer1.units()
            )));
        }
        if self.w_out.len() != self.layer2.units() {
            return Err(Error::Shape(format!(
                "output head reads {} values but layer 2 emits {}",
                self.w_out.len(),
                self.layer2.units()
            )));
        }
        Ok(())
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.layer1.for_each_slice(|s| n += s.len());
        self.layer2.for_each_slice(|s| n += s.len());
        n + self.w_out.len() + 1
    }

    /// Flatten every parameter into one vector in a fixed canonical order:
    /// layer 1 gate blocks, layer 2 gate blocks, output weights, output
    /// bias. The optimizer and the finite-difference tests both rely on
    /// this order being stable.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        self.layer1.for_each_slice(|s| flat.extend_from_slice(s));
        self.layer2.for_each_slice(|s| flat.extend_from_slice(s));
        flat.extend_from_slice(self.w_out.as_slice().expect("standard layout"));
        flat.push(self.b_out);
        flat
    }

    /// Inverse of [`to_flat`](Self::to_flat) for a network of this shape.
    pub fn assign_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "flat vector has {} values but the network has {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[offset..offset + dst.len()]);
            offset += dst.len();
        };
        self.layer1.for_each_slice_mut(&mut take);
        self.layer2.for_each_slice_mut(&mut take);
        take(self.w_out.as_slice_mut().expect("standard layout"));
        self.b_out = flat[offset];
        Ok(())
    }
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Array2::from_shape_vec((rows, cols), data).expect("shape matches data length")
}

fn xavier_vec(rng: &mut ChaCha8Rng, len: usize, fan_in: usize, fan_out: usize) -> Array1<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array1::from_vec((0..len).map(|_| rng.gen_range(-bound..bound)).collect())
}

fn init_layer(rng: &mut ChaCha8Rng, input_size: usize, units: usize) -> LstmLayerParams {
    let mut layer = LstmLayerParams::zeros(input_size, units);
    // Draw in canonical block order so a seed pins every weight. Peephole
    // weights connect one cell to one gate, so their fan is 1 on each side.
    layer.w_xi = xavier(rng, units, input_size, input_size, units);
    layer.w_hi = xavier(rng, units, units, units, units);
    layer.w_ci = xavier_vec(rng, units, 1, 1);
    layer.w_xf = xavier(rng, units, input_size, input_size, units);
    layer.w_hf = xavier(rng, units, units, units, units);
    layer.w_cf = xavier_vec(rng, units, 1, 1);
    layer.w_xg = xavier(rng, units, input_size, input_size, units);
    layer.w_hg = xavier(rng, units, units, units, units);
    layer.w_xo = xavier(rng, units, input_size, input_size, units);
    layer.w_ho = xavier(rng, units, units, units, units);
    layer.w_co = xavier_vec(rng, units, 1, 1);
    // Biases stay zero except the forget gate, which starts open so early
    // training does not erase the state before credit can flow back.
    layer.b_f.fill(1.0);
    layer
}

/// Seeded Xavier-uniform initialization. Same seed, same shapes, same
/// weights, bit for bit.
pub fn init_params(input_features: usize, units: usize, seed: u64) -> Result<NetworkParams> {
    if input_features == 0 || units == 0 {
        return Err(Error::Argument(format!(
            "network needs at least one feature and one unit, got {input_features} and {units}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layer1 = init_layer(&mut rng, input_features, units);
    let layer2 = init_layer(&mut rng, units, units);
    let w_out = xavier_vec(&mut rng, units, units, 1);
    Ok(NetworkParams {
        layer1,
        layer2,
        w_out,
        b_out: 0.0,
        squash: OutputSquash::Identity,
    })
}

/// All gate activations and states of one layer across a window, recorded
/// by the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub i: Vec<Array1<f64>>,
    pub f: Vec<Array1<f64>>,
    pub g: Vec<Array1<f64>>,
    pub o: Vec<Array1<f64>>,
    pub s: Vec<Array1<f64>>,
    pub y: Vec<Array1<f64>>,
}

impl LayerTrace {
    fn with_capacity(steps: usize) -> Self {
        LayerTrace {
            i: Vec::with_capacity(steps),
            f: Vec::with_capacity(steps),
            g: Vec::with_capacity(steps),
            o: Vec::with_capacity(steps),
            s: Vec::with_capacity(steps),
            y: Vec::with_capacity(steps),
        }
    }
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    pub layer1: LayerTrace,
    pub layer2: LayerTrace,
    pub logit: f64,
    pub probability: f64,
}

/// Every intermediate value of one cell update, in order: the input,
/// forget, and output gate activations `i`, `f`, `o`, the cell input `g`,
/// the new state `s`, and the output `y`, packed as `(i, f, g, o, s, y)`.
pub type CellActivations = (
    Array1<f64>,
    Array1<f64>,
    Array1<f64>,
    Array1<f64>,
    Array1<f64>,
    Array1<f64>,
);

/// One cell update returning every intermediate value:
/// `(i, f, g, o, s, y)`. The input and forget gates peek at the previous
/// state; the output gate peeks at the state updated this step.
pub fn cell_step_full(
    layer: &LstmLayerParams,
    x: &ArrayView1<f64>,
    y_prev: &Array1<f64>,
    s_prev: &Array1<f64>,
    squash: OutputSquash,
) -> Result<CellActivations> {
    if x.len() != layer.input_size() {
        return Err(Error::Shape(format!(
            "input has {} features, layer expects {}",
            x.len(),
            layer.input_size()
        )));
    }
    if y_prev.len() != layer.units() || s_prev.len() != layer.units() {
        return Err(Error::Shape(format!(
            "recurrent state has {}/{} values, layer has {} units",
            y_prev.len(),
            s_prev.len(),
            layer.units()
        )));
    }
    let i = (layer.w_xi.dot(x) + layer.w_hi.dot(y_prev) + &layer.w_ci * s_prev + &layer.b_i)
        .mapv(sigmoid);
    let f = (layer.w_xf.dot(x) + layer.w_hf.dot(y_prev) + &layer.w_cf * s_prev + &layer.b_f)
        .mapv(sigmoid);
    let g = (layer.w_xg.dot(x) + layer.w_hg.dot(y_prev) + &layer.b_g).mapv(f64::tanh);
    let s = &f * s_prev + &i * &g;
    let o = (layer.w_xo.dot(x) + layer.w_ho.dot(y_prev) + &layer.w_co * &s + &layer.b_o)
        .mapv(sigmoid);
    let y = &o * &s.mapv(|v| squash.apply(v));
    if s.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("cell state or output became non-finite".into()));
    }
    Ok((i, f, g, o, s, y))
}

/// One cell update returning just the new output and state.
pub fn cell_step(
    layer: &LstmLayerParams,
    x: &ArrayView1<f64>,
    y_prev: &Array1<f64>,
    s_prev: &Array1<f64>,
    squash: OutputSquash,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let (_, _, _, _, s, y) = cell_step_full(layer, x, y_prev, s_prev, squash)?;
    Ok((y, s))
}

/// Run a window (time_step x features) through the network. States start
/// at zero for every window. Returns the over-limit probability for the
/// following second plus the full activation tape.
pub fn forward(params: &NetworkParams, window: &ArrayView2<f64>) -> Result<(f64, ForwardTape)> {
    params.check()?;
    if window.nrows() == 0 {
        return Err(Error::Argument("window must cover at least one second".into()));
    }
    if window.ncols() != params.input_features() {
        return Err(Error::Shape(format!(
            "window has {} features, network expects {}",
            window.ncols(),
            params.input_features()
        )));
    }
    let steps = window.nrows();
    let units = params.units();
    let mut trace1 = LayerTrace::with_capacity(steps);
    let mut trace2 = LayerTrace::with_capacity(steps);
    let mut y1 = Array1::zeros(units);
    let mut s1 = Array1::zeros(units);
    let mut y2 = Array1::zeros(units);
    let mut s2 = Array1::zeros(units);
    for t in 0..steps {
        let x = window.row(t);
        let (i, f, g, o, s, y) = cell_step_full(&params.layer1, &x, &y1, &s1, params.squash)?;
        y1 = y.clone();
        s1 = s.clone();
        trace1.i.push(i);
        trace1.f.push(f);
        trace1.g.push(g);
        trace1.o.push(o);
        trace1.s.push(s);
        trace1.y.push(y);
        let (i, f, g, o, s, y) =
            cell_step_full(&params.layer2, &y1.view(), &y2, &s2, params.squash)?;
        y2 = y.clone();
        s2 = s.clone();
        trace2.i.push(i);
        trace2.f.push(f);
        trace2.g.push(g);
        trace2.o.push(o);
        trace2.s.push(s);
        trace2.y.push(y);
    }
    let logit = params.w_out.dot(&y2) + params.b_out;
    let probability = sigmoid(logit);
    if !probability.is_finite() {
        return Err(Error::Numeric(format!("probability evaluated to {probability}")));
    }
    Ok((
        probability,
        ForwardTape {
            layer1: trace1,
            layer2: trace2,
            logit,
            probability,
        },
    ))
}

/// Probability only.
pub fn forward_prob(params: &NetworkParams, window: &ArrayView2<f64>) -> Result<f64> {
    Ok(forward(params, window)?.0)
}

/// Probabilities for a batch of windows, in index order.
pub fn forward_batch(
    params: &NetworkParams,
    windows: &WindowSet,
    indices: &[usize],
) -> Result<Vec<f64>> {
    indices
        .iter()
        .map(|&idx| {
            if idx >= windows.len() {
                return Err(Error::Argument(format!(
                    "window index {idx} out of range ({} windows)",
                    windows.len()
                )));
            }
            forward_prob(params, &windows.window(idx))
        })
        .collect()
}
