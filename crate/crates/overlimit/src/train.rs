//! Training: full backpropagation through time for the two-layer peephole
//! network, Adam updates, and the epoch loop.
//!
//! Gradients are exact. Each window's loss is differentiated analytically
//! through the output head, both recurrent layers, and every peephole
//! connection; finite-difference tests hold the implementation to a 1e-4
//! relative error.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{SplitIndices, WindowSet};
use crate::error::{Error, Result};
use crate::loss::{classify, cs_bce, CostMatrix};
use crate::lstm::{
    forward, forward_batch, init_params, ForwardTape, LayerTrace, LstmLayerParams, NetworkParams,
    OutputSquash,
};
use crate::util::{derive_seed, seed_tag};

/// Whether the loss weights classes by their frequencies or equally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostMode {
    CostSensitive,
    Plain,
}

impl CostMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CostMode::CostSensitive => "cost-sensitive",
            CostMode::Plain => "plain",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cost-sensitive" => Ok(CostMode::CostSensitive),
            "plain" => Ok(CostMode::Plain),
            other => Err(Error::Argument(format!(
                "unknown cost mode {other:?}, expected cost-sensitive or plain"
            ))),
        }
    }
}

/// Training hyperparameters and bookkeeping knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Seconds per window; must match the window set.
    pub time_step: usize,
    /// Hidden units per recurrent layer.
    pub units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Master seed; initialization and shuffling derive their own streams.
    pub seed: u64,
    pub cost_mode: CostMode,
    /// Decision threshold for accuracy reporting.
    pub threshold: f64,
    /// Optional global L2 gradient clip.
    pub clip_norm: Option<f64>,
    pub squash: OutputSquash,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            time_step: 10,
            units: 30,
            learning_rate: 0.005,
            epochs: 200,
            batch_size: 32,
            seed: 42,
            cost_mode: CostMode::CostSensitive,
            threshold: 0.5,
            clip_norm: None,
            squash: OutputSquash::Identity,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.time_step == 0 {
            return Err(Error::Argument("time_step must be at least 1".into()));
        }
        if self.units == 0 {
            return Err(Error::Argument("units must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Argument(format!(
                "decision threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Argument(format!(
                    "clip norm must be positive and finite, got {c}"
                )));
            }
        }
        Ok(())
    }
}

/// Adam optimizer state over the flattened parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update, in place: bias-corrected first and second moments,
/// `theta -= lr * m_hat / (sqrt(v_hat) + epsilon)`.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    learning_rate: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "parameter/gradient/state lengths differ: {} / {} / {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::Argument(format!(
            "learning rate must be positive and finite, got {learning_rate}"
        )));
    }
    if let Some(bad) = grads.iter().find(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient {bad}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for idx in 0..params.len() {
        let g = grads[idx];
        state.m[idx] = state.beta1 * state.m[idx] + (1.0 - state.beta1) * g;
        state.v[idx] = state.beta2 * state.v[idx] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[idx] / bc1;
        let v_hat = state.v[idx] / bc2;
        params[idx] -= learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

fn add_outer(m: &mut Array2<f64>, d: &Array1<f64>, x: &ArrayView1<f64>) {
    for (r, &dv) in d.iter().enumerate() {
        if dv != 0.0 {
            let mut row = m.row_mut(r);
            for (c, &xv) in x.iter().enumerate() {
                row[c] += dv * xv;
            }
        }
    }
}

/// Reverse pass through one layer. `grad_out[t]` is the loss gradient
/// arriving at the layer's output `y_t` from above; the return value holds
/// the parameter gradients and, when requested, the gradients with respect
/// to the layer inputs `x_t` (what the layer below receives).
fn layer_backward(
    layer: &LstmLayerParams,
    trace: &LayerTrace,
    inputs: &[ArrayView1<'_, f64>],
    grad_out: &[Array1<f64>],
    squash: OutputSquash,
    want_input_grads: bool,
) -> (LstmLayerParams, Option<Vec<Array1<f64>>>) {
    let steps = inputs.len();
    let units = layer.units();
    let zeros = Array1::zeros(units);
    let mut grads = LstmLayerParams::zeros(layer.input_size(), units);
    let mut input_grads = if want_input_grads {
        Some(vec![Array1::zeros(layer.input_size()); steps])
    } else {
        None
    };

    // Carries from the step after the current one.
    let mut dy_rec: Array1<f64> = Array1::zeros(units);
    let mut ds_carry: Array1<f64> = Array1::zeros(units);

    for t in (0..steps).rev() {
        let s_prev = if t > 0 { &trace.s[t - 1] } else { &zeros };
        let y_prev = if t > 0 { &trace.y[t - 1] } else { &zeros };
        let (i, f, g, o, s) = (&trace.i[t], &trace.f[t], &trace.g[t], &trace.o[t], &trace.s[t]);

        let dy = grad_out[t].clone() + dy_rec;

        // Output gate: y = o * squash(s); o = sigmoid(net_o) where net_o
        // includes the peephole on the state updated this step.
        let do_pre = Array1::from_shape_fn(units, |u| {
            dy[u] * squash.apply(s[u]) * o[u] * (1.0 - o[u])
        });

        // State receives gradient through the cell output, through the
        // output-gate peephole, and through the carry from step t + 1.
        let ds = Array1::from_shape_fn(units, |u| {
            dy[u] * o[u] * squash.derivative(s[u]) + do_pre[u] * layer.w_co[u] + ds_carry[u]
        });

        let di_pre = Array1::from_shape_fn(units, |u| ds[u] * g[u] * i[u] * (1.0 - i[u]));
        let df_pre =
            Array1::from_shape_fn(units, |u| ds[u] * s_prev[u] * f[u] * (1.0 - f[u]));
        let dg_pre = Array1::from_shape_fn(units, |u| ds[u] * i[u] * (1.0 - g[u] * g[u]));

        let x = &inputs[t];
        add_outer(&mut grads.w_xi, &di_pre, x);
        add_outer(&mut grads.w_hi, &di_pre, &y_prev.view());
        add_outer(&mut grads.w_xf, &df_pre, x);
        add_outer(&mut grads.w_hf, &df_pre, &y_prev.view());
        add_outer(&mut grads.w_xg, &dg_pre, x);
        add_outer(&mut grads.w_hg, &dg_pre, &y_prev.view());
        add_outer(&mut grads.w_xo, &do_pre, x);
        add_outer(&mut grads.w_ho, &do_pre, &y_prev.view());
        for u in 0..units {
            grads.w_ci[u] += di_pre[u] * s_prev[u];
            grads.w_cf[u] += df_pre[u] * s_prev[u];
            grads.w_co[u] += do_pre[u] * s[u];
            grads.b_i[u] += di_pre[u];
            grads.b_f[u] += df_pre[u];
            grads.b_g[u] += dg_pre[u];
            grads.b_o[u] += do_pre[u];
        }

        if let Some(ref mut dx) = input_grads {
            dx[t] = layer.w_xi.t().dot(&di_pre)
                + layer.w_xf.t().dot(&df_pre)
                + layer.w_xg.t().dot(&dg_pre)
                + layer.w_xo.t().dot(&do_pre);
        }

        dy_rec = layer.w_hi.t().dot(&di_pre)
            + layer.w_hf.t().dot(&df_pre)
            + layer.w_hg.t().dot(&dg_pre)
            + layer.w_ho.t().dot(&do_pre);

        // The state chain to step t - 1: through the forget gate and the
        // input/forget peepholes, which read the previous state.
        ds_carry = Array1::from_shape_fn(units, |u| {
            ds[u] * f[u] + di_pre[u] * layer.w_ci[u] + df_pre[u] * layer.w_cf[u]
        });
    }

    (grads, input_grads)
}

/// Exact gradient of one window's cost-sensitive loss with respect to
/// every parameter. The tape must come from [`forward`] on the same
/// window and parameters.
pub fn backward(
    params: &NetworkParams,
    window: &ArrayView2<f64>,
    label: u8,
    costs: &CostMatrix,
    tape: &ForwardTape,
) -> Result<NetworkParams> {
    if label > 1 {
        return Err(Error::Argument(format!("label {label} is not 0 or 1")));
    }
    if window.nrows() != tape.layer1.s.len() {
        return Err(Error::Shape(format!(
            "tape covers {} steps but the window has {} rows",
            tape.layer1.s.len(),
            window.nrows()
        )));
    }
    let steps = window.nrows();
    let units = params.units();
    let p = tape.probability;

    // d(loss)/d(logit) for a single sample; the derivation folds the
    // sigmoid into the cross-entropy.
    let dlogit = if label == 1 {
        costs.cost_01 * (p - 1.0)
    } else {
        costs.cost_10 * p
    };

    let mut grads = NetworkParams::zeros(params.input_features(), units);
    grads.squash = params.squash;

    let y2_last = tape.layer2.y.last().expect("window has at least one step");
    grads.w_out = y2_last.mapv(|v| v * dlogit);
    grads.b_out = dlogit;

    // The head only reads the final output of layer 2.
    let mut grad_out2 = vec![Array1::zeros(units); steps];
    grad_out2[steps - 1] = params.w_out.mapv(|w| w * dlogit);

    let inputs2: Vec<ArrayView1<f64>> = tape.layer1.y.iter().map(|a| a.view()).collect();
    let (g2, dx2) = layer_backward(
        &params.layer2,
        &tape.layer2,
        &inputs2,
        &grad_out2,
        params.squash,
        true,
    );
    grads.layer2 = g2;

    let inputs1: Vec<ArrayView1<f64>> = (0..steps).map(|t| window.row(t)).collect();
    let (g1, _) = layer_backward(
        &params.layer1,
        &tape.layer1,
        &inputs1,
        &dx2.expect("requested input gradients"),
        params.squash,
        false,
    );
    grads.layer1 = g1;

    Ok(grads)
}

/// Mean gradient and mean loss over a batch of windows. The batch gradient
/// is exactly the mean of the per-sample gradients.
pub fn batch_gradients(
    params: &NetworkParams,
    windows: &WindowSet,
    indices: &[usize],
    costs: &CostMatrix,
) -> Result<(NetworkParams, f64)> {
    if indices.is_empty() {
        return Err(Error::Argument("cannot take gradients over an empty batch".into()));
    }
    let mut total = NetworkParams::zeros(params.input_features(), params.units());
    total.squash = params.squash;
    let mut flat_total = vec![0.0; params.param_count()];
    let mut labels = Vec::with_capacity(indices.len());
    let mut probs = Vec::with_capacity(indices.len());
    for &idx in indices {
        if idx >= windows.len() {
            return Err(Error::Argument(format!(
                "window index {idx} out of range ({} windows)",
                windows.len()
            )));
        }
        let window = windows.window(idx);
        let label = windows.labels[idx];
        let (p, tape) = forward(params, &window)?;
        let sample = backward(params, &window, label, costs, &tape)?;
        for (acc, g) in flat_total.iter_mut().zip(sample.to_flat()) {
            *acc += g;
        }
        labels.push(label);
        probs.push(p);
    }
    let n = indices.len() as f64;
    for g in flat_total.iter_mut() {
        *g /= n;
    }
    total.assign_from_flat(&flat_total)?;
    let loss = cs_bce(&labels, &probs, costs)?;
    Ok((total, loss))
}

/// Loss and accuracy of one epoch on one index set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    /// NaN when the test side of the split is empty.
    pub test_accuracy: f64,
}

/// Per-epoch statistics plus the cost weights that were applied.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub costs: CostMatrix,
}

impl TrainHistory {
    pub fn final_stats(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# cost weights: cost_01 {} cost_10 {}\n",
            self.costs.cost_01, self.costs.cost_10
        ));
        out.push_str("# epoch\ttrain_loss\ttrain_accuracy\ttest_accuracy\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.epoch, e.train_loss, e.train_accuracy, e.test_accuracy
            ));
        }
        out
    }
}

fn accuracy_of(
    params: &NetworkParams,
    windows: &WindowSet,
    indices: &[usize],
    threshold: f64,
) -> Result<f64> {
    if indices.is_empty() {
        return Ok(f64::NAN);
    }
    let probs = forward_batch(params, windows, indices)?;
    let preds = classify(&probs, threshold)?;
    let correct = indices
        .iter()
        .zip(&preds)
        .filter(|(&idx, &p)| windows.labels[idx] == p)
        .count();
    Ok(correct as f64 / indices.len() as f64)
}

fn clip_gradients(flat: &mut [f64], clip: f64) {
    let norm = flat.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > clip {
        let scale = clip / norm;
        for g in flat.iter_mut() {
            *g *= scale;
        }
    }
}

/// Train on the split's training windows with mini-batch Adam. Returns the
/// fitted network and per-epoch history (training loss under the active
/// cost weights, training accuracy, and test accuracy on the held-out
/// side). Deterministic: the same windows, split, and config give
/// bit-identical parameters.
pub fn train(
    windows: &WindowSet,
    split: &SplitIndices,
    config: &TrainConfig,
) -> Result<(NetworkParams, TrainHistory)> {
    config.validate()?;
    if windows.time_step != config.time_step {
        return Err(Error::Argument(format!(
            "config time_step {} does not match the window set's {}",
            config.time_step, windows.time_step
        )));
    }
    if split.train.is_empty() {
        return Err(Error::Argument("training side of the split is empty".into()));
    }
    for &idx in split.train.iter().chain(&split.test) {
        if idx >= windows.len() {
            return Err(Error::Argument(format!(
                "split index {idx} out of range ({} windows)",
                windows.len()
            )));
        }
    }

    let train_labels: Vec<u8> = split.train.iter().map(|&i| windows.labels[i]).collect();
    let costs = match config.cost_mode {
        CostMode::CostSensitive => CostMatrix::from_labels(&train_labels)?,
        CostMode::Plain => CostMatrix::unit(),
    };

    let mut params = init_params(
        windows.feature_count(),
        config.units,
        derive_seed(config.seed, &[seed_tag::INIT]),
    )?;
    params.squash = config.squash;

    let mut adam = AdamState::new(params.param_count());
    let mut shuffle_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[seed_tag::SHUFFLE]));
    let mut order = split.train.clone();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let (grads, _) = batch_gradients(&params, windows, batch, &costs)?;
            let mut flat_grads = grads.to_flat();
            if let Some(clip) = config.clip_norm {
                clip_gradients(&mut flat_grads, clip);
            }
            let mut flat = params.to_flat();
            adam_step(&mut flat, &flat_grads, &mut adam, config.learning_rate)?;
            params.assign_from_flat(&flat)?;
        }

        let train_probs = forward_batch(&params, windows, &split.train)?;
        let train_loss = cs_bce(&train_labels, &train_probs, &costs)?;
        let train_preds = classify(&train_probs, config.threshold)?;
        let train_correct = train_labels
            .iter()
            .zip(&train_preds)
            .filter(|(a, b)| a == b)
            .count();
        history.push(EpochStats {
            epoch,
            train_loss,
            train_accuracy: train_correct as f64 / train_labels.len() as f64,
            test_accuracy: accuracy_of(&params, windows, &split.test, config.threshold)?,
        });
    }

    Ok((params, TrainHistory {
        epochs: history,
        costs,
    }))
}
