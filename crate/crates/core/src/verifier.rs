//! The accept/reject verifier: a small feed-forward network (ReLU hidden
//! layers, sigmoid output) trained with class-weighted binary cross-entropy
//! via Adam. Implemented from scratch with analytic gradients; training is
//! single-threaded and bit-deterministic for a given (data, config, seed).

use crate::kitti::Detection;
use crate::matching::{FeatureLayout, FeatureVector, TrainingSample};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Clamp applied to probabilities inside the loss (never to forward output).
pub const LOSS_PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("feature length {found} does not match model input {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("detections ({dets}) and features ({features}) are misaligned")]
    Misaligned { dets: usize, features: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error(
        "loss became non-finite at epoch {epoch}; try a smaller learning rate (current {lr})"
    )]
    NumericFailure { epoch: usize, lr: f64 },
    #[error("model file {path}: {message}")]
    ModelFile { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Weights (out x in, row-major) and biases of one dense layer. Also reused
/// as gradient / moment storage since the shapes match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weights: vec![0.0; out_dim * in_dim],
            biases: vec![0.0; out_dim],
        }
    }
}

/// Feed-forward verifier network. `layer_dims` runs input → hidden… → 1;
/// hidden activations are ReLU, the output is a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    pub layers: Vec<LayerParams>,
    pub feature_layout: FeatureLayout,
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn zeros_like(&self) -> Vec<LayerParams> {
        self.layer_dims
            .windows(2)
            .map(|w| LayerParams::zeros(w[1], w[0]))
            .collect()
    }
}

/// Per-parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

/// Adam accumulators. Betas and epsilon are the standard defaults; only the
/// learning rate is a tuning knob here.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<LayerParams>,
    pub v: Vec<LayerParams>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(model: &MlpModel, lr: f64) -> Self {
        Self {
            m: model.zeros_like(),
            v: model.zeros_like(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub pos_weight: f64,
    pub neg_weight: f64,
    pub hidden_width: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 1e-4,
            pos_weight: 10.0,
            neg_weight: 1.0,
            hidden_width: 64,
            // per-sample updates: at the default lr and epoch budget, larger
            // batches leave too few optimizer steps to move off the init on
            // small (desk-scale) datasets
            batch_size: 1,
            seed: 7,
            shuffle_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), VerifierError> {
        if self.epochs < 1 {
            return Err(VerifierError::InvalidConfig("epochs must be >= 1".into()));
        }
        // NaN fails these comparisons too
        if self.lr.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(VerifierError::InvalidConfig("lr must be > 0".into()));
        }
        let positive = |w: f64| w.partial_cmp(&0.0) == Some(std::cmp::Ordering::Greater);
        if !positive(self.pos_weight) || !positive(self.neg_weight) {
            return Err(VerifierError::InvalidConfig(
                "class weights must be > 0".into(),
            ));
        }
        if self.batch_size < 1 {
            return Err(VerifierError::InvalidConfig(
                "batch_size must be >= 1".into(),
            ));
        }
        if self.hidden_width < 1 {
            return Err(VerifierError::InvalidConfig(
                "hidden_width must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Sigmoid output plus the thresholded accept/reject decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    pub accepted: bool,
}

/// Per-epoch training-set metrics at decision threshold 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainLogEntry {
    pub epoch: usize,
    pub loss: f64,
    pub recall: f64,
    pub precision: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Seeded init: weights uniform in ±1/√fan_in, biases zero. Same seed, same
/// bits.
pub fn init_model(layout: FeatureLayout, hidden_width: usize, seed: u64) -> MlpModel {
    init_model_with_hidden(layout, &[hidden_width], seed)
}

/// Init with an explicit hidden-layer stack, for depth ablations.
pub fn init_model_with_hidden(layout: FeatureLayout, hidden: &[usize], seed: u64) -> MlpModel {
    let mut layer_dims = Vec::with_capacity(hidden.len() + 2);
    layer_dims.push(layout.len());
    layer_dims.extend_from_slice(hidden);
    layer_dims.push(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_dims
        .windows(2)
        .map(|w| {
            let (in_dim, out_dim) = (w[0], w[1]);
            let scale = 1.0 / (in_dim as f64).sqrt();
            let weights = (0..out_dim * in_dim)
                .map(|_| rng.random_range(-scale..scale))
                .collect();
            LayerParams {
                weights,
                biases: vec![0.0; out_dim],
            }
        })
        .collect();
    MlpModel {
        layer_dims,
        layers,
        feature_layout: layout,
    }
}

fn layer_forward(layer: &LayerParams, in_dim: usize, input: &[f64], output: &mut [f64]) {
    for (o, out) in output.iter_mut().enumerate() {
        let row = &layer.weights[o * in_dim..(o + 1) * in_dim];
        let mut z = layer.biases[o];
        for (w, x) in row.iter().zip(input) {
            z += w * x;
        }
        *out = z;
    }
}

/// Pre-activations and post-activations per layer, kept for backprop.
struct ForwardTrace {
    /// activations[0] is the input; activations[l] the output of layer l
    /// (ReLU for hidden layers, raw pre-activation for the last).
    activations: Vec<Vec<f64>>,
}

fn forward_trace(model: &MlpModel, x: &[f64]) -> ForwardTrace {
    let n_layers = model.layers.len();
    let mut activations = Vec::with_capacity(n_layers + 1);
    activations.push(x.to_vec());
    for (l, layer) in model.layers.iter().enumerate() {
        let in_dim = model.layer_dims[l];
        let out_dim = model.layer_dims[l + 1];
        let mut z = vec![0.0; out_dim];
        layer_forward(layer, in_dim, &activations[l], &mut z);
        if l + 1 < n_layers {
            for v in z.iter_mut() {
                *v = v.max(0.0);
            }
        }
        activations.push(z);
    }
    ForwardTrace { activations }
}

fn check_input(model: &MlpModel, x: &FeatureVector) -> Result<(), VerifierError> {
    if x.len() != model.input_dim() {
        return Err(VerifierError::DimensionMismatch {
            expected: model.input_dim(),
            found: x.len(),
        });
    }
    Ok(())
}

/// sigmoid(W_L · relu(…W_1 x + b_1…) + b_L), strictly inside (0, 1).
pub fn forward(model: &MlpModel, x: &FeatureVector) -> Result<f64, VerifierError> {
    check_input(model, x)?;
    let trace = forward_trace(model, x.values());
    Ok(sigmoid(trace.activations.last().expect("output layer")[0]))
}

/// Class-weighted binary cross-entropy on a clamped probability.
pub fn weighted_bce(p: f64, label: bool, pos_weight: f64, neg_weight: f64) -> f64 {
    let p = p.clamp(LOSS_PROB_CLAMP, 1.0 - LOSS_PROB_CLAMP);
    if label {
        -pos_weight * p.ln()
    } else {
        -neg_weight * (1.0 - p).ln()
    }
}

/// Mean-over-batch gradients of the weighted BCE with respect to every
/// parameter. Uses the sigmoid+BCE identity dL/dz = weight * (p - y) at the
/// output pre-activation.
pub fn backward(
    model: &MlpModel,
    batch: &[(&FeatureVector, bool)],
    pos_weight: f64,
    neg_weight: f64,
) -> Result<Gradients, VerifierError> {
    assert!(!batch.is_empty(), "backward on empty batch");
    let mut grads = Gradients {
        layers: model.zeros_like(),
    };
    let n_layers = model.layers.len();
    for &(x, label) in batch {
        check_input(model, x)?;
        let trace = forward_trace(model, x.values());
        let p = sigmoid(trace.activations[n_layers][0]);
        let weight = if label { pos_weight } else { neg_weight };
        let y = if label { 1.0 } else { 0.0 };
        let mut delta = vec![weight * (p - y)];
        for l in (0..n_layers).rev() {
            let in_dim = model.layer_dims[l];
            let input = &trace.activations[l];
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                g.biases[o] += d;
                let row = &mut g.weights[o * in_dim..(o + 1) * in_dim];
                for (gw, xi) in row.iter_mut().zip(input) {
                    *gw += d * xi;
                }
            }
            if l > 0 {
                // propagate through the ReLU of the previous layer
                let layer = &model.layers[l];
                let mut prev = vec![0.0; in_dim];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * in_dim..(o + 1) * in_dim];
                    for (pd, w) in prev.iter_mut().zip(row) {
                        *pd += d * w;
                    }
                }
                for (pd, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *pd = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }
    let inv = 1.0 / batch.len() as f64;
    for layer in grads.layers.iter_mut() {
        for g in layer.weights.iter_mut() {
            *g *= inv;
        }
        for g in layer.biases.iter_mut() {
            *g *= inv;
        }
    }
    Ok(grads)
}

/// One Adam update with bias correction; increments the step counter even
/// for a zero gradient.
pub fn adam_step(model: &mut MlpModel, state: &mut AdamState, grads: &Gradients) {
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    for (l, layer) in model.layers.iter_mut().enumerate() {
        let g = &grads.layers[l];
        let m = &mut state.m[l];
        let v = &mut state.v[l];
        update_params(
            &mut layer.weights,
            &g.weights,
            &mut m.weights,
            &mut v.weights,
            state.beta1,
            state.beta2,
            state.eps,
            state.lr,
            bc1,
            bc2,
        );
        update_params(
            &mut layer.biases,
            &g.biases,
            &mut m.biases,
            &mut v.biases,
            state.beta1,
            state.beta2,
            state.eps,
            state.lr,
            bc1,
            bc2,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn update_params(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Loss / recall / precision of `model` over `samples` at threshold 0.5.
fn evaluate_epoch(
    model: &MlpModel,
    samples: &[TrainingSample],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<TrainLogEntry, VerifierError> {
    let mut loss = 0.0;
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for s in samples {
        let p = forward(model, &s.features)?;
        loss += weighted_bce(p, s.label, cfg.pos_weight, cfg.neg_weight);
        let accepted = p >= 0.5;
        match (s.label, accepted) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => {}
        }
    }
    loss /= samples.len() as f64;
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        1.0
    };
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        1.0
    };
    Ok(TrainLogEntry {
        epoch,
        loss,
        recall,
        precision,
    })
}

/// True when the training set contains at least one sample of each class.
pub fn has_both_classes(samples: &[TrainingSample]) -> bool {
    samples.iter().any(|s| s.label) && samples.iter().any(|s| !s.label)
}

/// Mini-batch Adam over `cfg.epochs` epochs with a seeded per-epoch shuffle.
/// Deterministic: the same (data, config) pair always yields bit-identical
/// weights.
pub fn train(
    samples: &[TrainingSample],
    cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<TrainLogEntry>), VerifierError> {
    cfg.validate()?;
    let first = samples.first().ok_or(VerifierError::EmptyTrainingSet)?;
    let layout = first.features.layout();
    for s in samples {
        if s.features.len() != layout.len() {
            return Err(VerifierError::DimensionMismatch {
                expected: layout.len(),
                found: s.features.len(),
            });
        }
    }

    let mut model = init_model(layout, cfg.hidden_width, cfg.seed);
    let mut state = AdamState::new(&model, cfg.lr);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let batch_size = cfg.batch_size.min(samples.len());
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        if cfg.shuffle_each_epoch {
            order.shuffle(&mut shuffle_rng);
        }
        for chunk in order.chunks(batch_size) {
            let batch: Vec<(&FeatureVector, bool)> = chunk
                .iter()
                .map(|&i| (&samples[i].features, samples[i].label))
                .collect();
            let grads = backward(&model, &batch, cfg.pos_weight, cfg.neg_weight)?;
            adam_step(&mut model, &mut state, &grads);
        }
        let entry = evaluate_epoch(&model, samples, cfg, epoch)?;
        if !entry.loss.is_finite() {
            return Err(VerifierError::NumericFailure { epoch, lr: cfg.lr });
        }
        log.push(entry);
    }
    Ok((model, log))
}

/// Accept iff forward(model, x) >= threshold (inclusive boundary).
pub fn predict(
    model: &MlpModel,
    x: &FeatureVector,
    threshold: f64,
) -> Result<Prediction, VerifierError> {
    let probability = forward(model, x)?;
    Ok(Prediction {
        probability,
        accepted: probability >= threshold,
    })
}

/// Acceptance mask over feature vectors aligned with a detection list.
pub fn filter_mask(
    model: &MlpModel,
    features: &[FeatureVector],
    threshold: f64,
) -> Result<Vec<bool>, VerifierError> {
    features
        .iter()
        .map(|f| predict(model, f, threshold).map(|p| p.accepted))
        .collect()
}

/// Keep the detections the verifier accepts. Boxes and scores pass through
/// untouched and input order is preserved; the output is always a subset.
pub fn filter_detections(
    model: &MlpModel,
    dets: &[Detection],
    features: &[FeatureVector],
    threshold: f64,
) -> Result<Vec<Detection>, VerifierError> {
    if dets.len() != features.len() {
        return Err(VerifierError::Misaligned {
            dets: dets.len(),
            features: features.len(),
        });
    }
    let mask = filter_mask(model, features, threshold)?;
    Ok(dets
        .iter()
        .zip(mask)
        .filter(|(_, keep)| *keep)
        .map(|(d, _)| d.clone())
        .collect())
}

const MODEL_SCHEMA_VERSION: u32 = 1;

/// On-disk model schema. JSON with shortest-round-trip floats, so parameters
/// survive save/load bit-exactly.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    feature_layout: FeatureLayout,
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    train_config: Option<TrainConfig>,
    seed: u64,
}

pub fn save_model(
    model: &MlpModel,
    train_config: Option<&TrainConfig>,
    seed: u64,
    path: &Path,
) -> Result<(), VerifierError> {
    for layer in &model.layers {
        let finite = layer.weights.iter().chain(&layer.biases).all(|v| v.is_finite());
        if !finite {
            return Err(VerifierError::ModelFile {
                path: path.to_path_buf(),
                message: "refusing to save non-finite parameters".into(),
            });
        }
    }
    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        feature_layout: model.feature_layout,
        layer_dims: model.layer_dims.clone(),
        weights: model.layers.iter().map(|l| l.weights.clone()).collect(),
        biases: model.layers.iter().map(|l| l.biases.clone()).collect(),
        train_config: train_config.cloned(),
        seed,
    };
    let json = serde_json::to_string_pretty(&file).expect("model serialization cannot fail");
    fs::write(path, json + "\n").map_err(|e| VerifierError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn load_model(path: &Path) -> Result<(MlpModel, Option<TrainConfig>, u64), VerifierError> {
    let content = fs::read_to_string(path).map_err(|e| VerifierError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let bad = |message: String| VerifierError::ModelFile {
        path: path.to_path_buf(),
        message,
    };
    let file: ModelFile =
        serde_json::from_str(&content).map_err(|e| bad(format!("malformed model file: {e}")))?;
    if file.schema_version != MODEL_SCHEMA_VERSION {
        return Err(bad(format!(
            "schema version {} unsupported (expected {MODEL_SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    if file.layer_dims.len() < 2 || *file.layer_dims.last().unwrap() != 1 {
        return Err(bad("layer_dims must run input -> ... -> 1".into()));
    }
    if file.layer_dims[0] != file.feature_layout.len() {
        return Err(bad(format!(
            "input dim {} does not match feature layout ({})",
            file.layer_dims[0],
            file.feature_layout.len()
        )));
    }
    let n_layers = file.layer_dims.len() - 1;
    if file.weights.len() != n_layers || file.biases.len() != n_layers {
        return Err(bad("weights/biases count does not match layer_dims".into()));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let (in_dim, out_dim) = (file.layer_dims[l], file.layer_dims[l + 1]);
        if file.weights[l].len() != in_dim * out_dim || file.biases[l].len() != out_dim {
            return Err(bad(format!("layer {l} has inconsistent shapes")));
        }
        let finite = file.weights[l]
            .iter()
            .chain(&file.biases[l])
            .all(|v| v.is_finite());
        if !finite {
            return Err(bad(format!("layer {l} has non-finite parameters")));
        }
        layers.push(LayerParams {
            weights: file.weights[l].clone(),
            biases: file.biases[l].clone(),
        });
    }
    Ok((
        MlpModel {
            layer_dims: file.layer_dims,
            layers,
            feature_layout: file.feature_layout,
        },
        file.train_config,
        file.seed,
    ))
}
