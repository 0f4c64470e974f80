//! Multilayer perceptron trained by backpropagation under selectable costs.
//!
//! Besides per-neuron binary cross-entropy, the output layer can be driven
//! by the information potentials of [`crate::criterion`], evaluated per
//! output neuron over a window of samples: the fiducial term scores each
//! error sample, the entropy term scores all pairwise differences within the
//! window. Potentials are ascended, cross-entropy is descended; everything
//! below the output deltas is ordinary backpropagation through sigmoid
//! layers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criterion::FiducialMix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("network needs at least an input and an output layer, got {0} sizes")]
    TooFewLayers(usize),
    #[error("layer {index} has zero width")]
    EmptyLayer { index: usize },
    #[error("input has {got} features but the network expects {expected}")]
    InputDimension { got: usize, expected: usize },
    #[error("target has {got} components but the network has {expected} outputs")]
    TargetDimension { got: usize, expected: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch holds {inputs} inputs but {targets} targets")]
    RaggedBatch { inputs: usize, targets: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("label {label} out of range for {classes} classes")]
    LabelRange { label: usize, classes: usize },
    #[error("training rate {0} must be finite and positive")]
    InvalidRate(f64),
    #[error("non-finite parameter after update in epoch {epoch}")]
    NumericFailure { epoch: usize },
}

pub type Result<T> = std::result::Result<T, MlpError>;

/// Window of paired inputs and targets driving one cost evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl PairBatch {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(MlpError::EmptyBatch);
        }
        if inputs.len() != targets.len() {
            return Err(MlpError::RaggedBatch {
                inputs: inputs.len(),
                targets: targets.len(),
            });
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Output-layer cost selecting the training signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    CrossEntropy,
    Gmcc,
    Gmee,
    Gmeef,
}

impl CostKind {
    pub fn name(&self) -> &'static str {
        match self {
            CostKind::CrossEntropy => "cross_entropy",
            CostKind::Gmcc => "gmcc",
            CostKind::Gmee => "gmee",
            CostKind::Gmeef => "gmeef",
        }
    }

    /// Potentials are ascended (+1), cross-entropy is descended (−1).
    pub fn ascent_sign(&self) -> f64 {
        match self {
            CostKind::CrossEntropy => -1.0,
            _ => 1.0,
        }
    }

    /// Mixing weight applied to the fiducial term; `None` for cross-entropy.
    fn effective_lambda(&self, mix: &FiducialMix) -> Option<f64> {
        match self {
            CostKind::CrossEntropy => None,
            CostKind::Gmcc => Some(1.0),
            CostKind::Gmee => Some(0.0),
            CostKind::Gmeef => Some(mix.lambda()),
        }
    }
}

/// Parameter-shaped gradient holder.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

/// Whether an epoch steps once per window chunk or once per sample on a
/// sliding window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    #[default]
    Batch,
    Online,
}

/// Accuracy traces recorded before training (index 0) and after each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Vec<f64>,
}

/// Labeled classification data; targets are one-hot rows over `classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != labels.len() {
            return Err(MlpError::EmptyDataset);
        }
        for &l in &labels {
            if l >= classes {
                return Err(MlpError::LabelRange { label: l, classes });
            }
        }
        Ok(Self {
            inputs,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn one_hot(&self, index: usize) -> Vec<f64> {
        let mut t = vec![0.0; self.classes];
        t[self.labels[index]] = 1.0;
        t
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fully connected sigmoid network with per-neuron biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    sizes: Vec<usize>,
    /// weights[l][k][j]: layer l maps activation j to neuron k.
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

impl MlpNet {
    /// Seeded uniform initialization in ±√(6/(fan_in+fan_out)) per layer.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        Self::validate_sizes(sizes)?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 1..sizes.len() {
            let (fan_in, fan_out) = (sizes[l - 1], sizes[l]);
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_out)
                    .map(|_| (0..fan_in).map(|_| rng.gen_range(-r..r)).collect())
                    .collect(),
            );
            biases.push((0..fan_out).map(|_| rng.gen_range(-r..r)).collect());
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    fn validate_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 {
            return Err(MlpError::TooFewLayers(sizes.len()));
        }
        for (i, &s) in sizes.iter().enumerate() {
            if s == 0 {
                return Err(MlpError::EmptyLayer { index: i });
            }
        }
        Ok(())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Vec<Vec<f64>>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Replaces every weight matrix and bias vector (e.g. restoring a saved
    /// network or probing the cost surface). Shapes must match the
    /// architecture exactly.
    pub fn set_parameters(
        &mut self,
        weights: Vec<Vec<Vec<f64>>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<()> {
        let layers = self.sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(MlpError::TooFewLayers(weights.len().min(biases.len()) + 1));
        }
        for l in 0..layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            if weights[l].len() != fan_out || biases[l].len() != fan_out {
                return Err(MlpError::TargetDimension {
                    got: weights[l].len().min(biases[l].len()),
                    expected: fan_out,
                });
            }
            if let Some(row) = weights[l].iter().find(|r| r.len() != fan_in) {
                return Err(MlpError::InputDimension {
                    got: row.len(),
                    expected: fan_in,
                });
            }
        }
        self.weights = weights;
        self.biases = biases;
        Ok(())
    }

    /// Activations per layer, input included as layer 0.
    fn forward_cached(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_dim() {
            return Err(MlpError::InputDimension {
                got: x.len(),
                expected: self.input_dim(),
            });
        }
        let mut acts = vec![x.to_vec()];
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let prev = acts.last().unwrap();
            let next: Vec<f64> = w
                .iter()
                .zip(b)
                .map(|(row, bias)| {
                    sigmoid(row.iter().zip(prev).map(|(wi, ai)| wi * ai).sum::<f64>() + bias)
                })
                .collect();
            acts.push(next);
        }
        Ok(acts)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.pop().unwrap())
    }

    /// Fraction of samples whose arg-max output matches the label.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(MlpError::EmptyDataset);
        }
        let mut hits = 0usize;
        for (x, &label) in data.inputs.iter().zip(&data.labels) {
            let y = self.forward(x)?;
            let arg = y
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            if arg == label {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }

    fn check_batch(&self, batch: &PairBatch) -> Result<()> {
        for t in &batch.targets {
            if t.len() != self.output_dim() {
                return Err(MlpError::TargetDimension {
                    got: t.len(),
                    expected: self.output_dim(),
                });
            }
        }
        Ok(())
    }

    /// Window cost: per-neuron potentials summed over output neurons, or
    /// mean per-sample binary cross-entropy.
    pub fn cost(&self, batch: &PairBatch, kind: CostKind, mix: &FiducialMix) -> Result<f64> {
        self.check_batch(batch)?;
        let l = batch.len() as f64;
        let outputs: Vec<Vec<f64>> = batch
            .inputs
            .iter()
            .map(|x| self.forward(x))
            .collect::<Result<_>>()?;
        match kind.effective_lambda(mix) {
            None => {
                let mut c = 0.0;
                for (y, t) in outputs.iter().zip(&batch.targets) {
                    for (&yi, &ti) in y.iter().zip(t) {
                        let yi = yi.clamp(1e-12, 1.0 - 1e-12);
                        c -= ti * yi.ln() + (1.0 - ti) * (1.0 - yi).ln();
                    }
                }
                Ok(c / l)
            }
            Some(lambda) => {
                let k_out = self.output_dim();
                let mut c = 0.0;
                for k in 0..k_out {
                    let errs: Vec<f64> = outputs
                        .iter()
                        .zip(&batch.targets)
                        .map(|(y, t)| t[k] - y[k])
                        .collect();
                    if lambda > 0.0 {
                        let fid: f64 = errs.iter().map(|&e| mix.corr().eval(e)).sum();
                        c += lambda * fid / l;
                    }
                    if lambda < 1.0 {
                        let mut ent = 0.0;
                        for &a in &errs {
                            for &b in &errs {
                                ent += mix.ent().eval(a - b);
                            }
                        }
                        c += (1.0 - lambda) * ent / (l * l);
                    }
                }
                Ok(c)
            }
        }
    }

    /// Exact cost gradient over the window via backpropagation. The output
    /// deltas seed ∂C/∂net; hidden layers are standard.
    pub fn gradient(
        &self,
        batch: &PairBatch,
        kind: CostKind,
        mix: &FiducialMix,
    ) -> Result<MlpGradient> {
        self.check_batch(batch)?;
        let l = batch.len();
        let lf = l as f64;
        let caches: Vec<Vec<Vec<f64>>> = batch
            .inputs
            .iter()
            .map(|x| self.forward_cached(x))
            .collect::<Result<_>>()?;
        let k_out = self.output_dim();

        // ∂C/∂e per output neuron per sample; empty for cross-entropy, which
        // seeds ∂C/∂net directly.
        let lambda = kind.effective_lambda(mix);
        let mut dcde = vec![vec![0.0; l]; k_out];
        if let Some(lambda) = lambda {
            for k in 0..k_out {
                let errs: Vec<f64> = caches
                    .iter()
                    .zip(&batch.targets)
                    .map(|(acts, t)| t[k] - acts.last().unwrap()[k])
                    .collect();
                for rho in 0..l {
                    let mut d = 0.0;
                    if lambda > 0.0 {
                        d += lambda / lf * mix.corr().score_clamped(errs[rho]);
                    }
                    if lambda < 1.0 {
                        let mut pair = 0.0;
                        for tau in 0..l {
                            pair += mix.ent().score_clamped(errs[rho] - errs[tau]);
                        }
                        d += (1.0 - lambda) * 2.0 / (lf * lf) * pair;
                    }
                    dcde[k][rho] = d;
                }
            }
        }

        let mut gw: Vec<Vec<Vec<f64>>> = self
            .weights
            .iter()
            .map(|w| w.iter().map(|row| vec![0.0; row.len()]).collect())
            .collect();
        let mut gb: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();

        for (rho, acts) in caches.iter().enumerate() {
            let y = acts.last().unwrap();
            // Seed ∂C/∂net at the output layer.
            let mut delta: Vec<f64> = (0..k_out)
                .map(|k| {
                    let phi_prime = y[k] * (1.0 - y[k]);
                    match lambda {
                        None => (y[k] - batch.targets[rho][k]) / lf,
                        // e = t − y, so ∂C/∂net = ∂C/∂e · (−1) · φ'(net).
                        Some(_) => -dcde[k][rho] * phi_prime,
                    }
                })
                .collect();
            for layer in (0..self.weights.len()).rev() {
                let prev = &acts[layer];
                for (k, &dk) in delta.iter().enumerate() {
                    for (j, &aj) in prev.iter().enumerate() {
                        gw[layer][k][j] += dk * aj;
                    }
                    gb[layer][k] += dk;
                }
                if layer > 0 {
                    delta = (0..self.sizes[layer])
                        .map(|j| {
                            let back: f64 =
                                delta.iter().enumerate().map(|(k, &dk)| dk * self.weights[layer][k][j]).sum();
                            back * prev[j] * (1.0 - prev[j])
                        })
                        .collect();
                }
            }
        }
        Ok(MlpGradient {
            weights: gw,
            biases: gb,
        })
    }

    /// Applies one step along the cost's training direction: ascent for the
    /// potentials, descent for cross-entropy.
    pub fn apply(&mut self, grad: &MlpGradient, rate: f64, kind: CostKind) -> Result<()> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(MlpError::InvalidRate(rate));
        }
        let s = kind.ascent_sign() * rate;
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            for (row, grow) in w.iter_mut().zip(g) {
                for (wi, gi) in row.iter_mut().zip(grow) {
                    *wi += s * gi;
                }
            }
        }
        for (b, g) in self.biases.iter_mut().zip(&grad.biases) {
            for (bi, gi) in b.iter_mut().zip(g) {
                *bi += s * gi;
            }
        }
        Ok(())
    }

    fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .flatten()
            .flatten()
            .all(|w| w.is_finite())
            && self.biases.iter().flatten().all(|b| b.is_finite())
    }

    /// Trains for `epochs` passes over `train`, evaluating accuracy on both
    /// sets before training and after every epoch. Samples are shuffled each
    /// epoch with a seeded generator; `Batch` mode steps once per window
    /// chunk of `window` samples, `Online` mode steps on a sliding window at
    /// every sample.
    #[allow(clippy::too_many_arguments)]
    pub fn train(
        &mut self,
        train: &Dataset,
        test: &Dataset,
        kind: CostKind,
        mix: &FiducialMix,
        epochs: usize,
        window: usize,
        rate: f64,
        seed: u64,
        mode: UpdateMode,
    ) -> Result<TrainReport> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(MlpError::InvalidRate(rate));
        }
        assert!(window > 0, "window must be positive");
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut report = TrainReport {
            train_accuracy: vec![self.accuracy(train)?],
            test_accuracy: vec![self.accuracy(test)?],
        };
        let mut order: Vec<usize> = (0..train.len()).collect();
        for epoch in 0..epochs {
            // Fisher-Yates with the seeded generator.
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            match mode {
                UpdateMode::Batch => {
                    for chunk in order.chunks(window) {
                        let batch = PairBatch::new(
                            chunk.iter().map(|&i| train.inputs[i].clone()).collect(),
                            chunk.iter().map(|&i| train.one_hot(i)).collect(),
                        )?;
                        let g = self.gradient(&batch, kind, mix)?;
                        self.apply(&g, rate, kind)?;
                    }
                }
                UpdateMode::Online => {
                    let mut held: Vec<usize> = Vec::with_capacity(window);
                    for &i in &order {
                        if held.len() == window {
                            held.remove(0);
                        }
                        held.push(i);
                        let batch = PairBatch::new(
                            held.iter().map(|&i| train.inputs[i].clone()).collect(),
                            held.iter().map(|&i| train.one_hot(i)).collect(),
                        )?;
                        let g = self.gradient(&batch, kind, mix)?;
                        self.apply(&g, rate, kind)?;
                    }
                }
            }
            if !self.is_finite() {
                return Err(MlpError::NumericFailure { epoch });
            }
            report.train_accuracy.push(self.accuracy(train)?);
            report.test_accuracy.push(self.accuracy(test)?);
        }
        Ok(report)
    }
}

/// Deterministic two-moons-free synthetic set: class centers sit on a circle
/// of radius `separation` in the first two feature dimensions; samples are
/// the centers plus seeded Gaussian jitter of deviation `noise`.
pub fn gen_clusters(
    total: usize,
    classes: usize,
    dim: usize,
    separation: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if total == 0 || classes == 0 || dim < 2 {
        return Err(MlpError::EmptyDataset);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for i in 0..total {
        let c = i % classes;
        let angle = 2.0 * std::f64::consts::PI * c as f64 / classes as f64;
        let mut x = vec![0.0; dim];
        x[0] = separation * angle.cos();
        x[1] = separation * angle.sin();
        for v in x.iter_mut() {
            // Box-Muller from two seeded uniforms.
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            *v += noise * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
        inputs.push(x);
        labels.push(c);
    }
    Dataset::new(inputs, labels, classes)
}

/// Reads an IDX image file (magic 0x00000803): unsigned bytes scaled to
/// [0, 1], one flattened row per image.
pub fn load_idx_images(path: &std::path::Path) -> std::io::Result<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path)?;
    let (dims, data) = parse_idx(&bytes, 3)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    let px = rows * cols;
    if data.len() != n * px {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "IDX payload shorter than header dimensions",
        ));
    }
    Ok((0..n)
        .map(|i| data[i * px..(i + 1) * px].iter().map(|&b| b as f64 / 255.0).collect())
        .collect())
}

/// Reads an IDX label file (magic 0x00000801).
pub fn load_idx_labels(path: &std::path::Path) -> std::io::Result<Vec<usize>> {
    let bytes = std::fs::read(path)?;
    let (dims, data) = parse_idx(&bytes, 1)?;
    if data.len() != dims[0] {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "IDX payload shorter than header dimensions",
        ));
    }
    Ok(data.iter().map(|&b| b as usize).collect())
}

fn parse_idx(bytes: &[u8], want_dims: usize) -> std::io::Result<(Vec<usize>, &[u8])> {
    let bad = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
    if bytes.len() < 4 {
        return Err(bad("IDX file shorter than its magic number"));
    }
    if bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 0x08 {
        return Err(bad("unsupported IDX type (expected unsigned bytes)"));
    }
    let ndims = bytes[3] as usize;
    if ndims != want_dims {
        return Err(bad("unexpected IDX dimensionality"));
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(bad("IDX file shorter than its dimension header"));
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|i| {
            u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize
        })
        .collect();
    Ok((dims, &bytes[header..]))
}

/// Reads labeled vectors from plain CSV rows `label,v0,v1,…`; feature values
/// are taken verbatim.
pub fn load_csv_dataset(path: &std::path::Path, classes: usize) -> std::io::Result<Dataset> {
    let bad = |msg: String| std::io::Error::new(std::io::ErrorKind::InvalidData, msg);
    let text = std::fs::read_to_string(path)?;
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label: usize = fields
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|e| bad(format!("line {}: bad label: {e}", lineno + 1)))?;
        let row: Vec<f64> = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: bad value: {e}", lineno + 1)))?;
        inputs.push(row);
        labels.push(label);
    }
    Dataset::new(inputs, labels, classes)
        .map_err(|e| bad(format!("invalid dataset: {e}")))
}
