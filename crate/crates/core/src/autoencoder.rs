//! Single-bottleneck autoencoder for compressing concept embeddings.
//!
//! `encoded = act(W_enc·x + b_enc)`, `reconstructed = W_dec·encoded + b_dec`.
//! The activation is identity (a linear autoencoder) or sigmoid; the decoder
//! is always linear. Training is seeded mini-batch gradient descent on the
//! mean squared reconstruction error, with hand-written backpropagation.

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{ConceptVector, CoocMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum AeError {
    #[error("invalid autoencoder config: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Identity,
    Sigmoid,
}

impl Activation {
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Sigmoid => T::one() / (T::one() + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation output `h`.
    fn derivative_from_output<T: Scalar>(self, h: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Sigmoid => h * (T::one() - h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    pub input_dim: usize,
    pub encoded_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub activation: Activation,
}

impl AeConfig {
    /// Defaults: lr 0.01, batch 32, 500 epochs, identity activation.
    pub fn new(input_dim: usize, encoded_dim: usize) -> Self {
        AeConfig {
            input_dim,
            encoded_dim,
            learning_rate: 0.01,
            epochs: 500,
            batch_size: 32,
            seed: 0,
            activation: Activation::Identity,
        }
    }

    pub fn validate(&self) -> Result<(), AeError> {
        let fail = |msg: &str| Err(AeError::Config(msg.to_string()));
        if self.encoded_dim == 0 || self.input_dim == 0 {
            return fail("dimensions must be positive");
        }
        if self.encoded_dim >= self.input_dim {
            return fail("encoded_dim must be smaller than input_dim");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be finite and non-negative");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        Ok(())
    }
}

/// Encoder/decoder parameters, matrices row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct AeModel<T> {
    input_dim: usize,
    encoded_dim: usize,
    activation: Activation,
    /// k×m
    w_enc: Vec<T>,
    b_enc: Vec<T>,
    /// m×k
    w_dec: Vec<T>,
    b_dec: Vec<T>,
}

/// Gradients with the same layout as [`AeModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub w_enc: Vec<T>,
    pub b_enc: Vec<T>,
    pub w_dec: Vec<T>,
    pub b_dec: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    fn zeros(m: usize, k: usize) -> Self {
        Gradients {
            w_enc: vec![T::zero(); k * m],
            b_enc: vec![T::zero(); k],
            w_dec: vec![T::zero(); m * k],
            b_dec: vec![T::zero(); m],
        }
    }

    /// All entries, in the order of [`AeModel::params`].
    pub fn flat(&self) -> Vec<T> {
        [&self.w_enc, &self.b_enc, &self.w_dec, &self.b_dec].into_iter().flatten().copied().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.flat().iter().all(|g| *g == T::zero())
    }
}

/// Uniform(−s, s) with s = √(6 / (m + k)); biases zero.
pub fn init_model<T: Scalar>(config: &AeConfig) -> Result<AeModel<T>, AeError> {
    config.validate()?;
    let (m, k) = (config.input_dim, config.encoded_dim);
    let s = (6.0 / (m + k) as f64).sqrt();
    let dist = Uniform::new_inclusive(-s, s);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw = |n: usize| -> Vec<T> { (0..n).map(|_| T::from_f64_lossy(dist.sample(&mut rng))).collect() };
    let w_enc = draw(k * m);
    let w_dec = draw(m * k);
    Ok(AeModel {
        input_dim: m,
        encoded_dim: k,
        activation: config.activation,
        w_enc,
        b_enc: vec![T::zero(); k],
        w_dec,
        b_dec: vec![T::zero(); m],
    })
}

impl<T: Scalar> AeModel<T> {
    /// Builds a model from explicit parameters (row-major `k×m` / `m×k`).
    pub fn from_params(
        input_dim: usize,
        encoded_dim: usize,
        activation: Activation,
        w_enc: Vec<T>,
        b_enc: Vec<T>,
        w_dec: Vec<T>,
        b_dec: Vec<T>,
    ) -> Result<Self, AeError> {
        let model = AeModel { input_dim, encoded_dim, activation, w_enc, b_enc, w_dec, b_dec };
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<(), AeError> {
        let (m, k) = (self.input_dim, self.encoded_dim);
        let shapes = [
            (self.w_enc.len(), k * m),
            (self.b_enc.len(), k),
            (self.w_dec.len(), m * k),
            (self.b_dec.len(), m),
        ];
        for (got, expected) in shapes {
            if got != expected {
                return Err(AeError::Dimension { expected, got });
            }
        }
        Ok(())
    }

    pub fn zeros(input_dim: usize, encoded_dim: usize, activation: Activation) -> Self {
        let (m, k) = (input_dim, encoded_dim);
        AeModel {
            input_dim,
            encoded_dim,
            activation,
            w_enc: vec![T::zero(); k * m],
            b_enc: vec![T::zero(); k],
            w_dec: vec![T::zero(); m * k],
            b_dec: vec![T::zero(); m],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn encoded_dim(&self) -> usize {
        self.encoded_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// `(rows, cols)` of the encoder weight matrix.
    pub fn encoder_shape(&self) -> (usize, usize) {
        (self.encoded_dim, self.input_dim)
    }

    pub fn decoder_shape(&self) -> (usize, usize) {
        (self.input_dim, self.encoded_dim)
    }

    pub fn w_enc(&self) -> &[T] {
        &self.w_enc
    }

    pub fn w_dec(&self) -> &[T] {
        &self.w_dec
    }

    pub fn b_enc(&self) -> &[T] {
        &self.b_enc
    }

    pub fn b_dec(&self) -> &[T] {
        &self.b_dec
    }

    /// All parameters in the order W_enc, b_enc, W_dec, b_dec.
    pub fn params(&self) -> Vec<T> {
        [&self.w_enc, &self.b_enc, &self.w_dec, &self.b_dec].into_iter().flatten().copied().collect()
    }

    pub fn param_count(&self) -> usize {
        self.w_enc.len() + self.b_enc.len() + self.w_dec.len() + self.b_dec.len()
    }

    /// Mutable access to parameter `idx` in [`AeModel::params`] order.
    pub fn param_mut(&mut self, mut idx: usize) -> &mut T {
        for block in [&mut self.w_enc, &mut self.b_enc, &mut self.w_dec, &mut self.b_dec] {
            if idx < block.len() {
                return &mut block[idx];
            }
            idx -= block.len();
        }
        panic!("parameter index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    fn encode_raw(&self, x: &[T]) -> Vec<T> {
        let m = self.input_dim;
        (0..self.encoded_dim)
            .map(|r| {
                let row = &self.w_enc[r * m..(r + 1) * m];
                let z = row.iter().zip(x).map(|(&w, &xi)| w * xi).sum::<T>() + self.b_enc[r];
                self.activation.apply(z)
            })
            .collect()
    }

    fn decode_raw(&self, h: &[T]) -> Vec<T> {
        let k = self.encoded_dim;
        (0..self.input_dim)
            .map(|r| {
                let row = &self.w_dec[r * k..(r + 1) * k];
                row.iter().zip(h).map(|(&w, &hi)| w * hi).sum::<T>() + self.b_dec[r]
            })
            .collect()
    }

    fn check_input(&self, x: &ConceptVector<T>) -> Result<(), AeError> {
        if x.dim() != self.input_dim {
            return Err(AeError::Dimension { expected: self.input_dim, got: x.dim() });
        }
        Ok(())
    }

    pub fn encode(&self, x: &ConceptVector<T>) -> Result<ConceptVector<T>, AeError> {
        self.check_input(x)?;
        Ok(ConceptVector::new(self.encode_raw(x.values())))
    }

    /// Returns `(encoded, reconstructed)`.
    pub fn forward(&self, x: &ConceptVector<T>) -> Result<(ConceptVector<T>, ConceptVector<T>), AeError> {
        self.check_input(x)?;
        let h = self.encode_raw(x.values());
        let r = self.decode_raw(&h);
        Ok((ConceptVector::new(h), ConceptVector::new(r)))
    }

    /// Batch loss `mean_x (1/m)·Σ(r − x)²` and its exact gradient.
    pub fn loss_and_gradients(&self, batch: &[ConceptVector<T>]) -> Result<(T, Gradients<T>), AeError> {
        if batch.is_empty() {
            return Err(AeError::EmptyBatch);
        }
        let (m, k) = (self.input_dim, self.encoded_dim);
        let mut grads = Gradients::zeros(m, k);
        let mut loss = T::zero();
        let scale = T::from_f64_lossy(2.0 / (batch.len() * m) as f64);
        let per_sample = T::from_f64_lossy(1.0 / (batch.len() * m) as f64);
        let mut dh = vec![T::zero(); k];
        for x in batch {
            self.check_input(x)?;
            let x = x.values();
            let h = self.encode_raw(x);
            let r = self.decode_raw(&h);
            dh.iter_mut().for_each(|v| *v = T::zero());
            for i in 0..m {
                let diff = r[i] - x[i];
                loss = loss + diff * diff * per_sample;
                let dr = diff * scale;
                grads.b_dec[i] = grads.b_dec[i] + dr;
                let w_row = &self.w_dec[i * k..(i + 1) * k];
                let g_row = &mut grads.w_dec[i * k..(i + 1) * k];
                for j in 0..k {
                    g_row[j] = g_row[j] + dr * h[j];
                    dh[j] = dh[j] + dr * w_row[j];
                }
            }
            for j in 0..k {
                let dz = dh[j] * self.activation.derivative_from_output(h[j]);
                grads.b_enc[j] = grads.b_enc[j] + dz;
                let g_row = &mut grads.w_enc[j * m..(j + 1) * m];
                for (g, &xi) in g_row.iter_mut().zip(x) {
                    *g = *g + dz * xi;
                }
            }
        }
        Ok((loss, grads))
    }

    /// Mean squared reconstruction error over `data`.
    pub fn mse(&self, data: &[ConceptVector<T>]) -> Result<T, AeError> {
        if data.is_empty() {
            return Err(AeError::EmptyBatch);
        }
        let m = T::from_f64_lossy(self.input_dim as f64);
        let mut total = T::zero();
        for x in data {
            let (_, r) = self.forward(x)?;
            total = total + x.values().iter().zip(r.values()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / m;
        }
        Ok(total / T::from_f64_lossy(data.len() as f64))
    }

    fn step(&mut self, grads: &Gradients<T>, lr: T) {
        let pairs = [
            (&mut self.w_enc, &grads.w_enc),
            (&mut self.b_enc, &grads.b_enc),
            (&mut self.w_dec, &grads.w_dec),
            (&mut self.b_dec, &grads.b_dec),
        ];
        for (params, g) in pairs {
            for (p, &d) in params.iter_mut().zip(g) {
                *p = *p - lr * d;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Full-data MSE after each epoch.
    pub loss_per_epoch: Vec<f64>,
    pub final_loss: f64,
    pub seed: u64,
}

/// Seeded mini-batch gradient descent. The shuffle stream is independent of
/// the initialization stream, so a fixed seed gives identical reports.
pub fn train<T: Scalar>(
    mut model: AeModel<T>,
    data: &[ConceptVector<T>],
    config: &AeConfig,
) -> Result<(AeModel<T>, TrainReport), AeError> {
    config.validate()?;
    if model.input_dim != config.input_dim || model.encoded_dim != config.encoded_dim {
        return Err(AeError::Config("model shape does not match config".into()));
    }
    if data.is_empty() {
        return Err(AeError::EmptyBatch);
    }
    for x in data {
        model.check_input(x)?;
    }
    let lr = T::from_f64_lossy(config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch: Vec<ConceptVector<T>> = Vec::with_capacity(config.batch_size);
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let (_, grads) = model.loss_and_gradients(&batch)?;
            model.step(&grads, lr);
        }
        let loss = model.mse(data)?.to_f64_lossy();
        if !loss.is_finite() || !model.is_finite() {
            return Err(AeError::Diverged { epoch, loss });
        }
        losses.push(loss);
    }
    let final_loss = *losses.last().expect("epochs >= 1");
    Ok((model, TrainReport { loss_per_epoch: losses, final_loss, seed: config.seed }))
}

/// Encodes every co-occurrence row (optionally L2-normalized) in concept order.
pub fn encode_all<T: Scalar>(
    model: &AeModel<T>,
    cooc: &CoocMatrix,
    normalized: bool,
) -> Result<Vec<ConceptVector<T>>, AeError> {
    if model.input_dim != cooc.m_concepts() {
        return Err(AeError::Dimension { expected: model.input_dim, got: cooc.m_concepts() });
    }
    crate::matrix::concept_embeddings::<T>(cooc, normalized)
        .iter()
        .map(|row| model.encode(row))
        .collect()
}

/// On-disk model: shapes, activation, seed and row-major parameters.
#[derive(Debug, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
struct ModelFile<T> {
    format: String,
    version: u32,
    seed: u64,
    #[serde(flatten)]
    model: AeModel<T>,
}

const MODEL_FORMAT: &str = "ace-selfsup-autoencoder";

/// JSON with shortest round-trip float formatting; loading is bit-exact.
pub fn model_to_json<T: Scalar>(model: &AeModel<T>, seed: u64) -> String {
    let file = ModelFile { format: MODEL_FORMAT.to_string(), version: 1, seed, model: model.clone() };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

/// Returns the model and the seed it was trained with.
pub fn model_from_json<T: Scalar>(json: &str) -> Result<(AeModel<T>, u64), AeError> {
    let file: ModelFile<T> = serde_json::from_str(json).map_err(|e| AeError::Format(e.to_string()))?;
    if file.format != MODEL_FORMAT || file.version != 1 {
        return Err(AeError::Format(format!("unsupported model format {} v{}", file.format, file.version)));
    }
    file.model.check_shapes()?;
    if !file.model.is_finite() {
        return Err(AeError::Format("non-finite parameter".into()));
    }
    Ok((file.model, file.seed))
}
