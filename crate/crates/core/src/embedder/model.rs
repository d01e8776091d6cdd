use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract_features, EmbedError};
use crate::ingest::RgbMaskSample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub(crate) fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Relu => a.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `a` and output `h`.
    pub(crate) fn derivative(self, a: f64, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    /// Side of the square RGB-mask samples fed to the encoder.
    pub patch_size: u32,
    /// Side of the downsampled grid the MLP sees.
    pub input_side: u32,
    pub hidden: usize,
    pub dim: usize,
    pub activation: Activation,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self { patch_size: 128, input_side: 32, hidden: 128, dim: 64, activation: Activation::Relu }
    }
}

impl EmbedderConfig {
    pub fn input_len(&self) -> usize {
        (self.input_side * self.input_side * 3) as usize
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.patch_size == 0 || self.input_side == 0 || self.hidden == 0 || self.dim == 0 {
            return Err(EmbedError::InvalidConfig("encoder sizes must be positive".into()));
        }
        if self.input_side > self.patch_size {
            return Err(EmbedError::InvalidConfig("input_side may not exceed patch_size".into()));
        }
        Ok(())
    }
}

/// Two fully connected layers: `e = normalize(W2 act(W1 x + b1) + b2)`.
/// Weight matrices are row-major (`w1` is hidden x input).
#[derive(Clone, Debug, PartialEq)]
pub struct EmbedderModel {
    pub config: EmbedderConfig,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

const INPUT_CENTRE: f64 = 0.5;

/// Intermediate values of one forward pass, kept for backprop.
pub(crate) struct Trace {
    /// Centred input.
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    pub h: Vec<f64>,
    pub norm: f64,
    pub e: Vec<f64>,
}

impl EmbedderModel {
    /// Xavier-uniform weights, zero biases.
    pub fn init(config: EmbedderConfig, seed: u64) -> Result<Self, EmbedError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_in, n_h, n_out) = (config.input_len(), config.hidden, config.dim);
        let mut xavier = |fan_in: usize, fan_out: usize| -> Vec<f64> {
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out).map(|_| rng.gen_range(-lim..lim)).collect()
        };
        let w1 = xavier(n_in, n_h);
        let w2 = xavier(n_h, n_out);
        Ok(Self { config, w1, b1: vec![0.0; n_h], w2, b2: vec![0.0; n_out] })
    }

    pub fn zeros(config: EmbedderConfig) -> Self {
        let (n_in, n_h, n_out) = (config.input_len(), config.hidden, config.dim);
        Self { config, w1: vec![0.0; n_in * n_h], b1: vec![0.0; n_h], w2: vec![0.0; n_h * n_out], b2: vec![0.0; n_out] }
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameter blocks in the order `Gradients` uses: w1, b1, w2, b2.
    pub fn params(&self) -> [&Vec<f64>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn params_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn trace(&self, x: &[f64]) -> Result<Trace, EmbedError> {
        let n_in = self.config.input_len();
        if x.len() != n_in {
            return Err(EmbedError::FeatureLength { expected: n_in, actual: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFiniteInput);
        }
        let act = self.config.activation;
        // [0, 1] features are shifted to [-0.5, 0.5] so the first layer's
        // gradient is not dominated by the input's mean
        let x: Vec<f64> = x.iter().map(|v| v - INPUT_CENTRE).collect();
        let a: Vec<f64> = self
            .w1
            .chunks_exact(n_in)
            .zip(&self.b1)
            .map(|(row, b)| row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        let h: Vec<f64> = a.iter().map(|&v| act.apply(v)).collect();
        let u: Vec<f64> = self
            .w2
            .chunks_exact(self.config.hidden)
            .zip(&self.b2)
            .map(|(row, b)| row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(EmbedError::NonFiniteParameter);
        }
        if norm == 0.0 {
            return Err(EmbedError::ZeroNorm);
        }
        let e = u.iter().map(|v| v / norm).collect();
        Ok(Trace { x, a, h, norm, e })
    }

    /// Unit-norm embedding of one feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, EmbedError> {
        self.trace(x).map(|t| t.e)
    }
}

/// Embeddings of a sample collection, row-aligned with ids and labels.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    pub sample_ids: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<Option<String>>,
}

impl EmbeddingSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub fn embed_samples(model: &EmbedderModel, samples: &[&RgbMaskSample]) -> Result<EmbeddingSet, EmbedError> {
    if !model.is_finite() {
        return Err(EmbedError::NonFiniteParameter);
    }
    let vectors = samples
        .par_iter()
        .map(|s| extract_features(&s.pixels, &model.config).and_then(|f| model.forward(&f)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EmbeddingSet {
        sample_ids: samples.iter().map(|s| s.sample_id.clone()).collect(),
        vectors,
        labels: samples.iter().map(|s| s.identity.clone()).collect(),
    })
}
