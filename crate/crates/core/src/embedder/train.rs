use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    extract_features, ntxent_grad, timestamp_batch, AugmentConfig, EmbedError, EmbedderConfig, EmbedderModel,
    Gradients, TimestampSchedule,
};
use crate::ingest::RgbMaskSample;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub temperature: f64,
    pub seed: u64,
    pub augment: AugmentConfig,
    pub model: EmbedderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 80,
            lr: 0.01,
            momentum: 0.9,
            temperature: 0.1,
            seed: 0,
            augment: AugmentConfig::default(),
            model: EmbedderConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(EmbedError::BadTemperature(self.temperature));
        }
        if self.epochs == 0 {
            return Err(EmbedError::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(0.0..1.0).contains(&self.momentum) {
            return Err(EmbedError::InvalidConfig("lr must be >= 0 and momentum in [0, 1)".into()));
        }
        self.model.validate()
    }

    fn init_seed(&self) -> u64 {
        self.seed
    }

    fn schedule_seed(&self) -> u64 {
        self.seed ^ 0x5DEE_CE66_D1CE_4E5B
    }

    fn view_seed(&self) -> u64 {
        self.seed ^ 0x2545_F491_4F6C_DD1D
    }
}

/// Momentum SGD over timestamp-instanced batches, one instant per epoch.
pub struct Trainer<'a> {
    samples: Vec<&'a RgbMaskSample>,
    schedule: TimestampSchedule,
    cfg: TrainConfig,
    model: EmbedderModel,
    velocity: Gradients,
    epoch: usize,
    losses: Vec<f64>,
}

impl<'a> Trainer<'a> {
    pub fn new(samples: &[&'a RgbMaskSample], cfg: TrainConfig) -> Result<Self, EmbedError> {
        cfg.validate()?;
        let model = EmbedderModel::init(cfg.model, cfg.init_seed())?;
        Self::with_model(samples, cfg, model)
    }

    /// Continues from an existing model (epoch counter starts at 0).
    pub fn with_model(samples: &[&'a RgbMaskSample], cfg: TrainConfig, model: EmbedderModel) -> Result<Self, EmbedError> {
        cfg.validate()?;
        if model.config != cfg.model {
            return Err(EmbedError::InvalidConfig("model shape differs from training config".into()));
        }
        let schedule = TimestampSchedule::new(samples, cfg.schedule_seed())?;
        let velocity = Gradients::zeros_like(&model);
        Ok(Self { samples: samples.to_vec(), schedule, cfg, model, velocity, epoch: 0, losses: Vec::new() })
    }

    pub fn model(&self) -> &EmbedderModel {
        &self.model
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// Feature rows for the batch of `epoch`, pairs adjacent.
    pub fn batch_features(&self, epoch: usize) -> Result<Vec<Vec<f64>>, EmbedError> {
        let batch = timestamp_batch(&self.samples, &self.schedule, epoch, &self.cfg.augment, self.cfg.view_seed());
        let views: Vec<&image::RgbImage> = batch.views.iter().flat_map(|v| v.iter()).collect();
        views.par_iter().map(|img| extract_features(img, &self.cfg.model)).collect()
    }

    /// Runs one epoch and returns its loss (measured before the update).
    pub fn step(&mut self) -> Result<f64, EmbedError> {
        let feats = self.batch_features(self.epoch)?;
        let (loss, grads) = ntxent_grad(&self.model, &feats, self.cfg.temperature)
            .map_err(|e| match e {
                EmbedError::NonFiniteParameter | EmbedError::ZeroNorm => EmbedError::Diverged { epoch: self.epoch },
                other => other,
            })?;
        if !loss.is_finite() {
            return Err(EmbedError::Diverged { epoch: self.epoch });
        }
        let (lr, mu) = (self.cfg.lr, self.cfg.momentum);
        for ((param, vel), grad) in self
            .model
            .params_mut()
            .into_iter()
            .zip([&mut self.velocity.w1, &mut self.velocity.b1, &mut self.velocity.w2, &mut self.velocity.b2])
            .zip(grads.parts())
        {
            for ((p, v), g) in param.iter_mut().zip(vel.iter_mut()).zip(grad) {
                *v = mu * *v + g;
                *p -= lr * *v;
            }
        }
        if !self.model.is_finite() {
            return Err(EmbedError::Diverged { epoch: self.epoch });
        }
        self.losses.push(loss);
        self.epoch += 1;
        Ok(loss)
    }

    pub fn into_outcome(self) -> TrainOutcome {
        TrainOutcome { model: self.model, losses: self.losses }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: EmbedderModel,
    /// Loss of each epoch's batch.
    pub losses: Vec<f64>,
}

pub fn train(samples: &[&RgbMaskSample], cfg: &TrainConfig) -> Result<TrainOutcome, EmbedError> {
    let mut trainer = Trainer::new(samples, *cfg)?;
    for _ in 0..cfg.epochs {
        trainer.step()?;
    }
    Ok(trainer.into_outcome())
}

pub fn write_losses_csv(path: &Path, losses: &[f64]) -> Result<(), EmbedError> {
    let io = |e| EmbedError::Io { path: path.to_path_buf(), source: e };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(f, "epoch,loss").map_err(io)?;
    for (i, l) in losses.iter().enumerate() {
        writeln!(f, "{i},{l}").map_err(io)?;
    }
    f.flush().map_err(io)
}
