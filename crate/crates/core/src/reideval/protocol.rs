//! Cross-validation runner: per fold, train the encoder on the training
//! members, pick the checkpoint with the best validation kNN accuracy, then
//! score kNN and clustering agreement on the test members.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ami, ari, hungarian_accuracy, kmeans, knn_classify, nmi, FoldPlan, KMeansConfig, Partition, ReidError};
use crate::embedder::{embed_samples, EmbedderModel, EmbeddingSet, TrainConfig, Trainer};
use crate::ingest::RgbMaskSample;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub knn_k: usize,
    pub kmeans_restarts: usize,
    /// Validation accuracy is checked every this many epochs (and at the end).
    pub val_every: usize,
    pub train: TrainConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self { knn_k: 5, kmeans_restarts: 10, val_every: 5, train: TrainConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub knn_accuracy: f64,
    pub ari: f64,
    pub ami: f64,
    pub nmi: f64,
    pub ha_accuracy: f64,
}

impl MetricSet {
    pub const NAMES: [&'static str; 5] = ["knn_accuracy", "ari", "ami", "nmi", "ha_accuracy"];

    pub fn values(&self) -> [f64; 5] {
        [self.knn_accuracy, self.ari, self.ami, self.nmi, self.ha_accuracy]
    }

    fn from_values(v: [f64; 5]) -> Self {
        Self { knn_accuracy: v[0], ari: v[1], ami: v[2], nmi: v[3], ha_accuracy: v[4] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub fold: String,
    pub metrics: MetricSet,
    /// Epoch count of the selected checkpoint.
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_identities: usize,
    pub losses: Vec<f64>,
    pub model: EmbedderModel,
    pub test_embeddings: EmbeddingSet,
    pub cluster_labels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusteringReport {
    pub folds: Vec<FoldResult>,
    pub mean: MetricSet,
    /// Sample standard deviation across folds; zero for a single fold.
    pub std: MetricSet,
}

fn labelled(set: &EmbeddingSet) -> (Vec<Vec<f64>>, Vec<String>) {
    set.vectors
        .iter()
        .zip(&set.labels)
        .filter_map(|(v, l)| l.as_ref().map(|l| (v.clone(), l.clone())))
        .unzip()
}

fn knn_accuracy(model: &EmbedderModel, gallery: &[&RgbMaskSample], queries: &[&RgbMaskSample], k: usize) -> Result<f64, ReidError> {
    let g = embed_samples(model, gallery)?;
    let q = embed_samples(model, queries)?;
    let (gv, gl) = labelled(&g);
    let k = k.min(gv.len());
    let out = knn_classify(&gv, &gl, &q.vectors, &q.labels, k)?;
    Ok(out.accuracy.unwrap_or(0.0))
}

fn fold_seed(base: u64, fold: usize) -> u64 {
    base.wrapping_add((fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_fold(samples: &[RgbMaskSample], plan: &FoldPlan, idx: usize, cfg: &ProtocolConfig) -> Result<FoldResult, ReidError> {
    let fold = &plan.folds[idx];
    let degenerate = |message: String| ReidError::DegenerateFold { fold: fold.name.clone(), message };
    let pick = |ids: &[usize]| -> Vec<&RgbMaskSample> { ids.iter().map(|&i| &samples[i]).collect() };
    let train = pick(&fold.train);
    let val = pick(&fold.val);
    let members = pick(&fold.test);

    // test members must never reach training or model selection
    let train_ids: HashSet<&str> = train.iter().map(|s| s.sample_id.as_str()).collect();
    let val_ids: HashSet<&str> = val.iter().map(|s| s.sample_id.as_str()).collect();
    if let Some(s) = members.iter().find(|s| train_ids.contains(s.sample_id.as_str()) || val_ids.contains(s.sample_id.as_str())) {
        return Err(degenerate(format!("test sample {} also used for training or validation", s.sample_id)));
    }
    // unmatched detections carry no identity and cannot be scored
    let test: Vec<&RgbMaskSample> = members.iter().copied().filter(|s| s.identity.is_some()).collect();
    if test.len() < members.len() {
        log::debug!("fold {}: {} unlabelled test samples skipped", fold.name, members.len() - test.len());
    }
    let identities: HashSet<&str> = test.iter().filter_map(|s| s.identity.as_deref()).collect();
    if identities.len() < 2 {
        return Err(degenerate(format!("test split has {} identities; at least 2 are required", identities.len())));
    }
    if !train.iter().any(|s| s.identity.is_some()) {
        return Err(degenerate("training split has no labelled samples for the kNN gallery".into()));
    }

    let mut train_cfg = cfg.train;
    train_cfg.seed = fold_seed(cfg.train.seed, idx);
    let mut trainer = Trainer::new(&train, train_cfg)?;
    let labelled_val: Vec<&RgbMaskSample> = val.iter().copied().filter(|s| s.identity.is_some()).collect();
    let mut best: Option<(f64, usize, EmbedderModel)> = None;
    for epoch in 1..=train_cfg.epochs {
        trainer.step()?;
        let checkpoint = epoch % cfg.val_every.max(1) == 0 || epoch == train_cfg.epochs;
        if checkpoint && !labelled_val.is_empty() {
            let acc = knn_accuracy(trainer.model(), &train, &labelled_val, cfg.knn_k)?;
            // later epochs win ties
            if best.as_ref().is_none_or(|(b, _, _)| acc >= *b) {
                best = Some((acc, epoch, trainer.model().clone()));
            }
        }
    }
    let (best_val_accuracy, best_epoch, model) = match best {
        Some((acc, epoch, model)) => (Some(acc), epoch, model),
        None => (None, trainer.epoch(), trainer.model().clone()),
    };
    let losses = trainer.losses().to_vec();

    let gallery = embed_samples(&model, &train)?;
    let queries = embed_samples(&model, &test)?;
    let (gv, gl) = labelled(&gallery);
    let knn = knn_classify(&gv, &gl, &queries.vectors, &queries.labels, cfg.knn_k.min(gv.len()))?;
    let km = kmeans(
        &queries.vectors,
        &KMeansConfig { k: identities.len(), restarts: cfg.kmeans_restarts, max_iter: 300, seed: fold_seed(train_cfg.seed, 1) },
    )?;
    let truth = Partition::from_labels(&queries.labels);
    let clusters = Partition::from_labels(&km.labels);
    let metrics = MetricSet {
        knn_accuracy: knn.accuracy.unwrap_or(0.0),
        ari: ari(&truth, &clusters)?,
        ami: ami(&truth, &clusters)?,
        nmi: nmi(&truth, &clusters)?,
        ha_accuracy: hungarian_accuracy(&truth, &clusters)?,
    };
    Ok(FoldResult {
        fold: fold.name.clone(),
        metrics,
        best_epoch,
        best_val_accuracy,
        n_train: train.len(),
        n_test: test.len(),
        n_identities: identities.len(),
        losses,
        model,
        test_embeddings: queries,
        cluster_labels: km.labels,
    })
}

/// Mean and sample standard deviation (n - 1 denominator).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Folds run in parallel; results come back in plan order.
pub fn run_protocol(samples: &[RgbMaskSample], plan: &FoldPlan, cfg: &ProtocolConfig) -> Result<ClusteringReport, ReidError> {
    if plan.folds.is_empty() {
        return Err(ReidError::FoldPlan("plan has no folds".into()));
    }
    let folds = (0..plan.folds.len())
        .into_par_iter()
        .map(|i| run_fold(samples, plan, i, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut mean = [0.0; 5];
    let mut std = [0.0; 5];
    for m in 0..5 {
        let col: Vec<f64> = folds.iter().map(|f| f.metrics.values()[m]).collect();
        (mean[m], std[m]) = mean_std(&col);
    }
    Ok(ClusteringReport { folds, mean: MetricSet::from_values(mean), std: MetricSet::from_values(std) })
}
