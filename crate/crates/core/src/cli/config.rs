//! The declarative run file. Every section is optional and falls back to
//! library defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedder::TrainConfig;
use crate::loceval::{GeometryMode, LocEvalConfig, MatchingRateMode, TpAccuracyMode};
use crate::pipeline::SampleConfig;
use crate::refine::RefineConfig;
use crate::reideval::{FoldMode, ProtocolConfig};
use crate::synth::{CorpusSpec, CorruptionSpec, HerdSpec, SceneSpec};

use super::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub paths: Paths,
    pub refine: RefineConfig,
    pub loceval: LocEvalSection,
    pub samples: SamplesSection,
    pub train: TrainConfig,
    pub protocol: ProtocolSection,
    pub synth: SynthSection,
    pub report: ReportSection,
}

/// Input locations. `dataset` is the corpus root that frame paths are
/// relative to; the file paths default to the standard names inside it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    /// Directory holding `samples.jsonl` and its patches.
    pub samples: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    #[default]
    Annotations,
    Detections,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplesSection {
    pub source: SampleSource,
    pub resolution: u32,
    pub once_per_second: bool,
}

impl Default for SamplesSection {
    fn default() -> Self {
        let d = SampleConfig::default();
        Self { source: SampleSource::default(), resolution: d.resolution, once_per_second: d.once_per_second }
    }
}

impl SamplesSection {
    pub fn sample_config(&self) -> SampleConfig {
        SampleConfig { resolution: self.resolution, once_per_second: self.once_per_second }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocEvalSection {
    pub iou_threshold: f64,
    pub well_detected_threshold: f64,
    pub tp_accuracy: TpAccuracyMode,
    pub matching_rate: MatchingRateMode,
    pub geometries: Vec<GeometryMode>,
}

impl Default for LocEvalSection {
    fn default() -> Self {
        let d = LocEvalConfig::default();
        Self {
            iou_threshold: d.iou_threshold,
            well_detected_threshold: d.well_detected_threshold,
            tp_accuracy: d.tp_accuracy,
            matching_rate: d.matching_rate,
            geometries: vec![GeometryMode::Obb, GeometryMode::Mask],
        }
    }
}

impl LocEvalSection {
    pub fn metrics(&self) -> LocEvalConfig {
        LocEvalConfig {
            iou_threshold: self.iou_threshold,
            well_detected_threshold: self.well_detected_threshold,
            tp_accuracy: self.tp_accuracy,
            matching_rate: self.matching_rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub fold_mode: FoldMode,
    pub knn_k: usize,
    pub kmeans_restarts: usize,
    pub val_every: usize,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let d = ProtocolConfig::default();
        Self { fold_mode: FoldMode::DayWiseK9, knn_k: d.knn_k, kmeans_restarts: d.kmeans_restarts, val_every: d.val_every }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub days: usize,
    pub start_date: NaiveDate,
    pub herd: HerdSpec,
    pub scene: SceneSpec,
    /// When present, a corrupted copy of the ground truth is written as
    /// `detections.jsonl`.
    pub corruption: Option<CorruptionSpec>,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = CorpusSpec::default();
        Self { days: d.days, start_date: d.start_date, herd: d.herd, scene: d.scene, corruption: None }
    }
}

impl SynthSection {
    pub fn corpus(&self) -> CorpusSpec {
        CorpusSpec { days: self.days, start_date: self.start_date, herd: self.herd, scene: self.scene }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Earlier run directories to summarise.
    pub inputs: Vec<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// SHA-256 of the resolved configuration's canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    /// Per-module seed derived from the global one.
    pub fn sub_seed(&self, name: &str) -> u64 {
        let digest = Sha256::digest(format!("{}:{name}", self.seed).as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            knn_k: self.protocol.knn_k,
            kmeans_restarts: self.protocol.kmeans_restarts,
            val_every: self.protocol.val_every,
            train: TrainConfig { seed: self.sub_seed("train"), ..self.train },
        }
    }

    fn dataset_file(&self, explicit: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
        explicit.clone().or_else(|| self.paths.dataset.as_ref().map(|d| d.join(name)))
    }

    pub fn manifest_path(&self) -> Option<PathBuf> {
        self.dataset_file(&self.paths.manifest, "manifest.json")
    }

    pub fn annotations_path(&self) -> Option<PathBuf> {
        self.dataset_file(&self.paths.annotations, "annotations.jsonl")
    }

    pub fn detections_path(&self) -> Option<PathBuf> {
        self.dataset_file(&self.paths.detections, "detections.jsonl")
    }

    /// Frame image paths are resolved against this directory.
    pub fn frame_root(&self) -> PathBuf {
        self.paths
            .dataset
            .clone()
            .or_else(|| self.manifest_path().and_then(|m| m.parent().map(Path::to_path_buf)))
            .unwrap_or_default()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.loceval.geometries, vec![GeometryMode::Obb, GeometryMode::Mask]);
    }

    #[test]
    fn sections_parse_and_unknown_keys_fail() {
        let cfg: RunConfig = toml::from_str(
            r#"
            seed = 4
            [refine]
            area_ratio_lo = 0.01
            [loceval]
            iou_threshold = 0.5
            geometries = ["mask"]
            [protocol]
            fold_mode = "single_day"
            [synth]
            days = 2
            [synth.herd]
            identities = 5
            [synth.corruption]
            jitter_sigma = 2.0
            [train.model]
            hidden = 32
            "#,
        )
        .unwrap();
        assert_eq!(cfg.refine.area_ratio_lo, 0.01);
        assert_eq!(cfg.loceval.iou_threshold, 0.5);
        assert_eq!(cfg.protocol.fold_mode, FoldMode::SingleDay);
        assert_eq!(cfg.synth.herd.identities, 5);
        assert_eq!(cfg.synth.corruption.unwrap().jitter_sigma, 2.0);
        assert_eq!(cfg.train.model.hidden, 32);
        assert!(toml::from_str::<RunConfig>("[refine]\nnms = 0.3").is_err());
        assert!(toml::from_str::<RunConfig>("sede = 1").is_err());
    }

    #[test]
    fn sub_seeds_are_stable_and_distinct() {
        let cfg = RunConfig { seed: 7, ..Default::default() };
        assert_eq!(cfg.sub_seed("train"), cfg.clone().sub_seed("train"));
        assert_ne!(cfg.sub_seed("train"), cfg.sub_seed("folds"));
        assert_ne!(cfg.sub_seed("train"), RunConfig::default().sub_seed("train"));
    }
}
