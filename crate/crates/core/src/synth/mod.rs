//! Synthetic "dazzle herd" corpora with known ground truth: coat patterns,
//! crowded scenes and controlled detector-output corruption.

mod corrupt;
mod pattern;
mod scene;

use std::path::Path;

use thiserror::Error;

pub use corrupt::{annotations_as_detections, corrupt, CorruptionSpec};
pub use pattern::{gen_herd, gen_identity_pattern, hue_color, pattern_difference, HerdSpec, IdentitySpec, MIN_PATTERN_DIFFERENCE};
pub use scene::{gen_corpus, gen_scene, render_frame, Corpus, CorpusSpec, Placement, RenderedFrame, SceneSpec};

use crate::ingest::{write_annotations, write_manifest, IngestError};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Writes `manifest.json`, `annotations.jsonl` and the PNG frames under `dir`.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<(), SynthError> {
    let frames_dir = dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| IngestError::Io { path: frames_dir.clone(), source: e })?;
    for ((_, frame), img) in corpus.manifest.frames().zip(&corpus.images) {
        let path = dir.join(&frame.image_path);
        img.save(&path).map_err(|e| IngestError::Image(format!("{}: {e}", path.display())))?;
    }
    write_manifest(&dir.join("manifest.json"), &corpus.manifest)?;
    write_annotations(&dir.join("annotations.jsonl"), &corpus.annotations)?;
    Ok(())
}
