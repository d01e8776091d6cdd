//! Trains the contrastive encoder on co-temporal batches and checks how well
//! nearest neighbours recover identities afterwards.

use std::collections::HashMap;

use dazzle_reid::embedder::{embed_samples, train, TrainConfig};
use dazzle_reid::ingest::{FrameInfo, RgbMaskSample};
use dazzle_reid::pipeline::{samples_from_annotations, SampleConfig};
use dazzle_reid::reideval::knn_classify;
use dazzle_reid::synth::{gen_corpus, CorpusSpec, HerdSpec, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = CorpusSpec {
        days: 1,
        herd: HerdSpec { identities: 8, ..HerdSpec::default() },
        scene: SceneSpec { frames: 12, ..SceneSpec::default() },
        ..CorpusSpec::default()
    };
    let corpus = gen_corpus(&spec, 9)?;
    let index: HashMap<&str, usize> = corpus.manifest.frames().enumerate().map(|(i, (_, f))| (f.frame_id.as_str(), i)).collect();
    let load = |f: &FrameInfo| Ok(corpus.images[index[f.frame_id.as_str()]].clone());
    let samples = samples_from_annotations(&corpus.manifest, &corpus.annotations, &SampleConfig::default(), load)?;

    // early frames train, late frames query
    let (fit, held): (Vec<&RgbMaskSample>, Vec<&RgbMaskSample>) = samples.iter().partition(|s| s.timestamp < 8.0);
    let cfg = TrainConfig { epochs: 40, ..TrainConfig::default() };
    let outcome = train(&fit, &cfg)?;
    let first = outcome.losses.first().copied().unwrap_or(f64::NAN);
    let last = outcome.losses.last().copied().unwrap_or(f64::NAN);
    println!("{} training samples, loss {first:.3} -> {last:.3} over {} epochs", fit.len(), outcome.losses.len());

    let gallery = embed_samples(&outcome.model, &fit)?;
    let queries = embed_samples(&outcome.model, &held)?;
    let labels: Vec<String> = gallery.labels.iter().map(|l| l.clone().unwrap_or_default()).collect();
    let knn = knn_classify(&gallery.vectors, &labels, &queries.vectors, &queries.labels, 5)?;
    println!("held-out kNN accuracy {:.3} on {} queries", knn.accuracy.unwrap_or(0.0), held.len());
    Ok(())
}
