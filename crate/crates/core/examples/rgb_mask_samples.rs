//! Cuts masked, background-filled patches out of rendered frames.
//!
//! Usage: cargo run --example rgb_mask_samples -- [OUT_DIR]

use std::collections::HashMap;

use dazzle_reid::ingest::{write_samples, FrameInfo};
use dazzle_reid::pipeline::{samples_from_annotations, SampleConfig};
use dazzle_reid::synth::{gen_corpus, CorpusSpec, HerdSpec, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "rgb_mask_samples".into());
    let spec = CorpusSpec {
        days: 1,
        herd: HerdSpec { identities: 5, ..HerdSpec::default() },
        scene: SceneSpec { frames: 3, ..SceneSpec::default() },
        ..CorpusSpec::default()
    };
    let corpus = gen_corpus(&spec, 5)?;
    let index: HashMap<&str, usize> = corpus.manifest.frames().enumerate().map(|(i, (_, f))| (f.frame_id.as_str(), i)).collect();
    let load = |f: &FrameInfo| Ok(corpus.images[index[f.frame_id.as_str()]].clone());
    let cfg = SampleConfig { resolution: 64, ..SampleConfig::default() };
    let samples = samples_from_annotations(&corpus.manifest, &corpus.annotations, &cfg, load)?;
    write_samples(std::path::Path::new(&out), &samples)?;
    for s in samples.iter().take(4) {
        println!("{} {:?} background {:?}", s.sample_id, s.identity, s.dc);
    }
    println!("{} samples written to {out}", samples.len());
    Ok(())
}
