//! Generates a small synthetic herd corpus and writes it to disk.
//!
//! Usage: cargo run --example synth_corpus -- [OUT_DIR]

use dazzle_reid::synth::{gen_corpus, write_corpus, CorpusSpec, HerdSpec, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic_corpus".into());
    let spec = CorpusSpec {
        days: 2,
        herd: HerdSpec { identities: 8, ..HerdSpec::default() },
        scene: SceneSpec { frames: 4, ..SceneSpec::default() },
        ..CorpusSpec::default()
    };
    let corpus = gen_corpus(&spec, 42)?;
    write_corpus(std::path::Path::new(&out), &corpus)?;
    let instances: usize = corpus.annotations.frames.iter().map(|f| f.annotations.len()).sum();
    println!("wrote {} frames over {} days, {instances} annotated instances, to {out}", corpus.images.len(), corpus.manifest.days.len());
    for id in corpus.herd.iter().take(3) {
        println!("  {} pattern seed {}", id.label, id.pattern_seed);
    }
    Ok(())
}
