//! The within-day five-fold protocol on clean and on corrupted masks.

use std::collections::HashMap;

use dazzle_reid::ingest::FrameInfo;
use dazzle_reid::pipeline::{samples_from_annotations, samples_from_detections, SampleConfig};
use dazzle_reid::reideval::{make_fold_plan, run_protocol, FoldMode, MetricSet, ProtocolConfig};
use dazzle_reid::synth::{corrupt, gen_corpus, CorpusSpec, CorruptionSpec, HerdSpec, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = CorpusSpec {
        days: 1,
        herd: HerdSpec { identities: 10, ..HerdSpec::default() },
        scene: SceneSpec { frames: 20, ..SceneSpec::default() },
        ..CorpusSpec::default()
    };
    let corpus = gen_corpus(&spec, 21)?;
    let index: HashMap<&str, usize> = corpus.manifest.frames().enumerate().map(|(i, (_, f))| (f.frame_id.as_str(), i)).collect();
    let load = |f: &FrameInfo| Ok(corpus.images[index[f.frame_id.as_str()]].clone());
    let sc = SampleConfig::default();

    let clean = samples_from_annotations(&corpus.manifest, &corpus.annotations, &sc, load)?;
    let noise = CorruptionSpec { jitter_sigma: 4.0, split_rate: 0.1, merge_rate: 0.1, ..CorruptionSpec::default() };
    let dets = corrupt(&corpus.annotations, &noise, 4)?;
    let noisy = samples_from_detections(&corpus.manifest, &dets, Some(&corpus.annotations), &sc, load)?;

    let mut cfg = ProtocolConfig::default();
    cfg.train.epochs = 40;
    for (name, samples) in [("clean", &clean), ("corrupted", &noisy)] {
        let days: Vec<_> = samples.iter().map(|s| s.day_id).collect();
        let plan = make_fold_plan(&days, FoldMode::WithinDayK5, 0)?;
        let report = run_protocol(samples, &plan, &cfg)?;
        println!("{name} ({} samples)", samples.len());
        for (metric, (m, s)) in MetricSet::NAMES.iter().zip(report.mean.values().into_iter().zip(report.std.values())) {
            println!("  {metric:<13} {m:.4} ± {s:.4}");
        }
    }
    Ok(())
}
