//! Scores corrupted detections against ground truth at increasing box jitter.

use dazzle_reid::loceval::{evaluate_clip, GeometryMode, LocEvalConfig};
use dazzle_reid::synth::{corrupt, gen_corpus, CorpusSpec, CorruptionSpec, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = CorpusSpec { days: 1, scene: SceneSpec { frames: 6, overlap: 0.5, ..SceneSpec::default() }, ..CorpusSpec::default() };
    let corpus = gen_corpus(&spec, 3)?;
    let metrics = LocEvalConfig::default();
    println!("sigma  geometry  mean_iou  tp_acc  usage  matching");
    for sigma in [0.0, 2.0, 4.0, 8.0] {
        let dets = corrupt(&corpus.annotations, &CorruptionSpec { jitter_sigma: sigma, drop_rate: 0.05, ..CorruptionSpec::default() }, 11)?;
        for mode in [GeometryMode::Obb, GeometryMode::Mask] {
            let r = evaluate_clip(&corpus.annotations, &dets, mode, &metrics)?;
            println!(
                "{sigma:>5}  {:<8}  {:>8.3}  {:>6.3}  {:>5.3}  {:>8.3}",
                mode.as_str(),
                r.mean_iou,
                r.tp_accuracy,
                r.usage_rate.unwrap_or(0.0),
                r.matching_rate
            );
        }
    }
    Ok(())
}
