//! Writes a per-frame localisation table and its SVG line plot.
//!
//! Usage: cargo run --example report_plots -- [OUT_DIR]

use dazzle_reid::loceval::{evaluate_clip, GeometryMode, LocEvalConfig};
use dazzle_reid::report::{line_plot_svg, write_loc_metrics_csv, write_per_frame_csv, write_text, Series};
use dazzle_reid::synth::{corrupt, gen_corpus, CorpusSpec, CorruptionSpec, SceneSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "report_plots".into()));
    std::fs::create_dir_all(&out)?;
    let spec = CorpusSpec { days: 1, scene: SceneSpec { frames: 12, ..SceneSpec::default() }, ..CorpusSpec::default() };
    let corpus = gen_corpus(&spec, 8)?;
    let dets = corrupt(&corpus.annotations, &CorruptionSpec { jitter_sigma: 3.0, drop_rate: 0.1, ..CorruptionSpec::default() }, 2)?;
    let reports = [GeometryMode::Obb, GeometryMode::Mask]
        .iter()
        .map(|&m| evaluate_clip(&corpus.annotations, &dets, m, &LocEvalConfig::default()))
        .collect::<Result<Vec<_>, _>>()?;
    write_loc_metrics_csv(&out.join("loc_metrics.csv"), &reports)?;
    write_per_frame_csv(&out.join("per_frame.csv"), &reports)?;
    let series: Vec<Series> = reports
        .iter()
        .map(|r| Series {
            name: r.mode.as_str().into(),
            points: r.per_frame.iter().enumerate().map(|(i, f)| (i as f64, f.mean_iou)).collect(),
        })
        .collect();
    write_text(&out.join("per_frame_iou.svg"), &line_plot_svg("Per-frame mean IoU", "frame", "IoU", &series))?;
    println!("wrote loc_metrics.csv, per_frame.csv and per_frame_iou.svg to {}", out.display());
    Ok(())
}
