//! One function per subcommand. Each reads its inputs, writes artifacts under
//! the run's output directory and leaves `run_meta.json` to the caller.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::embedder::{embed_samples, load_checkpoint, save_checkpoint, train as train_model, write_losses_csv, EmbeddingSet};
use crate::ingest::{load_annotations, load_detections, load_manifest, load_samples, write_detections, write_samples};
use crate::ingest::{AnnotationSet, DatasetManifest, DetectionSet, FrameDetections, RgbMaskSample};
use crate::loceval::{evaluate_clip, LocEvalConfig};
use crate::pipeline::{load_frame, samples_from_annotations, samples_from_detections};
use crate::refine::refine as refine_frame;
use crate::reideval::{
    ami, ari, hungarian_accuracy, kmeans, knn_predict, make_fold_plan, nmi, pca_project_2d, run_protocol,
    ClusteringReport, KMeansConfig, MetricSet, Partition,
};
use crate::report::{
    line_plot_svg, projection_svg, read_reid_report_csv, write_embeddings_csv, write_loc_metrics_csv,
    write_per_frame_csv, write_reid_report_csv, write_text, Series,
};
use crate::synth::{corrupt, gen_corpus, write_corpus};

use super::{write_file, CliError, Command, Run, SampleSource};

fn need(path: Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    let path = path.ok_or_else(|| CliError::Usage(format!("{what} not found: no path configured")))?;
    if !path.exists() {
        return Err(CliError::Usage(format!("{what} not found: {}", path.display())));
    }
    Ok(path)
}

fn samples_dir(run: &Run) -> Result<PathBuf, CliError> {
    let dir = need(run.config.paths.samples.clone(), "samples")?;
    need(Some(dir.join("samples.jsonl")), "samples index")?;
    Ok(dir)
}

/// Validates configuration and input presence without side effects.
pub fn preflight(command: &Command, run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    match command {
        Command::Synth(_) => {
            cfg.synth.corpus().validate().map_err(CliError::usage)?;
            if let Some(c) = &cfg.synth.corruption {
                c.validate().map_err(CliError::usage)?;
            }
        }
        Command::Refine(_) => {
            cfg.refine.validate().map_err(CliError::usage)?;
            need(cfg.manifest_path(), "manifest")?;
            need(cfg.detections_path(), "detections")?;
        }
        Command::BuildMasks(_) => {
            if cfg.samples.resolution == 0 {
                return Err(CliError::Usage("samples.resolution must be positive".into()));
            }
            need(cfg.manifest_path(), "manifest")?;
            match cfg.samples.source {
                SampleSource::Annotations => need(cfg.annotations_path(), "annotations")?,
                SampleSource::Detections => need(cfg.detections_path(), "detections")?,
            };
        }
        Command::Loceval(_) => {
            cfg.loceval.metrics().validate().map_err(CliError::usage)?;
            if cfg.loceval.geometries.is_empty() {
                return Err(CliError::Usage("loceval.geometries is empty".into()));
            }
            need(cfg.manifest_path(), "manifest")?;
            need(cfg.annotations_path(), "annotations")?;
            need(cfg.detections_path(), "detections")?;
        }
        Command::Train(_) | Command::Crossval(_) => {
            cfg.train.validate().map_err(CliError::usage)?;
            samples_dir(run)?;
        }
        Command::Reideval(_) => {
            samples_dir(run)?;
            need(cfg.paths.model.clone(), "model checkpoint")?;
        }
        Command::Report(_) => {
            if cfg.report.inputs.is_empty() {
                return Err(CliError::Usage("report.inputs lists no run directories".into()));
            }
            for dir in &cfg.report.inputs {
                need(Some(dir.clone()), "report input")?;
            }
        }
    }
    Ok(())
}

fn manifest(run: &Run) -> Result<DatasetManifest, CliError> {
    let path = need(run.config.manifest_path(), "manifest")?;
    load_manifest(&path).map_err(CliError::failure)
}

fn annotations(run: &Run, m: &DatasetManifest) -> Result<AnnotationSet, CliError> {
    let path = need(run.config.annotations_path(), "annotations")?;
    load_annotations(&path, m).map_err(CliError::failure)
}

fn detections(run: &Run, m: &DatasetManifest) -> Result<DetectionSet, CliError> {
    let path = need(run.config.detections_path(), "detections")?;
    load_detections(&path, m).map_err(CliError::failure)
}

fn samples(run: &Run) -> Result<Vec<RgbMaskSample>, CliError> {
    let s = load_samples(&samples_dir(run)?).map_err(CliError::failure)?;
    if s.is_empty() {
        return Err(CliError::Failure("sample set is empty".into()));
    }
    Ok(s)
}

pub fn synth(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let corpus = gen_corpus(&cfg.synth.corpus(), cfg.sub_seed("synth")).map_err(CliError::failure)?;
    write_corpus(&run.out, &corpus).map_err(CliError::failure)?;
    let mut herd = String::from("label,pattern_seed,solid\n");
    for id in &corpus.herd {
        let solid = id.solid.map(|c| format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])).unwrap_or_default();
        let _ = writeln!(herd, "{},{},{solid}", id.label, id.pattern_seed);
    }
    write_file(&run.path("herd.csv"), herd.as_bytes())?;
    if let Some(spec) = &cfg.synth.corruption {
        let dets = corrupt(&corpus.annotations, spec, cfg.sub_seed("corrupt")).map_err(CliError::failure)?;
        write_detections(&run.path("detections.jsonl"), &dets).map_err(CliError::failure)?;
        println!("{} detections", dets.len());
    }
    let n: usize = corpus.annotations.frames.iter().map(|f| f.annotations.len()).sum();
    println!("{} days, {} frames, {} instances", corpus.manifest.days.len(), corpus.images.len(), n);
    Ok(())
}

pub fn refine(run: &Run) -> Result<(), CliError> {
    let m = manifest(run)?;
    let dets = detections(run, &m)?;
    let index = m.frame_index();
    let mut refined = DetectionSet::default();
    let mut table = String::from("frame_id,input,kept\n");
    let (mut total_in, mut total_kept) = (0, 0);
    for fd in &dets.frames {
        let (_, info) = index[fd.frame_id.as_str()];
        let kept = refine_frame(&fd.detections, info.width, info.height, &run.config.refine);
        let _ = writeln!(table, "{},{},{}", fd.frame_id, fd.detections.len(), kept.len());
        total_in += fd.detections.len();
        total_kept += kept.len();
        refined.frames.push(FrameDetections { frame_id: fd.frame_id.clone(), detections: kept });
    }
    write_detections(&run.path("detections.jsonl"), &refined).map_err(CliError::failure)?;
    write_file(&run.path("refine_counts.csv"), table.as_bytes())?;
    println!("kept {total_kept}, dropped {}", total_in - total_kept);
    Ok(())
}

pub fn build_masks(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let m = manifest(run)?;
    let root = cfg.frame_root();
    let load = |f: &crate::ingest::FrameInfo| load_frame(&root, f);
    let sc = cfg.samples.sample_config();
    let built = match cfg.samples.source {
        SampleSource::Annotations => samples_from_annotations(&m, &annotations(run, &m)?, &sc, load),
        SampleSource::Detections => {
            let dets = detections(run, &m)?;
            // labels come from ground truth when it is available
            let gt = match cfg.annotations_path() {
                Some(p) if p.exists() => Some(load_annotations(&p, &m).map_err(CliError::failure)?),
                _ => None,
            };
            samples_from_detections(&m, &dets, gt.as_ref(), &sc, load)
        }
    }
    .map_err(CliError::failure)?;
    write_samples(&run.out, &built).map_err(CliError::failure)?;
    let labelled = built.iter().filter(|s| s.identity.is_some()).count();
    println!("{} samples ({labelled} labelled)", built.len());
    Ok(())
}

pub fn loceval(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let m = manifest(run)?;
    let gt = annotations(run, &m)?;
    let dets = detections(run, &m)?;
    let metrics: LocEvalConfig = cfg.loceval.metrics();
    let reports = cfg
        .loceval
        .geometries
        .iter()
        .map(|&mode| {
            evaluate_clip(&gt, &dets, mode, &metrics).map_err(|e| match e {
                crate::loceval::LocEvalError::MissingMask { .. } => CliError::Usage(format!("geometry mode {}: {e}", mode.as_str())),
                e => CliError::failure(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    write_loc_metrics_csv(&run.path("loc_metrics.csv"), &reports).map_err(CliError::failure)?;
    write_per_frame_csv(&run.path("per_frame.csv"), &reports).map_err(CliError::failure)?;
    for (file, title, pick) in [
        ("per_frame_iou.svg", "mean IoU per frame", (|f: &crate::loceval::FrameSeries| f.mean_iou) as fn(&_) -> _),
        ("per_frame_usage.svg", "usage rate per frame", |f| f.usage_rate),
    ] {
        let series: Vec<Series> = reports
            .iter()
            .map(|r| Series {
                name: r.mode.as_str().to_string(),
                points: r.per_frame.iter().enumerate().map(|(i, f)| (i as f64, pick(f))).collect(),
            })
            .collect();
        write_text(&run.path(file), &line_plot_svg(title, "frame", title, &series)).map_err(CliError::failure)?;
    }
    for r in &reports {
        println!(
            "{}: mean_iou {:.4} tp_accuracy {:.4} usage_rate {} matching_rate {:.4}",
            r.mode.as_str(),
            r.mean_iou,
            r.tp_accuracy,
            r.usage_rate.map_or("n/a".to_string(), |v| format!("{v:.4}")),
            r.matching_rate
        );
    }
    Ok(())
}

fn loss_svg(path: &Path, runs: &[(String, &[f64])]) -> Result<(), CliError> {
    let series: Vec<Series> = runs
        .iter()
        .map(|(name, l)| Series { name: name.clone(), points: l.iter().enumerate().map(|(i, v)| ((i + 1) as f64, Some(*v))).collect() })
        .collect();
    write_text(path, &line_plot_svg("training loss", "epoch", "NT-Xent loss", &series)).map_err(CliError::failure)
}

/// K-Means with one cluster per labelled identity, plus the PCA plot.
fn cluster_and_plot(set: &EmbeddingSet, seed: u64, restarts: usize, svg: &Path, title: &str) -> Result<Option<Vec<usize>>, CliError> {
    let ids: BTreeSet<&str> = set.labels.iter().flatten().map(String::as_str).collect();
    if ids.len() < 2 || set.vectors.len() < 3 {
        return Ok(None);
    }
    let km = kmeans(&set.vectors, &KMeansConfig { k: ids.len().min(set.vectors.len()), restarts, max_iter: 300, seed })
        .map_err(CliError::failure)?;
    let proj = pca_project_2d(&set.vectors).map_err(CliError::failure)?;
    let truth: Vec<String> = set.labels.iter().map(|l| l.clone().unwrap_or_else(|| "(unlabelled)".into())).collect();
    write_text(svg, &projection_svg(title, &proj.points, &truth, &km.labels)).map_err(CliError::failure)?;
    Ok(Some(km.labels))
}

pub fn train(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let data = samples(run)?;
    let refs: Vec<&RgbMaskSample> = data.iter().collect();
    let tc = crate::embedder::TrainConfig { seed: cfg.sub_seed("train"), ..cfg.train };
    let outcome = train_model(&refs, &tc).map_err(CliError::failure)?;
    save_checkpoint(&run.path("model.ckpt"), &outcome.model).map_err(CliError::failure)?;
    write_losses_csv(&run.path("losses.csv"), &outcome.losses).map_err(CliError::failure)?;
    loss_svg(&run.path("losses.svg"), &[("train".into(), &outcome.losses)])?;
    let emb = embed_samples(&outcome.model, &refs).map_err(CliError::failure)?;
    write_embeddings_csv(&run.path("embeddings.csv"), &emb).map_err(CliError::failure)?;
    cluster_and_plot(&emb, cfg.sub_seed("kmeans"), cfg.protocol.kmeans_restarts, &run.path("projection.svg"), "embeddings")?;
    println!(
        "{} epochs, loss {:.4} -> {:.4}",
        outcome.losses.len(),
        outcome.losses.first().copied().unwrap_or(f64::NAN),
        outcome.losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn reideval(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let data = samples(run)?;
    let model_path = need(cfg.paths.model.clone(), "model checkpoint")?;
    let model = load_checkpoint(&model_path).map_err(CliError::failure)?;
    let labelled: Vec<&RgbMaskSample> = data.iter().filter(|s| s.identity.is_some()).collect();
    let ids: BTreeSet<&str> = labelled.iter().filter_map(|s| s.identity.as_deref()).collect();
    if ids.len() < 2 || labelled.len() < 3 {
        return Err(CliError::Failure(format!("need at least 2 identities and 3 labelled samples, found {} and {}", ids.len(), labelled.len())));
    }
    let emb = embed_samples(&model, &labelled).map_err(CliError::failure)?;
    write_embeddings_csv(&run.path("embeddings.csv"), &emb).map_err(CliError::failure)?;
    let labels: Vec<String> = emb.labels.iter().map(|l| l.clone().expect("filtered to labelled")).collect();

    // leave-one-out: every sample queries the rest
    let mut hits = 0;
    for i in 0..emb.vectors.len() {
        let gallery: Vec<Vec<f64>> = emb.vectors.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.clone()).collect();
        let glabels: Vec<String> = labels.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, l)| l.clone()).collect();
        let pred = knn_predict(&gallery, &glabels, &emb.vectors[i], cfg.protocol.knn_k.min(gallery.len())).map_err(CliError::failure)?;
        hits += usize::from(pred == labels[i]);
    }
    let clusters = cluster_and_plot(&emb, cfg.sub_seed("kmeans"), cfg.protocol.kmeans_restarts, &run.path("projection.svg"), "embeddings")?
        .expect("at least two identities");
    let truth = Partition::from_labels(&labels);
    let found = Partition::from_labels(&clusters);
    let metrics = MetricSet {
        knn_accuracy: hits as f64 / labels.len() as f64,
        ari: ari(&truth, &found).map_err(CliError::failure)?,
        ami: ami(&truth, &found).map_err(CliError::failure)?,
        nmi: nmi(&truth, &found).map_err(CliError::failure)?,
        ha_accuracy: hungarian_accuracy(&truth, &found).map_err(CliError::failure)?,
    };
    let report = ClusteringReport { folds: Vec::new(), mean: metrics, std: MetricSet::default() };
    write_reid_report_csv(&run.path("reid_report.csv"), &report).map_err(CliError::failure)?;
    println!("{metrics:?}");
    Ok(())
}

pub fn crossval(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let data = samples(run)?;
    let days: Vec<_> = data.iter().map(|s| s.day_id).collect();
    let plan = make_fold_plan(&days, cfg.protocol.fold_mode, cfg.sub_seed("folds")).map_err(CliError::usage)?;
    let mut plan_csv = String::from("fold,split,sample_id\n");
    for f in &plan.folds {
        for (split, ids) in [("train", &f.train), ("val", &f.val), ("test", &f.test)] {
            for &i in ids.iter() {
                let _ = writeln!(plan_csv, "{},{split},{}", f.name, data[i].sample_id);
            }
        }
    }
    write_file(&run.path("fold_plan.csv"), plan_csv.as_bytes())?;
    let report = run_protocol(&data, &plan, &cfg.protocol_config()).map_err(CliError::failure)?;
    write_reid_report_csv(&run.path("reid_report.csv"), &report).map_err(CliError::failure)?;

    let mut summary = String::from("fold,best_epoch,best_val_accuracy,n_train,n_test,n_identities\n");
    for f in &report.folds {
        let dir = run.out.join("folds").join(&f.fold);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Failure(format!("{}: {e}", dir.display())))?;
        save_checkpoint(&dir.join("model.ckpt"), &f.model).map_err(CliError::failure)?;
        write_losses_csv(&dir.join("losses.csv"), &f.losses).map_err(CliError::failure)?;
        write_embeddings_csv(&dir.join("embeddings.csv"), &f.test_embeddings).map_err(CliError::failure)?;
        let proj = pca_project_2d(&f.test_embeddings.vectors).map_err(CliError::failure)?;
        let truth: Vec<String> = f.test_embeddings.labels.iter().map(|l| l.clone().unwrap_or_default()).collect();
        let svg = projection_svg(&format!("fold {} test embeddings", f.fold), &proj.points, &truth, &f.cluster_labels);
        write_text(&dir.join("projection.svg"), &svg).map_err(CliError::failure)?;
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{}",
            f.fold,
            f.best_epoch,
            f.best_val_accuracy.map(|v| v.to_string()).unwrap_or_default(),
            f.n_train,
            f.n_test,
            f.n_identities
        );
    }
    write_file(&run.path("fold_summary.csv"), summary.as_bytes())?;
    let curves: Vec<(String, &[f64])> = report.folds.iter().map(|f| (f.fold.clone(), f.losses.as_slice())).collect();
    loss_svg(&run.path("losses.svg"), &curves)?;
    for (name, (m, s)) in MetricSet::NAMES.iter().zip(report.mean.values().into_iter().zip(report.std.values())) {
        println!("{name}: {m:.4} ± {s:.4}");
    }
    Ok(())
}

fn read_loc_metrics(path: &Path) -> Result<Vec<(String, String, String)>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
            match (rec.get(0), rec.get(1), rec.get(2)) {
                (Some(a), Some(b), Some(c)) => Ok((a.to_string(), b.to_string(), c.to_string())),
                _ => Err(CliError::Failure(format!("{}: expected metric,name,value", path.display()))),
            }
        })
        .collect()
}

/// Gathers `reid_report.csv` and `loc_metrics.csv` from each input directory.
pub fn report(run: &Run) -> Result<(), CliError> {
    let mut csv_out = String::from("run,table,key,metric,value\n");
    let mut md = String::from("# Run summary\n");
    for dir in &run.config.report.inputs {
        let name = dir.display().to_string();
        let _ = writeln!(md, "\n## {name}\n");
        let mut found = false;
        let reid = dir.join("reid_report.csv");
        if reid.exists() {
            found = true;
            let rows = read_reid_report_csv(&reid).map_err(CliError::failure)?;
            let _ = writeln!(md, "| metric | mean | std |\n|---|---|---|");
            for metric in MetricSet::NAMES {
                let get = |fold: &str| rows.iter().find(|r| r.0 == fold && r.1 == metric).map(|r| r.2);
                if let Some(mean) = get("mean") {
                    let _ = writeln!(md, "| {metric} | {mean:.4} | {:.4} |", get("std").unwrap_or(0.0));
                }
            }
            for (fold, metric, v) in &rows {
                let _ = writeln!(csv_out, "{name},reid,{fold},{metric},{v}");
            }
        }
        let loc = dir.join("loc_metrics.csv");
        if loc.exists() {
            found = true;
            let rows = read_loc_metrics(&loc)?;
            let _ = writeln!(md, "\n| geometry | metric | value |\n|---|---|---|");
            for (metric, key, v) in &rows {
                let _ = writeln!(csv_out, "{name},loc,{key},{metric},{v}");
                if metric != "individual_iou" {
                    let _ = writeln!(md, "| {key} | {metric} | {} |", if v.is_empty() { "n/a" } else { v });
                }
            }
        }
        if !found {
            return Err(CliError::Usage(format!("{name} holds neither reid_report.csv nor loc_metrics.csv")));
        }
    }
    write_file(&run.path("summary.csv"), csv_out.as_bytes())?;
    write_file(&run.path("summary.md"), md.as_bytes())?;
    println!("summarised {} runs", run.config.report.inputs.len());
    Ok(())
}
