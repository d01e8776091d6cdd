//! CSV tables and small dependency-free SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::embedder::EmbeddingSet;
use crate::loceval::LocalisationReport;
use crate::reideval::{ClusteringReport, MetricSet};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, ReportError> {
    let file = File::create(path).map_err(|source| ReportError::Io { path: path.into(), source })?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ReportError + '_ {
    move |e| ReportError::Csv { path: path.into(), message: e.to_string() }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `metric,name,value`: the four headline metrics per geometry mode, then
/// every individual's clip-average IoU. Undefined values are left empty.
pub fn write_loc_metrics_csv(path: &Path, reports: &[LocalisationReport]) -> Result<(), ReportError> {
    let err = csv_err(path);
    let mut w = csv_writer(path)?;
    w.write_record(["metric", "name", "value"]).map_err(&err)?;
    for r in reports {
        let mode = r.mode.as_str();
        for (metric, v) in [
            ("mean_iou", Some(r.mean_iou)),
            ("tp_accuracy", Some(r.tp_accuracy)),
            ("usage_rate", r.usage_rate),
            ("matching_rate", Some(r.matching_rate)),
        ] {
            w.write_record([metric, mode, &cell(v)]).map_err(&err)?;
        }
        for (metric, v) in [("n_gt", r.n_gt), ("n_det", r.n_det), ("well_detected", r.well_detected)] {
            w.write_record([metric, mode, &v.to_string()]).map_err(&err)?;
        }
    }
    for r in reports {
        for (id, v) in &r.per_individual {
            w.write_record(["individual_iou", &format!("{}/{id}", r.mode.as_str()), &v.to_string()]).map_err(&err)?;
        }
    }
    w.flush().map_err(|source| ReportError::Io { path: path.into(), source })
}

/// `frame_id,geometry,mean_iou,usage_rate` in clip order.
pub fn write_per_frame_csv(path: &Path, reports: &[LocalisationReport]) -> Result<(), ReportError> {
    let err = csv_err(path);
    let mut w = csv_writer(path)?;
    w.write_record(["frame_id", "geometry", "mean_iou", "usage_rate"]).map_err(&err)?;
    for r in reports {
        for f in &r.per_frame {
            w.write_record([f.frame_id.as_str(), r.mode.as_str(), &cell(f.mean_iou), &cell(f.usage_rate)]).map_err(&err)?;
        }
    }
    w.flush().map_err(|source| ReportError::Io { path: path.into(), source })
}

/// `fold,metric,value`: one block per fold, then `mean` and `std` blocks.
pub fn write_reid_report_csv(path: &Path, report: &ClusteringReport) -> Result<(), ReportError> {
    let err = csv_err(path);
    let mut w = csv_writer(path)?;
    w.write_record(["fold", "metric", "value"]).map_err(&err)?;
    let mut block = |fold: &str, m: &MetricSet| -> Result<(), ReportError> {
        for (name, v) in MetricSet::NAMES.iter().zip(m.values()) {
            w.write_record([fold, name, &v.to_string()]).map_err(&err)?;
        }
        Ok(())
    };
    for f in &report.folds {
        block(&f.fold, &f.metrics)?;
    }
    block("mean", &report.mean)?;
    block("std", &report.std)?;
    w.flush().map_err(|source| ReportError::Io { path: path.into(), source })
}

/// Rows of `fold,metric,value` as written by [`write_reid_report_csv`].
pub fn read_reid_report_csv(path: &Path) -> Result<Vec<(String, String, f64)>, ReportError> {
    let err = csv_err(path);
    let mut r = csv::Reader::from_path(path).map_err(&err)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(&err)?;
        if rec.len() != 3 {
            return Err(ReportError::Csv { path: path.into(), message: format!("expected 3 columns, found {}", rec.len()) });
        }
        let v: f64 = rec[2]
            .parse()
            .map_err(|_| ReportError::Csv { path: path.into(), message: format!("bad value {:?}", &rec[2]) })?;
        out.push((rec[0].to_string(), rec[1].to_string(), v));
    }
    Ok(out)
}

/// `sample_id,label,e0..e{D-1}`; unlabelled samples get an empty label.
pub fn write_embeddings_csv(path: &Path, set: &EmbeddingSet) -> Result<(), ReportError> {
    let err = csv_err(path);
    let mut w = csv_writer(path)?;
    let dim = set.vectors.first().map_or(0, Vec::len);
    let mut header = vec!["sample_id".to_string(), "label".to_string()];
    header.extend((0..dim).map(|i| format!("e{i}")));
    w.write_record(&header).map_err(&err)?;
    for ((id, label), v) in set.sample_ids.iter().zip(&set.labels).zip(&set.vectors) {
        let mut row = vec![id.clone(), label.clone().unwrap_or_default()];
        row.extend(v.iter().map(f64::to_string));
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|source| ReportError::Io { path: path.into(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    std::fs::write(path, text).map_err(|source| ReportError::Io { path: path.into(), source })
}

/// Distinct, stable colour for the `i`-th of `n` categories.
pub fn palette(i: usize, n: usize) -> String {
    let [r, g, b] = crate::synth::hue_color(i, n.max(1));
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    ox: f64,
    oy: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone, ox: f64, oy: f64, w: f64, h: f64) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Self { x0, x1, y0, y1, ox, oy, w, h }
    }

    fn px(&self, x: f64) -> f64 {
        self.ox + (x - self.x0) / (self.x1 - self.x0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.oy + self.h - (y - self.y0) / (self.y1 - self.y0) * self.h
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (self.ox, self.ox + self.w, self.oy, self.oy + self.h);
        let _ = writeln!(out, r##"<rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##, self.w, self.h);
        let _ = writeln!(out, r#"<text x="{l:.1}" y="{:.1}" font-size="10">{:.3}</text>"#, b + 12.0, self.x0);
        let _ = writeln!(out, r#"<text x="{r:.1}" y="{:.1}" font-size="10" text-anchor="end">{:.3}</text>"#, b + 12.0, self.x1);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{b:.1}" font-size="10" text-anchor="end">{:.3}</text>"#, l - 4.0, self.y0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{:.3}</text>"#, l - 4.0, t + 10.0, self.y1);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#, (l + r) / 2.0, b + 26.0, escape(x_label));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
            l - 34.0,
            (t + b) / 2.0,
            l - 34.0,
            (t + b) / 2.0,
            escape(y_label)
        );
    }
}

/// A named polyline. `None` values break the line.
#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, Option<f64>)>,
}

pub fn line_plot_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 360.0);
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().filter_map(|p| p.1));
    let frame = Frame::new(xs, ys, 60.0, 30.0, w - 180.0, h - 80.0);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif">"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="18" font-size="13" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    frame.axes(&mut out, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        let color = palette(i, series.len());
        for run in s.points.split(|p| p.1.is_none()).filter(|r| !r.is_empty()) {
            let pts: Vec<String> = run.iter().map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(y.unwrap()))).collect();
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        }
        let ly = 40.0 + 16.0 * i as f64;
        let _ = writeln!(out, r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"#, w - 110.0, ly - 9.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{ly:.1}" font-size="11">{}</text>"#, w - 95.0, escape(&s.name));
    }
    out.push_str("</svg>\n");
    out
}

fn scatter_panel(out: &mut String, frame: &Frame, title: &str, points: &[[f64; 2]], labels: &[String]) {
    let mut cats: BTreeMap<&str, usize> = labels.iter().map(|l| (l.as_str(), 0)).collect();
    for (i, v) in cats.values_mut().enumerate() {
        *v = i;
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#, frame.ox + frame.w / 2.0, frame.oy - 6.0, escape(title));
    frame.axes(out, "PC1", "PC2");
    for (p, l) in points.iter().zip(labels) {
        let color = palette(cats[l.as_str()], cats.len());
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.8"><title>{}</title></circle>"#, frame.px(p[0]), frame.py(p[1]), escape(l));
    }
}

/// Two side-by-side scatter panels of the same 2-D points, coloured by
/// ground-truth identity and by cluster.
pub fn projection_svg(title: &str, points: &[[f64; 2]], truth: &[String], clusters: &[usize]) -> String {
    let (w, h) = (900.0, 440.0);
    let xs = points.iter().map(|p| p[0]);
    let ys = points.iter().map(|p| p[1]);
    let left = Frame::new(xs.clone(), ys.clone(), 60.0, 50.0, 360.0, 340.0);
    let right = Frame::new(xs, ys, 520.0, 50.0, 360.0, 340.0);
    let cluster_names: Vec<String> = clusters.iter().map(|c| format!("cluster {c:02}")).collect();
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif">"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="18" font-size="13" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    scatter_panel(&mut out, &left, "ground truth", points, truth);
    scatter_panel(&mut out, &right, "k-means", points, &cluster_names);
    out.push_str("</svg>\n");
    out
}
