//! Report files: metrics JSON, ROC points CSV, and static SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{MetricsReport, RocCurve};

const WIDTH: f64 = 1000.0;
const HEIGHT: f64 = 800.0;
const MARGIN: f64 = 80.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn metrics_json(report: &MetricsReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("metrics serialize");
    s.push('\n');
    s
}

pub fn roc_csv(curve: &RocCurve) -> String {
    let mut s = String::from("fpr,tpr,threshold\n");
    for p in &curve.points {
        let _ = writeln!(s, "{},{},{}", p.fpr, p.tpr, p.threshold);
    }
    s
}

/// Maps unit coordinates into the plot area.
fn to_px(x: f64, y: f64, y_max: f64) -> (f64, f64) {
    let px = MARGIN + x * (WIDTH - 2.0 * MARGIN);
    let py = HEIGHT - MARGIN - (y / y_max) * (HEIGHT - 2.0 * MARGIN);
    (px, py)
}

fn svg_open(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="45" font-size="24" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="18" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 25.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="25" y="{}" font-size="18" text-anchor="middle" transform="rotate(-90 25 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(s: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str, dashed: bool) {
    let coords: Vec<String> = pts.map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dashed { r#" stroke-dasharray="8 6""# } else { "" };
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2.5"{dash}/>"#,
        coords.join(" ")
    );
}

fn legend(s: &mut String, row: usize, color: &str, text: &str) {
    let y = MARGIN + 30.0 + 28.0 * row as f64;
    let x = WIDTH - MARGIN - 300.0;
    let _ = writeln!(s, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="3"/>"#, x + 30.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="18">{}</text>"#, x + 40.0, y + 6.0, escape(text));
}

/// ROC plot, one curve per entry; legends carry the AUC to two decimals.
pub fn roc_svg(curves: &[(&str, &RocCurve)]) -> String {
    let mut s = svg_open("ROC curve", "False positive rate", "True positive rate");
    polyline(&mut s, [to_px(0.0, 0.0, 1.0), to_px(1.0, 1.0, 1.0)].into_iter(), "#999999", true);
    for (i, (name, curve)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(&mut s, curve.points.iter().map(|p| to_px(p.fpr, p.tpr, 1.0)), color, false);
        legend(&mut s, i, color, &format!("{name} (AUC = {:.2})", curve.auc));
    }
    s.push_str("</svg>\n");
    s
}

/// Train and validation loss per epoch for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCurve<'a> {
    pub name: &'a str,
    pub train: &'a [f64],
    pub validation: &'a [f64],
}

/// Loss plot: solid train and dashed validation lines per run.
pub fn loss_svg(curves: &[LossCurve<'_>]) -> String {
    let mut s = svg_open("Training curves", "Epoch", "Loss");
    let epochs = curves.iter().map(|c| c.train.len().max(c.validation.len())).max().unwrap_or(0);
    let y_max = curves
        .iter()
        .flat_map(|c| c.train.iter().chain(c.validation))
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-12)
        * 1.05;
    let x_of = |e: usize| if epochs > 1 { e as f64 / (epochs - 1) as f64 } else { 0.5 };
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(&mut s, c.train.iter().enumerate().map(|(e, &v)| to_px(x_of(e), v, y_max)), color, false);
        polyline(&mut s, c.validation.iter().enumerate().map(|(e, &v)| to_px(x_of(e), v, y_max)), color, true);
        legend(&mut s, i, color, &format!("{} train (solid) / validation (dashed)", c.name));
    }
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-size="14">1</text><text x="{}" y="{}" font-size="14" text-anchor="end">{epochs}</text><text x="{}" y="{}" font-size="14" text-anchor="end">{y_max:.3}</text>"#,
        HEIGHT - MARGIN + 20.0,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 20.0,
        MARGIN - 5.0,
        MARGIN + 5.0
    );
    s.push_str("</svg>\n");
    s
}

/// Writes `metrics.json`, `roc.csv`, `roc.svg`, and `loss.svg` into `dir`.
pub fn emit_report(dir: &Path, metrics: &MetricsReport, roc: &RocCurve, losses: &[LossCurve<'_>]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("metrics.json"), metrics_json(metrics))?;
    write_file(&dir.join("roc.csv"), roc_csv(roc))?;
    write_file(&dir.join("roc.svg"), roc_svg(&[("pooled", roc)]))?;
    write_file(&dir.join("loss.svg"), loss_svg(losses))
}
