//! 2-D scatter output: a CSV of the coordinates and a standalone SVG with
//! one color per label and a legend.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use svg::node::element::{Circle, Rectangle, Text};
use svg::Document;

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Clone, Debug, PartialEq)]
pub struct ScatterPoint {
    pub id: usize,
    pub label: Option<String>,
    pub u: f64,
    pub v: f64,
}

pub const UNLABELED: &str = "unlabeled";

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#bcbd22", "#17becf", "#7f7f7f"];
const UNLABELED_COLOR: &str = "#b0b0b0";

fn series_name(p: &ScatterPoint) -> &str {
    match p.label.as_deref() {
        Some(l) if !l.is_empty() => l,
        _ => UNLABELED,
    }
}

pub fn to_csv(points: &[ScatterPoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(["id", "label", "u", "v"]).map_err(csv_err)?;
    for p in points {
        w.write_record([p.id.to_string(), p.label.clone().unwrap_or_default(), p.u.to_string(), p.v.to_string()])
            .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Data(e.to_string()))
}

pub fn to_svg(points: &[ScatterPoint], title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 40.0;
    const LEGEND: f64 = 160.0;
    let labeled: BTreeSet<&str> = points.iter().map(series_name).filter(|s| *s != UNLABELED).collect();
    let mut series: Vec<&str> = labeled.into_iter().collect();
    if points.iter().any(|p| series_name(p) == UNLABELED) {
        series.push(UNLABELED);
    }
    let color = |name: &str| match series.iter().position(|s| *s == name) {
        _ if name == UNLABELED => UNLABELED_COLOR,
        Some(i) => PALETTE[i % PALETTE.len()],
        None => UNLABELED_COLOR,
    };
    let range = |f: fn(&ScatterPoint) -> f64| {
        let lo = points.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, lo + 1.0)
        }
    };
    let (ulo, uhi) = range(|p| p.u);
    let (vlo, vhi) = range(|p| p.v);
    let plot_w = W - 2.0 * PAD - LEGEND;
    let x = |u: f64| PAD + (u - ulo) / (uhi - ulo) * plot_w;
    let y = |v: f64| H - PAD - (v - vlo) / (vhi - vlo) * (H - 2.0 * PAD);

    let mut doc = Document::new()
        .set("xmlns", "http://www.w3.org/2000/svg")
        .set("viewBox", (0, 0, W, H))
        .set("width", W)
        .set("height", H)
        .add(Rectangle::new().set("width", W).set("height", H).set("fill", "white"))
        .add(
            Rectangle::new()
                .set("x", PAD)
                .set("y", PAD)
                .set("width", plot_w)
                .set("height", H - 2.0 * PAD)
                .set("fill", "none")
                .set("stroke", "#444"),
        )
        .add(Text::new(title).set("x", PAD).set("y", PAD - 12.0).set("font-family", "sans-serif").set("font-size", 14));
    for p in points {
        doc = doc.add(
            Circle::new()
                .set("cx", format!("{:.2}", x(p.u)))
                .set("cy", format!("{:.2}", y(p.v)))
                .set("r", 3)
                .set("fill", color(series_name(p)))
                .set("fill-opacity", 0.8),
        );
    }
    let lx = W - LEGEND - PAD / 2.0 + 20.0;
    for (i, name) in series.iter().enumerate() {
        let ly = PAD + 10.0 + 18.0 * i as f64;
        doc = doc.add(Circle::new().set("cx", lx).set("cy", ly).set("r", 5).set("fill", color(name))).add(
            Text::new(*name)
                .set("x", lx + 12.0)
                .set("y", ly + 4.0)
                .set("font-family", "sans-serif")
                .set("font-size", 12),
        );
    }
    doc.to_string()
}

/// Writes `<stem>.csv` and `<stem>.svg`, each replaced atomically.
pub fn emit_scatter(points: &[ScatterPoint], stem: &Path, title: &str) -> Result<(PathBuf, PathBuf)> {
    if points.is_empty() {
        return Err(Error::Data("nothing to plot".into()));
    }
    let csv_path = stem.with_extension("csv");
    let svg_path = stem.with_extension("svg");
    write_atomic(&csv_path, &to_csv(points)?)?;
    write_atomic(&svg_path, to_svg(points, title).as_bytes())?;
    Ok((csv_path, svg_path))
}
