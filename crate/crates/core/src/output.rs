//! CSV tables, SVG line charts and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

/// A float with 17 significant digits, the shortest width that round-trips.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

#[derive(Clone, Debug)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::S(if v { "pass" } else { "fail" }.into())
    }
}

fn render_cell(c: &Cell) -> String {
    match c {
        Cell::F(v) => fmt_f64(*v),
        Cell::I(v) => v.to_string(),
        Cell::S(s) => {
            if s.contains(',') || s.contains('"') || s.contains('\n') {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.clone()
            }
        }
    }
}

/// An in-memory CSV table with a header row.
#[derive(Clone, Debug)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(render_cell).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// One polyline of a chart.
#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
}

impl Series {
    pub fn new(label: impl Into<String>, color: &'static str, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, color }
    }
}

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#555555"];

/// A plain SVG line chart with axes, tick labels and a legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let (w, h) = (720.0, 440.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let ty = |y: f64| if log_y { y.max(1e-300).log10() } else { y };
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && ty(p.1).is_finite());
    let mut x0 = pts().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut x1 = pts().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let mut y0 = pts().map(|p| ty(p.1)).fold(f64::INFINITY, f64::min);
    let mut y1 = pts().map(|p| ty(p.1)).fold(f64::NEG_INFINITY, f64::max);
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-300 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (ty(y) - y0) / (y1 - y0) * (h - mt - mb);
    let sy_raw = |v: f64| h - mb - (v - y0) / (y1 - y0) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - ml - mr,
        h - mt - mb
    );
    for k in 0..=5 {
        let xv = x0 + (x1 - x0) * k as f64 / 5.0;
        let yv = y0 + (y1 - y0) * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            sx(xv),
            h - mb + 16.0,
            tick(xv)
        );
        let ylab = if log_y { format!("1e{}", tick(yv)) } else { tick(yv) };
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            ml - 6.0,
            sy_raw(yv) + 4.0,
            ylab
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && ty(p.1).is_finite())
            .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                ser.color,
                path.join(" ")
            );
        }
        let ly = mt + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/>"#,
            w - mr - 150.0,
            w - mr - 130.0,
            ser.color
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            w - mr - 125.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.into()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Clone, Debug, Serialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub bytes: usize,
}

/// Record of one run: what was computed, from what, and which files it wrote.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub tolerances: serde_json::Value,
    pub diagnostics: serde_json::Value,
    pub status: String,
    pub parallel: bool,
    pub threads: usize,
    pub artifacts: Vec<ArtifactEntry>,
    pub wall_clock_seconds: f64,
}

/// Writes artifacts into an output directory and remembers them.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<ArtifactEntry>,
}

impl ArtifactWriter {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(ArtifactWriter { dir: dir.as_ref().to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.written.retain(|e| e.file != name);
        self.written.push(ArtifactEntry { file: name.to_string(), bytes: contents.len() });
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        self.write(name, &table.render())
    }

    pub fn artifacts(&self) -> &[ArtifactEntry] {
        &self.written
    }

    /// Write `manifest.json` listing every artifact, itself included.
    pub fn finish(mut self, mut manifest: RunManifest) -> Result<PathBuf> {
        self.written.push(ArtifactEntry { file: "manifest.json".into(), bytes: 0 });
        manifest.artifacts = self.written.clone();
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| crate::Error::Config(e.to_string()))?;
        let path = self.dir.join("manifest.json");
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_17_digits() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn table_renders_header_and_rows() {
        let mut t = Table::new(&["t", "site", "value"]);
        t.push(vec![0.5.into(), 3i64.into(), "a,b".into()]);
        assert_eq!(t.render(), "t,site,value\n5.0000000000000000e-1,3,\"a,b\"\n");
    }

    #[test]
    fn chart_is_well_formed() {
        let svg = line_chart("x < y", "t", "u", &[Series::new("s", PALETTE[0], vec![(0.0, 1.0), (1.0, 2.0)])], false);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("x &lt; y"));
    }
}
