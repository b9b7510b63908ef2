//! Reports, gate verdicts and their CSV/JSON/SVG serializations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::stats::normal_density;

/// Table cell: a number or a label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Num(x as f64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => format!("{x}"),
                    Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// How `observed` is judged against `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|observed - target| ≤ tolerance`
    Within,
    /// `observed ≤ target`
    AtMost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub status: Status,
    pub comparison: Comparison,
    pub observed: f64,
    pub target: f64,
    pub tolerance: f64,
    /// Slack left before failing; negative on failure.
    pub margin: f64,
    /// Where the target value comes from.
    pub source: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

fn finite(x: f64) -> f64 {
    if x.is_finite() { x } else if x.is_nan() { 0.0 } else { x.signum() * f64::MAX }
}

impl Gate {
    pub fn within(name: impl Into<String>, observed: f64, target: f64, tolerance: f64, source: &str) -> Self {
        let margin = tolerance - (observed - target).abs();
        let status = if margin >= 0.0 { Status::Pass } else { Status::Fail };
        Self {
            name: name.into(),
            status,
            comparison: Comparison::Within,
            observed: finite(observed),
            target: finite(target),
            tolerance: finite(tolerance),
            margin: finite(margin),
            source: source.into(),
            note: String::new(),
        }
    }

    pub fn at_most(name: impl Into<String>, observed: f64, bound: f64, source: &str) -> Self {
        let margin = bound - observed;
        let status = if margin >= 0.0 { Status::Pass } else { Status::Fail };
        Self {
            name: name.into(),
            status,
            comparison: Comparison::AtMost,
            observed: finite(observed),
            target: finite(bound),
            tolerance: 0.0,
            margin: finite(margin),
            source: source.into(),
            note: String::new(),
        }
    }

    pub fn skipped(name: impl Into<String>, note: &str) -> Self {
        Self {
            name: name.into(),
            status: Status::Skipped,
            comparison: Comparison::Within,
            observed: 0.0,
            target: 0.0,
            tolerance: 0.0,
            margin: 0.0,
            source: String::new(),
            note: note.into(),
        }
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.note = note.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

/// Binned sample with an optional centered Gaussian overlay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub name: String,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub overlay_sd: Option<f64>,
}

impl Histogram {
    pub fn from_samples(name: &str, samples: &[f64], bins: usize, overlay_sd: Option<f64>) -> Self {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0u64; bins];
        for &x in samples {
            let i = (((x - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Self { name: name.into(), edges, counts, overlay_sd }
    }

    /// Minimal standalone SVG: density bars plus the Gaussian curve.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 400.0, 40.0);
        let n: u64 = self.counts.iter().sum();
        let lo = self.edges[0];
        let hi = *self.edges.last().expect("edges");
        let dens: Vec<f64> = self
            .counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, e)| c as f64 / (n.max(1) as f64 * (e[1] - e[0])))
            .collect();
        let curve = |x: f64| self.overlay_sd.map_or(0.0, |sd| normal_density(x, sd));
        let peak = dens.iter().copied().fold(0.0, f64::max).max(self.overlay_sd.map_or(0.0, |_| curve(0.0)));
        let peak = if peak > 0.0 { peak } else { 1.0 };
        let sx = |x: f64| pad + (x - lo) / (hi - lo) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - y / peak * (h - 2.0 * pad);
        let mut svg = String::new();
        let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(svg, r#"<title>{}</title>"#, self.name);
        let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        for (d, e) in dens.iter().zip(self.edges.windows(2)) {
            let (x0, x1) = (sx(e[0]), sx(e[1]));
            let y = sy(*d);
            let _ = writeln!(
                svg,
                r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#9ab" stroke="#567"/>"##,
                (x1 - x0).max(0.0),
                (h - pad - y).max(0.0)
            );
        }
        if self.overlay_sd.is_some() {
            let pts: Vec<String> = (0..=200)
                .map(|i| {
                    let x = lo + (hi - lo) * i as f64 / 200.0;
                    format!("{:.2},{:.2}", sx(x), sy(curve(x)))
                })
                .collect();
            let _ = writeln!(svg, r##"<polyline fill="none" stroke="#c33" stroke-width="2" points="{}"/>"##, pts.join(" "));
        }
        let _ = writeln!(svg, r##"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"##, h - pad, w - pad);
        let _ = writeln!(svg, r#"<text x="{pad}" y="{}" font-size="12">{lo:.3}</text>"#, h - pad / 3.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{hi:.3}</text>"#, w - pad, h - pad / 3.0);
        svg.push_str("</svg>\n");
        svg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub tables: Vec<Table>,
    pub gates: Vec<Gate>,
    #[serde(default)]
    pub histograms: Vec<Histogram>,
    pub passed: bool,
}

impl Report {
    pub fn new(experiment: &str, config_hash: String, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash,
            seed,
            tables: Vec::new(),
            gates: Vec::new(),
            histograms: Vec::new(),
            passed: true,
        }
    }

    pub fn gate(&mut self, g: Gate) {
        self.gates.push(g);
    }

    /// Sets `passed` from the gates.
    pub fn finish(mut self) -> Self {
        self.passed = self.gates.iter().all(Gate::passed);
        self
    }

    pub fn failed_gates(&self) -> impl Iterator<Item = &Gate> {
        self.gates.iter().filter(|g| !g.passed())
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct EmitError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

/// Writes `report.json`, one `<table>.csv` per table and one `<histogram>.svg`
/// per histogram into `dir`, returning the paths in write order.
pub fn emit_report(report: &Report, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>, EmitError> {
    std::fs::create_dir_all(dir).map_err(|source| EmitError { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    let mut write = |name: String, body: String| -> Result<(), EmitError> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|source| EmitError { path: path.clone(), source })?;
        written.push(path);
        Ok(())
    };
    if formats.contains(&Format::Json) {
        write("report.json".into(), report.to_json())?;
    }
    if formats.contains(&Format::Csv) {
        for t in &report.tables {
            write(format!("{}.csv", t.name), t.to_csv())?;
        }
    }
    if formats.contains(&Format::Svg) {
        for h in &report.histograms {
            write(format!("{}.svg", h.name), h.to_svg())?;
        }
    }
    Ok(written)
}
