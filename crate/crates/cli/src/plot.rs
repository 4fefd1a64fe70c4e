//! Static SVG line and scatter plots of CSV columns.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Line,
    Scatter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    pub x: String,
    pub y: Vec<String>,
    pub kind: PlotKind,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub x_label: Option<String>,
    #[serde(default)]
    pub y_label: Option<String>,
    /// Output path; the CSV path with an `.svg` extension when absent.
    #[serde(default)]
    pub output: Option<String>,
}

impl PlotSpec {
    pub fn new(kind: PlotKind, x: &str, y: &[&str], title: &str) -> Self {
        Self {
            x: x.into(),
            y: y.iter().map(|s| s.to_string()).collect(),
            kind,
            title: title.into(),
            x_label: None,
            y_label: None,
            output: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let spec: PlotSpec = toml::from_str(&text).map_err(|e| CliError::Config(e.message().to_string()))?;
        if spec.y.is_empty() {
            return Err(CliError::Config("y: at least one column is required".into()));
        }
        Ok(spec)
    }
}

/// Named columns of a CSV; empty cells are `None`. Lines starting with `#`
/// are ignored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(false)
            .from_path(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let row = rec
                .iter()
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>()
                            .map(Some)
                            .map_err(|_| CliError::Config(format!("{}: bad number {cell:?}", path.display())))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize, CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("column {name:?} not found")))
    }

    /// Finite `(x, y)` pairs for one y column.
    pub fn pairs(&self, x: usize, y: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| match (r[x], r[y]) {
                (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Some((a, b)),
                _ => None,
            })
            .collect()
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
/// Line plots keep at most this many vertices per series.
const MAX_LINE_POINTS: usize = 20_000;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Render `series` (one entry per y column) as an SVG document.
pub fn render_svg(spec: &PlotSpec, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut out = String::new();
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        WIDTH / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        out,
        "<line class=\"axis\" x1=\"{LEFT}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        TOP + ph,
        LEFT + pw,
        TOP + ph
    );
    let _ = writeln!(
        out,
        "<line class=\"axis\" x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{}\" stroke=\"black\"/>",
        TOP + ph
    );
    let x_label = spec.x_label.clone().unwrap_or_else(|| spec.x.clone());
    let y_label = spec.y_label.clone().unwrap_or_else(|| spec.y.join(", "));
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 {})\">{}</text>",
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&y_label)
    );

    let all = || series.iter().flat_map(|(_, pts)| pts.iter());
    if all().next().is_none() {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">no data</text>",
            LEFT + pw / 2.0,
            TOP + ph / 2.0
        );
        out.push_str("</svg>\n");
        return out;
    }
    let (x0, x1) = range(all().map(|p| p.0));
    let (y0, y1) = range(all().map(|p| p.1));
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\">{}</text>",
            sx(fx),
            TOP + ph + 16.0,
            tick_label(fx)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\">{}</text>",
            LEFT - 6.0,
            sy(fy) + 4.0,
            tick_label(fy)
        );
    }

    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        match spec.kind {
            PlotKind::Line => {
                if pts.is_empty() {
                    continue;
                }
                let stride = pts.len().div_ceil(MAX_LINE_POINTS);
                let mut coords: Vec<String> =
                    pts.iter().step_by(stride).map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
                if (pts.len() - 1) % stride != 0 {
                    let p = pts[pts.len() - 1];
                    coords.push(format!("{:.2},{:.2}", sx(p.0), sy(p.1)));
                }
                let _ = writeln!(
                    out,
                    "<polyline data-series=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1\" points=\"{}\"/>",
                    escape(name),
                    coords.join(" ")
                );
            }
            PlotKind::Scatter => {
                for p in pts {
                    let _ = writeln!(
                        out,
                        "<circle data-series=\"{}\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"{color}\"/>",
                        escape(name),
                        sx(p.0),
                        sy(p.1)
                    );
                }
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Read `csv_path`, render it per `spec` and write the SVG. Returns the
/// output path.
pub fn plot(csv_path: &Path, spec: &PlotSpec) -> Result<std::path::PathBuf, CliError> {
    let table = Table::read(csv_path)?;
    let xi = table.column_index(&spec.x)?;
    let mut series = Vec::new();
    for y in &spec.y {
        let yi = table.column_index(y)?;
        series.push((y.clone(), table.pairs(xi, yi)));
    }
    let out = match &spec.output {
        Some(p) => std::path::PathBuf::from(p),
        None => csv_path.with_extension("svg"),
    };
    std::fs::write(&out, render_svg(spec, &series)).map_err(CliError::Io)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_series_annotated() {
        let spec = PlotSpec::new(PlotKind::Line, "t", &["theta2"], "empty");
        let svg = render_svg(&spec, &[("theta2".into(), vec![])]);
        assert!(svg.contains("no data"));
        assert_eq!(svg.matches("class=\"axis\"").count(), 2);
        assert!(!svg.contains("<polyline"));
    }

    #[test]
    fn two_point_line() {
        let spec = PlotSpec::new(PlotKind::Line, "t", &["y"], "two");
        let svg = render_svg(&spec, &[("y".into(), vec![(0.0, 0.0), (1.0, 2.0)])]);
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 2);
    }

    #[test]
    fn scatter_marker_per_point() {
        let spec = PlotSpec::new(PlotKind::Scatter, "theta2", &["omega2"], "p");
        let pts: Vec<(f64, f64)> = (0..37).map(|k| (k as f64, (k * k) as f64)).collect();
        let svg = render_svg(&spec, &[("omega2".into(), pts)]);
        assert_eq!(svg.matches("<circle").count(), 37);
    }

    #[test]
    fn long_lines_are_thinned_but_keep_endpoints() {
        let spec = PlotSpec::new(PlotKind::Line, "t", &["y"], "long");
        let pts: Vec<(f64, f64)> = (0..50_001).map(|k| (k as f64, (k as f64).sin())).collect();
        let svg = render_svg(&spec, &[("y".into(), pts)]);
        let coords = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let n = coords.split(' ').count();
        assert!(n <= MAX_LINE_POINTS + 1);
        assert!(coords.ends_with(&format!("{:.2},{}", WIDTH - RIGHT, coords.rsplit(',').next().unwrap())));
    }

    #[test]
    fn title_is_escaped() {
        let spec = PlotSpec::new(PlotKind::Line, "t", &["y"], "a<b & c");
        let svg = render_svg(&spec, &[]);
        assert!(svg.contains("a&lt;b &amp; c"));
    }
}
