//! Hand-written SVG line charts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::csv;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("unknown column '{name}'; available columns: {}", available.join(", "))]
    UnknownColumn { name: String, available: Vec<String> },
    #[error("no plottable data rows")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: Vec<String>,
    pub log_x: bool,
    pub log_y: bool,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let t = if log { v.log10() } else { v };
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return None;
        }
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        Some(Self { lo, hi, log })
    }

    fn frac(&self, v: f64) -> f64 {
        let t = if self.log { v.log10() } else { v };
        (t - self.lo) / (self.hi - self.lo)
    }

    fn label(&self, t: f64) -> String {
        if self.log {
            format!("1e{t:.1}")
        } else {
            format!("{t:.4}")
        }
    }
}

fn usable(v: f64, log: bool) -> bool {
    v.is_finite() && (!log || v > 0.0)
}

fn column(header: &[String], name: &str) -> Result<usize, PlotError> {
    header.iter().position(|h| h == name).ok_or_else(|| PlotError::UnknownColumn {
        name: name.to_string(),
        available: header.to_vec(),
    })
}

/// Renders the chart as a string. Rows whose x or y cannot be drawn (empty,
/// non-finite, or nonpositive on a log axis) break the polyline.
pub fn render(header: &[String], rows: &[Vec<String>], spec: &PlotSpec) -> Result<String, PlotError> {
    let xi = column(header, &spec.x)?;
    let yis = spec.y.iter().map(|y| column(header, y)).collect::<Result<Vec<_>, _>>()?;
    let parse = |s: &str| s.parse::<f64>().unwrap_or(f64::NAN);
    let series: Vec<Vec<Option<(f64, f64)>>> = yis
        .iter()
        .map(|&yi| {
            rows.iter()
                .map(|r| {
                    let (x, y) = (parse(&r[xi]), parse(&r[yi]));
                    (usable(x, spec.log_x) && usable(y, spec.log_y)).then_some((x, y))
                })
                .collect()
        })
        .collect();
    let points = || series.iter().flatten().flatten();
    let xa = Axis::fit(points().map(|p| p.0), spec.log_x).ok_or(PlotError::Empty)?;
    let ya = Axis::fit(points().map(|p| p.1), spec.log_y).ok_or(PlotError::Empty)?;

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + xa.frac(x) * pw;
    let py = |y: f64| TOP + (1.0 - ya.frac(y)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let tx = xa.lo + f * (xa.hi - xa.lo);
        let ty = ya.lo + f * (ya.hi - ya.lo);
        let gx = LEFT + f * pw;
        let gy = TOP + (1.0 - f) * ph;
        let _ = writeln!(
            s,
            r##"<line x1="{gx:.2}" y1="{TOP}" x2="{gx:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            TOP + ph
        );
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{gy:.2}" x2="{:.2}" y2="{gy:.2}" stroke="#dddddd"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{gx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 18.0,
            xa.label(tx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            gy + 4.0,
            ya.label(ty)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        spec.x
    );

    for (n, (pts, name)) in series.iter().zip(&spec.y).enumerate() {
        let color = COLORS[n % COLORS.len()];
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, s: &mut String| {
            if !run.is_empty() {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    run.join(" ")
                );
                run.clear();
            }
        };
        for p in pts {
            match p {
                Some((x, y)) => run.push(format!("{:.2},{:.2}", px(*x), py(*y))),
                None => flush(&mut run, &mut s),
            }
        }
        flush(&mut run, &mut s);
        let ly = TOP + 16.0 + 18.0 * n as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 24.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{name}</text>"#, lx + 30.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Reads `csv_path`, renders it and writes the SVG to `out_path`. Nothing is
/// written on error.
pub fn plot(csv_path: &Path, spec: &PlotSpec, out_path: &Path) -> Result<(), PlotError> {
    let (header, rows) = csv::read(csv_path).map_err(|source| PlotError::Read {
        path: csv_path.display().to_string(),
        source,
    })?;
    let svg = render(&header, &rows, spec)?;
    fs::write(out_path, svg).map_err(|source| PlotError::Write {
        path: out_path.display().to_string(),
        source,
    })
}
