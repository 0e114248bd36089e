use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;

use crate::{Error, Result};

pub const WIDTH: f64 = 960.0;
pub const HEIGHT: f64 = 540.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

/// A CSV file loaded as strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let bad = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
        let mut r = csv::Reader::from_path(path).map_err(bad)?;
        let header = r.headers().map_err(bad)?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()
            .map_err(bad)?;
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column {name:?} not found")))
    }
}

/// What to plot: `y` columns against `x`, optionally split into one series
/// per distinct value of `group_by`, after keeping rows that match `filter`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpec {
    pub source: PathBuf,
    pub x: String,
    pub y: Vec<String>,
    pub group_by: Option<String>,
    pub filter: Vec<(String, String)>,
    pub title: String,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Result of rendering one chart: the SVG path when something was drawn,
/// plus a warning per skipped series.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartOutcome {
    pub written: Option<PathBuf>,
    pub warnings: Vec<String>,
}

/// Extracts series from a table. Empty cells and unparsable numbers are
/// dropped point by point.
pub fn collect_series(table: &Table, spec: &ChartSpec) -> Result<Vec<Series>> {
    let xi = table.column(&spec.x)?;
    let ys: Vec<usize> = spec.y.iter().map(|c| table.column(c)).collect::<Result<_>>()?;
    let gi = spec.group_by.as_deref().map(|g| table.column(g)).transpose()?;
    let filters: Vec<(usize, &str)> = spec
        .filter
        .iter()
        .map(|(c, v)| Ok((table.column(c)?, v.as_str())))
        .collect::<Result<_>>()?;
    let mut out: IndexMap<String, Vec<(f64, f64)>> = IndexMap::new();
    for row in &table.rows {
        if filters.iter().any(|&(c, v)| row.get(c).map(String::as_str) != Some(v)) {
            continue;
        }
        let x = row.get(xi).and_then(|s| s.parse::<f64>().ok());
        for (&yi, yname) in ys.iter().zip(&spec.y) {
            let label = match (gi, spec.y.len()) {
                (Some(g), 1) => row.get(g).cloned().unwrap_or_default(),
                (Some(g), _) => format!("{}:{yname}", row.get(g).map(String::as_str).unwrap_or("")),
                (None, _) => yname.clone(),
            };
            let entry = out.entry(label).or_default();
            let y = row.get(yi).and_then(|s| s.parse::<f64>().ok());
            if let (Some(x), Some(y)) = (x, y) {
                if x.is_finite() && y.is_finite() {
                    entry.push((x, y));
                }
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|(label, points)| Series { label, points })
        .collect())
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.3e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 0.5 } else { lo.abs() * 0.05 };
        (lo - pad, hi + pad)
    }
}

/// Renders non-empty series as a fixed-size SVG document. The output depends
/// only on the inputs.
pub fn render_svg(title: &str, x_label: &str, series: &[Series]) -> String {
    let pts = series.iter().flat_map(|s| &s.points);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (x0, x1) = span(x0, x1);
    let (y0, y1) = span(y0, y1);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + pw / 2.0,
        esc(title)
    );
    let (bx, by) = (LEFT, TOP + ph);
    let _ = writeln!(s, r#"<line x1="{bx:.2}" y1="{by:.2}" x2="{:.2}" y2="{by:.2}" stroke="black"/>"#, LEFT + pw);
    let _ = writeln!(s, r#"<line x1="{bx:.2}" y1="{TOP:.2}" x2="{bx:.2}" y2="{by:.2}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{bx:.2}" y="{:.2}" text-anchor="start">{}</text>"#, by + 18.0, fmt_tick(x0));
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT + pw, by + 18.0, fmt_tick(x1));
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, by + 40.0, esc(x_label));
    let _ = writeln!(s, r#"<text x="{:.2}" y="{by:.2}" text-anchor="end">{}</text>"#, bx - 6.0, fmt_tick(y0));
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, bx - 6.0, TOP + 4.0, fmt_tick(y1));

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/>"#,
            lx + 20.0
        );
        let _ = writeln!(s, r#"<text class="legend" x="{:.2}" y="{:.2}">{}</text>"#, lx + 26.0, ly + 4.0, esc(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

/// Reads the spec's CSV and writes its SVG. Series without data points are
/// skipped with a warning; if none remain, nothing is written.
pub fn render_chart(spec: &ChartSpec) -> Result<ChartOutcome> {
    let table = Table::read(&spec.source)?;
    let all = collect_series(&table, spec)?;
    let mut warnings = Vec::new();
    let mut keep = Vec::new();
    for s in all {
        if s.points.is_empty() {
            warnings.push(format!("{}: series {:?} has no data; skipped", spec.output.display(), s.label));
        } else {
            keep.push(s);
        }
    }
    if keep.is_empty() {
        warnings.push(format!("{}: no data to plot; chart skipped", spec.output.display()));
        return Ok(ChartOutcome { written: None, warnings });
    }
    let svg = render_svg(&spec.title, &spec.x, &keep);
    if let Some(dir) = spec.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&spec.output, svg).map_err(|e| Error::io(&spec.output, e))?;
    Ok(ChartOutcome {
        written: Some(spec.output.clone()),
        warnings,
    })
}
