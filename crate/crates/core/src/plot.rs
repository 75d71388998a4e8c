//! Deterministic SVG line plots from simple CSV tables.
//!
//! The first column is the x axis; every further column becomes one series.
//! Output contains no timestamps or randomness, so identical input produces
//! byte-identical SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

struct Table {
    headers: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn parse_csv(text: &str, origin: &str) -> Result<Table> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::malformed(origin, 1, "empty file"))?;
    let headers: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if headers.len() < 2 {
        return Err(Error::malformed(origin, 1, "need x plus one series"));
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != headers.len() {
            return Err(Error::malformed(
                origin,
                idx + 1,
                format!("expected {} fields, got {}", headers.len(), fields.len()),
            ));
        }
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| {
                Error::malformed(origin, idx + 1, format!("bad number {f:?}"))
            })?;
            columns[c].push(v);
        }
    }
    if columns[0].len() < 2 {
        return Err(Error::malformed(origin, 1, "need at least two rows"));
    }
    Ok(Table { headers, columns })
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-300);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    } * mag;
    let first = (lo / step).ceil() * step;
    let mut out = Vec::new();
    let mut v = first;
    while v <= hi + step * 1e-9 {
        out.push(v);
        v += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1e4 || a < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

/// Renders a CSV table to an SVG line plot.
pub fn render_plot(csv_text: &str, origin: &str) -> Result<String> {
    let table = parse_csv(csv_text, origin)?;
    let x = &table.columns[0];
    let series = &table.columns[1..];

    let (xmin, xmax) = bounds(x);
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        let (lo, hi) = bounds(s);
        ymin = ymin.min(lo);
        ymax = ymax.max(hi);
    }
    if !(xmin.is_finite() && ymin.is_finite()) {
        return Err(Error::malformed(origin, 1, "non-finite data"));
    }
    let (xmin, xmax) = pad_range(xmin, xmax);
    let (ymin, ymax) = pad_range(ymin, ymax);

    let px = |v: f64| MARGIN_L + (v - xmin) / (xmax - xmin) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |v: f64| HEIGHT - MARGIN_B - (v - ymin) / (ymax - ymin) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN_B
    );
    for t in nice_ticks(xmin, xmax, 6) {
        let xp = px(t);
        let y0 = HEIGHT - MARGIN_B;
        let _ = writeln!(
            svg,
            r#"<line x1="{xp:.2}" y1="{y0}" x2="{xp:.2}" y2="{}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{xp:.2}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
            y0 + 20.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(ymin, ymax, 6) {
        let yp = py(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{yp:.2}" x2="{MARGIN_L}" y2="{yp:.2}" stroke="black"/>"#,
            MARGIN_L - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-size="12" text-anchor="end">{}</text>"#,
            MARGIN_L - 9.0,
            yp + 4.0,
            fmt_tick(t)
        );
    }
    // Axis labels from headers.
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0,
        escape(&table.headers[0])
    );
    let ylabel = if series.len() == 1 {
        table.headers[1].clone()
    } else {
        String::new()
    };
    if !ylabel.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&ylabel)
        );
    }

    // Series.
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut points = String::new();
        for (xv, yv) in x.iter().zip(s) {
            let _ = write!(points, "{:.2},{:.2} ", px(*xv), py(*yv));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.trim_end()
        );
        // Legend.
        let lx = WIDTH - MARGIN_R - 150.0;
        let ly = MARGIN_T + 16.0 * si as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&table.headers[si + 1])
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn bounds(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reads a CSV file and writes the rendered SVG next to it.
pub fn emit_plot(csv_path: &Path, out_path: &Path) -> Result<()> {
    let text = fs::read_to_string(csv_path)?;
    let svg = render_plot(&text, &csv_path.display().to_string())?;
    fs::write(out_path, svg)?;
    Ok(())
}
