//! Regret curves as a standalone SVG: one mean line and one CI band per method.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::aggregate::SummaryRow;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

enum Scale {
    /// log10 axis between two decades; values below `floor` are drawn at it.
    Log { lo: f64, hi: f64, floor: f64 },
    Linear { lo: f64, hi: f64 },
}

impl Scale {
    fn fit(rows: &[SummaryRow]) -> Self {
        let all = rows.iter().flat_map(|r| [r.mean, r.ci_lo, r.ci_hi]).filter(|v| v.is_finite());
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut min_pos = f64::INFINITY;
        for v in all {
            min = min.min(v);
            max = max.max(v);
            if v > 0.0 {
                min_pos = min_pos.min(v);
            }
        }
        let means_nonneg = rows.iter().all(|r| r.mean >= 0.0);
        if means_nonneg && min_pos.is_finite() {
            let floor = if min > 0.0 { min } else { min_pos / 10.0 };
            let lo = floor.log10().floor();
            let hi = max.max(floor).log10().ceil().max(lo + 1.0);
            return Scale::Log { lo, hi, floor };
        }
        if !min.is_finite() {
            return Scale::Linear { lo: 0.0, hi: 1.0 };
        }
        let pad = if max > min { 0.05 * (max - min) } else { 1.0 };
        Scale::Linear { lo: min - pad, hi: max + pad }
    }

    /// Position in [0, 1] from the bottom.
    fn unit(&self, v: f64) -> f64 {
        match *self {
            Scale::Log { lo, hi, floor } => (v.max(floor).log10() - lo) / (hi - lo),
            Scale::Linear { lo, hi } => (v - lo) / (hi - lo),
        }
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        match *self {
            Scale::Log { lo, hi, .. } => (lo as i32..=hi as i32).map(|e| (10f64.powi(e), format!("1e{e}"))).collect(),
            Scale::Linear { lo, hi } => (0..=5)
                .map(|i| {
                    let v = lo + (hi - lo) * i as f64 / 5.0;
                    (v, format!("{v:.3}"))
                })
                .collect(),
        }
    }
}

/// Renders `rows` (as produced by `aggregate`). Deterministic byte for byte.
pub fn render_svg(rows: &[SummaryRow], title: &str) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::invalid("empty summary"));
    }
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let scale = Scale::fit(rows);
    let x_min = rows.iter().map(|r| r.eval_index).min().unwrap() as f64;
    let x_max = (rows.iter().map(|r| r.eval_index).max().unwrap() as f64).max(x_min + 1.0);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |i: usize| LEFT + (i as f64 - x_min) / (x_max - x_min) * pw;
    let py = |v: f64| TOP + (1.0 - scale.unit(v)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(title));
    for (v, label) in scale.ticks() {
        let y = py(v);
        let _ = writeln!(s, r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 6.0, y + 4.0);
    }
    // Whole-number step so short runs don't repeat labels.
    let step = ((x_max - x_min) / 5.0).ceil().max(1.0);
    let mut v = x_min;
    while v <= x_max {
        let x = LEFT + (v - x_min) / (x_max - x_min) * pw;
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.0}</text>"#, TOP + ph + 18.0);
        v += step;
    }
    let _ = writeln!(s, r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">function evaluations</text>"#, LEFT + pw / 2.0, HEIGHT - 16.0);
    let y_label = match scale {
        Scale::Log { .. } => "immediate regret (log scale)",
        Scale::Linear { .. } => "best value",
    };
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{y_label}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (k, m) in methods.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<&SummaryRow> = rows.iter().filter(|r| r.method == *m).collect();
        let mut band = String::new();
        for r in &pts {
            let _ = write!(band, "{:.2},{:.2} ", px(r.eval_index), py(r.ci_hi));
        }
        for r in pts.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(r.eval_index), py(r.ci_lo));
        }
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, band.trim_end());
        let line: Vec<String> = pts.iter().map(|r| format!("{:.2},{:.2}", px(r.eval_index), py(r.mean))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        let ly = TOP + 16.0 + 20.0 * k as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 22.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 28.0, ly + 4.0, escape(m));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes the SVG; nothing is written for an empty summary.
pub fn emit_plot(rows: &[SummaryRow], title: &str, path: &Path) -> Result<()> {
    let svg = render_svg(rows, title)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, svg)?;
    Ok(())
}
