//! Static SVG panel grids: one polyline per series, panels laid out row by
//! row, 400 units of height per row across a fixed 1200-unit width. Rows
//! index the experiment levels; columns hold different quantities.

use std::fmt::Write;

use crate::error::HarnessError;

pub const WIDTH: f64 = 1200.0;
pub const ROW_HEIGHT: f64 = 400.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 45.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>) -> Self {
        Series {
            label: label.into(),
            xs,
            ys,
        }
    }

    fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs
            .iter()
            .zip(&self.ys)
            .map(|(&x, &y)| (x, y))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub rows: usize,
    pub cols: usize,
    /// Share one y-range among the panels of each column.
    pub common_y: bool,
}

fn range(points: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = points.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

fn y_range(panels: &[&Panel]) -> Option<(f64, f64)> {
    range(
        panels
            .iter()
            .flat_map(|p| &p.series)
            .flat_map(|s| s.points().map(|p| p.1)),
    )
}

fn label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the panels into a self-contained SVG document.
pub fn render_svg(title: &str, panels: &[Panel], layout: Layout) -> Result<String, HarnessError> {
    if panels.is_empty() || panels.iter().all(|p| p.series.iter().all(|s| s.points().next().is_none())) {
        return Err(HarnessError::Output("nothing to plot: every panel is empty".into()));
    }
    if layout.rows * layout.cols < panels.len() {
        return Err(HarnessError::Output(format!(
            "{} panels do not fit a {}x{} grid",
            panels.len(),
            layout.rows,
            layout.cols
        )));
    }
    let height = ROW_HEIGHT * layout.rows as f64;
    let cell_w = WIDTH / layout.cols as f64;
    let shared: Vec<Option<(f64, f64)>> = (0..layout.cols)
        .map(|c| {
            if layout.common_y {
                let column: Vec<&Panel> = panels.iter().skip(c).step_by(layout.cols).collect();
                y_range(&column)
            } else {
                None
            }
        })
        .collect();

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {height}" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{height}" fill="white"/>"#);

    for (i, panel) in panels.iter().enumerate() {
        let (r, c) = (i / layout.cols, i % layout.cols);
        let (ox, oy) = (c as f64 * cell_w, r as f64 * ROW_HEIGHT);
        let (x0, x1) = (ox + MARGIN_LEFT, ox + cell_w - MARGIN_RIGHT);
        let (y0, y1) = (oy + MARGIN_TOP, oy + ROW_HEIGHT - MARGIN_BOTTOM);
        let xr = range(panel.series.iter().flat_map(|s| s.points().map(|p| p.0)));
        let yr = shared[c].or_else(|| y_range(&[panel]));

        let _ = writeln!(out, r#"<g class="panel" id="panel-{i}">"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
            (x0 + x1) / 2.0,
            oy + 22.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
            x1 - x0,
            y1 - y0
        );
        if let (Some((xa, xb)), Some((ya, yb))) = (xr, yr) {
            let sx = |x: f64| x0 + (x - xa) / (xb - xa) * (x1 - x0);
            let sy = |y: f64| y1 - (y - ya) / (yb - ya) * (y1 - y0);
            for (k, v) in [(0, ya), (1, (ya + yb) / 2.0), (2, yb)] {
                let y = sy(v);
                let _ = writeln!(
                    out,
                    r##"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" text-anchor="end" class="ytick-{k}">{}</text>"##,
                    x0 - 5.0,
                    x0 - 8.0,
                    y + 4.0,
                    label(v)
                );
            }
            for v in [xa, (xa + xb) / 2.0, xb] {
                let x = sx(v);
                let _ = writeln!(
                    out,
                    r##"<line x1="{x:.1}" y1="{y1:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
                    y1 + 5.0,
                    y1 + 20.0,
                    label(v)
                );
            }
            for (k, s) in panel.series.iter().enumerate() {
                let color = PALETTE[k % PALETTE.len()];
                let pts: Vec<String> = s
                    .points()
                    .map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                if pts.is_empty() {
                    continue;
                }
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
                    pts.join(" ")
                );
                let _ = writeln!(
                    out,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="end" fill="{color}">{}</text>"#,
                    x1 - 6.0,
                    y0 + 16.0 + 14.0 * k as f64,
                    escape(&s.label)
                );
            }
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}
