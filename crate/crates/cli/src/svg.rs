//! Minimal self-contained SVG plots: line charts and quiver fields.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Line chart of one or more series sharing the axes.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let (x0, x1) = finite_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = finite_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    header(&mut out, title);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{left:.1},{top:.1} L{left:.1},{bottom:.1} L{right:.1},{bottom:.1}" fill="none" stroke="black"/>"#
    );
    for (value, x) in [(x0, left), (x1, right)] {
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{value:.4}</text>"#,
            bottom + 16.0
        );
    }
    for (value, y) in [(y0, bottom), (y1, top)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{value:.4}</text>"#,
            left - 6.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            right - 120.0,
            top + 14.0 * (k as f64 + 1.0),
            escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Quiver plot of `vectors` anchored at `points` (2D). Arrow length is
/// proportional to magnitude, the longest drawn at 0.8 × `spacing`.
pub fn quiver(title: &str, points: &[Vec<f64>], vectors: &[Vec<f64>], spacing: f64) -> String {
    let (x0, x1) = finite_range(points.iter().map(|p| p[0]));
    let (y0, y1) = finite_range(points.iter().map(|p| p[1]));
    // one scale for both axes so arrow directions are preserved
    let pad = spacing;
    let span = (x1 - x0).max(y1 - y0) + 2.0 * pad;
    let scale = (WIDTH.min(HEIGHT) - 2.0 * MARGIN) / span;
    let ox = (WIDTH - scale * (x1 - x0)) / 2.0;
    let oy = (HEIGHT + scale * (y1 - y0)) / 2.0;
    let px = |x: f64| ox + (x - x0) * scale;
    let py = |y: f64| oy - (y - y0) * scale;

    let max_mag = vectors
        .iter()
        .map(|v| v[0].hypot(v[1]))
        .filter(|m| m.is_finite())
        .fold(0.0, f64::max);
    let unit = if max_mag > 0.0 { 0.8 * spacing / max_mag } else { 0.0 };

    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#999"/>"##,
        px(x0 - pad),
        py(y1 + pad),
        scale * (x1 - x0 + 2.0 * pad),
        scale * (y1 - y0 + 2.0 * pad)
    );
    for (p, v) in points.iter().zip(vectors) {
        let (dx, dy) = if v[0].is_finite() && v[1].is_finite() { (v[0] * unit, v[1] * unit) } else { (0.0, 0.0) };
        let (ax, ay) = (px(p[0]), py(p[1]));
        let (bx, by) = (px(p[0] + dx), py(p[1] + dy));
        let len = (bx - ax).hypot(by - ay);
        // triangle head: a third of the shaft, pointing along it
        let (ux, uy) = if len > 0.0 { ((bx - ax) / len, (by - ay) / len) } else { (0.0, 0.0) };
        let head = 0.35 * len;
        let (cx, cy) = (bx - ux * head, by - uy * head);
        let (nx, ny) = (-uy * head * 0.5, ux * head * 0.5);
        let _ = writeln!(
            out,
            r#"<g class="arrow"><line x1="{ax:.2}" y1="{ay:.2}" x2="{cx:.2}" y2="{cy:.2}" stroke="black" stroke-width="1"/><polygon points="{bx:.2},{by:.2} {:.2},{:.2} {:.2},{:.2}" fill="black"/></g>"#,
            cx + nx,
            cy + ny,
            cx - nx,
            cy - ny
        );
    }
    out.push_str("</svg>\n");
    out
}
