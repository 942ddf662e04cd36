use std::f64::consts::PI;
use std::fmt::Write;

use crate::metrics::{MetricName, ScaledRow};

/// Stroke colours assigned to methods in order.
pub const RADIAL_PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

const SIZE: f64 = 520.0;
const CENTRE: f64 = 260.0;
const RADIUS: f64 = 170.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Vertex `k` of value `v`: the first metric points up and the rest follow
/// clockwise.
fn vertex(k: usize, v: f64) -> (f64, f64) {
    let angle = -PI / 2.0 + 2.0 * PI * k as f64 / MetricName::ALL.len() as f64;
    (CENTRE + RADIUS * v * angle.cos(), CENTRE + RADIUS * v * angle.sin())
}

fn points(values: impl Iterator<Item = f64>) -> String {
    values
        .enumerate()
        .map(|(k, v)| {
            let (x, y) = vertex(k, v);
            format!("{x:.3},{y:.3}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Spider chart of scaled scores: one polygon per method over the eight
/// metric axes.
pub fn radial_plot_svg(title: &str, rows: &[ScaledRow]) -> String {
    let n = MetricName::ALL.len();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let _ = writeln!(s, r##"<g id="grid" fill="none" stroke="#bbbbbb" stroke-width="1">"##);
    for level in [0.25, 0.5, 0.75, 1.0] {
        let pts = points(std::iter::repeat_n(level, n));
        let _ = writeln!(s, r#"<path d="M {} Z"/>"#, pts.replace(' ', " L "));
    }
    for k in 0..n {
        let (x, y) = vertex(k, 1.0);
        let _ = writeln!(s, r#"<line x1="{CENTRE}" y1="{CENTRE}" x2="{x:.3}" y2="{y:.3}"/>"#);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="axes" text-anchor="middle">"#);
    for (k, m) in MetricName::ALL.iter().enumerate() {
        let (x, y) = vertex(k, 1.16);
        let _ = writeln!(s, r#"<text x="{x:.3}" y="{:.3}">{}</text>"#, y + 4.0, escape(m.label()));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="methods" stroke-width="2">"#);
    for (i, r) in rows.iter().enumerate() {
        let colour = RADIAL_PALETTE[i % RADIAL_PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<polygon data-method="{}" points="{}" fill="{colour}" fill-opacity="0.12" stroke="{colour}"/>"#,
            escape(&r.method),
            points(r.values.iter().map(|v| v.clamp(0.0, 1.0)))
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="legend">"#);
    for (i, r) in rows.iter().enumerate() {
        let colour = RADIAL_PALETTE[i % RADIAL_PALETTE.len()];
        let y = 16.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<rect x="10" y="{}" width="12" height="12" fill="{colour}"/>"#, y - 10.0);
        let _ = writeln!(
            s,
            r#"<text x="28" y="{y}">{} ({:.3})</text>"#,
            escape(&r.method),
            r.overall
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
