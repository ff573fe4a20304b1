//! Static SVG charts: observed against expected performance with the
//! disruption windows shaded, and index rankings across series.

use std::fmt::Write;

use crate::indices::IndexPair;
use crate::pipeline::Analysis;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn polyline(points: &[(f64, f64)], color: &str, dashed: bool) -> String {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    format!(
        r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
        pts.join(" ")
    )
}

/// Line chart of `O(t)` and `P(t)` with each detected window shaded.
pub fn series_chart(analysis: &Analysis) -> String {
    let o = analysis.observed.values();
    let p = analysis.forecast.values();
    let n = o.len();
    let hi = o.iter().chain(p).cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = o.iter().chain(p).cloned().fold(f64::INFINITY, f64::min).min(0.0);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let x = |t: f64| MARGIN + plot_w * t / (n.max(2) - 1) as f64;
    let y = |v: f64| HEIGHT - MARGIN - plot_h * (v - lo) / span;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for w in &analysis.windows {
        let x0 = x(w.onset_index() as f64);
        let x1 = x((w.end_index.min(n - 1)) as f64);
        let _ = writeln!(
            svg,
            r##"<rect x="{x0:.2}" y="{MARGIN}" width="{:.2}" height="{plot_h}" fill="#f4a582" fill-opacity="0.35"/>"##,
            (x1 - x0).max(1.0)
        );
    }
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN
    );
    for k in 0..=4 {
        let v = lo + span * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{v:.2}</text>"#,
            MARGIN - 6.0,
            y(v) + 4.0
        );
    }
    let step = (n / 8).max(1);
    for t in (0..n).step_by(step) {
        let month = analysis.observed.month_at(t);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" font-size="11" text-anchor="middle">{month}</text>"#,
            x(t as f64),
            HEIGHT - MARGIN + 16.0
        );
    }
    let expected: Vec<(f64, f64)> = p.iter().enumerate().map(|(t, v)| (x(t as f64), y(*v))).collect();
    let observed: Vec<(f64, f64)> = o.iter().enumerate().map(|(t, v)| (x(t as f64), y(*v))).collect();
    let _ = writeln!(svg, "{}", polyline(&expected, "#2166ac", true));
    let _ = writeln!(svg, "{}", polyline(&observed, "#b2182b", false));
    let r = &analysis.report.indices;
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="30" font-size="14">{} (r = {:.3}, ρ = {:.3}; dashed: expected, solid: observed)</text>"#,
        escape(&analysis.report.label),
        r.r,
        r.rho
    );
    svg.push_str("</svg>\n");
    svg
}

/// Horizontal bars of `r` per series, highest first, with `ρ` alongside.
pub fn rankings_chart(pairs: &[IndexPair]) -> String {
    let mut sorted: Vec<&IndexPair> = pairs.iter().collect();
    sorted.sort_by(|a, b| b.r.total_cmp(&a.r).then_with(|| a.label.cmp(&b.label)));
    let row_h = 22.0;
    let height = 2.0 * MARGIN + row_h * sorted.len() as f64;
    let label_w = 160.0;
    let bar_w = WIDTH - label_w - 2.0 * MARGIN - 80.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="30" font-size="14">Resilience index by series (bar: r, text: ρ)</text>"#
    );
    for (i, p) in sorted.iter().enumerate() {
        let top = MARGIN + row_h * i as f64;
        let color = match (p.high_resilience, p.high_adaptability) {
            (true, true) => "#1b7837",
            (true, false) => "#7fbf7b",
            (false, true) => "#af8dc3",
            (false, false) => "#762a83",
        };
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{}</text>"#,
            MARGIN + label_w - 6.0,
            top + 15.0,
            escape(&p.label)
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
            MARGIN + label_w,
            top + 3.0,
            bar_w * p.r.clamp(0.0, 1.0),
            row_h - 6.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">r {:.3}, ρ {:.3}</text>"#,
            MARGIN + label_w + bar_w * p.r.clamp(0.0, 1.0) + 6.0,
            top + 15.0,
            p.r,
            p.rho
        );
    }
    svg.push_str("</svg>\n");
    svg
}
