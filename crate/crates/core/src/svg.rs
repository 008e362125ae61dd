//! Static SVG output: phase heat maps and risk curves.

use std::fmt::Write as _;

use crate::bounds::Regime;
use crate::harness::PhaseRow;

const PANEL: f64 = 320.0;
const MARGIN: f64 = 48.0;

pub fn regime_fill(r: Regime) -> &'static str {
    match r {
        Regime::Impossible => "#d73027",
        Regime::IntractablePossible => "#fee08b",
        Regime::Tractable => "#1a9850",
        Regime::Boundary => "#404040",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn distinct_sorted(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

fn position(values: &[f64], x: f64) -> usize {
    values.partition_point(|v| *v < x)
}

/// One panel per `p_s` slice; `x = p_n`, `y = p_β` (growing upward).
pub fn phase_svg(rows: &[PhaseRow]) -> String {
    let slices = distinct_sorted(rows.iter().map(|r| r.point.p_s));
    let xs = distinct_sorted(rows.iter().map(|r| r.point.p_n));
    let ys = distinct_sorted(rows.iter().map(|r| r.point.p_beta));
    let (cw, ch) = (PANEL / xs.len().max(1) as f64, PANEL / ys.len().max(1) as f64);
    let width = MARGIN + slices.len() as f64 * (PANEL + MARGIN);
    let height = PANEL + 2.0 * MARGIN + 24.0;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (k, &p_s) in slices.iter().enumerate() {
        let x0 = MARGIN + k as f64 * (PANEL + MARGIN);
        let y0 = MARGIN;
        writeln!(out, r#"<g id="panel-{k}">"#).unwrap();
        let title = rows.first().map(|r| r.problem.name()).unwrap_or("");
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{} p_s={p_s}</text>"#,
            x0 + PANEL / 2.0,
            y0 - 10.0,
            escape(title)
        )
        .unwrap();
        for r in rows.iter().filter(|r| r.point.p_s == p_s) {
            let i = position(&xs, r.point.p_n);
            let j = position(&ys, r.point.p_beta);
            let x = x0 + i as f64 * cw;
            let y = y0 + PANEL - (j + 1) as f64 * ch;
            writeln!(
                out,
                r#"<rect x="{x:.3}" y="{y:.3}" width="{cw:.3}" height="{ch:.3}" fill="{}"/>"#,
                regime_fill(r.regime)
            )
            .unwrap();
        }
        writeln!(
            out,
            r#"<rect x="{x0}" y="{y0}" width="{PANEL}" height="{PANEL}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">p_n</text>"#,
            x0 + PANEL / 2.0,
            y0 + PANEL + 18.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" transform="rotate(-90 {} {})" text-anchor="middle">p_beta</text>"#,
            x0 - 12.0,
            y0 + PANEL / 2.0,
            x0 - 12.0,
            y0 + PANEL / 2.0
        )
        .unwrap();
        writeln!(out, "</g>").unwrap();
    }
    let mut lx = MARGIN;
    for r in [Regime::Impossible, Regime::IntractablePossible, Regime::Tractable, Regime::Boundary] {
        let ly = height - 14.0;
        writeln!(
            out,
            r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{}"/>"#,
            ly - 9.0,
            regime_fill(r)
        )
        .unwrap();
        writeln!(out, r#"<text x="{}" y="{ly}" font-size="11">{}</text>"#, lx + 14.0, r.name()).unwrap();
        lx += 150.0;
    }
    out.push_str("</svg>\n");
    out
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Risk against a swept parameter, one polyline per series; `y ∈ [0, 2]`.
pub fn risk_curves_svg(series: &[(String, Vec<(f64, f64)>)], x_label: &str) -> String {
    let (w, h) = (PANEL * 1.6, PANEL);
    let (width, height) = (w + 2.0 * MARGIN + 120.0, h + 2.0 * MARGIN);
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, _) in pts {
        lo = lo.min(*x);
        hi = hi.max(*x);
    }
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - lo) / (hi - lo) * w;
    let sy = |y: f64| MARGIN + h - y.clamp(0.0, 2.0) / 2.0 * h;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for y in [0.0, 0.5, 1.0, 1.5, 2.0] {
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{y}</text>"#,
            MARGIN - 4.0,
            sy(y) + 3.0
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="10">{lo:.4}</text>"#,
        MARGIN,
        MARGIN + h + 14.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{hi:.4}</text>"#,
        MARGIN + w,
        MARGIN + h + 14.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
        MARGIN + w / 2.0,
        height - 8.0,
        escape(x_label)
    )
    .unwrap();
    for (k, (name, points)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = points.iter().map(|(x, y)| format!("{:.3},{:.3}", sx(*x), sy(*y))).collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        )
        .unwrap();
        let ly = MARGIN + 14.0 * k as f64 + 10.0;
        writeln!(
            out,
            r#"<text x="{}" y="{ly}" font-size="11" fill="{color}">{}</text>"#,
            MARGIN + w + 10.0,
            escape(name)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
