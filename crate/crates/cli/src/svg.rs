//! Standalone SVG plot of a sweep: one panel per metric, exact values as
//! lines and reconstructed means as markers with ±1σ bars.

use std::fmt::Write;

use steerlab::tomosim::{Curve, Metric, SweepRow};

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 50.0;

fn color(curve: Curve) -> &'static str {
    match curve {
        Curve::Original => "#c0392b",
        Curve::PostSelected => "#2455c3",
        Curve::Averaged => "#e67e22",
    }
}

fn marker(out: &mut String, curve: Curve, x: f64, y: f64) {
    let c = color(curve);
    let _ = match curve {
        Curve::Original => writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="none" stroke="{c}"/>"#),
        Curve::PostSelected => writeln!(
            out,
            r#"<path d="M{:.2} {:.2}l7 7M{:.2} {:.2}l-7 7" stroke="{c}"/>"#,
            x - 3.5,
            y - 3.5,
            x + 3.5,
            y - 3.5
        ),
        Curve::Averaged => writeln!(
            out,
            r#"<path d="M{x:.2} {:.2}l4 7h-8z" fill="none" stroke="{c}"/>"#,
            y - 4.0
        ),
    };
}

fn panel(out: &mut String, rows: &[SweepRow], metric: Metric, left: f64) {
    let rows: Vec<&SweepRow> = rows.iter().filter(|r| r.metric == metric).collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &rows {
        x0 = x0.min(r.delta);
        x1 = x1.max(r.delta);
        for v in [r.exact, r.mean_reconstructed - r.stddev_reconstructed, r.mean_reconstructed + r.stddev_reconstructed] {
            y0 = y0.min(v);
            y1 = y1.max(v);
        }
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0).max(1e-3);
    y0 -= pad;
    y1 += pad;
    let sx = |x: f64| left + MARGIN + (x - x0) / (x1 - x0) * (PANEL_W - 1.5 * MARGIN);
    let sy = |y: f64| MARGIN + (y1 - y) / (y1 - y0) * (PANEL_H - 2.0 * MARGIN);

    let (bx, by) = (sx(x0), sy(y0));
    let _ = writeln!(
        out,
        r#"<path d="M{bx:.2} {:.2}V{by:.2}H{:.2}" fill="none" stroke="black"/>"#,
        sy(y1),
        sx(x1)
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text>"#, sx(xv), by + 16.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.3}</text>"#, bx - 5.0, sy(yv) + 4.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">imbalance α² − β²</text>"#,
        left + PANEL_W / 2.0,
        PANEL_H - 8.0
    );
    let _ = writeln!(out, r#"<text x="{:.2}" y="30" text-anchor="middle" font-weight="bold">{}</text>"#, left + PANEL_W / 2.0, metric.name());

    for curve in Curve::ALL {
        let mut pts: Vec<&&SweepRow> = rows.iter().filter(|r| r.curve == curve).collect();
        pts.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        let line: Vec<String> = pts.iter().map(|r| format!("{:.2},{:.2}", sx(r.delta), sy(r.exact))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-opacity="0.6"/>"#,
            line.join(" "),
            color(curve)
        );
        for r in pts {
            let x = sx(r.delta);
            let (lo, hi) = (r.mean_reconstructed - r.stddev_reconstructed, r.mean_reconstructed + r.stddev_reconstructed);
            let _ = writeln!(out, r#"<path d="M{x:.2} {:.2}V{:.2}" stroke="{}"/>"#, sy(lo), sy(hi), color(curve));
            marker(out, curve, x, sy(r.mean_reconstructed));
        }
    }
}

pub fn render(rows: &[SweepRow]) -> String {
    let width = PANEL_W * Metric::ALL.len() as f64;
    let height = PANEL_H + 30.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, metric) in Metric::ALL.into_iter().enumerate() {
        panel(&mut out, rows, metric, i as f64 * PANEL_W);
    }
    for (i, curve) in Curve::ALL.into_iter().enumerate() {
        let x = 60.0 + 140.0 * i as f64;
        let y = PANEL_H + 15.0;
        marker(&mut out, curve, x, y);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 10.0, y + 4.0, curve.name());
    }
    out.push_str("</svg>\n");
    out
}
