//! Minimal dual-axis line chart.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

fn range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo {
        0.05 * (hi - lo)
    } else {
        0.5 * lo.abs().max(1.0)
    };
    (lo - pad, hi + pad)
}

fn polyline(xs: &[f64], ys: &[f64], xr: (f64, f64), yr: (f64, f64), color: &str) -> String {
    let sx = |x: f64| MARGIN + (x - xr.0) / (xr.1 - xr.0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - yr.0) / (yr.1 - yr.0) * (HEIGHT - 2.0 * MARGIN);
    let mut out = String::new();
    let points: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
        points.join(" ")
    );
    for (&x, &y) in xs.iter().zip(ys) {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
            sx(x),
            sy(y)
        );
    }
    out
}

/// Two series over a shared x axis; the first on the left scale, the second
/// on the right.
pub fn trend_chart(
    x_label: &str,
    left: (&str, &[f64]),
    right: (&str, &[f64]),
    xs: &[f64],
) -> String {
    let xr = range(xs);
    let lr = range(left.1);
    let rr = range(right.1);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0},{y0} V{y1} H{x1} V{y0}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let y = y1 - f * (y1 - y0);
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{y:.1}" text-anchor="end" fill="#2a9d45">{:.3}</text>"##,
            x0 - 6.0,
            lr.0 + f * (lr.1 - lr.0)
        );
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{y:.1}" fill="#e07b00">{:.3}</text>"##,
            x1 + 6.0,
            rr.0 + f * (rr.1 - rr.0)
        );
        let x = x0 + f * (x1 - x0);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{:.2}</text>"#,
            y1 + 18.0,
            xr.0 + f * (xr.1 - xr.0)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="{x0}" y="{:.1}" fill="#2a9d45">{}</text>"##,
        y0 - 20.0,
        left.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="{x1}" y="{:.1}" text-anchor="end" fill="#e07b00">{}</text>"##,
        y0 - 20.0,
        right.0
    );
    svg.push_str(&polyline(xs, left.1, xr, lr, "#2a9d45"));
    svg.push_str(&polyline(xs, right.1, xr, rr, "#e07b00"));
    svg.push_str("</svg>\n");
    svg
}
