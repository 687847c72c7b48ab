//! Small dependency-free SVG writers for heatmaps and line panels.

use std::fmt::Write;

/// One polyline in a panel.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
}

/// A titled panel of line series sharing axes.
#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Diverging blue-white-red colour for `v` in `[-1, 1]`.
fn diverging(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("rgb({},{},{})", r as u8, g as u8, b as u8)
}

/// Heatmap with one row per entry of `rows`; colours are symmetric around
/// zero and scaled by the largest magnitude.
pub fn heatmap(title: &str, row_labels: &[String], rows: &[Vec<f64>]) -> String {
    let cell_w = 8.0;
    let cell_h = 18.0;
    let left = 70.0;
    let top = 30.0;
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let width = left + cols as f64 * cell_w + 20.0;
    let height = top + rows.len() as f64 * cell_h + 20.0;
    let scale = rows
        .iter()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{left}" y="18">{}</text>"#, escape(title));
    for (i, row) in rows.iter().enumerate() {
        let y = top + i as f64 * cell_h;
        let label = row_labels.get(i).map(String::as_str).unwrap_or("");
        let _ = writeln!(
            s,
            r#"<text x="4" y="{:.1}">{}</text>"#,
            y + cell_h * 0.7,
            escape(label)
        );
        for (j, v) in row.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{y:.1}" width="{cell_w}" height="{cell_h}" fill="{}"/>"#,
                left + j as f64 * cell_w,
                diverging(v / scale)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Panels laid out left to right, each with its own axes and legend.
pub fn line_panels(panels: &[Panel]) -> String {
    let pw = 260.0;
    let ph = 200.0;
    let margin = 45.0;
    let width = panels.len().max(1) as f64 * (pw + margin) + margin;
    let height = ph + 2.0 * margin + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    for (p, panel) in panels.iter().enumerate() {
        let x0 = margin + p as f64 * (pw + margin);
        let y0 = margin;
        let (xl, xh) = extent(panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let (yl, yh) = extent(panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
        let px = |x: f64| x0 + (x - xl) / (xh - xl) * pw;
        let py = |y: f64| y0 + ph - (y - yl) / (yh - yl) * ph;
        let _ = writeln!(
            s,
            r##"<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{x0}" y="{:.1}">{}</text>"#,
            y0 - 8.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            x0 + pw / 2.0 - 20.0,
            y0 + ph + 30.0,
            escape(&panel.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
            x0 - 32.0,
            y0 + ph / 2.0,
            x0 - 32.0,
            y0 + ph / 2.0,
            escape(&panel.y_label)
        );
        for (label, v) in [(xl, xl), (xh, xh)] {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}">{:.3}</text>"#,
                px(v) - 10.0,
                y0 + ph + 14.0,
                label
            );
        }
        for v in [yl, yh] {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
                x0 - 3.0,
                py(v) + 4.0,
                v
            );
        }
        for (k, series) in panel.series.iter().enumerate() {
            let pts: Vec<String> = series
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                series.color,
                pts.join(" ")
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" fill="{}">{}</text>"#,
                x0 + 6.0,
                y0 + 14.0 + 13.0 * k as f64,
                series.color,
                escape(&series.label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
