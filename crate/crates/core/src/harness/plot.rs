//! Minimal SVG line charts of mean curves with shaded bands.

use std::fmt::Write as _;

use super::report::Band;

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round step for about `target` ticks over `span`.
fn tick_step(span: f64, target: f64) -> f64 {
    if span <= 0.0 {
        return 1.0;
    }
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

pub fn svg_chart(title: &str, x_label: &str, y_label: &str, grid: &[f64], series: &[(String, Band)]) -> String {
    let x0 = grid.first().copied().unwrap_or(0.0);
    let x1 = grid.last().copied().unwrap_or(1.0).max(x0 + 1e-9);
    let (mut y0, mut y1) = series
        .iter()
        .flat_map(|(_, b)| b.lo.iter().chain(&b.hi))
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    y0 = y0.min(0.0);
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, escape(title));

    let xs = tick_step(x1 - x0, 8.0);
    let mut t = (x0 / xs).ceil() * xs;
    while t <= x1 + 1e-9 {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, t);
        t += xs;
    }
    let ys = tick_step(y1 - y0, 6.0);
    let mut v = (y0 / ys).ceil() * ys;
    while v <= y1 + 1e-12 {
        let y = sy(v);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, format_tick(v));
        v += ys;
    }
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (k, (label, b)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut poly = String::new();
        for (x, y) in grid.iter().zip(&b.hi) {
            let _ = write!(poly, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        for (x, y) in grid.iter().zip(&b.lo).rev() {
            let _ = write!(poly, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, poly.trim_end());
        let mut line = String::new();
        for (x, y) in grid.iter().zip(&b.mean) {
            let _ = write!(line, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.trim_end());
        let ly = TOP + 14.0 + 20.0 * k as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, lx + 22.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 28.0, ly + 4.0, escape(label));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="gray">shaded: mean ± 1.96·sd/√k</text>"#,
        LEFT + pw + 14.0,
        TOP + ph
    );
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::report::band;

    #[test]
    fn well_formed_xml() {
        let b = band(&[vec![3.0, 2.0, 1.0], vec![3.0, 2.5, 0.5]]);
        let svg = svg_chart("Trace <&>", "time [s]", "Tr(P)", &[0.0, 1.0, 2.0], &[("ipp".into(), b.clone()), ("a&b".into(), b)]);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);
    }

    #[test]
    fn flat_and_empty_series() {
        let flat = band(&[vec![1.0, 1.0]]);
        roxmltree::Document::parse(&svg_chart("t", "x", "y", &[0.0, 1.0], &[("f".into(), flat)])).unwrap();
        roxmltree::Document::parse(&svg_chart("t", "x", "y", &[], &[])).unwrap();
    }

    #[test]
    fn ticks() {
        assert_eq!(tick_step(120.0, 8.0), 20.0);
        assert_eq!(tick_step(1.0, 5.0), 0.2);
    }
}
