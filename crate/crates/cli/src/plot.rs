//! Minimal SVG scatter/line plots. Output depends only on the data.

use std::fmt::Write as _;

#[derive(Clone, Copy)]
pub enum Marker {
    /// Open diamond.
    Diamond,
    /// Open circle.
    Circle,
    /// Filled dot.
    Dot,
    /// Polyline, no markers.
    Line,
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub marker: Marker,
}

pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const PANEL_HEIGHT: f64 = 300.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 45.0;

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-300);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    y0 = y0.min(0.0);
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    (x0, x1, y0, y1 * 1.08)
}

fn panel(out: &mut String, p: &Panel, top: f64) {
    let (x0, x1, y0, y1) = bounds(&p.series);
    let w = WIDTH - LEFT - RIGHT;
    let h = PANEL_HEIGHT - TOP - BOTTOM;
    let oy = top + TOP;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * w;
    let sy = |y: f64| oy + h - (y - y0) / (y1 - y0) * h;

    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#, LEFT + w / 2.0, top + 20.0, p.title);
    let _ = writeln!(out, r#"<rect x="{LEFT:.1}" y="{oy:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="black"/>"#);
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(out, r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, oy + h, oy + h + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#, oy + h + 18.0, label(t));
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(out, r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT:.1}" y2="{y:.1}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"#, LEFT - 8.0, y + 4.0, label(t));
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#, LEFT + w / 2.0, oy + h + 36.0, p.x_label);
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {:.1})">{}</text>"#,
        oy + h / 2.0,
        oy + h / 2.0,
        p.y_label
    );

    for (k, s) in p.series.iter().enumerate() {
        match s.marker {
            Marker::Line => {
                let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
                let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="black"/>"#, pts.join(" "));
            }
            marker => {
                for &(x, y) in &s.points {
                    let (cx, cy) = (sx(x), sy(y));
                    let _ = match marker {
                        Marker::Diamond => writeln!(
                            out,
                            r#"<polygon points="{:.1},{:.1} {:.1},{:.1} {:.1},{:.1} {:.1},{:.1}" fill="none" stroke="black"/>"#,
                            cx, cy - 4.0, cx + 4.0, cy, cx, cy + 4.0, cx - 4.0, cy
                        ),
                        Marker::Circle => writeln!(out, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="3.5" fill="none" stroke="black"/>"#),
                        _ => writeln!(out, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="3" fill="black"/>"#),
                    };
                }
            }
        }
        // legend
        let ly = oy + 14.0 + 16.0 * k as f64;
        let lx = LEFT + w - 150.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="11">{} {}</text>"#, lx, ly, legend_glyph(s.marker), s.label);
    }
}

fn legend_glyph(m: Marker) -> &'static str {
    match m {
        Marker::Diamond => "◇",
        Marker::Circle => "○",
        Marker::Dot => "•",
        Marker::Line => "—",
    }
}

pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        panel(&mut out, p, PANEL_HEIGHT * i as f64);
    }
    out.push_str("</svg>\n");
    out
}
