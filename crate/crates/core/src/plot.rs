//! Minimal standalone SVG emission for charts. Output is deterministic for
//! identical input.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 300.0;
const PAD: f64 = 40.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// One polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// A titled set of series sharing axes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
    /// Horizontal reference lines: (y, label).
    pub hlines: Vec<(f64, String)>,
    /// Points drawn as markers instead of lines; flagged ones in red.
    pub markers: Vec<(f64, f64, bool)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn bounds(panel: &Panel) -> Option<(f64, f64, f64, f64)> {
    let xy = panel
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .chain(panel.markers.iter().map(|&(x, y, _)| (x, y)))
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut any = false;
    for (x, y) in xy {
        any = true;
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    for &(y, _) in &panel.hlines {
        if y.is_finite() {
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if !any {
        return None;
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    Some((x0, x1, y0, y1))
}

fn draw_panel(out: &mut String, panel: &Panel, ox: f64, oy: f64) {
    let _ = write!(out, r#"<g transform="translate({ox:.1},{oy:.1})">"#);
    let _ = write!(out, r##"<rect x="0" y="0" width="{W}" height="{H}" fill="white" stroke="#ccc"/>"##);
    let _ = write!(out, r#"<text x="{:.1}" y="16" font-size="13" text-anchor="middle">{}</text>"#, W / 2.0, escape(&panel.title));
    if let Some((x0, x1, y0, y1)) = bounds(panel) {
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
        let _ = write!(
            out,
            r#"<text x="{PAD}" y="{:.1}" font-size="10">{x0:.4}</text><text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{x1:.4}</text>"#,
            H - PAD + 14.0,
            W - PAD,
            H - PAD + 14.0
        );
        let _ = write!(
            out,
            r#"<text x="2" y="{:.1}" font-size="10">{y0:.4}</text><text x="2" y="{:.1}" font-size="10">{y1:.4}</text>"#,
            H - PAD,
            PAD
        );
        for (k, s) in panel.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut d = String::new();
            let mut pen_up = true;
            for &(x, y) in &s.points {
                if !(x.is_finite() && y.is_finite()) {
                    pen_up = true;
                    continue;
                }
                let _ = write!(d, "{}{:.2},{:.2} ", if pen_up { "M" } else { "L" }, sx(x), sy(y));
                pen_up = false;
            }
            let _ = write!(
                out,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1"><title>{}</title></path>"#,
                d.trim_end(),
                escape(&s.label)
            );
        }
        for (y, label) in &panel.hlines {
            if y.is_finite() {
                let _ = write!(
                    out,
                    r##"<line x1="{PAD}" x2="{:.1}" y1="{:.2}" y2="{:.2}" stroke="#d62728" stroke-dasharray="4 3"/><text x="{:.1}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"##,
                    W - PAD,
                    sy(*y),
                    sy(*y),
                    W - PAD,
                    sy(*y) - 3.0,
                    escape(label)
                );
            }
        }
        for &(x, y, flagged) in &panel.markers {
            if x.is_finite() && y.is_finite() {
                let color = if flagged { "#d62728" } else { "#1f77b4" };
                let _ = write!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
            }
        }
    }
    out.push_str("</g>");
}

/// Lays panels out on a grid with `columns` panels per row.
pub fn panels_svg(panels: &[Panel], columns: usize) -> String {
    let columns = columns.max(1);
    let rows = panels.len().div_ceil(columns).max(1);
    let (tw, th) = (W * columns.min(panels.len().max(1)) as f64, H * rows as f64);
    let mut out = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{tw}" height="{th}" viewBox="0 0 {tw} {th}">"#);
    for (k, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, (k % columns) as f64 * W, (k / columns) as f64 * H);
    }
    out.push_str("</svg>\n");
    out
}

/// Control chart: one marker per batch, optional centre line and limits.
pub fn control_chart_svg(title: &str, values: &[f64], flags: &[bool], lines: &[(f64, String)], log_scale: bool) -> String {
    let tf = |v: f64| if log_scale { v.max(f64::MIN_POSITIVE).log10() } else { v };
    let panel = Panel {
        title: if log_scale { format!("{title} (log10)") } else { title.to_string() },
        series: vec![],
        hlines: lines.iter().map(|(y, l)| (tf(*y), l.clone())).collect(),
        markers: values.iter().zip(flags).enumerate().map(|(k, (&v, &f))| (k as f64, tf(v), f)).collect(),
    };
    panels_svg(&[panel], 1)
}

/// Heatmap with one row per batch and one column per feature; colour scales
/// with value relative to the largest absolute cell. NaN cells stay grey.
pub fn heatmap_svg(title: &str, rows: &[String], columns: &[String], values: &[Vec<f64>]) -> String {
    let cell_w = 60.0;
    let cell_h = 14.0;
    let left = 90.0;
    let top = 40.0;
    let width = left + cell_w * columns.len() as f64 + 10.0;
    let height = top + cell_h * rows.len() as f64 + 10.0;
    let max = values.iter().flatten().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#);
    let _ = write!(out, r#"<text x="{:.1}" y="14" font-size="13" text-anchor="middle">{}</text>"#, width / 2.0, escape(title));
    for (c, name) in columns.iter().enumerate() {
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="middle">{}</text>"#,
            left + cell_w * (c as f64 + 0.5),
            top - 6.0,
            escape(name)
        );
    }
    for (r, name) in rows.iter().enumerate() {
        let y = top + cell_h * r as f64;
        let _ = write!(out, r#"<text x="{:.1}" y="{:.1}" font-size="9" text-anchor="end">{}</text>"#, left - 4.0, y + cell_h - 3.0, escape(name));
        for c in 0..columns.len() {
            let v = values.get(r).and_then(|row| row.get(c)).copied().unwrap_or(f64::NAN);
            let fill = if !v.is_finite() {
                "#bbbbbb".to_string()
            } else {
                let t = if max > 0.0 { v / max } else { 0.0 };
                let fade = (255.0 * (1.0 - t.abs())).round() as u8;
                if t >= 0.0 { format!("#ff{fade:02x}{fade:02x}") } else { format!("#{fade:02x}{fade:02x}ff") }
            };
            let _ = write!(
                out,
                r#"<rect x="{:.1}" y="{y:.1}" width="{cell_w}" height="{cell_h}" fill="{fill}"><title>{v:.6}</title></rect>"#,
                left + cell_w * c as f64
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
