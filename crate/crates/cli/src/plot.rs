//! Static SVG charts.

use std::fmt::Write;

use overlap_topo::PersistenceDiagram;

const W: f64 = 520.0;
const H: f64 = 380.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                let c = if lo.is_finite() { lo } else { 0.0 };
                (c - 0.5, c + 0.5)
            } else {
                (lo, hi)
            }
        };
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(out: &mut String, title: &str, f: &Frame, xlabel: &str, ylabel: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = write!(out, r#"<path d="M{x0} {y1}V{y0}H{x1}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = write!(
            out,
            r#"<line x1="{px:.1}" y1="{y0}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y0 + 4.0,
            y0 + 16.0,
            tick(xv)
        );
        let _ = write!(
            out,
            r#"<line x1="{:.1}" y1="{py:.1}" x2="{x0}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 10.0, escape(xlabel));
    let _ = write!(
        out,
        r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn vertical_marker(out: &mut String, f: &Frame, at: f64, label: &str) {
    let px = f.px(at);
    let _ = write!(
        out,
        r##"<line x1="{px:.1}" y1="{TOP}" x2="{px:.1}" y2="{}" stroke="#d62728" stroke-dasharray="5 3"/><text x="{:.1}" y="{}" fill="#d62728">{}</text>"##,
        H - BOTTOM,
        px + 4.0,
        TOP + 12.0,
        escape(label)
    );
}

/// Density histogram with an optional vertical marker.
pub fn histogram(title: &str, xlabel: &str, edges: &[f64], density: &[f64], marker: Option<(f64, &str)>) -> String {
    let mut xs = extent(edges.iter().copied());
    if let Some((m, _)) = marker {
        xs = (xs.0.min(m), xs.1.max(m));
    }
    let top = extent(density.iter().copied()).1.max(0.0);
    let f = Frame::new(xs, (0.0, if top > 0.0 { top * 1.05 } else { 1.0 }));
    let mut out = String::new();
    open(&mut out, title, &f, xlabel, "density");
    for (d, e) in density.iter().zip(edges.windows(2)) {
        let (x0, x1) = (f.px(e[0]), f.px(e[1]));
        let (y0, y1) = (f.py(0.0), f.py(*d));
        let _ = write!(
            out,
            r##"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="#1f77b4" fill-opacity="0.7" stroke="white"/>"##,
            (x1 - x0).max(0.0),
            (y0 - y1).max(0.0)
        );
    }
    if let Some((m, label)) = marker {
        vertical_marker(&mut out, &f, m, label);
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter plot with an optional vertical marker.
pub fn scatter(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)], marker: Option<(f64, &str)>) -> String {
    let mut xs = extent(points.iter().map(|p| p.0));
    if let Some((m, _)) = marker {
        xs = (xs.0.min(m), xs.1.max(m));
    }
    let f = Frame::new(xs, extent(points.iter().map(|p| p.1)));
    let mut out = String::new();
    open(&mut out, title, &f, xlabel, ylabel);
    for &(x, y) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        let _ = write!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{}" fill-opacity="0.7"/>"#, f.px(x), f.py(y), COLORS[0]);
    }
    if let Some((m, label)) = marker {
        vertical_marker(&mut out, &f, m, label);
    }
    out.push_str("</svg>\n");
    out
}

/// Birth/death scatter with the diagonal; infinite deaths sit on the top
/// edge as open markers.
pub fn diagram(title: &str, pd: &PersistenceDiagram, max_dim: usize) -> String {
    let all: Vec<_> = (0..=max_dim).flat_map(|d| pd.dim(d)).collect();
    let finite_top = extent(all.iter().flat_map(|f| [f.birth, f.death])).1;
    let top = if finite_top.is_finite() && finite_top > 0.0 { finite_top * 1.1 } else { 1.0 };
    let f = Frame::new((0.0, top), (0.0, top));
    let mut out = String::new();
    open(&mut out, title, &f, "birth", "death");
    let _ = write!(
        out,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#888"/>"##,
        f.px(0.0),
        f.py(0.0),
        f.px(top),
        f.py(top)
    );
    for feat in all {
        let color = COLORS[feat.dim.min(COLORS.len() - 1)];
        let (cx, cy) = (f.px(feat.birth), f.py(feat.death.min(top)));
        if feat.death.is_finite() {
            let _ = write!(out, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="3" fill="{color}"/>"#);
        } else {
            let _ = write!(out, r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="4" fill="none" stroke="{color}"/>"#);
        }
    }
    for d in 0..=max_dim.min(COLORS.len() - 1) {
        let y = TOP + 14.0 * d as f64 + 6.0;
        let _ = write!(
            out,
            r#"<circle cx="{}" cy="{y}" r="3" fill="{}"/><text x="{}" y="{}">H{d}</text>"#,
            LEFT + 12.0,
            COLORS[d],
            LEFT + 20.0,
            y + 4.0
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use overlap_topo::{FiltrationKind, Feature};

    #[test]
    fn charts_are_closed_svg() {
        let h = histogram("h", "ns", &[0.0, 0.5, 1.0], &[1.2, 0.8], Some((0.4, "k*")));
        assert!(h.starts_with("<svg") && h.trim_end().ends_with("</svg>"));
        assert_eq!(h.matches("<rect").count(), 3);
        let s = scatter("s", "x", "y", &[(0.0, 1.0), (1.0, f64::NAN)], None);
        assert_eq!(s.matches("<circle").count(), 1);
        let pd = PersistenceDiagram::new(
            FiltrationKind::Rips,
            vec![Feature::new(0, 0.0, 1.0), Feature::new(0, 0.0, f64::INFINITY), Feature::new(1, 1.0, 1.5)],
        );
        let d = diagram("d", &pd, 1);
        // three features plus two legend dots
        assert_eq!(d.matches("<circle").count(), 5);
        assert!(d.contains("fill=\"none\""));
    }

    #[test]
    fn degenerate_ranges_do_not_produce_nan() {
        let s = scatter("s", "x", "y", &[(1.0, 1.0)], Some((1.0, "m")));
        assert!(!s.contains("NaN") && !s.contains("inf"));
        let h = histogram("h", "x", &[0.0, 1.0], &[0.0], None);
        assert!(!h.contains("NaN"));
    }
}
