//! Minimal SVG writer for line plots, histograms and ternary scatter plots.
//!
//! Coordinates are printed with a fixed number of decimals, so identical
//! inputs always give identical files.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(
            out,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(title)
        )
        .unwrap();
        Self { out }
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        writeln!(self.out, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#, escape(s)).unwrap();
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        writeln!(self.out, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" {style}/>"#).unwrap();
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Linear map of data ranges onto the plotting area.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0).max(f64::MIN_POSITIVE) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0).max(f64::MIN_POSITIVE) * (H - 2.0 * MARGIN)
    }

    fn axes(&self, c: &mut Canvas, xlabel: &str, ylabel: &str) {
        let axis = r#"stroke="black" stroke-width="1""#;
        c.line(MARGIN, H - MARGIN, W - MARGIN, H - MARGIN, axis);
        c.line(MARGIN, MARGIN, MARGIN, H - MARGIN, axis);
        for t in 0..=4 {
            let f = t as f64 / 4.0;
            let xv = self.x0 + f * (self.x1 - self.x0);
            let yv = self.y0 + f * (self.y1 - self.y0);
            c.text(self.px(xv), H - MARGIN + 16.0, "middle", &format!("{xv:.3}"));
            c.text(MARGIN - 6.0, self.py(yv) + 4.0, "end", &format!("{yv:.3}"));
        }
        c.text(W / 2.0, H - 12.0, "middle", xlabel);
        c.text(14.0, H / 2.0, "middle", ylabel);
    }
}

/// One named polyline of a line plot.
pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Line plot over the unit square in `y` with an optional `y = x` reference.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], diagonal: bool) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let x0 = xs.clone().fold(f64::INFINITY, f64::min).min(0.0);
    let x1 = xs.fold(f64::NEG_INFINITY, f64::max).max(x0 + 1e-9);
    let frame = Frame { x0, x1, y0: 0.0, y1: 1.0 };
    let mut c = Canvas::new(title);
    frame.axes(&mut c, xlabel, ylabel);
    if diagonal {
        c.line(
            frame.px(x0),
            frame.py(x0.clamp(0.0, 1.0)),
            frame.px(x1),
            frame.py(x1.clamp(0.0, 1.0)),
            r#"stroke="grey" stroke-dasharray="4 4""#,
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect();
        writeln!(c.out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "))
            .unwrap();
        let ly = MARGIN + 16.0 * i as f64;
        c.line(W - MARGIN - 150.0, ly, W - MARGIN - 130.0, ly, &format!(r#"stroke="{color}" stroke-width="2""#));
        c.text(W - MARGIN - 124.0, ly + 4.0, "start", s.name);
    }
    c.finish()
}

/// Histogram of `values` with vertical markers at the given positions.
pub fn histogram(title: &str, values: &[f64], bins: usize, markers: &[(&str, f64)]) -> String {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let bins = bins.max(1);
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / (hi - lo)) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let top = *counts.iter().max().unwrap_or(&1) as f64;
    let frame = Frame { x0: lo, x1: hi, y0: 0.0, y1: top.max(1.0) };
    let mut c = Canvas::new(title);
    frame.axes(&mut c, "value", "count");
    let width = (hi - lo) / bins as f64;
    for (b, &n) in counts.iter().enumerate() {
        let x = lo + b as f64 * width;
        let (px0, px1) = (frame.px(x), frame.px(x + width));
        let (py0, py1) = (frame.py(n as f64), frame.py(0.0));
        writeln!(
            c.out,
            r##"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd"/>"##,
            (px1 - px0).max(0.0),
            (py1 - py0).max(0.0)
        )
        .unwrap();
    }
    for (i, &(name, x)) in markers.iter().enumerate() {
        let color = PALETTE[(i + 1) % PALETTE.len()];
        let px = frame.px(x);
        c.line(px, MARGIN, px, H - MARGIN, &format!(r#"stroke="{color}" stroke-width="2""#));
        c.text(px + 4.0, MARGIN + 14.0 * (i as f64 + 1.0), "start", name);
    }
    c.finish()
}

/// Scatter plot of 3-class probability vectors inside the triangle, with the
/// polygon `outline` (also in probability coordinates) drawn on top.
pub fn ternary_scatter(title: &str, points: &[[f64; 3]], outline: &[[f64; 3]]) -> String {
    let corner = [(MARGIN, H - MARGIN), (W - MARGIN, H - MARGIN), (W / 2.0, MARGIN)];
    let map = |p: &[f64; 3]| -> (f64, f64) {
        (
            p[0] * corner[0].0 + p[1] * corner[1].0 + p[2] * corner[2].0,
            p[0] * corner[0].1 + p[1] * corner[1].1 + p[2] * corner[2].1,
        )
    };
    let mut c = Canvas::new(title);
    writeln!(
        c.out,
        r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="none" stroke="black"/>"#,
        corner[0].0, corner[0].1, corner[1].0, corner[1].1, corner[2].0, corner[2].1
    )
    .unwrap();
    for p in points {
        let (x, y) = map(p);
        writeln!(c.out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="1.2" fill="#1f77b4" fill-opacity="0.5"/>"##).unwrap();
    }
    if !outline.is_empty() {
        let pts: Vec<String> = outline
            .iter()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        writeln!(c.out, r##"<polygon points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##, pts.join(" "))
            .unwrap();
    }
    c.text(corner[0].0, corner[0].1 + 16.0, "middle", "class 1");
    c.text(corner[1].0, corner[1].1 + 16.0, "middle", "class 2");
    c.text(corner[2].0, corner[2].1 - 6.0, "middle", "class 3");
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outputs_are_well_formed_and_deterministic() {
        let s = [Series { name: "a<b", points: vec![(0.0, 0.1), (0.5, 0.4)] }];
        let a = line_plot("t", "x", "y", &s, true);
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("a&lt;b"));
        assert_eq!(a, line_plot("t", "x", "y", &s, true));
        let h = histogram("h", &[1.0, 2.0, 2.0, 3.0], 3, &[("mean", 2.0)]);
        assert_eq!(h.matches("<rect").count(), 1 + 3);
        let h = histogram("h", &[1.0; 5], 4, &[]);
        assert!(h.contains("<rect"));
        let t = ternary_scatter("s", &[[0.2, 0.3, 0.5]], &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_eq!(t.matches("<circle").count(), 1);
    }
}
