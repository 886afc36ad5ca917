//! Minimal SVG figures: axes, polylines, dots and colored cells.

use std::fmt::Write;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 70.0;

pub struct Figure {
    x: (f64, f64),
    y: (f64, f64),
    x_label: String,
    y_label: String,
    title: String,
    body: String,
    /// Plotted numbers as `series, x, y, value` rows.
    pub sidecar: Vec<(String, f64, f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Piecewise-linear blue-green-yellow ramp for `t` in `[0, 1]`.
pub fn ramp(t: f64) -> String {
    const STOPS: [[f64; 3]; 5] = [
        [68.0, 1.0, 84.0],
        [59.0, 82.0, 139.0],
        [33.0, 145.0, 140.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let s = t * (STOPS.len() - 1) as f64;
    let k = (s.floor() as usize).min(STOPS.len() - 2);
    let f = s - k as f64;
    let c: Vec<u8> = (0..3).map(|i| (STOPS[k][i] + f * (STOPS[k + 1][i] - STOPS[k][i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

impl Figure {
    pub fn new(x: (f64, f64), y: (f64, f64), x_label: &str, y_label: &str, title: &str) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            let w = (hi - lo).abs().max(1e-12);
            (lo - 0.04 * w, hi + 0.04 * w)
        };
        Self {
            x: pad(x),
            y: pad(y),
            x_label: x_label.into(),
            y_label: y_label.into(),
            title: title.into(),
            body: String::new(),
            sidecar: Vec::new(),
        }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let span = SIZE - 2.0 * MARGIN;
        (
            MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * span,
            SIZE - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * span,
        )
    }

    pub fn polyline(&mut self, series: &str, points: &[[f64; 2]], color: &str, dashed: bool) {
        if points.len() < 2 {
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|p| {
                let (a, b) = self.px(p[0], p[1]);
                format!("{a:.2},{b:.2}")
            })
            .collect();
        let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{}"/>"#,
            coords.join(" ")
        );
        self.sidecar.extend(points.iter().map(|p| (series.to_string(), p[0], p[1], f64::NAN)));
    }

    pub fn dots(&mut self, series: &str, points: &[[f64; 2]], color: &str, radius: f64) {
        for p in points {
            let (a, b) = self.px(p[0], p[1]);
            let _ = writeln!(self.body, r#"<circle cx="{a:.2}" cy="{b:.2}" r="{radius}" fill="{color}"/>"#);
            self.sidecar.push((series.to_string(), p[0], p[1], f64::NAN));
        }
    }

    /// Dots colored by `values` scaled to the ramp.
    pub fn scatter(&mut self, series: &str, points: &[[f64; 2]], values: &[f64], radius: f64) {
        let (lo, hi) = values
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        for (p, v) in points.iter().zip(values) {
            let (a, b) = self.px(p[0], p[1]);
            let _ = writeln!(self.body, r#"<circle cx="{a:.2}" cy="{b:.2}" r="{radius}" fill="{}"/>"#, ramp((v - lo) / span));
            self.sidecar.push((series.to_string(), p[0], p[1], *v));
        }
    }

    /// Axis-aligned cell centered at `(x, y)` with data-space size `(w, h)`, labeled with `value`.
    pub fn cell(&mut self, series: &str, center: [f64; 2], size: [f64; 2], value: f64, t: f64) {
        let (a, b) = self.px(center[0] - 0.5 * size[0], center[1] + 0.5 * size[1]);
        let (c, d) = self.px(center[0] + 0.5 * size[0], center[1] - 0.5 * size[1]);
        let (cx, cy) = self.px(center[0], center[1]);
        let _ = writeln!(
            self.body,
            r#"<rect x="{a:.2}" y="{b:.2}" width="{:.2}" height="{:.2}" fill="{}"/><text x="{cx:.2}" y="{cy:.2}" font-size="12" text-anchor="middle" fill="white">{value:.4}</text>"#,
            c - a,
            d - b,
            ramp(t)
        );
        self.sidecar.push((series.to_string(), center[0], center[1], value));
    }

    fn ticks(lo: f64, hi: f64) -> Vec<f64> {
        (0..=4).map(|k| lo + (hi - lo) * k as f64 / 4.0).collect()
    }

    /// The document, with `provenance` embedded as metadata.
    pub fn render(&self, provenance: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        );
        let _ = writeln!(s, "<metadata>\n{}</metadata>", escape(provenance));
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="30" font-size="16" text-anchor="middle">{}</text>"#,
            SIZE / 2.0,
            escape(&self.title)
        );
        s.push_str(&self.body);
        let (x0, y0) = self.px(self.x.0, self.y.0);
        let (x1, y1) = self.px(self.x.1, self.y.1);
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for t in Self::ticks(self.x.0, self.x.1) {
            let (a, _) = self.px(t, self.y.0);
            let _ = writeln!(s, r#"<text x="{a:.2}" y="{:.2}" font-size="11" text-anchor="middle">{t:.3}</text>"#, y0 + 16.0);
        }
        for t in Self::ticks(self.y.0, self.y.1) {
            let (_, b) = self.px(self.x.0, t);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{b:.2}" font-size="11" text-anchor="end">{t:.3}</text>"#, x0 - 6.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
            SIZE / 2.0,
            SIZE - 20.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="20" y="{}" font-size="14" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
            SIZE / 2.0,
            SIZE / 2.0,
            escape(&self.y_label)
        );
        s.push_str("</svg>\n");
        s
    }
}
