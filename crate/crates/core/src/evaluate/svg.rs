//! Minimal static SVG charts for reports.

use std::fmt::Write;

use crate::data::{ClassLabel, BONES, NUM_JOINTS};
use crate::synth::{generate, SynthConfig};

use super::metrics::MetricsReport;

const PALETTE: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Svg {
            body: String::new(),
            width,
            height,
        }
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.1}" y="{y:.1}" font-size="{size}" text-anchor="{anchor}" font-family="sans-serif">{}</text>"#,
            escape(s)
        );
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{stroke}" stroke-width="{width}"/>"#,
            a.0, a.1, b.0, b.1
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}" stroke="#444" stroke-width="0.5"/>"##
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{fill}"/>"#);
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"#,
            pts.join(" ")
        );
    }

    fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Axes with five ticks along each range; returns a mapper
/// from data to pixel coordinates.
fn axes(
    svg: &mut Svg,
    origin: (f64, f64),
    size: (f64, f64),
    x_range: (f64, f64),
    y_range: (f64, f64),
    labels: (&str, &str),
) -> impl Fn(f64, f64) -> (f64, f64) {
    let (ox, oy) = origin;
    let (w, h) = size;
    svg.line((ox, oy), (ox + w, oy), "#000", 1.0);
    svg.line((ox, oy), (ox, oy - h), "#000", 1.0);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x_range.0 + f * (x_range.1 - x_range.0);
        let yv = y_range.0 + f * (y_range.1 - y_range.0);
        svg.text(ox + f * w, oy + 16.0, 10.0, "middle", &format_tick(xv));
        svg.text(ox - 6.0, oy - f * h + 4.0, 10.0, "end", &format_tick(yv));
    }
    svg.text(ox + w / 2.0, oy + 34.0, 12.0, "middle", labels.0);
    svg.text(ox - 40.0, oy - h / 2.0, 12.0, "middle", labels.1);
    move |x, y| {
        let fx = (x - x_range.0) / (x_range.1 - x_range.0);
        let fy = (y - y_range.0) / (y_range.1 - y_range.0);
        (ox + fx * w, oy - fy * h)
    }
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 10.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Confusion matrix heatmap; cell shade scales with the row-normalized rate.
pub fn confusion(report: &MetricsReport, title: &str) -> String {
    let cell = 80.0;
    let (left, top) = (170.0, 60.0);
    let mut svg = Svg::new(left + 4.0 * cell + 30.0, top + 4.0 * cell + 60.0);
    svg.text(svg.width / 2.0, 25.0, 15.0, "middle", title);
    for (i, row) in report.confusion.iter().enumerate() {
        let total: usize = row.iter().sum();
        for (j, &v) in row.iter().enumerate() {
            let rate = if total == 0 { 0.0 } else { v as f64 / total as f64 };
            let shade = (255.0 * (1.0 - 0.8 * rate)).round() as u8;
            let fill = format!("rgb({shade},{shade},255)");
            let (x, y) = (left + j as f64 * cell, top + i as f64 * cell);
            svg.rect(x, y, cell, cell, &fill);
            svg.text(x + cell / 2.0, y + cell / 2.0 + 5.0, 14.0, "middle", &v.to_string());
        }
    }
    for c in ClassLabel::ALL {
        let k = c.index() as f64;
        svg.text(left - 8.0, top + (k + 0.5) * cell + 4.0, 11.0, "end", c.display_name());
        svg.text(left + (k + 0.5) * cell, top + 4.0 * cell + 18.0, 10.0, "middle", c.display_name());
    }
    svg.text(left + 2.0 * cell, top + 4.0 * cell + 40.0, 12.0, "middle", "Predicted");
    svg.finish()
}

/// One-vs-rest ROC curves with AUC in the legend.
pub fn roc(report: &MetricsReport, title: &str) -> String {
    let mut svg = Svg::new(520.0, 460.0);
    svg.text(260.0, 25.0, 15.0, "middle", title);
    let map = axes(&mut svg, (70.0, 400.0), (360.0, 340.0), (0.0, 1.0), (0.0, 1.0), ("False positive rate", "TPR"));
    svg.line(map(0.0, 0.0), map(1.0, 1.0), "#bbb", 1.0);
    for (k, curve) in report.roc.iter().enumerate() {
        let color = PALETTE[curve.class.index() % PALETTE.len()];
        let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| map(p[0], p[1])).collect();
        svg.polyline(&pts, color);
        let y = 300.0 + 16.0 * k as f64;
        svg.line((250.0, y - 4.0), (270.0, y - 4.0), color, 3.0);
        svg.text(275.0, y, 11.0, "start", &format!("{} (AUC {:.3})", curve.class.display_name(), curve.auc));
    }
    svg.finish()
}

/// Train and test loss per epoch.
pub fn loss(report: &MetricsReport, title: &str) -> String {
    let mut svg = Svg::new(560.0, 420.0);
    svg.text(280.0, 25.0, 15.0, "middle", title);
    let curves = [("train", &report.loss.train, PALETTE[0]), ("test", &report.loss.test, PALETTE[1])];
    let epochs = curves.iter().map(|c| c.1.len()).max().unwrap_or(0).max(2);
    let top = curves
        .iter()
        .flat_map(|c| c.1.iter().copied())
        .fold(0.0_f64, f64::max)
        .max(1e-9);
    let map = axes(&mut svg, (70.0, 360.0), (430.0, 300.0), (1.0, epochs as f64), (0.0, top), ("Epoch", "Loss"));
    for (k, (name, values, color)) in curves.iter().enumerate() {
        if values.is_empty() {
            continue;
        }
        let pts: Vec<(f64, f64)> = values.iter().enumerate().map(|(e, &v)| map(e as f64 + 1.0, v)).collect();
        svg.polyline(&pts, color);
        let y = 60.0 + 16.0 * k as f64;
        svg.line((400.0, y - 4.0), (420.0, y - 4.0), color, 3.0);
        svg.text(425.0, y, 11.0, "start", name);
    }
    svg.finish()
}

/// Front-view skeleton per panel with marker radius proportional to the
/// joint score relative to the panel maximum.
pub fn skeleton(panels: &[(&str, &[f64])], title: &str) -> String {
    let cfg = SynthConfig {
        noise_sigma: 0.0,
        asymmetry: 0.0,
        tremor_amplitude: 0.0,
        ..SynthConfig::for_class(ClassLabel::Healthy, 10, 0)
    };
    let pose = generate(&cfg).expect("canonical pose").positions[0];
    let (panel_w, panel_h) = (260.0, 420.0);
    let mut svg = Svg::new(panel_w * panels.len().max(1) as f64, panel_h + 60.0);
    svg.text(svg.width / 2.0, 25.0, 15.0, "middle", title);
    let (min_y, max_y) = pose.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])));
    let scale = (panel_h - 60.0) / (max_y - min_y);
    for (k, (name, scores)) in panels.iter().enumerate() {
        let cx = panel_w * (k as f64 + 0.5);
        let at = |j: usize| (cx + pose[j][0] * scale, 70.0 + (max_y - pose[j][1]) * scale);
        for &(a, b) in &BONES {
            svg.line(at(a), at(b), "#888", 3.0);
        }
        let peak = scores.iter().copied().fold(0.0_f64, f64::max);
        for j in 0..NUM_JOINTS.min(scores.len()) {
            let rel = if peak > 0.0 { scores[j] / peak } else { 0.0 };
            let (x, y) = at(j);
            svg.circle(x, y, 2.0 + 10.0 * rel, "#000");
        }
        svg.text(cx, panel_h + 45.0, 13.0, "middle", name);
    }
    svg.finish()
}

/// Horizontal bars, largest first as given.
pub fn bars(labels: &[String], values: &[f64], title: &str) -> String {
    let row = 14.0;
    let (left, top, width) = (230.0, 50.0, 300.0);
    let mut svg = Svg::new(left + width + 80.0, top + row * labels.len() as f64 + 30.0);
    svg.text(svg.width / 2.0, 25.0, 15.0, "middle", title);
    let peak = values.iter().copied().fold(0.0_f64, f64::max);
    for (k, (label, &v)) in labels.iter().zip(values).enumerate() {
        let y = top + k as f64 * row;
        let w = if peak > 0.0 { width * v / peak } else { 0.0 };
        svg.rect(left, y, w, row - 2.0, PALETTE[2]);
        svg.text(left - 6.0, y + row - 4.0, 10.0, "end", label);
        svg.text(left + w + 4.0, y + row - 4.0, 10.0, "start", &format!("{v:.4}"));
    }
    svg.finish()
}
