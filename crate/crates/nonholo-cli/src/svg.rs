//! Self-contained SVG pose plots: the desired curve as a dotted path and
//! the vehicle's axle chain drawn at evenly spaced trace samples. Output
//! is a pure function of the trace and style, hence byte-stable.

use std::fmt::Write as _;
use std::path::Path;

use nonholo_core::models::{Configuration, WheeledModel};
use nonholo_core::sim::Trace;

use crate::CliError;

const CANVAS_W: f64 = 800.0;
const CANVAS_H: f64 = 600.0;
const MARGIN: f64 = 50.0;

/// Rendering knobs.
#[derive(Debug, Clone)]
pub struct PlotStyle {
    /// Number of vehicle poses drawn along the trace.
    pub pose_samples: usize,
    /// Rotates the pose color palette; any value is valid.
    pub seed: u64,
}

impl Default for PlotStyle {
    fn default() -> Self {
        PlotStyle { pose_samples: 9, seed: 0 }
    }
}

struct Frame {
    min: [f64; 2],
    scale: f64,
    height: f64,
}

impl Frame {
    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (
            MARGIN + (p[0] - self.min[0]) * self.scale,
            self.height - MARGIN - (p[1] - self.min[1]) * self.scale,
        )
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Render a trace into an SVG document.
pub fn render_pose_plot(trace: &Trace, model: &WheeledModel, style: &PlotStyle) -> String {
    assert!(!trace.is_empty(), "pose plot needs a nonempty trace");
    // Collect all drawable geometry first to frame the picture.
    let chains: Vec<_> = pose_indices(trace.len(), style.pose_samples)
        .into_iter()
        .filter_map(|k| {
            let q = Configuration::from_slice(&trace.q[k]);
            model.axle_chain(&q).ok().map(|c| (k, c))
        })
        .collect();
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    let mut grow = |p: [f64; 2]| {
        for a in 0..2 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    };
    for row in &trace.qd {
        grow([row[0], row[1]]);
    }
    for (_, chain) in &chains {
        for &p in &chain.chi {
            grow(p);
        }
    }
    for a in 0..2 {
        let pad = 0.05 * (max[a] - min[a]).max(1.0);
        min[a] -= pad;
        max[a] += pad;
    }
    let scale = ((CANVAS_W - 2.0 * MARGIN) / (max[0] - min[0]))
        .min((CANVAS_H - 2.0 * MARGIN) / (max[1] - min[1]));
    let frame = Frame { min, scale, height: CANVAS_H };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_W}" height="{CANVAS_H}" viewBox="0 0 {CANVAS_W} {CANVAS_H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // Desired curve, dotted.
    let mut d = String::new();
    for (k, row) in trace.qd.iter().enumerate() {
        let (px, py) = frame.map([row[0], row[1]]);
        let _ = write!(d, "{}{},{} ", if k == 0 { "M" } else { "L" }, fmt(px), fmt(py));
    }
    let _ = writeln!(
        svg,
        r#"<path d="{}" fill="none" stroke="black" stroke-width="1.2" stroke-dasharray="2 5"/>"#,
        d.trim_end()
    );

    // Vehicle poses: linked axle segments plus a wheel tick per axle.
    let wheel = 0.22;
    for (slot, (k, chain)) in chains.iter().enumerate() {
        let hue = (style.seed.wrapping_mul(47) + 210 + 14 * slot as u64) % 360;
        let color = format!("hsl({hue},70%,42%)");
        let mut pts = String::new();
        for &p in &chain.chi {
            let (px, py) = frame.map(p);
            let _ = write!(pts, "{},{} ", fmt(px), fmt(py));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.trim_end()
        );
        for (i, &p) in chain.chi.iter().enumerate() {
            let t = chain.tau_vec[i];
            let a = frame.map([p[0] - wheel * t[0], p[1] - wheel * t[1]]);
            let b = frame.map([p[0] + wheel * t[0], p[1] + wheel * t[1]]);
            let _ = writeln!(
                svg,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="3"/>"#,
                fmt(a.0),
                fmt(a.1),
                fmt(b.0),
                fmt(b.1)
            );
        }
        let (cx, cy) = frame.map(chain.chi[0]);
        let _ = writeln!(
            svg,
            r#"<circle cx="{}" cy="{}" r="2.5" fill="{color}"/>"#,
            fmt(cx),
            fmt(cy)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="10" fill="{color}">t={}</text>"#,
            fmt(cx + 5.0),
            fmt(cy - 5.0),
            fmt(trace.t[*k])
        );
    }

    // Legend.
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-size="12" fill="black">{} — dotted: desired path, linked segments: axle chain poses</text>"#,
        fmt(MARGIN),
        model.name()
    );

    // Scale bar: 1 m.
    let bar = scale;
    let (x0, y0) = (MARGIN, CANVAS_H - 20.0);
    let _ = writeln!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="2"/>"#,
        fmt(x0),
        fmt(y0),
        fmt(x0 + bar),
        fmt(y0)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="10" fill="black">1 m</text>"#,
        fmt(x0),
        fmt(y0 - 5.0)
    );
    svg.push_str("</svg>\n");
    svg
}

/// Evenly spaced sample indices, always including both ends.
fn pose_indices(len: usize, samples: usize) -> Vec<usize> {
    let samples = samples.max(2).min(len);
    (0..samples)
        .map(|i| i * (len - 1) / (samples - 1))
        .collect()
}

/// Render and write the plot.
pub fn write_pose_plot(
    path: &Path,
    trace: &Trace,
    model: &WheeledModel,
    style: &PlotStyle,
) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, render_pose_plot(trace, model, style))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
