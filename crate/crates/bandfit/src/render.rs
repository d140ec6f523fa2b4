//! Grayscale kernel images (binary PGM) and SVG 1.1 charts.
//!
//! Every renderer is a pure function of its inputs; coordinates are printed
//! with fixed precision so identical inputs give identical bytes.

use std::fmt::Write as _;

use bandfit_core::{CalibrationPoint, Field2, Histogram, LayerSummary};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("nothing to render: {0}")]
    EmptyData(&'static str),
    #[error("output side {out_side} is smaller than the kernel side {side}")]
    OutputTooSmall { out_side: usize, side: usize },
    #[error("kernel is not square")]
    NotSquare,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, one byte per pixel.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    /// Binary PGM (`P5`, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Maps `[min, max]` of the kernel affinely onto `[0, 255]` and upsamples by
/// nearest neighbor to `out_side x out_side`. Constant kernels become 128.
pub fn render_kernel_image(kernel: &Field2, out_side: usize) -> Result<GrayImage, RenderError> {
    if !kernel.is_square() {
        return Err(RenderError::NotSquare);
    }
    let k = kernel.height();
    if out_side < k {
        return Err(RenderError::OutputTooSmall { out_side, side: k });
    }
    let lo = kernel.values().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = kernel.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let level = |v: f64| -> u8 {
        if hi > lo {
            ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8
        } else {
            128
        }
    };
    let mut pixels = Vec::with_capacity(out_side * out_side);
    for r in 0..out_side {
        for c in 0..out_side {
            pixels.push(level(kernel.at(r * k / out_side, c * k / out_side)));
        }
    }
    Ok(GrayImage {
        width: out_side,
        height: out_side,
        pixels,
    })
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(ch),
        }
    }
    out
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 {
        format!("{v:.3}")
    } else {
        format!("{v:.1e}")
    }
}

fn open_svg(width: f64, height: f64, title: &str) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(
        s,
        "<rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>"
    );
    s
}

/// Left axis with `ticks + 1` evenly spaced labels from 0 to `hi`.
fn y_axis(s: &mut String, x: f64, top: f64, bottom: f64, hi: f64, ticks: usize, label: &str) {
    let _ = writeln!(s, "<g class=\"y-axis\" stroke=\"black\">");
    let _ = writeln!(
        s,
        "<line x1=\"{x:.2}\" y1=\"{top:.2}\" x2=\"{x:.2}\" y2=\"{bottom:.2}\"/>"
    );
    for i in 0..=ticks {
        let t = i as f64 / ticks as f64;
        let y = bottom - t * (bottom - top);
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{x:.2}\" y2=\"{y:.2}\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" stroke=\"none\">{}</text>",
            x - 4.0,
            x - 6.0,
            y + 4.0,
            tick_label(t * hi)
        );
    }
    let mid = (top + bottom) / 2.0;
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{mid:.2}\" text-anchor=\"middle\" stroke=\"none\" transform=\"rotate(-90 14 {mid:.2})\">{}</text>",
        escape(label)
    );
    s.push_str("</g>\n");
}

const BOX_COLUMN: f64 = 80.0;
const BOX_LEFT: f64 = 70.0;
const BOX_TOP: f64 = 30.0;
const BOX_BOTTOM: f64 = 330.0;

/// One column per layer followed by the all-layers column. Boxes span
/// q1 to q3 with a median line; whiskers reach p5 and p95.
pub fn render_boxplot_svg(layers: &[LayerSummary], aggregate: &LayerSummary) -> Result<String, RenderError> {
    if layers.is_empty() {
        return Err(RenderError::EmptyData("no layer summaries"));
    }
    let columns: Vec<&LayerSummary> = layers.iter().chain(std::iter::once(aggregate)).collect();
    let top_value = columns
        .iter()
        .filter_map(|c| c.stats.map(|s| s.p95))
        .fold(0.0_f64, f64::max);
    let y_max = if top_value > 0.0 { top_value * 1.1 } else { 1.0 };
    let y = |v: f64| BOX_BOTTOM - v / y_max * (BOX_BOTTOM - BOX_TOP);

    let width = BOX_LEFT + BOX_COLUMN * columns.len() as f64 + 20.0;
    let height = BOX_BOTTOM + 50.0;
    let mut s = open_svg(width, height, "RMS residual by layer");
    y_axis(&mut s, BOX_LEFT, BOX_TOP, BOX_BOTTOM, y_max, 5, "RMS residual");
    let _ = writeln!(
        s,
        "<line x1=\"{BOX_LEFT:.2}\" y1=\"{BOX_BOTTOM:.2}\" x2=\"{:.2}\" y2=\"{BOX_BOTTOM:.2}\" stroke=\"black\"/>",
        width - 20.0
    );

    for (i, col) in columns.iter().enumerate() {
        let is_aggregate = i == layers.len();
        let center = BOX_LEFT + BOX_COLUMN * (i as f64 + 0.5);
        let (left, right) = (center - BOX_COLUMN * 0.3, center + BOX_COLUMN * 0.3);
        let label = if is_aggregate {
            "all layers"
        } else {
            col.layer_name.as_str()
        };
        let _ = writeln!(
            s,
            "<g class=\"column{}\" data-count=\"{}\" data-degenerate=\"{}\">",
            if is_aggregate { " aggregate" } else { "" },
            col.count,
            col.degenerate_count
        );
        match col.stats {
            Some(b) => {
                let fill = if is_aggregate { "#d9d9d9" } else { "#9ecae1" };
                let _ = writeln!(
                    s,
                    "<line class=\"whisker\" x1=\"{center:.2}\" y1=\"{:.2}\" x2=\"{center:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
                    y(b.p95),
                    y(b.p5)
                );
                for v in [b.p5, b.p95] {
                    let _ = writeln!(
                        s,
                        "<line class=\"cap\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
                        center - 8.0,
                        y(v),
                        center + 8.0,
                        y(v)
                    );
                }
                let _ = writeln!(
                    s,
                    "<rect class=\"box\" x=\"{left:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\" stroke=\"black\"/>",
                    y(b.q3),
                    right - left,
                    y(b.q1) - y(b.q3)
                );
                let _ = writeln!(
                    s,
                    "<line class=\"median\" x1=\"{left:.2}\" y1=\"{:.2}\" x2=\"{right:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"2\"/>",
                    y(b.median),
                    y(b.median)
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    "<text x=\"{center:.2}\" y=\"{:.2}\" text-anchor=\"middle\">no fits</text>",
                    BOX_BOTTOM - 10.0
                );
            }
        }
        let _ = writeln!(
            s,
            "<text x=\"{center:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            BOX_BOTTOM + 18.0,
            escape(label)
        );
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

const PLOT_LEFT: f64 = 70.0;
const PLOT_RIGHT: f64 = 560.0;
const PLOT_TOP: f64 = 30.0;
const PLOT_BOTTOM: f64 = 330.0;

/// Bars over log-spaced edges; underflow and overflow are noted in the title line.
pub fn render_histogram_svg(hist: &Histogram) -> Result<String, RenderError> {
    let (Some(&first), Some(&last)) = (hist.edges.first(), hist.edges.last()) else {
        return Err(RenderError::EmptyData("histogram has no edges"));
    };
    if hist.counts.is_empty() || !(first > 0.0) {
        return Err(RenderError::EmptyData(
            "histogram needs positive edges and at least one bin",
        ));
    }
    let (l0, l1) = (first.log10(), last.log10());
    let x = |e: f64| PLOT_LEFT + (e.log10() - l0) / (l1 - l0) * (PLOT_RIGHT - PLOT_LEFT);
    let peak = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let y = |c: f64| PLOT_BOTTOM - c / peak * (PLOT_BOTTOM - PLOT_TOP);

    let mut s = open_svg(PLOT_RIGHT + 20.0, PLOT_BOTTOM + 50.0, "RMS residuals, all layers");
    y_axis(&mut s, PLOT_LEFT, PLOT_TOP, PLOT_BOTTOM, peak, 4, "count");
    let _ = writeln!(
        s,
        "<text x=\"{PLOT_LEFT:.2}\" y=\"18\">underflow {} / overflow {} / total {}</text>",
        hist.underflow,
        hist.overflow,
        hist.total()
    );
    s.push_str("<g class=\"bars\" fill=\"#6baed6\" stroke=\"none\">\n");
    for (i, &c) in hist.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let (x0, x1) = (x(hist.edges[i]), x(hist.edges[i + 1]));
        let _ = writeln!(
            s,
            "<rect x=\"{x0:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\"/>",
            y(c as f64),
            x1 - x0,
            PLOT_BOTTOM - y(c as f64)
        );
    }
    s.push_str("</g>\n<g class=\"x-axis\" stroke=\"black\">\n");
    let _ = writeln!(
        s,
        "<line x1=\"{PLOT_LEFT:.2}\" y1=\"{PLOT_BOTTOM:.2}\" x2=\"{PLOT_RIGHT:.2}\" y2=\"{PLOT_BOTTOM:.2}\"/>"
    );
    for decade in (l0.ceil() as i32)..=(l1.floor() as i32) {
        let xd = x(10f64.powi(decade));
        let _ = writeln!(
            s,
            "<line x1=\"{xd:.2}\" y1=\"{PLOT_BOTTOM:.2}\" x2=\"{xd:.2}\" y2=\"{:.2}\"/><text x=\"{xd:.2}\" y=\"{:.2}\" text-anchor=\"middle\" stroke=\"none\">1e{decade}</text>",
            PLOT_BOTTOM + 4.0,
            PLOT_BOTTOM + 16.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" stroke=\"none\">RMS residual</text>",
        (PLOT_LEFT + PLOT_RIGHT) / 2.0,
        PLOT_BOTTOM + 36.0
    );
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

/// Measured mean RMS against noise fraction, with the uniform-noise
/// expectation `a * range / sqrt(3)` drawn dashed for reference.
pub fn render_calibration_svg(points: &[CalibrationPoint], range: f64) -> Result<String, RenderError> {
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return Err(RenderError::EmptyData("no calibration points"));
    };
    let (a0, a1) = (first.noise_fraction, last.noise_fraction);
    let span = if a1 > a0 { a1 - a0 } else { 1.0 };
    let expected = |a: f64| a * range / 3f64.sqrt();
    let top = points
        .iter()
        .map(|p| p.mean_rms.max(expected(p.noise_fraction)))
        .fold(0.0_f64, f64::max);
    let y_max = if top > 0.0 { top * 1.1 } else { 1.0 };
    let x = |a: f64| PLOT_LEFT + (a - a0) / span * (PLOT_RIGHT - PLOT_LEFT);
    let y = |v: f64| PLOT_BOTTOM - v / y_max * (PLOT_BOTTOM - PLOT_TOP);

    let mut s = open_svg(PLOT_RIGHT + 20.0, PLOT_BOTTOM + 50.0, "RMS error versus noise fraction");
    y_axis(&mut s, PLOT_LEFT, PLOT_TOP, PLOT_BOTTOM, y_max, 5, "mean RMS");
    s.push_str("<g class=\"x-axis\" stroke=\"black\">\n");
    let _ = writeln!(
        s,
        "<line x1=\"{PLOT_LEFT:.2}\" y1=\"{PLOT_BOTTOM:.2}\" x2=\"{PLOT_RIGHT:.2}\" y2=\"{PLOT_BOTTOM:.2}\"/>"
    );
    for i in 0..=4 {
        let a = a0 + span * i as f64 / 4.0;
        let _ = writeln!(
            s,
            "<line x1=\"{0:.2}\" y1=\"{PLOT_BOTTOM:.2}\" x2=\"{0:.2}\" y2=\"{1:.2}\"/><text x=\"{0:.2}\" y=\"{2:.2}\" text-anchor=\"middle\" stroke=\"none\">{3}</text>",
            x(a),
            PLOT_BOTTOM + 4.0,
            PLOT_BOTTOM + 16.0,
            tick_label(a)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" stroke=\"none\">noise fraction of value range</text>",
        (PLOT_LEFT + PLOT_RIGHT) / 2.0,
        PLOT_BOTTOM + 36.0
    );
    s.push_str("</g>\n");
    let line = |f: &dyn Fn(&CalibrationPoint) -> f64| {
        points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.noise_fraction), y(f(p))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(
        s,
        "<polyline class=\"expected\" points=\"{}\" fill=\"none\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>",
        line(&|p| expected(p.noise_fraction))
    );
    let _ = writeln!(
        s,
        "<polyline class=\"measured\" points=\"{}\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\"/>",
        line(&|p| p.mean_rms)
    );
    s.push_str("<g class=\"points\" fill=\"#08519c\">\n");
    for p in points {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\"/>",
            x(p.noise_fraction),
            y(p.mean_rms)
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}
