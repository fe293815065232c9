//! Static SVG line charts and histograms. Self-contained output, fixed
//! palette and layout, deterministic byte-for-byte for identical input.

use anyhow::{bail, Result};
use std::fmt::Write as _;

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 44.0;
const MARGIN_BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// One labelled polyline.
pub struct Series<'a> {
    pub label: String,
    pub points: &'a [(f64, f64)],
}

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Range { lo: 0.0, hi: 1.0 };
        }
        if hi - lo <= 0.0 {
            let pad = lo.abs().max(1.0) * 0.5;
            return Range {
                lo: lo - pad,
                hi: hi + pad,
            };
        }
        let pad = 0.05 * (hi - lo);
        Range {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn scale(&self, v: f64, out_lo: f64, out_hi: f64) -> f64 {
        out_lo + (v - self.lo) / (self.hi - self.lo) * (out_hi - out_lo)
    }

    /// At most `count` round tick positions (1/2/5 times a power of ten).
    fn ticks(&self, count: usize) -> Vec<f64> {
        let span = self.hi - self.lo;
        let raw_step = span / count as f64;
        let mag = 10f64.powf(raw_step.log10().floor());
        let norm = raw_step / mag;
        let step = mag
            * if norm <= 1.0 {
                1.0
            } else if norm <= 2.0 {
                2.0
            } else if norm <= 5.0 {
                5.0
            } else {
                10.0
            };
        let first = (self.lo / step).ceil() * step;
        let mut ticks = Vec::new();
        let mut t = first;
        while t <= self.hi + 1e-9 * step {
            // snap near-zero ticks to zero so labels stay short
            ticks.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
            t += step;
        }
        ticks
    }
}

fn fmt_num(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s.is_empty() || s == "-" {
            "0".into()
        } else {
            s.to_string()
        }
    }
}

fn chart_frame(
    svg: &mut String,
    title: &str,
    x_label: &str,
    y_label: &str,
    xr: Range,
    yr: Range,
) {
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"Helvetica, Arial, sans-serif\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    // axes
    let _ = write!(
        svg,
        "<line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x1:.1}\" y2=\"{y0:.1}\" stroke=\"black\"/>\n\
         <line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{x0:.1}\" y2=\"{y1:.1}\" stroke=\"black\"/>\n"
    );
    for t in xr.ticks(6) {
        let px = xr.scale(t, x0, x1);
        let _ = write!(
            svg,
            "<line x1=\"{px:.2}\" y1=\"{y0:.1}\" x2=\"{px:.2}\" y2=\"{:.1}\" stroke=\"black\"/>\n\
             <text x=\"{px:.2}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
            y0 + 5.0,
            y0 + 18.0,
            fmt_num(t)
        );
    }
    for t in yr.ticks(6) {
        let py = yr.scale(t, y0, y1);
        let _ = write!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{py:.2}\" x2=\"{x0:.1}\" y2=\"{py:.2}\" stroke=\"black\"/>\n\
             <text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            fmt_num(t)
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n\
         <text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\" \
         transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 14.0,
        escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Multi-series line chart.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        bail!("cannot chart an empty series");
    }
    let xr = Range::of(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = Range::of(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let mut svg = String::new();
    chart_frame(&mut svg, title, x_label, y_label, xr, yr);
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        for (x, y) in s.points {
            let _ = write!(
                points,
                "{:.2},{:.2} ",
                xr.scale(*x, x0, x1),
                yr.scale(*y, y0, y1)
            );
        }
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            points.trim_end()
        );
        // legend entry
        let ly = MARGIN_TOP + 16.0 * i as f64;
        let _ = write!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n",
            x1 - 150.0,
            x1 - 120.0,
            x1 - 112.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Histogram bars from `(bin_center, density)` pairs of equal width.
pub fn histogram_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    centers: &[f64],
    densities: &[f64],
    bin_width: f64,
) -> Result<String> {
    if centers.is_empty() || centers.len() != densities.len() {
        bail!("histogram needs matching, nonempty centers and densities");
    }
    let xr = Range::of(
        centers
            .iter()
            .flat_map(|c| [c - bin_width / 2.0, c + bin_width / 2.0]),
    );
    let yr = Range::of([0.0].into_iter().chain(densities.iter().copied()));
    let mut svg = String::new();
    chart_frame(&mut svg, title, x_label, y_label, xr, yr);
    let (x0, x1) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (y0, y1) = (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    let base = yr.scale(0.0, y0, y1);
    for (c, d) in centers.iter().zip(densities) {
        let left = xr.scale(c - bin_width / 2.0, x0, x1);
        let right = xr.scale(c + bin_width / 2.0, x0, x1);
        let top = yr.scale(*d, y0, y1);
        let _ = writeln!(
            svg,
            "<rect x=\"{left:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"{}\" stroke=\"black\" stroke-width=\"0.5\"/>",
            (right - left).max(0.5),
            (base - top).max(0.0),
            PALETTE[0]
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
