//! Minimal deterministic SVG emitters for line plots and heatmaps. These are
//! artifacts, not a UI: fixed layout, byte-stable output.

use std::fmt::Write;

const W: f64 = 860.0;
const H: f64 = 560.0;
const ML: f64 = 70.0;
const MR: f64 = 25.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    )
}

fn axes(xlabel: &str, ylabel: &str, x0: f64, x1: f64, y0: f64, y1: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\"/>",
        W - ML - MR,
        H - MT - MB
    );
    for k in 0..=4 {
        let fx = k as f64 / 4.0;
        let x = ML + fx * (W - ML - MR);
        let y = H - MB + 18.0;
        let _ = writeln!(
            s,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{:.4}</text>",
            x0 + fx * (x1 - x0)
        );
        let yv = H - MB - fx * (H - MT - MB);
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{:.4}</text>",
            ML - 6.0,
            yv + 4.0,
            y0 + fx * (y1 - y0)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">{xlabel}</text>",
        ML + (W - ML - MR) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{ylabel}</text>",
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    );
    s
}

/// Single-series line plot.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, x: &[f64], y: &[f64]) -> String {
    let (x0, x1) = axis_range(x.iter().cloned());
    let (y0, y1) = axis_range(y.iter().cloned());
    let mut s = header(title);
    s.push_str(&axes(xlabel, ylabel, x0, x1, y0, y1));
    let mut path = String::from("<path d=\"");
    // Cap the polyline at ~4000 points for file size.
    let stride = (x.len() / 4000).max(1);
    for (i, (xv, yv)) in x.iter().zip(y.iter()).enumerate().step_by(stride) {
        let px = ML + (xv - x0) / (x1 - x0) * (W - ML - MR);
        let py = H - MB - (yv - y0) / (y1 - y0) * (H - MT - MB);
        let _ = write!(path, "{}{px:.2} {py:.2}", if i == 0 { "M" } else { "L" });
    }
    path.push_str("\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.2\"/>\n");
    s.push_str(&path);
    s.push_str("</svg>\n");
    s
}

/// Blue-to-yellow color ramp over [0, 1].
fn ramp(v: f64) -> (u8, u8, u8) {
    let v = v.clamp(0.0, 1.0);
    let r = (255.0 * v) as u8;
    let g = (240.0 * v * v.sqrt() + 15.0 * (1.0 - v)) as u8;
    let b = (90.0 + 120.0 * (1.0 - v)) as u8;
    (r, g, b)
}

/// Heatmap of a row-major value grid; downsamples to keep the file small.
pub fn heatmap(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    x_axis: &[f64],
    y_axis: &[f64],
    values: &[f64],
) -> String {
    let (vmin, vmax) = axis_range(values.iter().cloned());
    let nx = x_axis.len().min(240);
    let ny = y_axis.len().min(160);
    let mut s = header(title);
    s.push_str(&axes(
        xlabel,
        ylabel,
        x_axis[0],
        *x_axis.last().unwrap(),
        y_axis[0],
        *y_axis.last().unwrap(),
    ));
    let cw = (W - ML - MR) / nx as f64;
    let ch = (H - MT - MB) / ny as f64;
    for iy in 0..ny {
        let src_y = iy * y_axis.len() / ny;
        for ix in 0..nx {
            let src_x = ix * x_axis.len() / nx;
            let v = values[src_y * x_axis.len() + src_x];
            let t = (v - vmin) / (vmax - vmin).max(1e-300);
            let (r, g, b) = ramp(1.0 - t);
            let px = ML + ix as f64 * cw;
            let py = H - MB - (iy + 1) as f64 * ch;
            let _ = writeln!(
                s,
                "<rect x=\"{px:.2}\" y=\"{py:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                 fill=\"rgb({r},{g},{b})\"/>",
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
