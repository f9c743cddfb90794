//! Hand-emitted SVG line plots: no plotting dependency, byte-deterministic
//! for identical input.

use anyhow::{bail, Result};
use std::fmt::Write as _;

const PALETTE: &[&str] = &["#1f6fb2", "#c23b22", "#2c8a4b", "#8a5fb0", "#b8860b", "#466a77"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

/// Render labeled series into a self-contained SVG document.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        bail!("refusing to plot empty series");
    }
    let (w, h) = (800.0, 500.0);
    let (ml, mr, mt, mb) = (80.0, 20.0, 40.0, 55.0);

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in s.points {
            if x.is_finite() && y.is_finite() {
                x_min = x_min.min(x);
                x_max = x_max.max(x);
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
    }
    if !x_min.is_finite() || !y_min.is_finite() {
        bail!("no finite points to plot");
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
        y_min -= 1.0;
    }
    let pad = 0.04 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let sx = |x: f64| ml + (x - x_min) / (x_max - x_min) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y_min) / (y_max - y_min) * (h - mt - mb);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        0.5 * w,
        escape(title)
    );

    // axes
    let _ = writeln!(
        out,
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{:.1}\" stroke=\"black\"/>",
        h - mb
    );
    let _ = writeln!(
        out,
        "<line x1=\"{ml}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        h - mb,
        w - mr,
        h - mb
    );
    for k in 0..=5 {
        let fx = x_min + (x_max - x_min) * k as f64 / 5.0;
        let fy = y_min + (y_max - y_min) * k as f64 / 5.0;
        let px = sx(fx);
        let py = sy(fy);
        let _ = writeln!(
            out,
            "<line x1=\"{px:.2}\" y1=\"{:.1}\" x2=\"{px:.2}\" y2=\"{:.1}\" stroke=\"black\"/>",
            h - mb,
            h - mb + 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{px:.2}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            h - mb + 18.0,
            num(fx)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{py:.2}\" x2=\"{ml}\" y2=\"{py:.2}\" stroke=\"black\"/>",
            ml - 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            ml - 8.0,
            py + 4.0,
            num(fy)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        0.5 * w,
        h - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"18\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>",
        0.5 * h,
        0.5 * h,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for &(x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            if path.is_empty() {
                let _ = write!(path, "M{:.2} {:.2}", sx(x), sy(y));
            } else {
                let _ = write!(path, " L{:.2} {:.2}", sx(x), sy(y));
            }
        }
        let _ = writeln!(
            out,
            "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>"
        );
        let ly = mt + 16.0 * i as f64 + 8.0;
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            w - mr - 150.0,
            w - mr - 125.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            w - mr - 120.0,
            ly + 4.0,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 0.01 && v.abs() < 1e4 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
