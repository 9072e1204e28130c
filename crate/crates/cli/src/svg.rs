//! Hand-written SVG charts. Output is a pure function of the inputs.

use std::fmt::Write;

use crate::markdown::sig6;

// Layout constants, in SVG user units.
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 70.0;
const HBAR_LABEL_WIDTH: f64 = 210.0;
const TICKS: usize = 5;
const FONT: &str = "font-family=\"sans-serif\" font-size=\"12\"";
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
}

/// Value range padded to include zero; degenerate ranges are widened.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = values.fold((0.0f64, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
        lo -= 1.0;
        hi += 1.0;
    }
    (lo, hi)
}

fn y_axis(out: &mut String, lo: f64, hi: f64, top: f64, bottom: f64, left: f64, right: f64) {
    for k in 0..=TICKS {
        let v = lo + (hi - lo) * k as f64 / TICKS as f64;
        let y = bottom - (bottom - top) * k as f64 / TICKS as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{left:.2}\" y1=\"{y:.2}\" x2=\"{right:.2}\" y2=\"{y:.2}\" stroke=\"#e0e0e0\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" {FONT}>{}</text>",
            left - 6.0,
            y + 4.0,
            sig6(v)
        );
    }
    let _ = writeln!(out, "<line x1=\"{left:.2}\" y1=\"{top:.2}\" x2=\"{left:.2}\" y2=\"{bottom:.2}\" stroke=\"black\"/>");
}

/// Vertical bars in the given order.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let mut out = String::new();
    open(&mut out, title);
    let (left, right, top, bottom) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT, MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let (lo, hi) = range(bars.iter().map(|b| b.1));
    let scale = |v: f64| bottom - (v - lo) / (hi - lo) * (bottom - top);
    y_axis(&mut out, lo, hi, top, bottom, left, right);
    let slot = (right - left) / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let x = left + slot * (i as f64 + 0.15);
        let (y0, y1) = (scale(0.0), scale(*v));
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"><title>{}: {}</title></rect>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" {FONT}>{}</text>",
            y0.min(y1),
            slot * 0.7,
            (y0 - y1).abs(),
            PALETTE[i % PALETTE.len()],
            escape(label),
            sig6(*v),
            x + slot * 0.35,
            bottom + 18.0,
            escape(label)
        );
    }
    let _ = writeln!(out, "<line x1=\"{left:.2}\" y1=\"{0:.2}\" x2=\"{right:.2}\" y2=\"{0:.2}\" stroke=\"black\"/>", scale(0.0));
    out.push_str("</svg>\n");
    out
}

/// Horizontal bars, first entry on top.
pub fn hbar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let mut out = String::new();
    open(&mut out, title);
    let (left, right, top, bottom) = (HBAR_LABEL_WIDTH, WIDTH - 40.0, MARGIN_TOP, HEIGHT - 30.0);
    let max = bars.iter().map(|b| b.1.abs()).fold(0.0, f64::max);
    let max = if max > 0.0 { max } else { 1.0 };
    let slot = (bottom - top) / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let y = top + slot * i as f64;
        let w = v.abs() / max * (right - left);
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" {FONT}>{}</text>\n\
             <rect x=\"{left:.2}\" y=\"{:.2}\" width=\"{w:.2}\" height=\"{:.2}\" fill=\"{}\"><title>{}: {}</title></rect>",
            left - 8.0,
            y + slot * 0.5 + 4.0,
            escape(label),
            y + slot * 0.15,
            slot * 0.7,
            PALETTE[0],
            escape(label),
            sig6(*v)
        );
    }
    let _ = writeln!(out, "<line x1=\"{left:.2}\" y1=\"{top:.2}\" x2=\"{left:.2}\" y2=\"{bottom:.2}\" stroke=\"black\"/>");
    out.push_str("</svg>\n");
    out
}

/// Polylines over a shared x axis; `None` breaks a line. Markers draw a
/// dashed vertical line at an x index with a label.
pub fn line_chart(title: &str, x_labels: &[String], series: &[(String, Vec<Option<f64>>)], markers: &[(usize, String)]) -> String {
    let mut out = String::new();
    open(&mut out, title);
    let (left, right, top, bottom) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT, MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let values = series.iter().flat_map(|s| s.1.iter().flatten().copied());
    let (lo, hi) = {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            (lo - 1.0, hi + 1.0)
        } else {
            (lo, hi)
        }
    };
    y_axis(&mut out, lo, hi, top, bottom, left, right);
    let n = x_labels.len().max(2);
    let x_at = |i: usize| left + (right - left) * i as f64 / (n - 1) as f64;
    let y_at = |v: f64| bottom - (v - lo) / (hi - lo) * (bottom - top);
    let step = x_labels.len().div_ceil(8).max(1);
    for (i, l) in x_labels.iter().enumerate().step_by(step) {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" {FONT}>{}</text>",
            x_at(i),
            bottom + 18.0,
            escape(l)
        );
    }
    for (i, label) in markers {
        let x = x_at(*i);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{top:.2}\" x2=\"{x:.2}\" y2=\"{bottom:.2}\" stroke=\"#555\" stroke-dasharray=\"4 3\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" {FONT} fill=\"#555\">{}</text>",
            x + 3.0,
            top + 12.0,
            escape(label)
        );
    }
    for (k, (name, ys)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, out: &mut String| {
            if seg.len() == 1 {
                let _ = writeln!(out, "<circle cx=\"{}\" r=\"3\" fill=\"{colour}\"/>", seg[0].replacen(',', "\" cy=\"", 1));
            } else if seg.len() > 1 {
                let _ = writeln!(out, "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\" points=\"{}\"/>", seg.join(" "));
            }
            seg.clear();
        };
        for (i, y) in ys.iter().enumerate() {
            match y {
                Some(v) => segment.push(format!("{:.2},{:.2}", x_at(i), y_at(*v))),
                None => flush(&mut segment, &mut out),
            }
        }
        flush(&mut segment, &mut out);
        let ly = top + 16.0 * k as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{colour}\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" {FONT}>{}</text>",
            right + 12.0,
            ly,
            right + 30.0,
            ly + 10.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Square matrix of values in [-1, 1], blue negative and red positive.
pub fn heatmap(title: &str, labels: &[String], m: &[Vec<f64>]) -> String {
    let mut out = String::new();
    open(&mut out, title);
    let (left, top) = (HBAR_LABEL_WIDTH - 40.0, MARGIN_TOP + 10.0);
    let cell = ((HEIGHT - top - 20.0) / labels.len().max(1) as f64).min((WIDTH - left - 20.0) / labels.len().max(1) as f64);
    for (i, row) in m.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" {FONT}>{}</text>",
            left - 6.0,
            top + cell * (i as f64 + 0.5) + 4.0,
            escape(&labels[i])
        );
        for (j, v) in row.iter().enumerate() {
            let a = v.clamp(-1.0, 1.0);
            let shade = (255.0 * (1.0 - a.abs())).round() as u8;
            let fill = if a >= 0.0 {
                format!("rgb(255,{shade},{shade})")
            } else {
                format!("rgb({shade},{shade},255)")
            };
            let (x, y) = (left + cell * j as f64, top + cell * i as f64);
            let _ = writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"{fill}\" stroke=\"white\"/>\n\
                 <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{:.2}</text>",
                x + cell / 2.0,
                y + cell / 2.0 + 3.0,
                v
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
