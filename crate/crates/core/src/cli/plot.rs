//! Minimal deterministic SVG charts. Coordinates are printed with a fixed
//! number of decimals so identical inputs give identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        Self {
            x: padded_range(xs),
            y: padded_range(ys),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo {
        0.05 * (hi - lo)
    } else {
        0.5 * lo.abs().max(1.0)
    };
    (lo - pad, hi + pad)
}

fn open(out: &mut String, title: &str, x_label: &str, y_label: &str, frame: &Frame) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        "<path d=\"M{x0:.1} {y0:.1} L{x0:.1} {y1:.1} L{x1:.1} {y1:.1}\" stroke=\"black\" fill=\"none\"/>"
    );
    for (v, anchor) in [(frame.x.0, "start"), (frame.x.1, "end")] {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"{anchor}\">{v:.3}</text>",
            frame.px(v),
            y1 + 16.0
        );
    }
    for v in [frame.y.0, frame.y.1] {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.3}</text>",
            x0 - 6.0,
            frame.py(v) + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

/// Labelled points `(label, x, y)`; non-finite points are left out.
pub fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(String, f64, f64)]) -> String {
    let shown: Vec<_> = points
        .iter()
        .filter(|(_, x, y)| x.is_finite() && y.is_finite())
        .collect();
    let frame = Frame::new(shown.iter().map(|p| p.1), shown.iter().map(|p| p.2));
    let mut out = String::new();
    open(&mut out, title, x_label, y_label, &frame);
    for (i, (label, x, y)) in shown.iter().enumerate() {
        let (cx, cy) = (frame.px(*x), frame.py(*y));
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            "<g class=\"point\"><circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"5\" fill=\"{color}\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\">{}</text></g>",
            cx + 8.0,
            cy - 6.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One polyline per series, with a legend.
pub fn lines(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let all = || series.iter().flat_map(|(_, pts)| pts.iter());
    let frame = Frame::new(all().map(|p| p.0), all().map(|p| p.1));
    let mut out = String::new();
    open(&mut out, title, x_label, y_label, &frame);
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline class=\"series\" points=\"{}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"2\"/>",
            path.join(" ")
        );
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{ly:.1}\" fill=\"{color}\" text-anchor=\"end\">{}</text>",
            WIDTH - MARGIN,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One bar per bin; `edges` has one more entry than `counts`.
pub fn histogram(title: &str, x_label: &str, edges: &[f64], counts: &[usize]) -> String {
    let frame = Frame {
        x: (edges[0], *edges.last().unwrap_or(&1.0)),
        y: (0.0, counts.iter().copied().max().unwrap_or(0).max(1) as f64 * 1.05),
    };
    let mut out = String::new();
    open(&mut out, title, x_label, "count", &frame);
    for (i, &c) in counts.iter().enumerate() {
        let (x0, x1) = (frame.px(edges[i]), frame.px(edges[i + 1]));
        let (y0, y1) = (frame.py(c as f64), frame.py(0.0));
        let _ = writeln!(
            out,
            "<rect class=\"bin\" x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"{}\" stroke=\"white\"/>",
            (x1 - x0).max(0.0),
            (y1 - y0).max(0.0),
            PALETTE[0]
        );
    }
    out.push_str("</svg>\n");
    out
}
