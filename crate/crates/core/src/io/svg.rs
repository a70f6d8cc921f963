//! Small dependency-free SVG charts for the report.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 48.0;
const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub y: Vec<Option<f64>>,
    /// Optional band drawn behind the line.
    pub band: Option<(Vec<f64>, Vec<f64>)>,
}

impl Series {
    pub fn line(label: impl Into<String>, y: Vec<Option<f64>>) -> Self {
        Self { label: label.into(), y, band: None }
    }

    pub fn with_band(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.band = Some((lower, upper));
        self
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        MARGIN + (x - self.x0) / span * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        let span = if self.y1 > self.y0 { self.y1 - self.y0 } else { 1.0 };
        HEIGHT - MARGIN - (y - self.y0) / span * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart over `x`; gaps in a series (`None`) break the line.
pub fn line_chart(title: &str, x_label: &str, x: &[f64], series: &[Series]) -> String {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for v in s.y.iter().flatten().chain(s.band.iter().flat_map(|(a, b)| a.iter().chain(b))) {
            if v.is_finite() {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = 0.05 * (hi - lo).max(1e-9);
    let frame = Frame {
        x0: x.first().copied().unwrap_or(0.0),
        x1: x.last().copied().unwrap_or(1.0),
        y0: lo - pad,
        y1: hi + pad,
    };

    let mut out = header(title);
    axes(&mut out, &frame, x_label);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if let Some((lower, upper)) = &s.band {
            let n = x.len().min(lower.len()).min(upper.len());
            if n > 0 {
                let mut pts = String::new();
                for i in 0..n {
                    let _ = write!(pts, "{:.1},{:.1} ", frame.px(x[i]), frame.py(upper[i]));
                }
                for i in (0..n).rev() {
                    let _ = write!(pts, "{:.1},{:.1} ", frame.px(x[i]), frame.py(lower[i]));
                }
                let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, pts.trim_end());
            }
        }
        let mut path = String::new();
        let mut pen_down = false;
        for (i, v) in s.y.iter().enumerate().take(x.len()) {
            match v {
                Some(v) if v.is_finite() => {
                    let cmd = if pen_down { 'L' } else { 'M' };
                    let _ = write!(path, "{cmd}{:.1},{:.1} ", frame.px(x[i]), frame.py(*v));
                    pen_down = true;
                }
                _ => pen_down = false,
            }
        }
        let _ = writeln!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.trim_end());
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 140.0,
            MARGIN + 14.0 * k as f64,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn header(title: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="24" font-size="14">{}</text>"#, escape(title));
    out
}

fn axes(out: &mut String, frame: &Frame, x_label: &str) {
    let (left, right) = (MARGIN, WIDTH - MARGIN);
    let (top, bottom) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(out, r##"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" fill="none" stroke="#333"/>"##);
    for k in 0..=4 {
        let y = frame.y0 + (frame.y1 - frame.y0) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{y:.3}</text>"#,
            left - 4.0,
            frame.py(y) + 3.0
        );
        let x = frame.x0 + (frame.x1 - frame.x0) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{x:.0}</text>"#,
            frame.px(x),
            bottom + 14.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        HEIGHT - 8.0,
        escape(x_label)
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_start_new_subpaths() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let s = Series::line("obs", vec![Some(0.1), None, Some(0.3), Some(0.2)]);
        let svg = line_chart("t", "time", &x, &[s]);
        let d = svg.lines().find(|l| l.starts_with("<path d=\"M") && l.contains("stroke-width=\"1.5\"")).unwrap();
        assert_eq!(d.matches('M').count(), 2);
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn titles_are_escaped() {
        assert!(header("a<b").contains("a&lt;b"));
    }
}
