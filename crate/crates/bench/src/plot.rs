//! Minimal SVG line plots with a logarithmic y axis.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;
const FLOOR: f64 = 1e-16;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(x, y)` with `y > 0`; smaller values are clamped to `1e-16`.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SvgPlot {
    x_label: String,
    y_label: String,
}

impl SvgPlot {
    pub fn new(x_label: &str, y_label: &str) -> Self {
        Self { x_label: x_label.into(), y_label: y_label.into() }
    }

    pub fn render(&self, series: &[Series]) -> String {
        let all = || series.iter().flat_map(|s| s.points.iter());
        let x_max = all().map(|p| p.0).fold(0.0, f64::max).max(1e-9);
        let ys = || all().map(|p| p.1.max(FLOOR).log10());
        let (mut lo, mut hi) = (ys().fold(f64::INFINITY, f64::min).floor(), ys().fold(f64::NEG_INFINITY, f64::max).ceil());
        if !lo.is_finite() || !hi.is_finite() {
            (lo, hi) = (-1.0, 0.0);
        }
        if hi <= lo {
            hi = lo + 1.0;
        }
        let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
        let px = |x: f64| MARGIN + pw * x / x_max;
        let py = |y: f64| MARGIN + ph * (hi - y.max(FLOOR).log10()) / (hi - lo);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        for s in series {
            let data: Vec<String> = s.points.iter().map(|(x, y)| format!("{x:e} {y:e}")).collect();
            let _ = writeln!(svg, "<!-- data {}: {} -->", s.label.replace("--", "- -"), data.join(", "));
        }
        let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for decade in lo as i32..=hi as i32 {
            let y = py(10f64.powi(decade));
            let _ = writeln!(
                svg,
                r##"<line x1="{MARGIN}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{decade}</text>"##,
                MARGIN + pw,
                MARGIN - 6.0,
                y + 4.0
            );
        }
        for i in 0..=4 {
            let x = x_max * i as f64 / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.3}</text>"#,
                px(x),
                MARGIN + ph + 18.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN + pw / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            MARGIN + ph / 2.0,
            MARGIN + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, s) in series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
            let ly = MARGIN + 16.0 + 16.0 * i as f64;
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end">{}</text>"#,
                MARGIN + pw - 8.0,
                escape(&s.label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_series() {
        let s = |l: &str| Series { label: l.into(), points: vec![(0.0, 1.0), (0.5, 1e-3), (1.0, 0.0)] };
        let svg = SvgPlot::new("t", "err").render(&[s("a"), s("b")]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("<!-- data a:"));
        assert!(svg.trim_end().ends_with("</svg>"));
        // the exact zero is clamped to the floor decade
        assert!(svg.contains(">1e-16<"));
    }

    #[test]
    fn empty_input_is_still_valid() {
        let svg = SvgPlot::new("t", "err").render(&[]);
        assert!(svg.starts_with("<svg"));
    }
}
