//! Minimal vector-graphic line charts, written as self-contained SVG.
//!
//! Pure string construction: identical inputs render identical bytes. The
//! charts cover the repository's figure needs (training curves, uncertainty
//! versus disturbance strength, collision counts) without any plotting
//! dependency.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// One polyline: a label and its (x, y) points.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }
}

fn finite_points(s: &Series) -> impl Iterator<Item = (f64, f64)> + '_ {
    s.points
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (x, y) in finite_points(s) {
            xs = (xs.0.min(x), xs.1.max(x));
            ys = (ys.0.min(y), ys.1.max(y));
        }
    }
    if !xs.0.is_finite() {
        xs = (0.0, 1.0);
        ys = (0.0, 1.0);
    }
    if xs.0 == xs.1 {
        xs = (xs.0 - 0.5, xs.1 + 0.5);
    }
    if ys.0 == ys.1 {
        ys = (ys.0 - 0.5, ys.1 + 0.5);
    }
    // Five percent vertical breathing room.
    let pad = (ys.1 - ys.0) * 0.05;
    (xs, (ys.0 - pad, ys.1 + pad))
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e6).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render a titled line chart of `series` into an SVG document.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let ((x0, x1), (y0, y1)) = bounds(series);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = move |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = move |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = write!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="24" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        xml_escape(title)
    );

    // Grid and ticks: five divisions per axis.
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let px = sx(fx);
        let _ = write!(
            svg,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        );
        let _ = write!(
            svg,
            r#"<text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + plot_h + 18.0,
            tick_label(fx)
        );
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let py = sy(fy);
        let _ = write!(
            svg,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/>"##,
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        );
        let _ = write!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            py + 4.0,
            tick_label(fy)
        );
    }
    // Axes.
    let _ = write!(
        svg,
        r##"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333333"/>"##
    );
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        xml_escape(x_label)
    );
    let _ = write!(
        svg,
        r#"<text x="16" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        xml_escape(y_label)
    );

    // Series polylines and markers.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = finite_points(s).collect();
        if pts.len() > 1 {
            let path: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = write!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
                path.join(" ")
            );
        }
        for &(x, y) in &pts {
            let _ = write!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.4" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
    }

    // Legend, top-right inside the plot area.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = MARGIN_TOP + 16.0 + 18.0 * i as f64;
        let lx = MARGIN_LEFT + plot_w - 150.0;
        let _ = write!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        );
        let _ = write!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            xml_escape(&s.label)
        );
    }
    svg.push_str("</svg>");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_series() -> Vec<Series> {
        vec![
            Series::new("rising", vec![(0.0, 0.0), (1.0, 0.5), (2.0, 2.0)]),
            Series::new("falling", vec![(0.0, 2.0), (1.0, 1.0), (2.0, 0.2)]),
        ]
    }

    #[test]
    fn chart_is_valid_looking_svg_with_all_series() {
        let svg = line_chart("demo", "strength", "uncertainty", &demo_series());
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>"));
        assert!(svg.contains("rising"));
        assert!(svg.contains("falling"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("strength"));
        assert!(svg.contains("uncertainty"));
    }

    #[test]
    fn identical_inputs_render_identical_bytes() {
        let a = line_chart("t", "x", "y", &demo_series());
        let b = line_chart("t", "x", "y", &demo_series());
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_and_non_finite_inputs_do_not_break_rendering() {
        let svg = line_chart("empty", "x", "y", &[]);
        assert!(svg.contains("</svg>"));
        let svg = line_chart(
            "weird",
            "x",
            "y",
            &[Series::new(
                "s",
                vec![(0.0, f64::NAN), (1.0, 1.0), (f64::INFINITY, 2.0), (1.0, 1.0)],
            )],
        );
        assert!(svg.contains("</svg>"));
        // Only the finite points render markers.
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn titles_are_escaped() {
        let svg = line_chart("a < b & c", "x", "y", &[]);
        assert!(svg.contains("a &lt; b &amp; c"));
    }

    #[test]
    fn tick_labels_trim_noise() {
        assert_eq!(tick_label(0.0), "0");
        assert_eq!(tick_label(1.5), "1.5");
        assert_eq!(tick_label(2.0), "2");
        assert_eq!(tick_label(0.25), "0.25");
        assert_eq!(tick_label(1.0e-8), "1.00e-8");
    }
}
