//! Deterministic CSV, JSON and SVG emission.
//!
//! CSV: comma separators, `.` decimal point, one header row, LF endings.
//! SVG: hand-assembled markup, one polyline per series plus an optional
//! dashed fitted polyline; identical inputs produce identical bytes.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// One plotted series.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Dashed stroke (used for fitted curves).
    pub dashed: bool,
}

impl Series {
    pub fn solid(name: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.to_string(),
            points,
            dashed: false,
        }
    }

    pub fn fitted(name: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.to_string(),
            points,
            dashed: true,
        }
    }
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];
const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 52.0;

fn fmt(v: f64) -> String {
    // fixed decimals keep coordinates byte-stable
    format!("{v:.3}")
}

/// Renders a labeled line chart. Layout is fixed; only the data varies.
pub fn svg_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pad = (y1 - y0) * 0.06;
    let (y0, y1) = (y0 - pad, y1 + pad);
    let plot_w = W - MARGIN_L - MARGIN_R;
    let plot_h = H - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    s.push_str(&format!(
        "  <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "  <text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        fmt(W / 2.0),
        title
    ));
    // axes
    s.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_L),
        fmt(H - MARGIN_B),
        fmt(W - MARGIN_R),
        fmt(H - MARGIN_B)
    ));
    s.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(MARGIN_L),
        fmt(H - MARGIN_B)
    ));
    // ticks: five per axis
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        s.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{:.3}</text>\n",
            fmt(px(fx)),
            fmt(H - MARGIN_B + 16.0),
            fx
        ));
        s.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{:.3}</text>\n",
            fmt(MARGIN_L - 6.0),
            fmt(py(fy) + 3.0),
            fy
        ));
    }
    s.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        fmt(MARGIN_L + plot_w / 2.0),
        fmt(H - 12.0),
        x_label
    ));
    s.push_str(&format!(
        "  <text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        fmt(MARGIN_T + plot_h / 2.0),
        fmt(MARGIN_T + plot_h / 2.0),
        y_label
    ));
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|(x, y)| format!("{},{}", fmt(px(*x)), fmt(py(*y))))
            .collect();
        let dash = if ser.dashed {
            " stroke-dasharray=\"6,4\""
        } else {
            ""
        };
        s.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{}\"{} stroke-width=\"1.5\" points=\"{}\"/>\n",
            color,
            dash,
            pts.join(" ")
        ));
        // legend entry
        let ly = MARGIN_T + 14.0 * i as f64 + 4.0;
        s.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\"{}/>\n",
            fmt(W - MARGIN_R - 130.0),
            fmt(ly),
            fmt(W - MARGIN_R - 110.0),
            fmt(ly),
            color,
            dash
        ));
        s.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
            fmt(W - MARGIN_R - 104.0),
            fmt(ly + 3.0),
            ser.name
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Writes UTF-8 text, creating parent directories as needed.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Serializes any `Serialize` value as pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Builds a CSV from a header and preformatted rows.
pub fn csv_from_rows(header: &str, rows: &[String]) -> String {
    let mut out =
        String::with_capacity(header.len() + rows.iter().map(|r| r.len() + 1).sum::<usize>() + 1);
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_chart_and_empty_csv() {
        let svg = svg_chart("t", "x", "y", &[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(!svg.contains("polyline"));
        let csv = csv_from_rows("a,b", &[]);
        assert_eq!(csv, "a,b\n");
    }

    #[test]
    fn three_point_series_has_one_polyline_with_three_vertices() {
        let svg = svg_chart(
            "t",
            "x",
            "y",
            &[Series::solid("s", vec![(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)])],
        );
        let polylines: Vec<&str> = svg.matches("<polyline").collect();
        assert_eq!(polylines.len(), 1);
        let points_attr = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        assert_eq!(points_attr.split(' ').count(), 3);
    }

    #[test]
    fn fitted_series_is_dashed_and_axes_labeled() {
        let svg = svg_chart(
            "title",
            "samples",
            "error",
            &[
                Series::solid("data", vec![(1.0, 1.0), (2.0, 0.5)]),
                Series::fitted("fit", vec![(1.0, 0.9), (2.0, 0.6)]),
            ],
        );
        assert_eq!(svg.matches("stroke-dasharray").count(), 2); // polyline + legend
        assert!(svg.contains(">samples<"));
        assert!(svg.contains(">error<"));
    }

    #[test]
    fn byte_identical_for_identical_inputs() {
        let series = vec![Series::solid("s", vec![(0.1, 0.7), (0.9, 0.3)])];
        let a = svg_chart("d", "x", "y", &series);
        let b = svg_chart("d", "x", "y", &series);
        assert_eq!(a, b);
    }
}
