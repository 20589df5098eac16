//! CSV and SVG output for sampled paths.

use std::fmt::Write;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("missing or wrong header (expected \"t,x\")")]
    Header,
    #[error("line {line}: {msg}")]
    Row { line: usize, msg: String },
}

/// `t,x` header and one `t,x` row per vertex, LF terminated.
pub fn path_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::with_capacity(16 * (rows.len() + 1));
    out.push_str("t,x\n");
    for (t, x) in rows {
        writeln!(out, "{t},{x}").expect("writing to a String");
    }
    out
}

pub fn parse_path_csv(text: &str) -> Result<Vec<(f64, f64)>, CsvError> {
    let mut lines = text.lines();
    if lines.next() != Some("t,x") {
        return Err(CsvError::Header);
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let line_no = i + 2;
            let (t, x) = line.split_once(',').ok_or(CsvError::Row {
                line: line_no,
                msg: "expected two fields".into(),
            })?;
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| CsvError::Row {
                    line: line_no,
                    msg: e.to_string(),
                })
            };
            Ok((parse(t)?, parse(x)?))
        })
        .collect()
}

/// A straight reference line `x = slope·t` drawn dashed.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceLine {
    pub slope: f64,
    pub color: &'static str,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;

/// Static SVG: the path as a polyline over dashed reference lines and axes.
pub fn svg_polyline(rows: &[(f64, f64)], references: &[ReferenceLine], title: &str) -> String {
    let (mut t0, mut t1, mut x0, mut x1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(t, x) in rows {
        t0 = t0.min(t);
        t1 = t1.max(t);
        x0 = x0.min(x);
        x1 = x1.max(x);
    }
    for r in references {
        for t in [t0, t1] {
            x0 = x0.min(r.slope * t);
            x1 = x1.max(r.slope * t);
        }
    }
    if !t0.is_finite() {
        (t0, t1, x0, x1) = (0.0, 1.0, -1.0, 1.0);
    }
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let sx = |t: f64| MARGIN + (t - t0) / (t1 - t0) * (WIDTH - 2.0 * MARGIN);
    let sy = |x: f64| HEIGHT - MARGIN - (x - x0) / (x1 - x0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if x0 <= 0.0 && 0.0 <= x1 {
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-width="1"/>"#,
            sx(t0),
            sy(0.0),
            sx(t1),
            sy(0.0)
        );
    }
    let _ = writeln!(
        svg,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-width="1"/>"#,
        sx(t0),
        sy(x0),
        sx(t0),
        sy(x1)
    );
    for r in references {
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="1.5" stroke-dasharray="6,4"/>"#,
            sx(t0),
            sy(r.slope * t0),
            sx(t1),
            sy(r.slope * t1),
            r.color
        );
    }
    let points: Vec<String> = rows
        .iter()
        .map(|&(t, x)| format!("{:.2},{:.2}", sx(t), sy(x)))
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="black" stroke-width="1" points="{}"/>"#,
        points.join(" ")
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12">t = {t0} … {t1}</text>"#,
        MARGIN,
        HEIGHT - 10.0
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_format() {
        let text = path_csv(&[(1.0, -1.0), (1.01, 1.01)]);
        assert_eq!(text, "t,x\n1,-1\n1.01,1.01\n");
        assert_eq!(
            parse_path_csv(&text).unwrap(),
            vec![(1.0, -1.0), (1.01, 1.01)]
        );
    }

    #[test]
    fn csv_parse_errors() {
        assert_eq!(parse_path_csv("x,t\n"), Err(CsvError::Header));
        assert!(matches!(
            parse_path_csv("t,x\n1;2\n"),
            Err(CsvError::Row { line: 2, .. })
        ));
    }

    #[test]
    fn svg_has_polyline() {
        let svg = svg_polyline(
            &[(1.0, 1.0), (2.0, -2.0)],
            &[ReferenceLine {
                slope: 1.0,
                color: "red",
            }],
            "a<b",
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("a&lt;b"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
