use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::analytics::wilson_interval;
use crate::error::Result;
use crate::harness::sweep::{read_rows, ExperimentRow};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub alpha: f64,
    pub rate: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub k: usize,
    pub n: usize,
    pub points: Vec<PlotPoint>,
}

/// One series per `(k, n)`, sorted by `α`. Bands are recomputed from the
/// success counts rather than read from the interval columns.
pub fn series(rows: &[ExperimentRow]) -> Vec<Series> {
    let mut groups: BTreeMap<(usize, usize), Vec<PlotPoint>> = BTreeMap::new();
    for r in rows {
        let (low, high) = wilson_interval(r.successes, r.trials);
        groups.entry((r.k, r.n)).or_default().push(PlotPoint {
            alpha: r.alpha,
            rate: r.successes as f64 / r.trials.max(1) as f64,
            low,
            high,
        });
    }
    groups
        .into_iter()
        .map(|((k, n), mut points)| {
            points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
            Series { k, n, points }
        })
        .collect()
}

/// Success rate against density with 95% Wilson bands, as a standalone SVG.
pub fn render_svg(csv: &str) -> Result<String> {
    let all = series(&read_rows(csv)?);
    let alphas = all.iter().flat_map(|s| s.points.iter().map(|p| p.alpha));
    let (mut lo, mut hi) = alphas.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    } else if lo == hi {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |a: f64| LEFT + (a - lo) / (hi - lo) * plot_w;
    let py = |r: f64| TOP + (1.0 - r) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w, TOP + plot_h, TOP);
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let r = i as f64 / 4.0;
        let y = py(r);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{r:.2}</text>"##,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0
        );
        let a = lo + (hi - lo) * r;
        let x = px(a);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{a:.2}</text>"##,
            y0 + 4.0,
            y0 + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">alpha = m/n</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">success rate</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, ser) in all.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = ser.points.iter().map(|p| format!("{:.2},{:.2}", px(p.alpha), py(p.high)));
        let lower = ser.points.iter().rev().map(|p| format!("{:.2},{:.2}", px(p.alpha), py(p.low)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = ser
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.alpha), py(p.rate)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        for p in &ser.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                px(p.alpha),
                py(p.rate)
            );
        }
        let ly = TOP + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}">k={} n={}</text>"#,
            x1 + 12.0,
            ser.k,
            ser.n
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::HEADER;

    #[test]
    fn empty_input_gives_axes_only() {
        for input in ["", &format!("{HEADER}\n")] {
            let svg = render_svg(input).unwrap();
            assert!(svg.starts_with("<svg"));
            assert!(svg.trim_end().ends_with("</svg>"));
            assert!(!svg.contains("<polyline"));
        }
    }

    #[test]
    fn output_is_deterministic_and_grouped() {
        let csv = format!(
            "{HEADER}\n20,3,40,2,100,10,9,0.9,0,0,1,2,0.1,1\n20,3,20,1,100,10,10,1,0,0,1,,0.1,1\n\
             40,3,80,2,100,10,4,0.4,0,0,1,2,0.1,1\n"
        );
        let a = render_svg(&csv).unwrap();
        assert_eq!(a, render_svg(&csv).unwrap());
        assert_eq!(a.matches("<polyline").count(), 2);
        let rows = read_rows(&csv).unwrap();
        let s = series(&rows);
        assert_eq!((s[0].n, s[0].points[0].alpha), (20, 1.0));
        assert_eq!(s[1].points.len(), 1);
    }
}
