//! Log-log regret plots as standalone SVG.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::ScalingFit;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the series on log-log axes; points with a nonpositive coordinate
/// are skipped. With a fit, the fitted line is drawn dashed and its slope is
/// printed in the corner.
pub fn render_svg(series: &[PlotSeries], fit: Option<&ScalingFit>, x_label: &str, y_label: &str) -> Result<String> {
    let logged: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.log10(), y.log10())).collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = logged.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(Error::InvalidParameter("nothing to plot".into()));
    }
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), (x, y)| (a.min(*x), b.max(*x), c.min(*y), d.max(*y)),
    );
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (lo, hi, horizontal) in [(x0, x1, true), (y0, y1, false)] {
        for e in lo.ceil() as i32..=hi.floor() as i32 {
            let v = e as f64;
            if horizontal {
                let x = px(v);
                let _ = writeln!(
                    svg,
                    r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{MARGIN_TOP}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"##,
                    MARGIN_TOP + ph,
                    MARGIN_TOP + ph + 16.0
                );
            } else {
                let y = py(v);
                let _ = writeln!(
                    svg,
                    r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
                    MARGIN_LEFT + pw,
                    MARGIN_LEFT - 6.0,
                    y + 4.0
                );
            }
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, (s, pts)) in series.iter().zip(&logged).enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            MARGIN_LEFT + 10.0,
            MARGIN_TOP + 18.0 + 16.0 * i as f64,
            escape(&s.label)
        );
    }

    if let Some(f) = fit {
        // Fit is in natural logs; the axes are base 10.
        let line = |x: f64| (f.intercept + f.slope * (x * std::f64::consts::LN_10)) / std::f64::consts::LN_10;
        let _ = writeln!(
            svg,
            r##"<path d="M {:.2} {:.2} L {:.2} {:.2}" stroke="#555" stroke-dasharray="6 4" fill="none"/>"##,
            px(x0),
            py(line(x0)),
            px(x1),
            py(line(x1))
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">slope = {:.3} (R² = {:.3})</text>"#,
            MARGIN_LEFT + pw - 8.0,
            MARGIN_TOP + ph - 10.0,
            f.slope,
            f.r_squared
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(
    series: &[PlotSeries],
    fit: Option<&ScalingFit>,
    x_label: &str,
    y_label: &str,
    path: &Path,
) -> Result<()> {
    let svg = render_svg(series, fit, x_label, y_label)?;
    std::fs::write(path, svg)?;
    Ok(())
}
