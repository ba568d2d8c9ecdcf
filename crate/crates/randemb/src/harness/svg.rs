//! Minimal self-contained SVG line plots for experiment summaries.
//!
//! The renderer draws median statistics against k on log-log axes. Output
//! is plain SVG text with fixed two-decimal pixel coordinates, so a given
//! run renders byte-identically everywhere.

use std::fmt::Write as _;

use crate::harness::config::ExperimentKind;
use crate::harness::runner::{Payload, ReplicateRow, RunResult};
use crate::harness::stats::median;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;

/// One plotted line: label plus (k, median) points with positive
/// coordinates.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Median-vs-k plot for a finished run; None when the experiment kind has
/// no k axis or no positive medians to draw.
pub fn render_run_plot(result: &RunResult) -> Option<String> {
    let groups = ok_rows_per_k(result);
    let series: Vec<Series> = match result.config.kind {
        ExperimentKind::Converge => (0..3)
            .filter_map(|order| {
                let pts = median_points(&groups, |row| match &row.payload {
                    Payload::Deviations(d) => Some(d[order]),
                    _ => None,
                });
                (pts.len() >= 2).then(|| Series {
                    label: format!("C{order} deviation"),
                    points: pts,
                })
            })
            .collect(),
        ExperimentKind::LkcConverge => {
            let m = result.config.manifold.dim();
            (0..=m)
                .filter_map(|j| {
                    let pts = median_points(&groups, move |row| match &row.payload {
                        Payload::Lkc { deviations, .. } => Some(deviations[j]),
                        _ => None,
                    });
                    (pts.len() >= 2).then(|| Series {
                        label: format!("|L{j} - ref|"),
                        points: pts,
                    })
                })
                .collect()
        }
        ExperimentKind::Unbiased | ExperimentKind::ZeroCount => return None,
    };
    if series.is_empty() {
        return None;
    }
    let title = format!(
        "{} medians vs k ({})",
        result.config.kind, result.config.manifold
    );
    loglog_plot(&title, "k", "median", &series)
}

fn ok_rows_per_k(result: &RunResult) -> Vec<(usize, Vec<&ReplicateRow>)> {
    result
        .config
        .k_list
        .iter()
        .map(|&k| {
            (
                k,
                result
                    .rows
                    .iter()
                    .filter(|r| r.is_ok() && r.k == k)
                    .collect(),
            )
        })
        .collect()
}

/// (k, median of extract over ok rows) for every k where the median exists
/// and is positive (log axes).
fn median_points<F>(groups: &[(usize, Vec<&ReplicateRow>)], extract: F) -> Vec<(f64, f64)>
where
    F: Fn(&ReplicateRow) -> Option<f64>,
{
    groups
        .iter()
        .filter_map(|(k, rows)| {
            let values: Vec<f64> = rows.iter().filter_map(|r| extract(r)).collect();
            match median(&values) {
                Some(med) if med > 0.0 => Some((*k as f64, med)),
                _ => None,
            }
        })
        .collect()
}

fn decade_label(exp: i32) -> String {
    if (-3..=3).contains(&exp) {
        format!("{}", 10f64.powi(exp))
    } else {
        format!("1e{exp}")
    }
}

/// Render a log-log line plot. None when no series has two or more points.
pub fn loglog_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Option<String> {
    let drawable: Vec<&Series> = series.iter().filter(|s| s.points.len() >= 2).collect();
    if drawable.is_empty() {
        return None;
    }
    let logs: Vec<(f64, f64)> = drawable
        .iter()
        .flat_map(|s| s.points.iter().map(|&(x, y)| (x.log10(), y.log10())))
        .collect();
    let mut x_min = f64::MAX;
    let mut x_max = f64::MIN;
    let mut y_min = f64::MAX;
    let mut y_max = f64::MIN;
    for &(lx, ly) in &logs {
        x_min = x_min.min(lx);
        x_max = x_max.max(lx);
        y_min = y_min.min(ly);
        y_max = y_max.max(ly);
    }
    let pad = |lo: &mut f64, hi: &mut f64| {
        let span = *hi - *lo;
        let p = if span > 0.0 { 0.05 * span } else { 0.5 };
        *lo -= p;
        *hi += p;
    };
    pad(&mut x_min, &mut x_max);
    pad(&mut y_min, &mut y_max);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |lx: f64| MARGIN_LEFT + (lx - x_min) / (x_max - x_min) * plot_w;
    let py = |ly: f64| HEIGHT - MARGIN_BOTTOM - (ly - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"Helvetica, Arial, sans-serif\">\n"
    );
    let _ = write!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    );
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"28\" font-size=\"16\" fill=\"#222222\">{}</text>\n",
        MARGIN_LEFT,
        xml_escape(title)
    );

    // decade grid lines + tick labels
    for exp in (x_min.ceil() as i32)..=(x_max.floor() as i32) {
        let x = px(exp as f64);
        let _ = write!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            MARGIN_TOP,
            HEIGHT - MARGIN_BOTTOM
        );
        let _ = write!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#444444\" \
             text-anchor=\"middle\">{}</text>\n",
            HEIGHT - MARGIN_BOTTOM + 18.0,
            decade_label(exp)
        );
    }
    for exp in (y_min.ceil() as i32)..=(y_max.floor() as i32) {
        let y = py(exp as f64);
        let _ = write!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            MARGIN_LEFT,
            WIDTH - MARGIN_RIGHT
        );
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#444444\" \
             text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0,
            decade_label(exp)
        );
    }

    // axes frame
    let _ = write!(
        svg,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" \
         fill=\"none\" stroke=\"#222222\" stroke-width=\"1\"/>\n",
        MARGIN_LEFT, MARGIN_TOP
    );
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" fill=\"#222222\" \
         text-anchor=\"middle\">{} (log scale)</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 16.0,
        xml_escape(x_label)
    );
    let _ = write!(
        svg,
        "<text x=\"20\" y=\"{:.2}\" font-size=\"13\" fill=\"#222222\" text-anchor=\"middle\" \
         transform=\"rotate(-90 20 {:.2})\">{} (log scale)</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        xml_escape(y_label)
    );

    for (i, s) in drawable.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for (pi, &(x, y)) in s.points.iter().enumerate() {
            let _ = write!(
                path,
                "{}{:.2},{:.2}",
                if pi == 0 { "" } else { " " },
                px(x.log10()),
                py(y.log10())
            );
        }
        let _ = write!(
            svg,
            "<polyline points=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n"
        );
        for &(x, y) in &s.points {
            let _ = write!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                px(x.log10()),
                py(y.log10())
            );
        }
        // legend entry
        let ly = MARGIN_TOP + 14.0 + 20.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 14.0;
        let _ = write!(
            svg,
            "<line x1=\"{lx:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n",
            ly - 4.0,
            lx + 22.0,
            ly - 4.0
        );
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{ly:.2}\" font-size=\"12\" fill=\"#222222\">{}</text>\n",
            lx + 28.0,
            xml_escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
