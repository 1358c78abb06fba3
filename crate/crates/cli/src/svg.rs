//! Self-contained SVG line charts.
//!
//! No external assets, fonts, scripts, or styles: everything is inline
//! attributes, so the file renders identically anywhere. Series are drawn
//! as polylines over a light grid with numeric tick labels; an optional
//! secondary top axis relabels the x positions with another quantity
//! (typically sparsity against step).

use crate::CliError;

const WIDTH: f64 = 880.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 172.0;
const MARGIN_TOP: f64 = 52.0;
const MARGIN_BOTTOM: f64 = 56.0;

const PALETTE: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One named line.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// A secondary top x-axis: the same pixel positions as the bottom axis,
/// relabeled by linear interpolation through `points` (x → value).
#[derive(Debug, Clone)]
pub struct TopAxis {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Full chart description.
#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub top_axis: Option<TopAxis>,
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Tick positions on a 1/2/5 grid covering `[lo, hi]`.
fn nice_ticks(lo: f64, hi: f64) -> (Vec<f64>, f64) {
    let range = hi - lo;
    let raw_step = range / 5.0;
    let mag = 10f64.powf(raw_step.abs().log10().floor());
    let norm = raw_step / mag;
    let step = mag
        * if norm <= 1.0 {
            1.0
        } else if norm <= 2.0 {
            2.0
        } else if norm <= 5.0 {
            5.0
        } else {
            10.0
        };
    let first = (lo / step).ceil();
    let mut ticks = Vec::new();
    let mut k = first;
    while k * step <= hi + step * 1e-9 {
        ticks.push(k * step);
        k += 1.0;
    }
    (ticks, step)
}

/// Short label for a tick value on a grid of the given step.
fn format_tick(value: f64, step: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if value.abs() >= 1e6 || value.abs() < 1e-4 {
        return format!("{value:e}");
    }
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor() as i32).clamp(0, 12) as usize
    };
    let text = format!("{value:.decimals$}");
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    }
}

/// Bounds of all points across series, padded; degenerate ranges widen.
fn data_bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let mut xlo = f64::INFINITY;
    let mut xhi = f64::NEG_INFINITY;
    let mut ylo = f64::INFINITY;
    let mut yhi = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            xlo = xlo.min(x);
            xhi = xhi.max(x);
            ylo = ylo.min(y);
            yhi = yhi.max(y);
        }
    }
    if xlo == xhi {
        xlo -= 0.5;
        xhi += 0.5;
    }
    if ylo == yhi {
        ylo -= 0.5;
        yhi += 0.5;
    }
    let ypad = (yhi - ylo) * 0.05;
    ((xlo, xhi), (ylo - ypad, yhi + ypad))
}

/// Linear interpolation of `points` (sorted by x) at `x`, clamped to the
/// endpoint values outside the covered range.
fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    match points {
        [] => f64::NAN,
        [only] => only.1,
        _ => {
            if x <= points[0].0 {
                return points[0].1;
            }
            if x >= points[points.len() - 1].0 {
                return points[points.len() - 1].1;
            }
            let hi = points.partition_point(|p| p.0 < x);
            let (x0, y0) = points[hi - 1];
            let (x1, y1) = points[hi];
            if x1 == x0 {
                y0
            } else {
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }
}

/// Renders the chart. Fails if no series has any points.
pub fn render_chart(chart: &Chart) -> Result<String, CliError> {
    if chart.series.iter().all(|s| s.points.is_empty()) {
        return Err(CliError::Config("nothing to plot: every series is empty".into()));
    }
    let ((xlo, xhi), (ylo, yhi)) = data_bounds(&chart.series);
    let (x0, y0) = (MARGIN_LEFT, MARGIN_TOP);
    let (x1, y1) = (WIDTH - MARGIN_RIGHT, HEIGHT - MARGIN_BOTTOM);
    let px = |x: f64| x0 + (x - xlo) / (xhi - xlo) * (x1 - x0);
    let py = |y: f64| y1 - (y - ylo) / (yhi - ylo) * (y1 - y0);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"22\" font-family=\"monospace\" font-size=\"15\" \
         font-weight=\"bold\" text-anchor=\"middle\">{}</text>\n",
        (x0 + x1) / 2.0,
        escape_xml(&chart.title)
    ));

    // Grid and tick labels.
    let (x_ticks, x_step) = nice_ticks(xlo, xhi);
    let (y_ticks, y_step) = nice_ticks(ylo, yhi);
    for &tx in &x_ticks {
        let x = px(tx);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{y0:.2}\" x2=\"{x:.2}\" y2=\"{y1:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"middle\">{}</text>\n",
            y1 + 16.0,
            format_tick(tx, x_step)
        ));
    }
    for &ty in &y_ticks {
        let y = py(ty);
        svg.push_str(&format!(
            "<line x1=\"{x0:.2}\" y1=\"{y:.2}\" x2=\"{x1:.2}\" y2=\"{y:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"end\">{}</text>\n",
            x0 - 6.0,
            y + 4.0,
            format_tick(ty, y_step)
        ));
    }

    // Secondary top axis: bottom-tick positions relabeled.
    if let Some(top) = &chart.top_axis {
        for &tx in &x_ticks {
            let value = interpolate(&top.points, tx);
            if value.is_finite() {
                svg.push_str(&format!(
                    "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" \
                     font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                    px(tx),
                    y0 - 8.0,
                    format_tick(value, (yhi - ylo).abs() * 1e-3 + 1e-12)
                ));
            }
        }
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" \
             text-anchor=\"start\">{}</text>\n",
            x1 + 8.0,
            y0 - 8.0,
            escape_xml(&top.label)
        ));
    }

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{x0:.2}\" y1=\"{y1:.2}\" x2=\"{x1:.2}\" y2=\"{y1:.2}\" \
         stroke=\"black\" stroke-width=\"1.5\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x0:.2}\" y2=\"{y1:.2}\" \
         stroke=\"black\" stroke-width=\"1.5\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" \
         text-anchor=\"middle\">{}</text>\n",
        (x0 + x1) / 2.0,
        y1 + 38.0,
        escape_xml(&chart.x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 {:.2} {:.2})\">{}</text>\n",
        x0 - 52.0,
        (y0 + y1) / 2.0,
        x0 - 52.0,
        (y0 + y1) / 2.0,
        escape_xml(&chart.y_label)
    ));

    // Series polylines and legend.
    for (i, series) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !series.points.is_empty() {
            let points: Vec<String> = series
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" \
                 points=\"{}\"/>\n",
                points.join(" ")
            ));
        }
        let ly = y0 + 14.0 + 20.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"3\"/>\n",
            x1 + 10.0,
            x1 + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"12\" \
             text-anchor=\"start\">{}</text>\n",
            x1 + 40.0,
            ly + 4.0,
            escape_xml(&series.name)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic_chart() -> Chart {
        Chart {
            title: "loss".into(),
            x_label: "step".into(),
            y_label: "train_loss".into(),
            series: vec![
                Series { name: "dense".into(), points: vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.3)] },
                Series { name: "freezeL1".into(), points: vec![(0.0, 1.0), (2.0, 0.2)] },
            ],
            top_axis: None,
        }
    }

    #[test]
    fn chart_is_self_contained_svg() {
        let svg = render_chart(&basic_chart()).unwrap();
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("dense"));
        assert!(svg.contains("freezeL1"));
        // Self-contained: no external references of any kind.
        assert!(!svg.contains("http://") || svg.matches("http://").count() == 1); // only xmlns
        assert!(!svg.contains("href"));
        assert!(!svg.contains("<script"));
    }

    #[test]
    fn empty_series_set_is_an_error() {
        let chart = Chart {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series { name: "s".into(), points: vec![] }],
            top_axis: None,
        };
        let err = render_chart(&chart).unwrap_err();
        assert_eq!(err.exit_code(), crate::EXIT_CONFIG);
    }

    #[test]
    fn top_axis_labels_appear() {
        let mut chart = basic_chart();
        chart.top_axis = Some(TopAxis {
            label: "sparsity".into(),
            points: vec![(0.0, 0.0), (2.0, 0.8)],
        });
        let svg = render_chart(&chart).unwrap();
        assert!(svg.contains("sparsity"));
    }

    #[test]
    fn names_are_xml_escaped() {
        let mut chart = basic_chart();
        chart.series[0].name = "a<b&c".into();
        let svg = render_chart(&chart).unwrap();
        assert!(svg.contains("a&lt;b&amp;c"));
        assert!(!svg.contains("a<b&c"));
    }

    #[test]
    fn ticks_cover_range_on_nice_grid() {
        let (ticks, step) = nice_ticks(0.0, 10.0);
        assert_eq!(step, 2.0);
        assert_eq!(ticks, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        let (ticks, _) = nice_ticks(-0.013, 0.0215);
        assert!(ticks.len() >= 3);
        assert!(ticks.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn tick_labels_are_short() {
        assert_eq!(format_tick(0.30000000000000004, 0.1), "0.3");
        assert_eq!(format_tick(300.0, 100.0), "300");
        assert_eq!(format_tick(0.0, 0.1), "0");
        assert_eq!(format_tick(1.5e7, 5e6), "1.5e7");
        assert_eq!(format_tick(2e-6, 1e-6), "2e-6");
    }

    #[test]
    fn interpolation_is_clamped_linear() {
        let pts = vec![(0.0, 0.0), (10.0, 1.0)];
        assert_eq!(interpolate(&pts, -5.0), 0.0);
        assert_eq!(interpolate(&pts, 15.0), 1.0);
        assert!((interpolate(&pts, 5.0) - 0.5).abs() < 1e-12);
    }
}
