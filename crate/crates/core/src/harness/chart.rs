//! Quick-look SVG line charts of aggregated metrics: one polyline per
//! setting, iteration on the x-axis, mean value on the y-axis.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::aggregate::AggregateRow;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Render the named metric from aggregate rows to an SVG file. Rows with the
/// same setting at the same iteration (e.g. several grid cells) are averaged
/// into a single curve; non-finite means are skipped.
pub fn plot_metric(rows: &[AggregateRow], metric: &str, path: &Path) -> Result<()> {
    use std::collections::BTreeMap;
    let mut by_setting: BTreeMap<&str, BTreeMap<u32, (f64, usize)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric && r.mean.is_finite()) {
        let e = by_setting
            .entry(&r.setting)
            .or_default()
            .entry(r.iteration)
            .or_insert((0.0, 0));
        e.0 += r.mean;
        e.1 += 1;
    }
    if by_setting.is_empty() {
        return Err(Error::EmptyGrid(format!("metric `{metric}`")));
    }

    let mut curves: Vec<(&str, Vec<(f64, f64)>)> = Vec::new();
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (setting, pts) in &by_setting {
        let series: Vec<(f64, f64)> = pts
            .iter()
            .map(|(&it, &(sum, count))| (f64::from(it), sum / count as f64))
            .collect();
        for &(x, y) in &series {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        curves.push((setting, series));
    }
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    if y_max <= y_min {
        y_max = y_min + 1.0;
    }

    let sx = |x: f64| MARGIN + (x - x_min) / (x_max - x_min) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"16\" text-anchor=\"middle\">{metric} vs iteration</text>\n",
        WIDTH / 2.0,
        MARGIN / 2.0
    ));
    for (label, x, y, anchor) in [
        (format!("{x_min}"), MARGIN, HEIGHT - MARGIN + 18.0, "middle"),
        (format!("{x_max}"), WIDTH - MARGIN, HEIGHT - MARGIN + 18.0, "middle"),
        (format!("{y_min:.4}"), MARGIN - 6.0, HEIGHT - MARGIN, "end"),
        (format!("{y_max:.4}"), MARGIN - 6.0, MARGIN, "end"),
    ] {
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"12\" text-anchor=\"{anchor}\">{label}</text>\n"
        ));
    }

    for (i, (setting, series)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = series.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        let ly = MARGIN + 18.0 * i as f64 + 12.0;
        svg.push_str(&format!(
            "<rect x=\"{x}\" y=\"{y}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
            x = WIDTH - MARGIN - 150.0,
            y = ly - 10.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{ly}\" font-size=\"12\">{setting}</text>\n",
            x = WIDTH - MARGIN - 132.0
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}
