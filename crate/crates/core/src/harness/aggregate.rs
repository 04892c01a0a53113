//! Across-seed aggregation of sweep results.

use std::collections::BTreeMap;

use super::sweep::CellResult;

/// One aggregated row: a grid cell (minus seed) at one iteration and metric,
/// summarized across seeds. Quantiles use linear interpolation on sorted
/// values at position q*(N-1); stderr is the sample std over sqrt(N).
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub task: String,
    pub setting: String,
    pub seed_count: usize,
    pub cell_params: String,
    pub iteration: u32,
    pub metric: String,
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub stderr: f64,
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    // frac == 0 short-circuits so an infinite neighbour cannot turn the
    // interpolation into 0 * inf.
    if frac > 0.0 && lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Group results by (task, setting, cell params, iteration, metric) and
/// summarize the per-seed values.
pub fn aggregate(results: &[CellResult]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, String, String, u32, String), Vec<f64>> = BTreeMap::new();
    for r in results {
        for rec in r.series.records() {
            groups
                .entry((
                    r.series.task.clone(),
                    r.series.setting.clone(),
                    r.params.clone(),
                    rec.iteration,
                    rec.metric.clone(),
                ))
                .or_default()
                .push(rec.value);
        }
    }
    groups
        .into_iter()
        .map(|((task, setting, cell_params, iteration, metric), mut values)| {
            values.sort_by(|a, b| a.partial_cmp(b).expect("metrics are never NaN"));
            let n = values.len();
            let nf = n as f64;
            let any_inf = values.iter().any(|v| v.is_infinite());
            let (mean, stderr) = if any_inf {
                (f64::INFINITY, f64::INFINITY)
            } else {
                let mean = values.iter().sum::<f64>() / nf;
                let stderr = if n > 1 {
                    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
                    (var / nf).sqrt()
                } else {
                    0.0
                };
                (mean, stderr)
            };
            AggregateRow {
                task,
                setting,
                seed_count: n,
                cell_params,
                iteration,
                metric,
                mean,
                median: quantile_sorted(&values, 0.5),
                q10: quantile_sorted(&values, 0.1),
                q90: quantile_sorted(&values, 0.9),
                stderr,
            }
        })
        .collect()
}
