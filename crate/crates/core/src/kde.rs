//! Gaussian-kernel density estimation task-setting: fit/sample/NLL,
//! bandwidth schedules, and the variance predictions iterated fitting is
//! checked against.
//!
//! The kernel is an isotropic product Gaussian with one scalar bandwidth h
//! and normalization (2pi)^(-d/2) h^(-d). Iterating fit-and-sample convolves
//! kernels: under Replace with fixed h the t-th model's variance grows as
//! var0 + t h^2 per coordinate ([`replace_variance_prediction`]), while the
//! shrinking schedule h_t = c (t n)^(-1/5) keeps the accumulated variance
//! bounded by var0 + (c^2 / n^(2/5)) * sum i^(-7/5)
//! ([`shrinking_variance_bound`]).
//!
//! NLL recording floors each point's log-density at [`LOG_DENSITY_FLOOR`]
//! (the double-precision underflow boundary) and flags the run as diverged
//! when any point hits the floor; the Replace workflow provably drives
//! densities there.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, MetricSeries, Origin};
use crate::datagen::{generate_toy, ToyDatasetSpec};
use crate::engine::{run_loop, LoopConfig, TaskAdapter, TrainView};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Per-point log-density floor: below this, double-precision densities have
/// underflowed to zero.
pub const LOG_DENSITY_FLOOR: f64 = -745.0;

/// Number of held-out test points a KDE loop evaluates against.
pub const KDE_TEST_POINTS: usize = 1000;

/// Stored support points plus a scalar bandwidth.
#[derive(Clone, Debug, PartialEq)]
pub struct KdeModel {
    support: Dataset,
    bandwidth: f64,
}

impl KdeModel {
    pub fn new(support: Dataset, bandwidth: f64) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::TooFewSamples { required: 1, got: 0 });
        }
        assert!(bandwidth > 0.0, "bandwidth must be positive");
        Ok(Self { support, bandwidth })
    }

    pub fn support(&self) -> &Dataset {
        &self.support
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// log [(2pi)^(-d/2) h^(-d) / N]: the constant added to the log-sum of
    /// unnormalized kernel terms.
    fn log_norm(&self) -> f64 {
        let d = self.dim() as f64;
        -0.5 * d * (2.0 * std::f64::consts::PI).ln() - d * self.bandwidth.ln()
            - (self.support.len() as f64).ln()
    }
}

/// Bandwidth policy across iterations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BandwidthSchedule {
    Fixed(f64),
    /// c * (t*n)^(-1/5) at iteration t with per-model sample count n.
    Shrinking(f64),
}

impl BandwidthSchedule {
    pub fn bandwidth(&self, iteration: u32, n: usize) -> f64 {
        match *self {
            BandwidthSchedule::Fixed(h) => {
                assert!(h > 0.0);
                h
            }
            BandwidthSchedule::Shrinking(c) => {
                assert!(c > 0.0);
                c * ((iteration as f64) * (n as f64)).powf(-0.2)
            }
        }
    }
}

/// Log-density of the KDE at `x`, via log-sum-exp; the max exponent is
/// preserved exactly, so the result is finite and never NaN.
pub fn kde_log_density(model: &KdeModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    let inv_two_h_sq = 1.0 / (2.0 * model.bandwidth * model.bandwidth);
    let mut max_e = f64::NEG_INFINITY;
    let mut exps: Vec<f64> = Vec::with_capacity(model.support.len());
    for row in model.support.rows() {
        let mut d2 = 0.0;
        for (a, b) in x.iter().zip(row) {
            let diff = a - b;
            d2 += diff * diff;
        }
        let e = -d2 * inv_two_h_sq;
        max_e = max_e.max(e);
        exps.push(e);
    }
    let sum: f64 = exps.iter().map(|&e| (e - max_e).exp()).sum();
    Ok(max_e + sum.ln() + model.log_norm())
}

/// Each sample is a uniformly chosen support point plus N(0, h^2 I_d).
pub fn sample_kde(model: &KdeModel, count: usize, stream: RngStream, origin: Origin) -> Dataset {
    assert!(count >= 1);
    let d = model.dim();
    let mut rng = stream.rng();
    let mut data = Vec::with_capacity(count * d);
    for _ in 0..count {
        let idx = rng.random_range(0..model.support.len());
        let base = model.support.row(idx);
        for k in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            data.push(base[k] + model.bandwidth * z);
        }
    }
    Dataset::from_flat(d, data, vec![origin; count]).expect("kde draws are finite")
}

/// Mean negative log-likelihood of `test` under the model, with per-point
/// log-densities floored at [`LOG_DENSITY_FLOOR`].
pub fn mean_nll(model: &KdeModel, test: &Dataset) -> Result<f64> {
    Ok(mean_nll_detailed(model, test)?.0)
}

/// Like [`mean_nll`], also reporting whether any point hit the floor.
pub fn mean_nll_detailed(model: &KdeModel, test: &Dataset) -> Result<(f64, bool)> {
    if test.is_empty() {
        return Err(Error::TooFewSamples { required: 1, got: 0 });
    }
    let mut diverged = false;
    // Compensated (Kahan) mean so the result is independent of any future
    // reordering of test points.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for row in test.rows() {
        let mut ld = kde_log_density(model, row)?;
        if ld < LOG_DENSITY_FLOOR {
            ld = LOG_DENSITY_FLOOR;
            diverged = true;
        }
        let y = ld - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    Ok((-sum / test.len() as f64, diverged))
}

/// Per-coordinate variance of the t-times-convolved fixed-bandwidth model:
/// var0 + t h^2 (convolving t Gaussian kernels of bandwidth h).
pub fn replace_variance_prediction(var0: f64, h: f64, t: u32) -> f64 {
    var0 + f64::from(t) * h * h
}

/// Variance bound for the shrinking schedule under accumulation:
/// var0 + (c^2 / n^(2/5)) * sum_{i<=t} i^(-7/5). The partial sums converge
/// (the exponent is > 1), so the bound stays finite for all t.
pub fn shrinking_variance_bound(var0: f64, c: f64, n: usize, t: u32) -> f64 {
    let mut sum = 0.0;
    for i in 1..=u64::from(t) {
        sum += (i as f64).powf(-1.4);
    }
    var0 + c * c / (n as f64).powf(0.4) * sum
}

/// Summary moments of one synthetic batch; evaluated by the adapter when the
/// batch is drawn and emitted with that iteration's metrics.
#[derive(Clone, Copy, Debug)]
struct BatchStats {
    variance_trace: f64,
    mean_first_coord: f64,
    dim: usize,
}

fn batch_stats(batch: &Dataset) -> BatchStats {
    let n = batch.len();
    let d = batch.dim();
    let mut mean = vec![0.0f64; d];
    for row in batch.rows() {
        for (k, &v) in row.iter().enumerate() {
            mean[k] += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut trace = 0.0;
    for row in batch.rows() {
        for (k, &v) in row.iter().enumerate() {
            let c = v - mean[k];
            trace += c * c;
        }
    }
    BatchStats {
        variance_trace: trace / (n - 1) as f64,
        mean_first_coord: mean[0],
        dim: d,
    }
}

/// Linear-space kernel sums per test point, reusable across iterations when
/// the support only grows and the bandwidth is unchanged (the accumulate
/// workflow with a fixed schedule). The engine's `Grown` contract guarantees
/// prefix stability, so sums over old support rows stay valid.
struct NllCache {
    h: f64,
    rows_summed: usize,
    sums: Vec<f64>,
}

/// Engine adapter for the KDE task-setting.
pub struct KdeLoopTask {
    schedule: BandwidthSchedule,
    n_per_iteration: usize,
    iteration: u32,
    record_nll: bool,
    support_extends_previous: bool,
    cache: Option<NllCache>,
    last_batch: Option<BatchStats>,
}

impl KdeLoopTask {
    pub fn new(schedule: BandwidthSchedule, n_per_iteration: usize) -> Self {
        Self {
            schedule,
            n_per_iteration,
            iteration: 0,
            record_nll: true,
            support_extends_previous: false,
            cache: None,
            last_batch: None,
        }
    }

    /// Disable NLL evaluation; variance diagnostics alone are much cheaper
    /// for runs that do not need test likelihoods.
    pub fn without_nll(mut self) -> Self {
        self.record_nll = false;
        self
    }

    /// Mean NLL over the test set from incremental per-point kernel sums.
    /// Only support rows not yet summed are visited; with a fresh support
    /// the sums start from zero.
    fn nll_incremental(&mut self, model: &KdeModel, test: &Dataset) -> (f64, bool) {
        let reusable = self.support_extends_previous
            && self
                .cache
                .as_ref()
                .is_some_and(|c| c.h == model.bandwidth && c.rows_summed <= model.support.len());
        if !reusable {
            self.cache = Some(NllCache {
                h: model.bandwidth,
                rows_summed: 0,
                sums: vec![0.0; test.len()],
            });
        }
        let cache = self.cache.as_mut().expect("just ensured");
        let inv_two_h_sq = 1.0 / (2.0 * model.bandwidth * model.bandwidth);
        for (sum, trow) in cache.sums.iter_mut().zip(test.rows()) {
            let mut acc = 0.0;
            for i in cache.rows_summed..model.support.len() {
                let srow = model.support.row(i);
                let mut d2 = 0.0;
                for (a, b) in trow.iter().zip(srow) {
                    let diff = a - b;
                    d2 += diff * diff;
                }
                acc += (-d2 * inv_two_h_sq).exp();
            }
            *sum += acc;
        }
        cache.rows_summed = model.support.len();

        let log_norm = model.log_norm();
        let mut diverged = false;
        let mut total = 0.0f64;
        let mut comp = 0.0f64;
        for &s in &cache.sums {
            let mut ld = if s > 0.0 { s.ln() + log_norm } else { f64::NEG_INFINITY };
            if ld < LOG_DENSITY_FLOOR {
                ld = LOG_DENSITY_FLOOR;
                diverged = true;
            }
            let y = ld - comp;
            let t = total + y;
            comp = (t - total) - y;
            total = t;
        }
        (-total / test.len() as f64, diverged)
    }
}

impl TaskAdapter for KdeLoopTask {
    type Model = KdeModel;

    fn task_name(&self) -> &'static str {
        "kdes"
    }

    fn fit(&mut self, view: TrainView<'_>) -> Result<KdeModel> {
        self.iteration += 1;
        self.support_extends_previous = matches!(view, TrainView::Grown { .. });
        let h = self.schedule.bandwidth(self.iteration, self.n_per_iteration);
        KdeModel::new(view.data().clone(), h)
    }

    fn sample(&mut self, model: &KdeModel, count: usize, stream: RngStream, generation: u32) -> Dataset {
        let batch = sample_kde(model, count, stream, Origin::Synthetic { generation });
        self.last_batch = Some(batch_stats(&batch));
        batch
    }

    fn evaluate(&mut self, model: &KdeModel, test: &Dataset) -> Vec<(String, f64)> {
        let mut out = Vec::with_capacity(4);
        if self.record_nll {
            let (nll, diverged) = self.nll_incremental(model, test);
            out.push(("nll".into(), nll));
            out.push(("nll_diverged".into(), if diverged { 1.0 } else { 0.0 }));
        }
        let stats = self.last_batch.expect("sample precedes evaluate");
        out.push(("empirical_variance_trace".into(), stats.variance_trace));
        if stats.dim == 1 {
            out.push(("sample_mean".into(), stats.mean_first_coord));
        }
        out
    }
}

/// Run one KDE loop on a toy dataset: real data of size `n_per_iteration`
/// drawn from `spec`, a 1000-point held-out test set, metrics
/// {nll, nll_diverged, empirical_variance_trace} per iteration.
///
/// For the fixed-manifold datasets the test set is a fresh draw from an
/// independent stream. Blobs redraw their cluster centers per draw, so an
/// independent test draw would come from a different distribution; there,
/// one joint i.i.d. draw of n + 1000 points is split into train and
/// held-out halves, which share the centers.
pub fn run_kde_setting(
    config: &LoopConfig,
    schedule: BandwidthSchedule,
    spec: &ToyDatasetSpec,
    stream: RngStream,
) -> Result<MetricSeries> {
    let n = config.n_per_iteration;
    let (real, test) = match spec.kind {
        crate::datagen::ToyKind::Blobs { .. } => {
            let mut joint_spec = spec.clone();
            joint_spec.n = n + KDE_TEST_POINTS;
            let joint = generate_toy(&joint_spec, stream.substream("data"))?;
            let train_idx: Vec<usize> = (0..n).collect();
            (joint.subset(&train_idx), joint.tail(KDE_TEST_POINTS))
        }
        _ => {
            let mut data_spec = spec.clone();
            data_spec.n = n;
            let real = generate_toy(&data_spec, stream.substream("real"))?;
            let mut test_spec = spec.clone();
            test_spec.n = KDE_TEST_POINTS;
            let test = generate_toy(&test_spec, stream.substream("test"))?;
            (real, test)
        }
    };
    let mut task = KdeLoopTask::new(schedule, n);
    run_loop(config, &mut task, &real, &test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Workflow;
    use crate::rng::sample_standard_normal;
    use approx::assert_relative_eq;

    fn model_1d(points: &[f64], h: f64) -> KdeModel {
        let mut ds = Dataset::empty(1);
        for &p in points {
            ds.push_row(&[p], Origin::Real).unwrap();
        }
        KdeModel::new(ds, h).unwrap()
    }

    #[test]
    fn log_density_examples() {
        let m = model_1d(&[0.5], 1.0);
        let peak = kde_log_density(&m, &[0.5]).unwrap();
        assert_relative_eq!(peak, -0.9189385332046727, epsilon = 1e-12);
        let off = kde_log_density(&m, &[2.5]).unwrap();
        assert_relative_eq!(off, -0.9189385332046727 - 2.0, epsilon = 1e-12);

        // Equidistant query on two support points: the average of two equal
        // kernel values equals either one alone.
        let m2 = model_1d(&[-1.0, 1.0], 1.0);
        let mid = kde_log_density(&m2, &[0.0]).unwrap();
        let single = kde_log_density(&model_1d(&[1.0], 1.0), &[0.0]).unwrap();
        assert_relative_eq!(mid, single, epsilon = 1e-12);
    }

    #[test]
    fn log_density_integrates_to_one() {
        let m = model_1d(&[-0.7, 0.3, 1.9, 2.2], 0.4);
        let (lo, hi) = (-0.7 - 4.0, 2.2 + 4.0);
        let nodes = 100_000;
        let dx = (hi - lo) / nodes as f64;
        let mut integral = 0.0;
        for i in 0..=nodes {
            let x = lo + i as f64 * dx;
            let w = if i == 0 || i == nodes { 0.5 } else { 1.0 };
            integral += w * kde_log_density(&m, &[x]).unwrap().exp();
        }
        integral *= dx;
        assert!((integral - 1.0).abs() < 1e-4, "integral {integral}");
    }

    #[test]
    fn sampling_examples() {
        let m = model_1d(&[1.0, 2.0, 3.0], 1e-12);
        let ds = sample_kde(&m, 50, RngStream::new(0), Origin::Real);
        for row in ds.rows() {
            let nearest = [1.0f64, 2.0, 3.0]
                .iter()
                .map(|s| (row[0] - s).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-10);
        }

        let m = model_1d(&[0.0], 2.0);
        let ds = sample_kde(&m, 1_000_000, RngStream::new(1), Origin::Real);
        let mean: f64 = ds.rows().map(|r| r[0]).sum::<f64>() / 1e6;
        let var: f64 = ds.rows().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / (1e6 - 1.0);
        assert!((var - 4.0).abs() / 4.0 < 0.02, "var {var}");

        let s = RngStream::new(2).substream("kde");
        assert_eq!(
            sample_kde(&m, 10, s, Origin::Real),
            sample_kde(&m, 10, s, Origin::Real)
        );
    }

    #[test]
    fn nll_examples() {
        let m = model_1d(&[0.3], 1.0);
        let mut test = Dataset::empty(1);
        test.push_row(&[0.3], Origin::Real).unwrap();
        assert_relative_eq!(mean_nll(&m, &test).unwrap(), 0.9189385332046727, epsilon = 1e-12);

        // Duplicating every support point leaves the mixture unchanged.
        let base = model_1d(&[0.0, 1.0], 0.7);
        let dup = model_1d(&[0.0, 1.0, 0.0, 1.0], 0.7);
        let test = sample_standard_normal(RngStream::new(3), 50, 1, Origin::Real);
        assert_relative_eq!(
            mean_nll(&base, &test).unwrap(),
            mean_nll(&dup, &test).unwrap(),
            epsilon = 1e-12
        );

        // Joint translation invariance.
        let shift = 13.25;
        let shifted_model = model_1d(&[0.0 + shift, 1.0 + shift], 0.7);
        let mut shifted_test = Dataset::empty(1);
        for row in test.rows() {
            shifted_test.push_row(&[row[0] + shift], Origin::Real).unwrap();
        }
        assert_relative_eq!(
            mean_nll(&base, &test).unwrap(),
            mean_nll(&shifted_model, &shifted_test).unwrap(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn variance_prediction_examples() {
        assert_eq!(replace_variance_prediction(3.0, 0.5, 0), 3.0);
        assert_relative_eq!(replace_variance_prediction(0.0, 0.5, 4), 1.0);
        assert_relative_eq!(replace_variance_prediction(1.0, 1.0, 9), 10.0);
    }

    #[test]
    fn shrinking_bound_examples() {
        assert_eq!(shrinking_variance_bound(2.0, 1.0, 5, 0), 2.0);
        assert_relative_eq!(shrinking_variance_bound(0.5, 1.0, 1, 1), 1.5);
        // The tail converges; the integral bound puts the 1e6..1e7 gap at
        // (1e6^-0.4 - 1e7^-0.4)/0.4 ~ 6e-3, and the partial sums must agree
        // to that scale.
        let a = shrinking_variance_bound(0.0, 1.0, 1, 1_000_000);
        let b = shrinking_variance_bound(0.0, 1.0, 1, 10_000_000);
        let gap = (1e6f64.powf(-0.4) - 1e7f64.powf(-0.4)) / 0.4;
        assert!((b - a) > 0.0 && (b - a) < gap * 1.01, "{a} vs {b} (integral gap {gap})");
        assert!((b - a) > gap * 0.99, "sum should track the integral tail");
    }

    #[test]
    fn schedule_evaluates_shrinking_form() {
        let s = BandwidthSchedule::Shrinking(2.0);
        assert_relative_eq!(s.bandwidth(1, 1), 2.0);
        assert_relative_eq!(s.bandwidth(4, 8), 2.0 * 32.0f64.powf(-0.2), epsilon = 1e-15);
        let f = BandwidthSchedule::Fixed(0.5);
        assert_eq!(f.bandwidth(30, 100), 0.5);
    }

    #[test]
    fn sample_then_fit_inflates_variance_by_h_sq() {
        // KDE sampling is a Gaussian convolution: mean preserved, variance
        // inflated by h^2, within CLT error.
        let n = 200_000;
        let support = sample_standard_normal(RngStream::new(8), 2000, 1, Origin::Real);
        let sup_mean: f64 = support.rows().map(|r| r[0]).sum::<f64>() / 2000.0;
        let sup_pop_var: f64 =
            support.rows().map(|r| (r[0] - sup_mean).powi(2)).sum::<f64>() / 2000.0;
        let h = 0.6;
        let m = KdeModel::new(support.clone(), h).unwrap();
        let draws = sample_kde(&m, n, RngStream::new(9), Origin::Real);
        let mean: f64 = draws.rows().map(|r| r[0]).sum::<f64>() / n as f64;
        let var: f64 = draws.rows().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let want = sup_pop_var + h * h;
        assert!((mean - sup_mean).abs() < 4.0 / (n as f64).sqrt() + 0.01);
        assert!((var - want).abs() / want < 0.02, "{var} vs {want}");
    }

    #[test]
    fn incremental_nll_matches_direct_lse() {
        // Drive an accumulate loop and re-derive each iteration's NLL with
        // the exact log-sum-exp path.
        let spec = ToyDatasetSpec::from_name("moons", 40, Some(0.05)).unwrap();
        let cfg = LoopConfig {
            workflow: Workflow::Accumulate,
            n_per_iteration: 40,
            num_iterations: 8,
            seed: 77,
        };
        let stream = RngStream::new(123);
        let series = run_kde_setting(&cfg, BandwidthSchedule::Fixed(0.5), &spec, stream).unwrap();

        // Reconstruct the run with a direct evaluator.
        let mut data_spec = spec.clone();
        data_spec.n = 40;
        let real = generate_toy(&data_spec, stream.substream("real")).unwrap();
        let mut test_spec = spec.clone();
        test_spec.n = KDE_TEST_POINTS;
        let test = generate_toy(&test_spec, stream.substream("test")).unwrap();

        struct Direct {
            inner: KdeLoopTask,
            nlls: Vec<f64>,
            test: Dataset,
        }
        impl TaskAdapter for Direct {
            type Model = KdeModel;
            fn task_name(&self) -> &'static str {
                "kdes"
            }
            fn fit(&mut self, view: TrainView<'_>) -> crate::error::Result<KdeModel> {
                self.inner.fit(view)
            }
            fn sample(&mut self, m: &KdeModel, c: usize, s: RngStream, g: u32) -> Dataset {
                self.inner.sample(m, c, s, g)
            }
            fn evaluate(&mut self, m: &KdeModel, _t: &Dataset) -> Vec<(String, f64)> {
                self.nlls.push(mean_nll(m, &self.test).unwrap());
                vec![("dummy".into(), 0.0)]
            }
        }
        let mut direct = Direct {
            inner: KdeLoopTask::new(BandwidthSchedule::Fixed(0.5), 40),
            nlls: Vec::new(),
            test: test.clone(),
        };
        run_loop(&cfg, &mut direct, &real, &test).unwrap();

        for (i, (_, fast)) in series.metric_values("nll").iter().enumerate() {
            let slow = direct.nlls[i];
            assert!(
                (fast - slow).abs() < 1e-9 * (1.0 + slow.abs()),
                "iteration {}: {fast} vs {slow}",
                i + 1
            );
        }
    }

    #[test]
    fn kde_setting_is_deterministic() {
        let spec = ToyDatasetSpec::from_name("circles", 30, Some(0.05)).unwrap();
        let cfg = LoopConfig {
            workflow: Workflow::AccumulateSubsample { subsample_size: 30 },
            n_per_iteration: 30,
            num_iterations: 5,
            seed: 5,
        };
        let a = run_kde_setting(&cfg, BandwidthSchedule::Fixed(0.3), &spec, RngStream::new(4)).unwrap();
        let b = run_kde_setting(&cfg, BandwidthSchedule::Fixed(0.3), &spec, RngStream::new(4)).unwrap();
        assert_eq!(a, b);
    }
}
