//! Multivariate Gaussian task-setting: estimators, sampler, collapse metrics,
//! and the closed-form limits the accumulate workflow is validated against.
//!
//! The fitted-variance expectation under accumulation obeys an exact product
//! law, `E[sigma_t^2] = sigma_0^2 * prod_{k<=t} (1 - 1/(n k^2))`, which
//! converges to the sinc-type limit `sin(pi/sqrt(n)) / (pi/sqrt(n))`; the
//! expected squared mean error is its complement. [`expected_variance_product`]
//! and [`theorem1_limits`] evaluate those closed forms, and
//! [`accumulate_theorem_mc`] realizes the matching stochastic process by
//! Monte Carlo. The product law is derived for the population-normalized
//! (1/N) variance with each generation sampled from that fit, so the
//! simulator uses that normalization; the engine-facing estimator
//! [`fit_gaussian`] stays unbiased (1/(N-1)).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, Origin};
use crate::error::{Error, Result};
use crate::linalg::{self, sym_eigen};
use crate::rng::RngStream;

/// Mean vector and symmetric PSD covariance. Construction symmetrizes and,
/// when the matrix is not numerically PD, clamps negative eigenvalues at
/// zero, so downstream factorization never aborts mid-collapse.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
}

impl GaussianParams {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != mu.len() || sigma.ncols() != mu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                got: sigma.nrows(),
            });
        }
        let sym = linalg::symmetrize(&sigma);
        let asym = (&sigma - &sym).amax();
        let scale = sigma.amax().max(1e-300);
        if asym > linalg::SYMMETRY_TOL * scale {
            return Err(Error::NonSymmetric {
                max_asym: asym,
                tol: linalg::SYMMETRY_TOL * scale,
            });
        }
        // Cheap PD probe first; only degenerate inputs pay for an eigen pass.
        let sigma = if sym.clone().cholesky().is_some() {
            sym
        } else {
            linalg::eigen_clamp(&sym, 0.0)?
        };
        Ok(Self { mu, sigma })
    }

    /// N(0, sigma_sq * I_d), the canonical ground truth of the sweeps.
    pub fn isotropic(dim: usize, sigma_sq: f64) -> Self {
        Self {
            mu: DVector::zeros(dim),
            sigma: DMatrix::identity(dim, dim) * sigma_sq,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Exactly sigma_sq * I for some sigma_sq >= 0?
    fn isotropy(&self) -> Option<f64> {
        let d = self.dim();
        let s = self.sigma[(0, 0)];
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { s } else { 0.0 };
                if self.sigma[(i, j)] != want {
                    return None;
                }
            }
        }
        (s >= 0.0).then_some(s)
    }
}

/// Row mean and unbiased covariance (1/(N-1)) over all provided rows. Which
/// rows are provided is the workflow's business; the estimator is agnostic.
pub fn fit_gaussian(data: &Dataset) -> Result<GaussianParams> {
    let n = data.len();
    if n < 2 {
        return Err(Error::TooFewSamples { required: 2, got: n });
    }
    let d = data.dim();
    let mut mean = DVector::zeros(d);
    for row in data.rows() {
        for (k, &v) in row.iter().enumerate() {
            mean[k] += v;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    let mut centered = DVector::zeros(d);
    for row in data.rows() {
        for k in 0..d {
            centered[k] = row[k] - mean[k];
        }
        cov.syger(1.0, &centered, &centered, 1.0);
    }
    // syger accumulates into the lower triangle only.
    cov.fill_upper_triangle_with_lower_triangle();
    cov /= (n - 1) as f64;
    GaussianParams::new(mean, cov)
}

/// Draw `count` rows `mu + L z` with `L` the (clamp-failover) Cholesky factor
/// of the covariance. A degenerate covariance yields degenerate but valid
/// samples.
pub fn sample_gaussian(
    params: &GaussianParams,
    count: usize,
    stream: RngStream,
    origin: Origin,
) -> Dataset {
    assert!(count >= 1, "count must be positive");
    let d = params.dim();
    let factor = linalg::cholesky(params.sigma())
        .expect("construction guarantees a symmetric PSD covariance")
        .factor;
    let mut rng = stream.rng();
    let mut z = DVector::zeros(d);
    let mut data = Vec::with_capacity(count * d);
    for _ in 0..count {
        for k in 0..d {
            z[k] = rng.sample::<f64, _>(StandardNormal);
        }
        let row = params.mu() + &factor * &z;
        data.extend_from_slice(row.as_slice());
    }
    Dataset::from_flat(d, data, vec![origin; count]).expect("gaussian draws are finite")
}

/// Squared Wasserstein-2 distance between two Gaussians:
/// ‖mu_p − mu_q‖² + tr(Σ_p + Σ_q − 2(Σ_q^{1/2} Σ_p Σ_q^{1/2})^{1/2}).
pub fn wasserstein2_sq(p: &GaussianParams, q: &GaussianParams) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let mean_term = (p.mu() - q.mu()).norm_squared();
    let sq = linalg::sqrt_psd(q.sigma());
    let inner = linalg::symmetrize(&(&sq * p.sigma() * &sq));
    let cross = linalg::sqrt_psd(&inner);
    let trace_term = p.sigma().trace() + q.sigma().trace() - 2.0 * cross.trace();
    Ok(mean_term + trace_term.max(0.0))
}

/// Collapse metrics of a fit against the ground truth:
/// `squared_error_mean`, `trace_ratio`, `det_ratio`, `w2_sq`.
///
/// `det_ratio` is computed in log space (sum of log-eigenvalues) and clamped
/// to 0 below exp(-700) so deep collapse underflows to an honest zero.
pub fn gaussian_metrics(fit: &GaussianParams, truth: &GaussianParams) -> Result<Vec<(String, f64)>> {
    if fit.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: truth.dim(),
            got: fit.dim(),
        });
    }
    let sq_err_mean = (fit.mu() - truth.mu()).norm_squared();

    let (fit_vals, _) = sym_eigen(fit.sigma());
    let trace_truth = truth.sigma().trace();
    let trace_ratio = fit.sigma().trace() / trace_truth;

    let log_det = |vals: &DVector<f64>| -> f64 {
        vals.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).sum()
    };
    let log_det_fit = log_det(&fit_vals);
    let log_det_truth = {
        let (tv, _) = sym_eigen(truth.sigma());
        log_det(&tv)
    };
    let det_ratio = {
        let diff = log_det_fit - log_det_truth;
        if diff < -700.0 {
            0.0
        } else {
            diff.exp()
        }
    };

    // With an isotropic truth the cross term diagonalizes in the fit's
    // eigenbasis and the W2 trace reduces to sum (sqrt(lambda_i) - s0)^2,
    // reusing the eigen pass above.
    let w2 = match truth.isotropy() {
        Some(s0_sq) => {
            let s0 = s0_sq.sqrt();
            let trace_term: f64 = fit_vals.iter().map(|&l| (l.max(0.0).sqrt() - s0).powi(2)).sum();
            sq_err_mean + trace_term
        }
        None => wasserstein2_sq(fit, truth)?,
    };

    Ok(vec![
        ("squared_error_mean".into(), sq_err_mean),
        ("trace_ratio".into(), trace_ratio),
        ("det_ratio".into(), det_ratio),
        ("w2_sq".into(), w2),
    ])
}

/// The exact accumulate variance ratio `prod_{k=1}^{t} (1 - 1/(n k^2))`.
///
/// `n = 1` makes the first factor zero and the product collapses to 0 for
/// t >= 1; that sits outside the n >= 2 estimator setting but is the
/// consistent value of the formula. `t = 0` is the empty product, 1.
pub fn expected_variance_product(n: usize, t: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidN { min: 1, got: n });
    }
    let nf = n as f64;
    let mut prod = 1.0;
    for k in 1..=u64::from(t) {
        let kf = k as f64;
        prod *= 1.0 - 1.0 / (nf * kf * kf);
    }
    Ok(prod)
}

/// Limits of the accumulate expectations as t -> infinity:
/// (variance ratio, squared mean-error ratio) =
/// (sin(pi/sqrt(n)) / (pi/sqrt(n)), 1 - same). The two components sum to 1.
pub fn theorem1_limits(n: usize) -> (f64, f64) {
    assert!(n >= 1, "n must be positive");
    let x = std::f64::consts::PI / (n as f64).sqrt();
    let ratio = x.sin() / x;
    (ratio, 1.0 - ratio)
}

/// Seed-averaged trajectories from the 1-D accumulate Monte Carlo.
#[derive(Clone, Debug)]
pub struct TheoremMc {
    /// Across-seed mean of the fitted variance at iterations 1..=T.
    pub variance_mean: Vec<f64>,
    /// Standard error of `variance_mean`.
    pub variance_stderr: Vec<f64>,
    /// Across-seed mean of (mu_hat - mu_0)^2 at iterations 1..=T.
    pub mean_err_sq_mean: Vec<f64>,
    /// Standard error of `mean_err_sq_mean`.
    pub mean_err_sq_stderr: Vec<f64>,
}

/// Monte Carlo realization of the 1-D accumulate process the closed forms
/// describe: pool the real data with every synthetic generation, fit the
/// pooled mean and population-normalized (1/N) variance, and sample the next
/// generation from that fit. Returns across-seed means and standard errors
/// of the fitted variance and the squared mean error at each iteration.
pub fn accumulate_theorem_mc(
    n: usize,
    num_iterations: u32,
    num_seeds: u32,
    sigma0_sq: f64,
    base: RngStream,
) -> TheoremMc {
    assert!(n >= 2, "estimators need n >= 2");
    let t_max = num_iterations as usize;
    let mut sum_var = vec![0.0f64; t_max];
    let mut sumsq_var = vec![0.0f64; t_max];
    let mut sum_err = vec![0.0f64; t_max];
    let mut sumsq_err = vec![0.0f64; t_max];
    let sigma0 = sigma0_sq.sqrt();

    for s in 0..num_seeds {
        let mut rng = base.substream_indexed("seed", u64::from(s)).rng();
        // Running pooled moments: count, mean, and centered sum of squares,
        // merged batch-by-batch (Chan et al.), so no cancellation as the
        // pool grows.
        let mut count = 0.0f64;
        let mut mean = 0.0f64;
        let mut m2 = 0.0f64;
        // Sampling parameters for the next generation; generation 1 is the
        // real data, drawn from the truth.
        let mut mu = 0.0f64;
        let mut sd = sigma0;
        for t in 0..t_max {
            let mut b_mean = 0.0f64;
            let mut b_m2 = 0.0f64;
            for i in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                let x = mu + sd * z;
                let delta = x - b_mean;
                b_mean += delta / (i + 1) as f64;
                b_m2 += delta * (x - b_mean);
            }
            let b_count = n as f64;
            let delta = b_mean - mean;
            let total = count + b_count;
            mean += delta * (b_count / total);
            m2 += b_m2 + delta * delta * (count * b_count / total);
            count = total;

            let var = m2 / count;
            let err = mean * mean; // mu_0 = 0
            sum_var[t] += var;
            sumsq_var[t] += var * var;
            sum_err[t] += err;
            sumsq_err[t] += err * err;

            mu = mean;
            sd = var.max(0.0).sqrt();
        }
    }

    let s = f64::from(num_seeds);
    let finish = |sum: Vec<f64>, sumsq: Vec<f64>| -> (Vec<f64>, Vec<f64>) {
        let means: Vec<f64> = sum.iter().map(|v| v / s).collect();
        let errs: Vec<f64> = sumsq
            .iter()
            .zip(&means)
            .map(|(&ss, &m)| {
                let var = (ss / s - m * m).max(0.0) * s / (s - 1.0);
                (var / s).sqrt()
            })
            .collect();
        (means, errs)
    };
    let (variance_mean, variance_stderr) = finish(sum_var, sumsq_var);
    let (mean_err_sq_mean, mean_err_sq_stderr) = finish(sum_err, sumsq_err);
    TheoremMc {
        variance_mean,
        variance_stderr,
        mean_err_sq_mean,
        mean_err_sq_stderr,
    }
}

/// Engine adapter for the Gaussian task-setting. Accumulate fits reuse
/// pooled moments — mean and centered sum-of-squares merged batch-by-batch
/// (Chan et al.) — so each iteration costs O(n d^2) rather than re-scanning
/// the whole pool.
pub struct GaussianLoopTask {
    truth: GaussianParams,
    count: f64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl GaussianLoopTask {
    pub fn new(truth: GaussianParams) -> Self {
        let d = truth.dim();
        Self {
            truth,
            count: 0.0,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
        }
    }

    fn reset(&mut self) {
        self.count = 0.0;
        self.mean.fill(0.0);
        self.m2.fill(0.0);
    }

    /// Merge rows [from..] of `data` into the running moments.
    fn merge_batch(&mut self, data: &Dataset, from: usize) {
        let d = data.dim();
        let b_count = (data.len() - from) as f64;
        if b_count == 0.0 {
            return;
        }
        let mut b_mean = DVector::zeros(d);
        for i in from..data.len() {
            for (k, &v) in data.row(i).iter().enumerate() {
                b_mean[k] += v;
            }
        }
        b_mean /= b_count;
        let mut b_m2 = DMatrix::zeros(d, d);
        let mut centered = DVector::zeros(d);
        for i in from..data.len() {
            let row = data.row(i);
            for k in 0..d {
                centered[k] = row[k] - b_mean[k];
            }
            b_m2.syger(1.0, &centered, &centered, 1.0);
        }
        b_m2.fill_upper_triangle_with_lower_triangle();

        let delta = &b_mean - &self.mean;
        let total = self.count + b_count;
        self.mean.axpy(b_count / total, &delta, 1.0);
        let w = self.count * b_count / total;
        self.m2 += b_m2;
        self.m2.syger(w, &delta, &delta, 1.0);
        self.m2.fill_upper_triangle_with_lower_triangle();
        self.count = total;
    }
}

impl crate::engine::TaskAdapter for GaussianLoopTask {
    type Model = GaussianParams;

    fn task_name(&self) -> &'static str {
        "gaussians"
    }

    fn fit(&mut self, view: crate::engine::TrainView<'_>) -> Result<GaussianParams> {
        match view {
            crate::engine::TrainView::Fresh(data) => {
                if data.len() < 2 {
                    return Err(Error::TooFewSamples {
                        required: 2,
                        got: data.len(),
                    });
                }
                self.reset();
                self.merge_batch(data, 0);
            }
            crate::engine::TrainView::Grown { data, new_from } => {
                self.merge_batch(data, new_from);
            }
        }
        GaussianParams::new(self.mean.clone(), &self.m2 / (self.count - 1.0))
    }

    fn sample(&mut self, model: &GaussianParams, count: usize, stream: RngStream, generation: u32) -> Dataset {
        sample_gaussian(model, count, stream, Origin::Synthetic { generation })
    }

    fn evaluate(&mut self, model: &GaussianParams, _test: &Dataset) -> Vec<(String, f64)> {
        gaussian_metrics(model, &self.truth).expect("dimensions fixed per run")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{TaskAdapter, TrainView};
    use crate::rng::sample_standard_normal;
    use approx::assert_relative_eq;

    fn params_1d(mu: f64, var: f64) -> GaussianParams {
        GaussianParams::new(DVector::from_vec(vec![mu]), DMatrix::from_vec(1, 1, vec![var])).unwrap()
    }

    #[test]
    fn fit_gaussian_hand_example() {
        let ds = Dataset::from_rows(1, &[&[0.0], &[2.0]], Origin::Real).unwrap();
        let p = fit_gaussian(&ds).unwrap();
        assert_relative_eq!(p.mu()[0], 1.0);
        assert_relative_eq!(p.sigma()[(0, 0)], 2.0); // ((0-1)^2 + (2-1)^2) / 1
    }

    #[test]
    fn fit_gaussian_zero_spread_and_prec() {
        let ds = Dataset::from_rows(2, &[&[3.0, -1.0], &[3.0, -1.0], &[3.0, -1.0]], Origin::Real).unwrap();
        let p = fit_gaussian(&ds).unwrap();
        assert_eq!(p.sigma().amax(), 0.0);
        assert!(matches!(
            fit_gaussian(&Dataset::from_rows(1, &[&[1.0]], Origin::Real).unwrap()),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn fit_gaussian_standard_normal_clt() {
        let ds = sample_standard_normal(RngStream::new(100), 1_000_000, 3, Origin::Real);
        let p = fit_gaussian(&ds).unwrap();
        assert!(p.mu().amax() < 0.01);
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((p.sigma() - id).amax() < 0.01);
    }

    #[test]
    fn sample_gaussian_degenerate_and_moments() {
        let p = GaussianParams::new(DVector::from_vec(vec![2.0, -1.0]), DMatrix::zeros(2, 2)).unwrap();
        let ds = sample_gaussian(&p, 8, RngStream::new(0), Origin::Real);
        for row in ds.rows() {
            assert_eq!(row, &[2.0, -1.0]);
        }

        let p = params_1d(5.0, 4.0);
        let ds = sample_gaussian(&p, 1_000_000, RngStream::new(1), Origin::Real);
        let mean: f64 = ds.rows().map(|r| r[0]).sum::<f64>() / 1e6;
        let var: f64 = ds.rows().map(|r| (r[0] - mean).powi(2)).sum::<f64>() / (1e6 - 1.0);
        assert!((mean - 5.0).abs() < 0.01, "mean {mean}");
        assert!((var - 4.0).abs() / 4.0 < 0.02, "var {var}");

        let s = RngStream::new(9).substream("draw");
        assert_eq!(
            sample_gaussian(&p, 5, s, Origin::Real),
            sample_gaussian(&p, 5, s, Origin::Real)
        );
    }

    #[test]
    fn wasserstein_examples() {
        let std3 = GaussianParams::isotropic(3, 1.0);
        assert_relative_eq!(wasserstein2_sq(&std3, &std3).unwrap(), 0.0);

        let a = params_1d(0.0, 1.0);
        let b = params_1d(1.0, 1.0);
        assert_relative_eq!(wasserstein2_sq(&a, &b).unwrap(), 1.0, epsilon = 1e-10);

        let c = params_1d(0.0, 4.0);
        assert_relative_eq!(wasserstein2_sq(&c, &a).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn wasserstein_is_symmetric_and_matches_1d_form() {
        let mut rng = RngStream::new(21).rng();
        for _ in 0..100 {
            let (m1, v1) = (rng.random_range(-3.0..3.0), rng.random_range(0.01..4.0));
            let (m2, v2) = (rng.random_range(-3.0..3.0), rng.random_range(0.01..4.0));
            let p = params_1d(m1, v1);
            let q = params_1d(m2, v2);
            let w_pq = wasserstein2_sq(&p, &q).unwrap();
            let w_qp = wasserstein2_sq(&q, &p).unwrap();
            let brute = (m1 - m2).powi(2) + (v1.sqrt() - v2.sqrt()).powi(2);
            assert!((w_pq - brute).abs() < 1e-10, "{w_pq} vs {brute}");
            assert!((w_pq - w_qp).abs() < 1e-8);
        }
    }

    #[test]
    fn metrics_examples() {
        let truth = GaussianParams::isotropic(2, 1.0);
        let same = gaussian_metrics(&truth, &truth).unwrap();
        let get = |m: &[(String, f64)], k: &str| m.iter().find(|(n, _)| n == k).unwrap().1;
        assert_relative_eq!(get(&same, "squared_error_mean"), 0.0);
        assert_relative_eq!(get(&same, "trace_ratio"), 1.0);
        assert_relative_eq!(get(&same, "det_ratio"), 1.0);
        assert_relative_eq!(get(&same, "w2_sq"), 0.0);

        // Collapsed covariance, exact mean: W2^2 = tr(Sigma_0).
        let collapsed = GaussianParams::new(DVector::zeros(2), DMatrix::zeros(2, 2)).unwrap();
        let m = gaussian_metrics(&collapsed, &truth).unwrap();
        assert_relative_eq!(get(&m, "squared_error_mean"), 0.0);
        assert_relative_eq!(get(&m, "trace_ratio"), 0.0);
        assert_relative_eq!(get(&m, "det_ratio"), 0.0);
        assert_relative_eq!(get(&m, "w2_sq"), 2.0, epsilon = 1e-12);

        let shifted = params_1d(3.0, 1.0);
        let truth1 = GaussianParams::isotropic(1, 1.0);
        let m = gaussian_metrics(&shifted, &truth1).unwrap();
        assert_relative_eq!(get(&m, "squared_error_mean"), 9.0);
        assert_relative_eq!(get(&m, "trace_ratio"), 1.0);
        assert_relative_eq!(get(&m, "det_ratio"), 1.0);
        assert_relative_eq!(get(&m, "w2_sq"), 9.0, epsilon = 1e-12);
    }

    #[test]
    fn metrics_isotropic_fast_path_matches_general() {
        let mut rng = RngStream::new(33).rng();
        for _ in 0..20 {
            let b = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let sigma = &b * b.transpose() + DMatrix::identity(3, 3) * 0.01;
            let mu = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let fit = GaussianParams::new(mu, sigma).unwrap();
            let truth = GaussianParams::isotropic(3, 1.7);
            let m = gaussian_metrics(&fit, &truth).unwrap();
            let w_fast = m.iter().find(|(n, _)| n == "w2_sq").unwrap().1;
            let w_gen = wasserstein2_sq(&fit, &truth).unwrap();
            assert!((w_fast - w_gen).abs() < 1e-10 * (1.0 + w_gen));
        }
    }

    #[test]
    fn variance_product_examples() {
        assert_relative_eq!(expected_variance_product(10, 1).unwrap(), 0.9);
        assert_relative_eq!(expected_variance_product(10, 2).unwrap(), 0.8775);
        assert_relative_eq!(expected_variance_product(7, 0).unwrap(), 1.0);
        assert_relative_eq!(expected_variance_product(1, 5).unwrap(), 0.0);
        assert!(expected_variance_product(0, 1).is_err());
    }

    #[test]
    fn variance_product_monotone_and_converges() {
        let mut prev = 1.0;
        for t in 1..=200 {
            let p = expected_variance_product(10, t).unwrap();
            assert!(p <= prev);
            prev = p;
        }
        let (limit, _) = theorem1_limits(10);
        let far = expected_variance_product(10, 10_000).unwrap();
        assert!((far - limit).abs() < 1e-4, "{far} vs {limit}");
    }

    #[test]
    fn theorem1_limit_examples() {
        let (v, m) = theorem1_limits(4);
        assert_relative_eq!(v, 2.0 / std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(m, 1.0 - 2.0 / std::f64::consts::PI, epsilon = 1e-12);

        let (v1, m1) = theorem1_limits(1);
        assert!(v1.abs() < 1e-12);
        assert!((m1 - 1.0).abs() < 1e-12);

        let (vbig, _) = theorem1_limits(100_000_000);
        assert!((vbig - 1.0).abs() < 1e-7);

        for n in 1..=50 {
            let (a, b) = theorem1_limits(n);
            assert_eq!(a + b, 1.0, "components must sum to exactly 1 at n={n}");
        }
    }

    #[test]
    fn incremental_adapter_fit_matches_two_pass_estimator() {
        let d = 3;
        let mut task = GaussianLoopTask::new(GaussianParams::isotropic(d, 1.0));
        let mut pool = sample_standard_normal(RngStream::new(61), 40, d, Origin::Real);
        let first = task.fit(TrainView::Fresh(&pool)).unwrap();
        let direct = fit_gaussian(&pool).unwrap();
        assert!((first.mu() - direct.mu()).amax() < 1e-12);
        assert!((first.sigma() - direct.sigma()).amax() < 1e-12);

        for g in 1..=5u32 {
            let prev_len = pool.len();
            let batch = sample_standard_normal(
                RngStream::new(61).substream_indexed("b", u64::from(g)),
                40,
                d,
                Origin::Synthetic { generation: g },
            );
            pool.extend_from(&batch).unwrap();
            let inc = task
                .fit(TrainView::Grown {
                    data: &pool,
                    new_from: prev_len,
                })
                .unwrap();
            let direct = fit_gaussian(&pool).unwrap();
            assert!((inc.mu() - direct.mu()).amax() < 1e-10, "gen {g}");
            assert!((inc.sigma() - direct.sigma()).amax() < 1e-10, "gen {g}");
        }
    }

    #[test]
    fn replace_variance_is_a_martingale_and_medians_fall() {
        // 1-D replace: the unbiased fitted variance keeps its expectation at
        // sigma_0^2 while the seed-median decays (almost-sure collapse).
        use crate::data::Workflow;
        use crate::engine::{run_loop, LoopConfig};
        let seeds = 600;
        let t_max = 30;
        let n = 100;
        let mut at = vec![Vec::with_capacity(seeds); t_max as usize];
        for s in 0..seeds {
            let stream = RngStream::new(9_000 + s as u64);
            let real = crate::datagen::generate_gaussian_real(&[0.0], 1.0, n, stream.substream("real")).unwrap();
            let test = crate::datagen::generate_gaussian_real(&[0.0], 1.0, 4, stream.substream("test")).unwrap();
            let mut task = GaussianLoopTask::new(GaussianParams::isotropic(1, 1.0));
            let cfg = LoopConfig {
                workflow: Workflow::Replace,
                n_per_iteration: n,
                num_iterations: t_max,
                seed: 9_000 + s as u64,
            };
            let series = run_loop(&cfg, &mut task, &real, &test).unwrap();
            for (i, (_, v)) in series.metric_values("trace_ratio").iter().enumerate() {
                at[i].push(*v);
            }
        }
        let sf = seeds as f64;
        for t in [9usize, 19, 29] {
            let mean: f64 = at[t].iter().sum::<f64>() / sf;
            let var: f64 = at[t].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (sf - 1.0);
            let se = (var / sf).sqrt();
            assert!((mean - 1.0).abs() <= 3.0 * se, "t={}: mean {mean} se {se}", t + 1);
        }
        let median = |v: &mut Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        let m10 = median(&mut at[9]);
        let m20 = median(&mut at[19]);
        let m30 = median(&mut at[29]);
        assert!(m10 > m20 && m20 > m30, "medians {m10} {m20} {m30}");
    }

    #[test]
    fn accumulate_mc_tracks_product_at_small_scale() {
        // Smoke-scale version of the acceptance criterion: n=10, t<=20.
        let mc = accumulate_theorem_mc(10, 20, 400, 1.0, RngStream::new(7));
        for &t in &[1usize, 10, 20] {
            let want = expected_variance_product(10, t as u32).unwrap();
            let got = mc.variance_mean[t - 1];
            let se = mc.variance_stderr[t - 1];
            assert!(
                (got - want).abs() <= 3.0 * se,
                "t={t}: {got} vs {want} (se {se})"
            );
            let want_err = 1.0 - want;
            let got_err = mc.mean_err_sq_mean[t - 1];
            let se_err = mc.mean_err_sq_stderr[t - 1];
            assert!(
                (got_err - want_err).abs() <= 3.0 * se_err,
                "t={t}: mean err {got_err} vs {want_err} (se {se_err})"
            );
        }
    }
}
