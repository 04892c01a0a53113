//! Real/synthetic training mixtures: sweep (n_real, n_syn) cells, measure
//! test loss, and regress it on the transformed covariates
//! x1 = n_real^(-1/2) and x2 = log(n_real / (n_real + n_syn)).
//!
//! Synthetic data come from a source model fit on an independent real sample
//! of size `source_size`, not on the cell's own real points. Within a seed,
//! all cells share the held-out test set, all n_syn cells at one n_real share
//! the same real sample, and synthetic draws are nested prefixes of one pool,
//! so cell-to-cell differences isolate the effect of adding synthetic data.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, Origin};
use crate::datagen::{generate_gaussian_real, generate_linreg_data};
use crate::error::{Error, Result};
use crate::gaussian::fit_gaussian;
use crate::linreg::{fit_ols, linreg_test_error, synth_labels, LinRegTask};
use crate::rng::RngStream;
use crate::stats::{f_test_nested, ols, r_squared, OlsFit};

/// One grid cell: training mixture sizes, seed, and the measured test loss
/// (mean NLL for the Gaussian setting, excess risk for linear regression).
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureCell {
    pub n_real: usize,
    pub n_syn: usize,
    pub seed: u64,
    pub test_loss: f64,
}

/// Grid layout. `real_grid` values are >= 1 and strictly increasing;
/// `syn_grid` values are >= 0 and strictly increasing (0 gives the plain
/// real-data baseline).
#[derive(Clone, Debug)]
pub struct MixtureDesign {
    pub real_grid: Vec<usize>,
    pub syn_grid: Vec<usize>,
    pub seeds_per_cell: u32,
    /// Size m of the independent real sample the synthetic-source model is
    /// fit on.
    pub source_size: usize,
    /// Held-out real test points per seed (Gaussian setting).
    pub test_size: usize,
}

impl MixtureDesign {
    /// Powers of two spanning 4..4096 on both axes (plus the n_syn = 0
    /// baseline), source size 100.
    pub fn desk_scale(seeds_per_cell: u32) -> Self {
        let powers: Vec<usize> = (2..=12).map(|k| 1usize << k).collect();
        let mut syn = vec![0];
        syn.extend_from_slice(&powers);
        Self {
            real_grid: powers.clone(),
            syn_grid: syn,
            seeds_per_cell,
            source_size: 100,
            test_size: 2000,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.real_grid.is_empty() {
            return Err(Error::EmptyGrid("n_real".into()));
        }
        if self.syn_grid.is_empty() {
            return Err(Error::EmptyGrid("n_syn".into()));
        }
        let increasing = |g: &[usize]| g.windows(2).all(|w| w[0] < w[1]);
        assert!(increasing(&self.real_grid) && increasing(&self.syn_grid), "grids must be strictly increasing");
        assert!(*self.real_grid.first().unwrap() >= 2, "the covariance fit needs n_real >= 2");
        assert!(self.seeds_per_cell >= 1);
        assert!(self.source_size >= 2);
        assert!(self.test_size >= 1);
        Ok(())
    }
}

/// Which task-setting the mixture runs on.
#[derive(Clone, Debug)]
pub enum MixtureSetting {
    /// 1-D Gaussian fitting with ground truth N(0, sigma0_sq).
    Gaussian { sigma0_sq: f64 },
    /// Linear regression with canonical unit weights.
    LinReg { dim: usize, sigma_sq: f64 },
}

/// Mean Gaussian NLL of the fit over the test rows.
fn gaussian_nll(mu: f64, var: f64, test: &Dataset) -> f64 {
    let var = var.max(1e-300);
    let log_norm = 0.5 * (2.0 * std::f64::consts::PI * var).ln();
    let inv_two_var = 0.5 / var;
    let mut sum = 0.0;
    for row in test.rows() {
        let d = row[0] - mu;
        sum += log_norm + d * d * inv_two_var;
    }
    sum / test.len() as f64
}

/// Run a single (n_real, n_syn, seed) cell.
///
/// The stream discipline makes cells cohere across a grid without any shared
/// state: the real sample's stream depends only on (seed, n_real), the test
/// set and synthetic source only on the seed, and the synthetic pool is a
/// prefix-stable draw, so the cell at n_syn=64 trains on a superset of the
/// n_syn=32 cell's synthetic points.
pub fn run_mixture_cell(
    setting: &MixtureSetting,
    source_size: usize,
    test_size: usize,
    n_real: usize,
    n_syn: usize,
    seed: u64,
    base: RngStream,
) -> Result<MixtureCell> {
    assert!(n_real >= 2, "the covariance fit needs at least two real points");
    let seed_stream = base.substream_indexed("seed", seed);
    let test_loss = match setting {
        MixtureSetting::Gaussian { sigma0_sq } => {
            let test = generate_gaussian_real(&[0.0], *sigma0_sq, test_size.max(2), seed_stream.substream("test"))?;
            let source_sample =
                generate_gaussian_real(&[0.0], *sigma0_sq, source_size, seed_stream.substream("source"))?;
            let source = fit_gaussian(&source_sample)?;
            let mut train = generate_gaussian_real(
                &[0.0],
                *sigma0_sq,
                n_real,
                seed_stream.substream_indexed("real", n_real as u64),
            )?;
            if n_syn > 0 {
                let syn = crate::gaussian::sample_gaussian(
                    &source,
                    n_syn,
                    seed_stream.substream("syn"),
                    Origin::Synthetic { generation: 1 },
                );
                train.extend_from(&syn)?;
            }
            let fit = fit_gaussian(&train)?;
            gaussian_nll(fit.mu()[0], fit.sigma()[(0, 0)], &test)
        }
        MixtureSetting::LinReg { dim, sigma_sq } => {
            let task = LinRegTask::canonical(*dim, *sigma_sq);
            let (sx, sy) = generate_linreg_data(&task, source_size, seed_stream.substream("source"));
            let source = fit_ols(&sx, &sy)?;
            let (mut x, mut y) = generate_linreg_data(
                &task,
                n_real,
                seed_stream.substream_indexed("real", n_real as u64),
            );
            if n_syn > 0 {
                let (syn_x, _) = generate_linreg_data(&task, n_syn, seed_stream.substream("syncov"));
                let syn_y = synth_labels(&source, &syn_x, *sigma_sq, seed_stream.substream("synlab"));
                let mut tagged = Dataset::empty(*dim);
                for i in 0..syn_x.len() {
                    tagged.push_row(syn_x.row(i), Origin::Synthetic { generation: 1 })?;
                }
                x.extend_from(&tagged)?;
                y.extend(syn_y);
            }
            let fit = fit_ols(&x, &y)?;
            linreg_test_error(&fit, &task)?
        }
    };
    Ok(MixtureCell {
        n_real,
        n_syn,
        seed,
        test_loss,
    })
}

/// Run every (n_real, n_syn, seed) cell and record its test loss.
pub fn run_mixture_grid(
    design: &MixtureDesign,
    setting: &MixtureSetting,
    base: RngStream,
) -> Result<Vec<MixtureCell>> {
    design.validate()?;
    let mut cells = Vec::with_capacity(
        design.real_grid.len() * design.syn_grid.len() * design.seeds_per_cell as usize,
    );
    for seed in 0..u64::from(design.seeds_per_cell) {
        for &n_real in &design.real_grid {
            for &n_syn in &design.syn_grid {
                cells.push(run_mixture_cell(
                    setting,
                    design.source_size,
                    design.test_size,
                    n_real,
                    n_syn,
                    seed,
                    base,
                )?);
            }
        }
    }
    Ok(cells)
}

/// The regression covariates: x1 = n_real^(-1/2) (classical statistics says
/// log-likelihood scales this way with sample count) and
/// x2 = log(real / (real + synthetic)), which is 0 at n_syn = 0.
pub fn covariate_transform(cell: &MixtureCell) -> (f64, f64) {
    assert!(cell.n_real >= 1, "proportion covariate requires n_real >= 1");
    let x1 = 1.0 / (cell.n_real as f64).sqrt();
    let x2 = if cell.n_syn == 0 {
        0.0
    } else {
        ((cell.n_real as f64) / ((cell.n_real + cell.n_syn) as f64)).ln()
    };
    (x1, x2)
}

/// Per-model R² and the nested F-tests between one- and two-term models.
#[derive(Clone, Debug)]
pub struct MixtureAnalysis {
    pub n_cells: usize,
    pub r2_x1: f64,
    pub r2_x2: f64,
    pub r2_both: f64,
    /// (F, p) for adding x2 to the x1-only model.
    pub f_add_x2: (f64, f64),
    /// (F, p) for adding x1 to the x2-only model.
    pub f_add_x1: (f64, f64),
}

/// Fit the three OLS models of test_loss on {x1}, {x2}, {x1, x2} (with
/// intercept) and run both nested F-tests.
pub fn analyze_mixture(cells: &[MixtureCell]) -> Result<MixtureAnalysis> {
    if cells.len() < 3 {
        return Err(Error::TooFewSamples {
            required: 3,
            got: cells.len(),
        });
    }
    let n = cells.len();
    let y = DVector::from_fn(n, |i, _| cells[i].test_loss);
    let x: Vec<(f64, f64)> = cells.iter().map(covariate_transform).collect();

    let design_x1 = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i].0 });
    let design_x2 = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i].1 });
    let design_both = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => x[i].0,
        _ => x[i].1,
    });

    let fit = |design: &DMatrix<f64>| -> Result<OlsFit> {
        ols(design, &y).map_err(|e| match e {
            Error::RankDeficient => Error::Collinear,
            other => other,
        })
    };
    let fit_x1 = fit(&design_x1)?;
    let fit_x2 = fit(&design_x2)?;
    let fit_both = fit(&design_both)?;

    Ok(MixtureAnalysis {
        n_cells: n,
        r2_x1: r_squared(&fit_x1, &y)?,
        r2_x2: r_squared(&fit_x2, &y)?,
        r2_both: r_squared(&fit_both, &y)?,
        f_add_x2: f_test_nested(&fit_x1, &fit_both)?,
        f_add_x1: f_test_nested(&fit_x2, &fit_both)?,
    })
}

/// Where synthetic data helps and where it hurts, summarized per n_real.
#[derive(Clone, Debug)]
pub struct ScarceRealFinding {
    /// For each n_real: fraction of seeds in which some n_syn > 0 cell beats
    /// that seed's n_syn = 0 baseline.
    pub beat_baseline_fraction: Vec<(usize, f64)>,
    pub largest_n_real: usize,
    /// Fraction of seeds in which n_syn = 0 is the argmin cell at the
    /// largest n_real.
    pub argmin_zero_fraction: f64,
    /// Median test loss across seeds per (n_real, n_syn).
    pub median_curve: Vec<(usize, usize, f64)>,
}

impl ScarceRealFinding {
    pub fn report(&self) -> String {
        let mut out = String::from("flagged finding: value of synthetic data by real-data regime\n");
        for &(n_real, frac) in &self.beat_baseline_fraction {
            out.push_str(&format!(
                "  n_real={n_real:6}: synthetic beats the all-real baseline in {:.0}% of seeds\n",
                frac * 100.0
            ));
        }
        out.push_str(&format!(
            "  n_real={}: the all-real cell is the argmin in {:.0}% of seeds\n",
            self.largest_n_real,
            self.argmin_zero_fraction * 100.0
        ));
        out
    }
}

/// Summarize the scarce-vs-plentiful behaviour of a mixture grid whose
/// syn_grid includes the 0 baseline.
pub fn scarce_real_finding(cells: &[MixtureCell]) -> ScarceRealFinding {
    use std::collections::BTreeMap;
    let mut by_cell: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    let mut by_seed: BTreeMap<(usize, u64), Vec<(usize, f64)>> = BTreeMap::new();
    for c in cells {
        by_cell.entry((c.n_real, c.n_syn)).or_default().push(c.test_loss);
        by_seed.entry((c.n_real, c.seed)).or_default().push((c.n_syn, c.test_loss));
    }

    let median_curve: Vec<(usize, usize, f64)> = by_cell
        .iter()
        .map(|(&(nr, ns), losses)| {
            let mut v = losses.clone();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            (nr, ns, v[v.len() / 2])
        })
        .collect();

    let n_reals: Vec<usize> = {
        let mut v: Vec<usize> = by_cell.keys().map(|&(nr, _)| nr).collect();
        v.dedup();
        v
    };
    let largest_n_real = *n_reals.last().expect("nonempty grid");

    let mut beat = Vec::new();
    let mut argmin_zero = (0usize, 0usize);
    for &nr in &n_reals {
        let mut beaten = 0usize;
        let mut total = 0usize;
        for ((r, _), cells) in by_seed.iter().filter(|((r, _), _)| *r == nr) {
            debug_assert_eq!(*r, nr);
            let baseline = cells.iter().find(|(ns, _)| *ns == 0).map(|(_, l)| *l);
            let Some(baseline) = baseline else { continue };
            total += 1;
            let best_syn = cells
                .iter()
                .filter(|(ns, _)| *ns > 0)
                .map(|(_, l)| *l)
                .fold(f64::INFINITY, f64::min);
            if best_syn < baseline {
                beaten += 1;
            }
            if nr == largest_n_real {
                let argmin = cells
                    .iter()
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .map(|(ns, _)| *ns)
                    .unwrap();
                if argmin == 0 {
                    argmin_zero.0 += 1;
                }
                argmin_zero.1 += 1;
            }
        }
        if total > 0 {
            beat.push((nr, beaten as f64 / total as f64));
        }
    }

    ScarceRealFinding {
        beat_baseline_fraction: beat,
        largest_n_real,
        argmin_zero_fraction: if argmin_zero.1 > 0 {
            argmin_zero.0 as f64 / argmin_zero.1 as f64
        } else {
            0.0
        },
        median_curve,
    }
}
