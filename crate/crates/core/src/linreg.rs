//! Linear-regression task-setting: iterative least squares on self-generated
//! labels.
//!
//! The loop redraws covariates i.i.d. N(0, I_d) each generation and injects
//! fresh label noise at the task's sigma^2 through [`synth_labels`]; labels,
//! not covariates, are the model's synthetic output. Fits use minimum-norm
//! least squares so rank-deficient cells (n < d) run through.
//!
//! For isotropic standard-normal covariates the excess prediction risk has
//! the closed form E[(x.w_hat - x.w*)^2] = ‖w_hat - w*‖², which
//! [`linreg_test_error`] reports, excluding the irreducible sigma^2 floor.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, Origin};
use crate::engine::{TaskAdapter, TrainView};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Ground truth: true weights and label-noise variance.
#[derive(Clone, Debug, PartialEq)]
pub struct LinRegTask {
    pub w_star: DVector<f64>,
    pub sigma_sq: f64,
}

impl LinRegTask {
    pub fn new(w_star: DVector<f64>, sigma_sq: f64) -> Self {
        assert!(sigma_sq >= 0.0, "sigma_sq must be non-negative");
        Self { w_star, sigma_sq }
    }

    /// Unit weight vector e_1: the process dynamics do not depend on where
    /// w* sits, so a fixed direction keeps cells comparable.
    pub fn canonical(dim: usize, sigma_sq: f64) -> Self {
        let mut w = DVector::zeros(dim);
        w[0] = 1.0;
        Self::new(w, sigma_sq)
    }

    pub fn dim(&self) -> usize {
        self.w_star.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinRegModel {
    pub w_hat: DVector<f64>,
}

/// Minimum-norm least squares: w = X⁺y. Exact interpolation when the system
/// is consistent, the minimum-norm minimizer when rank-deficient.
pub fn fit_ols(x: &Dataset, y: &[f64]) -> Result<LinRegModel> {
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n.max(1),
            got: y.len(),
        });
    }
    let d = x.dim();
    let design = DMatrix::from_fn(n, d, |i, j| x.row(i)[j]);
    let rhs = DVector::from_column_slice(y);
    let svd = design.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(1e-300);
    let w = svd.solve(&rhs, eps).expect("svd requested u and v_t");
    Ok(LinRegModel { w_hat: w })
}

/// y_i = x_i . w_hat + N(0, sigma_sq): the generative step of the loop.
pub fn synth_labels(model: &LinRegModel, x: &Dataset, sigma_sq: f64, stream: RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    synth_labels_with_rng(model, x, sigma_sq, &mut rng)
}

pub(crate) fn synth_labels_with_rng(
    model: &LinRegModel,
    x: &Dataset,
    sigma_sq: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    assert_eq!(x.dim(), model.w_hat.len(), "covariate dimension mismatch");
    assert!(sigma_sq >= 0.0);
    let sd = sigma_sq.sqrt();
    x.rows()
        .map(|row| {
            let mean: f64 = row.iter().zip(model.w_hat.iter()).map(|(a, b)| a * b).sum();
            if sd > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            } else {
                mean
            }
        })
        .collect()
}

/// Excess prediction risk ‖w_hat − w*‖² for isotropic standard-normal
/// covariates.
pub fn linreg_test_error(model: &LinRegModel, task: &LinRegTask) -> Result<f64> {
    if model.w_hat.len() != task.dim() {
        return Err(Error::DimensionMismatch {
            expected: task.dim(),
            got: model.w_hat.len(),
        });
    }
    Ok((&model.w_hat - &task.w_star).norm_squared())
}

/// Engine adapter. Rows are augmented covariate/label vectors [x..., y] of
/// width d+1; sampling redraws covariates and labels them with the current
/// fit plus fresh noise.
pub struct LinRegLoopTask {
    task: LinRegTask,
}

impl LinRegLoopTask {
    pub fn new(task: LinRegTask) -> Self {
        Self { task }
    }

    /// Assemble augmented rows from covariates and labels.
    pub fn augment(x: &Dataset, y: &[f64], origin: Origin) -> Dataset {
        assert_eq!(x.len(), y.len());
        let d = x.dim();
        let mut out = Dataset::empty(d + 1);
        let mut row = vec![0.0; d + 1];
        for (xr, &yi) in x.rows().zip(y) {
            row[..d].copy_from_slice(xr);
            row[d] = yi;
            out.push_row(&row, origin).expect("finite augmented row");
        }
        out
    }

    fn split(&self, data: &Dataset) -> (Dataset, Vec<f64>) {
        let d = self.task.dim();
        assert_eq!(data.dim(), d + 1, "expected augmented rows");
        let mut x = Dataset::empty(d);
        let mut y = Vec::with_capacity(data.len());
        for i in 0..data.len() {
            let row = data.row(i);
            x.push_row(&row[..d], data.origin(i)).expect("finite");
            y.push(row[d]);
        }
        (x, y)
    }
}

impl TaskAdapter for LinRegLoopTask {
    type Model = LinRegModel;

    fn task_name(&self) -> &'static str {
        "linear_regressions"
    }

    fn fit(&mut self, view: TrainView<'_>) -> Result<LinRegModel> {
        let (x, y) = self.split(view.data());
        fit_ols(&x, &y)
    }

    fn sample(&mut self, model: &LinRegModel, count: usize, stream: RngStream, generation: u32) -> Dataset {
        let d = self.task.dim();
        let mut rng = stream.rng();
        let mut data = Vec::with_capacity(count * d);
        for _ in 0..count * d {
            data.push(rng.sample::<f64, _>(StandardNormal));
        }
        let x = Dataset::from_flat(d, data, vec![Origin::Synthetic { generation }; count])
            .expect("normal draws are finite");
        let y = synth_labels_with_rng(model, &x, self.task.sigma_sq, &mut rng);
        Self::augment(&x, &y, Origin::Synthetic { generation })
    }

    fn evaluate(&mut self, model: &LinRegModel, _test: &Dataset) -> Vec<(String, f64)> {
        let err = linreg_test_error(model, &self.task).expect("dimensions fixed per run");
        vec![("test_error".into(), err)]
    }
}
