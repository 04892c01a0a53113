//! Generators for the toy datasets and for Gaussian / linear-regression
//! ground-truth data.
//!
//! Toy generator formulas, pinned:
//! * `circles` — outer points (cos t, sin t) and inner points
//!   factor*(cos t, sin t), angles equally spaced on [0, 2pi), the outer
//!   circle taking ceil(n/2) points;
//! * `moons` — upper arc (cos t, sin t) and lower arc (1 - cos t, 0.5 - sin t),
//!   t equally spaced on [0, pi] inclusive, split ceil/floor;
//! * `swiss_roll` — t uniform on [1.5pi, 4.5pi], point (t cos t, u, t sin t)
//!   with u uniform on [0, 21];
//! * `blobs` — centers drawn uniformly in [-10, 10]^d once per dataset, points
//!   assigned to a uniformly random center plus isotropic Gaussian spread.
//!
//! For circles/moons/swiss_roll, `noise` is the std-dev of additive isotropic
//! Gaussian noise applied after the base point. For blobs, `noise` is the
//! cluster std-dev itself (default 1).

use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::data::{Dataset, Origin};
use crate::error::{Error, Result};
use crate::linreg::{LinRegModel, LinRegTask};
use crate::rng::RngStream;

/// Default inner/outer radius ratio for `circles`.
pub const DEFAULT_CIRCLES_FACTOR: f64 = 0.8;
/// Default number of blob centers.
pub const DEFAULT_BLOB_CENTERS: usize = 3;
/// Default cluster std-dev for `blobs`.
pub const DEFAULT_BLOB_STD: f64 = 1.0;

/// Name-specific toy dataset parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum ToyKind {
    Blobs { n_features: usize, centers: usize },
    Circles { factor: f64 },
    Moons,
    SwissRoll,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyDatasetSpec {
    pub kind: ToyKind,
    pub n: usize,
    pub noise: f64,
}

impl ToyDatasetSpec {
    /// Build from a dataset name with per-dataset defaults
    /// (blobs: n_features 2, centers 3, cluster std 1; circles: factor 0.8).
    pub fn from_name(name: &str, n: usize, noise: Option<f64>) -> Result<Self> {
        let kind = match name {
            "blobs" => ToyKind::Blobs {
                n_features: 2,
                centers: DEFAULT_BLOB_CENTERS,
            },
            "circles" => ToyKind::Circles {
                factor: DEFAULT_CIRCLES_FACTOR,
            },
            "moons" => ToyKind::Moons,
            "swiss_roll" => ToyKind::SwissRoll,
            other => return Err(Error::UnknownDataset(other.to_string())),
        };
        let noise = noise.unwrap_or(match kind {
            ToyKind::Blobs { .. } => DEFAULT_BLOB_STD,
            _ => 0.0,
        });
        Ok(Self { kind, n, noise })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ToyKind::Blobs { n_features, .. } => n_features,
            ToyKind::Circles { .. } | ToyKind::Moons => 2,
            ToyKind::SwissRoll => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ToyKind::Blobs { .. } => "blobs",
            ToyKind::Circles { .. } => "circles",
            ToyKind::Moons => "moons",
            ToyKind::SwissRoll => "swiss_roll",
        }
    }
}

/// Angles equally spaced on [0, 2pi): i * 2pi / k.
fn full_circle_angles(k: usize) -> impl Iterator<Item = f64> {
    (0..k).map(move |i| 2.0 * PI * i as f64 / k as f64)
}

/// Angles equally spaced on [0, pi] inclusive; a single point sits at 0.
fn half_circle_angles(k: usize) -> impl Iterator<Item = f64> {
    (0..k).map(move |i| {
        if k <= 1 {
            0.0
        } else {
            PI * i as f64 / (k - 1) as f64
        }
    })
}

/// Generate one toy dataset; rows are tagged real, in a deterministic order
/// (outer/upper component first).
pub fn generate_toy(spec: &ToyDatasetSpec, stream: RngStream) -> Result<Dataset> {
    assert!(spec.n >= 1, "n must be positive");
    assert!(spec.noise >= 0.0, "noise must be non-negative");
    let dim = spec.dim();
    let mut rng = stream.rng();
    let mut base: Vec<f64> = Vec::with_capacity(spec.n * dim);

    match spec.kind {
        ToyKind::Circles { factor } => {
            let n_outer = spec.n.div_ceil(2);
            let n_inner = spec.n / 2;
            for t in full_circle_angles(n_outer) {
                base.extend_from_slice(&[t.cos(), t.sin()]);
            }
            for t in full_circle_angles(n_inner) {
                base.extend_from_slice(&[factor * t.cos(), factor * t.sin()]);
            }
        }
        ToyKind::Moons => {
            let n_upper = spec.n.div_ceil(2);
            let n_lower = spec.n / 2;
            for t in half_circle_angles(n_upper) {
                base.extend_from_slice(&[t.cos(), t.sin()]);
            }
            for t in half_circle_angles(n_lower) {
                base.extend_from_slice(&[1.0 - t.cos(), 0.5 - t.sin()]);
            }
        }
        ToyKind::SwissRoll => {
            for _ in 0..spec.n {
                let t = rng.random_range(1.5 * PI..4.5 * PI);
                let u = rng.random_range(0.0..21.0);
                base.extend_from_slice(&[t * t.cos(), u, t * t.sin()]);
            }
        }
        ToyKind::Blobs { n_features, centers } => {
            let mut center_coords = Vec::with_capacity(centers * n_features);
            for _ in 0..centers * n_features {
                center_coords.push(rng.random_range(-10.0..10.0));
            }
            for _ in 0..spec.n {
                let c = rng.random_range(0..centers);
                for k in 0..n_features {
                    let z: f64 = rng.sample(StandardNormal);
                    base.push(center_coords[c * n_features + k] + spec.noise * z);
                }
            }
            // Blob noise is the cluster spread itself; skip the additive pass.
            return Dataset::from_flat(dim, base, vec![Origin::Real; spec.n]);
        }
    }

    if spec.noise > 0.0 {
        for v in base.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += spec.noise * z;
        }
    }
    Dataset::from_flat(dim, base, vec![Origin::Real; spec.n])
}

/// Draw n i.i.d. rows from N(mu0, sigma0_sq * I), tagged real.
pub fn generate_gaussian_real(
    mu0: &[f64],
    sigma0_sq: f64,
    n: usize,
    stream: RngStream,
) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::TooFewSamples { required: 2, got: n });
    }
    assert!(sigma0_sq >= 0.0, "variance must be non-negative");
    let d = mu0.len();
    let sd = sigma0_sq.sqrt();
    let mut rng = stream.rng();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for &m in mu0 {
            let z: f64 = rng.sample(StandardNormal);
            data.push(m + sd * z);
        }
    }
    Dataset::from_flat(d, data, vec![Origin::Real; n])
}

/// Covariates x_i ~ N(0, I_d) and labels y_i = x_i . w* + eps_i with
/// eps_i ~ N(0, sigma_sq).
pub fn generate_linreg_data(task: &LinRegTask, n: usize, stream: RngStream) -> (Dataset, Vec<f64>) {
    assert!(n >= 1, "n must be positive");
    let d = task.dim();
    let mut rng = stream.rng();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        data.push(rng.sample::<f64, _>(StandardNormal));
    }
    let x = Dataset::from_flat(d, data, vec![Origin::Real; n]).expect("normal draws are finite");
    let model = LinRegModel {
        w_hat: task.w_star.clone(),
    };
    let y = crate::linreg::synth_labels_with_rng(&model, &x, task.sigma_sq, &mut rng);
    (x, y)
}
