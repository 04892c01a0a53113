//! Small dense symmetric linear algebra used by every task-setting.
//!
//! Collapse drives fitted covariances toward singularity, so the
//! factorization path must keep working on PSD-but-singular and
//! almost-PSD inputs: [`cholesky`] falls over to an eigenvalue-clamped
//! factorization instead of aborting, and reports when it did.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative symmetry tolerance required by the factorization entry points.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Max |a_ij - a_ji| over the matrix.
fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    assert_eq!(a.nrows(), a.ncols(), "matrix must be square");
    let scale = a.amax().max(1e-300);
    let asym = max_asymmetry(a);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NonSymmetric {
            max_asym: asym,
            tol: SYMMETRY_TOL * scale,
        });
    }
    Ok(())
}

/// (A + Aᵀ)/2.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigendecomposition of a symmetric matrix: (eigenvalues, eigenvectors).
pub fn sym_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let se = symmetrize(a).symmetric_eigen();
    (se.eigenvalues, se.eigenvectors)
}

/// V·max(Λ, floor)·Vᵀ. Idempotent; a no-op (to round-off) on matrices whose
/// spectrum already sits at or above `floor`.
pub fn eigen_clamp(a: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    check_symmetric(a)?;
    let (mut vals, vecs) = sym_eigen(a);
    let mut touched = false;
    for v in vals.iter_mut() {
        if *v < floor {
            *v = floor;
            touched = true;
        }
    }
    if !touched {
        return Ok(symmetrize(a));
    }
    let scaled = &vecs * DMatrix::from_diagonal(&vals);
    Ok(symmetrize(&(scaled * vecs.transpose())))
}

/// Result of [`cholesky`]: a factor with `factor * factor.transpose()`
/// reproducing the (possibly clamped) input, plus a flag recording whether
/// eigenvalue clamping was applied.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    pub factor: DMatrix<f64>,
    /// True when the input was not numerically PD and the factorization went
    /// through the clamped eigendecomposition path.
    pub degenerate: bool,
}

/// Lower-triangular Cholesky factor of a symmetric matrix, with an
/// eigenvalue-clamp failover for inputs that are not numerically PD.
pub fn cholesky(a: &DMatrix<f64>) -> Result<CholeskyFactor> {
    check_symmetric(a)?;
    let sym = symmetrize(a);
    if let Some(ch) = sym.clone().cholesky() {
        return Ok(CholeskyFactor {
            factor: ch.l(),
            degenerate: false,
        });
    }
    let clamped = eigen_clamp(&sym, 0.0)?;
    Ok(CholeskyFactor {
        factor: psd_lower_factor(&clamped),
        degenerate: true,
    })
}

/// Pivot-tolerant lower-triangular factorization of a PSD matrix: columns
/// whose pivot falls below round-off scale are zeroed instead of failing.
fn psd_lower_factor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let tol = 1e-14 * a.diagonal().amax().max(1e-300);
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut s = a[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if s <= tol {
            // Singular direction; leave the column at zero.
            continue;
        }
        let d = s.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
    }
    l
}

/// Symmetric PSD square root via eigendecomposition, clamping negative
/// round-off eigenvalues at zero.
pub fn sqrt_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(a);
    let roots = vals.map(|v| v.max(0.0).sqrt());
    let scaled = &vecs * DMatrix::from_diagonal(&roots);
    symmetrize(&(scaled * vecs.transpose()))
}

/// Relative Frobenius distance ‖a−b‖_F / ‖b‖_F.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = b.norm().max(1e-300);
    (a - b).norm() / denom
}
