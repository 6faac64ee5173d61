//! Small dense helpers for the d×d matrices evaluated along paths.
//!
//! Matrices are row-major slices of length `d*d`. Dimensions up to
//! [`MAX_DIM`] are supported so per-step work stays on the stack.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

pub const MAX_DIM: usize = 4;

/// Ã = ½(A + Aᵀ).
pub fn symmetrize(a: &[f64], d: usize) -> Vec<f64> {
    let mut s = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            s[i * d + j] = 0.5 * (a[i * d + j] + a[j * d + i]);
        }
    }
    s
}

/// In-place lower Cholesky factor; `l` receives the row-major factor.
/// Returns `false` if the matrix is not positive definite.
#[inline]
pub fn cholesky_into(a: &[f64], d: usize, l: &mut [f64]) -> bool {
    for v in l[..d * d].iter_mut() {
        *v = 0.0;
    }
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return false;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    true
}

/// Solves L Lᵀ y = rhs given the lower factor.
#[inline]
pub fn cholesky_solve(l: &[f64], d: usize, rhs: &[f64], y: &mut [f64]) {
    for i in 0..d {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * d + k] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in i + 1..d {
            s -= l[k * d + i] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
}

/// out = L z for a lower-triangular row-major L.
#[inline]
pub fn lower_mul(l: &[f64], d: usize, z: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let mut s = 0.0;
        for k in 0..=i {
            s += l[i * d + k] * z[k];
        }
        out[i] = s;
    }
}

/// Lower-triangular σ with σσᵀ = Ã. Rejects asymmetric or indefinite input.
pub fn sigma_factor(a_sym: &[f64], d: usize) -> Result<Vec<f64>> {
    if a_sym.len() != d * d {
        return Err(invalid(format!("expected {} entries, got {}", d * d, a_sym.len())));
    }
    for i in 0..d {
        for j in 0..i {
            if a_sym[i * d + j] != a_sym[j * d + i] {
                return Err(invalid("sigma_factor requires a symmetric matrix"));
            }
        }
    }
    let mut l = vec![0.0; d * d];
    if !cholesky_into(a_sym, d, &mut l) {
        return Err(Error::Numerical("matrix is not positive definite".into()));
    }
    Ok(l)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a_sym: &[f64], d: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(d, d, a_sym);
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}
