//! Small dense Hermitian matrices stored row-major as `&[C]`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::Error;

type C = Complex64;

/// Largest condition number tolerated before a metric counts as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug)]
pub struct InverseFailure {
    pub condition: f64,
    pub min_eig: f64,
}

impl InverseFailure {
    pub fn at_site(self, site: usize) -> Error {
        Error::SingularMetric { site, condition: self.condition, min_eig: self.min_eig }
    }
}

fn one_norm(a: &[C], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky.
///
/// Writes `out` so that `sum_k out[r][k] g[k][j] = δ_rj`, i.e. `out[a][b]`
/// is `g^{āb}`. Returns the 1-norm condition number. Failure of the
/// factorization or a condition number above [`MAX_CONDITION`] is reported
/// together with the smallest eigenvalue.
pub fn hermitian_inverse(g: &[C], n: usize, out: &mut [C]) -> Result<f64, InverseFailure> {
    debug_assert_eq!(g.len(), n * n);
    if n == 1 {
        let v = g[0].re;
        if !(v > 0.0) || !v.is_finite() {
            return Err(InverseFailure { condition: f64::INFINITY, min_eig: v });
        }
        out[0] = C::new(1.0 / v, 0.0);
        return Ok(1.0);
    }
    let fail = |cond: f64| InverseFailure { condition: cond, min_eig: min_eigenvalue(g, n) };

    // g = L L^H
    let mut l = [C::new(0.0, 0.0); 64];
    let mut l_heap;
    let l: &mut [C] = if n * n <= 64 {
        &mut l[..n * n]
    } else {
        l_heap = vec![C::new(0.0, 0.0); n * n];
        &mut l_heap
    };
    for j in 0..n {
        let mut d = g[j * n + j].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(fail(f64::INFINITY));
        }
        let djj = d.sqrt();
        l[j * n + j] = C::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / djj;
        }
    }
    // L^{-1} by forward substitution, stored in place of a fresh buffer
    let mut linv = vec![C::new(0.0, 0.0); n * n];
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) };
            for k in col..i {
                s -= l[i * n + k] * linv[k * n + col];
            }
            linv[i * n + col] = s / l[i * n + i].re;
        }
    }
    // g^{-1} = L^{-H} L^{-1}
    for i in 0..n {
        for j in 0..n {
            let mut s = C::new(0.0, 0.0);
            for k in i.max(j)..n {
                s += linv[k * n + i].conj() * linv[k * n + j];
            }
            out[i * n + j] = s;
        }
    }
    let cond = one_norm(g, n) * one_norm(out, n);
    if !(cond <= MAX_CONDITION) {
        return Err(fail(cond));
    }
    Ok(cond)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(g: &[C], n: usize) -> Vec<f64> {
    match n {
        1 => vec![g[0].re],
        2 => {
            let (a, d) = (g[0].re, g[3].re);
            let mean = 0.5 * (a + d);
            let r = (0.25 * (a - d) * (a - d) + g[1].norm_sqr()).sqrt();
            vec![mean - r, mean + r]
        }
        _ => {
            let m = DMatrix::from_row_slice(n, n, g);
            let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            ev.sort_by(|a, b| a.total_cmp(b));
            ev
        }
    }
}

pub fn min_eigenvalue(g: &[C], n: usize) -> f64 {
    hermitian_eigenvalues(g, n).first().copied().unwrap_or(f64::NAN)
}

pub fn max_eigenvalue(g: &[C], n: usize) -> f64 {
    hermitian_eigenvalues(g, n).last().copied().unwrap_or(f64::NAN)
}

/// Eigenvalues of `g` relative to `ĝ` (roots of `det(g - t ĝ) = 0`), ascending.
pub fn relative_eigenvalues(g: &[C], ghat: &[C], n: usize) -> Vec<f64> {
    // ĝ = L L^H, eigenvalues of L^{-1} g L^{-H}
    let gh = DMatrix::from_row_slice(n, n, ghat);
    let Some(chol) = gh.cholesky() else {
        return vec![f64::NAN; n];
    };
    let linv = chol.l().try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, C::new(f64::NAN, 0.0)));
    let gm = DMatrix::from_row_slice(n, n, g);
    let m = &linv * gm * linv.adjoint();
    let flat: Vec<C> = (0..n * n).map(|i| m[(i / n, i % n)]).collect();
    hermitian_eigenvalues(&flat, n)
}
