//! Fourth-order central differences: an independent derivative path used to
//! cross-check the spectral one.

use num_complex::Complex64;

use super::{LatticeChart, TensorField};
use crate::error::{Error, Result};

type C = Complex64;

const OFFSETS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
const FIRST: [f64; 4] = [1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0];
const SECOND: [f64; 4] = [-1.0 / 12.0, 16.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
const SECOND_CENTER: f64 = -30.0 / 12.0;

/// `Z_k f` from grid neighbours along each real axis.
pub fn fd_frame_derivative(chart: &LatticeChart, f: &TensorField, k: usize, conjugated: bool) -> Result<TensorField> {
    if k >= chart.n() {
        return Err(Error::IndexOutOfRange { index: k, dim: chart.n() });
    }
    let m = chart.m();
    let row: Vec<C> = (0..m)
        .map(|mu| {
            let a = chart.frame_action()[k * m + mu];
            if conjugated { a.conj() } else { a }
        })
        .collect();
    // ∂/∂w = (∂_x - i ∂_y)/2, ∂/∂w̄ = (∂_x + i ∂_y)/2
    let y_sign = if conjugated { 1.0 } else { -1.0 };
    let axis_weights: Vec<C> = (0..2 * m)
        .map(|axis| {
            let mu = axis / 2;
            if axis % 2 == 0 { row[mu] * 0.5 } else { row[mu] * C::new(0.0, 0.5 * y_sign) }
        })
        .collect();
    let sites = chart.sites();
    let mut comps = Vec::with_capacity(f.components().len());
    for comp in f.components() {
        let mut out = vec![C::new(0.0, 0.0); sites];
        for (site, o) in out.iter_mut().enumerate() {
            let base: Vec<i64> = chart.multi_index(site).into_iter().map(|j| j as i64).collect();
            let mut acc = C::new(0.0, 0.0);
            for (axis, w) in axis_weights.iter().enumerate() {
                if w.norm() == 0.0 {
                    continue;
                }
                let h = chart.periods()[axis / 2] / chart.sizes()[axis] as f64;
                let mut d = C::new(0.0, 0.0);
                let mut idx = base.clone();
                for (off, c) in OFFSETS.iter().zip(FIRST) {
                    idx[axis] = base[axis] + *off as i64;
                    d += comp[chart.site_at(&idx)] * c;
                }
                acc += w * d / h;
            }
            *o = acc;
        }
        comps.push(out);
    }
    TensorField::from_components(f.dim(), f.shape().to_vec(), comps)
}

/// Real partial derivatives up to second order of a vector-valued function.
#[derive(Clone, Debug)]
pub struct FdPartials {
    pub value: Vec<C>,
    /// `first[a][c] = ∂_a f_c`
    pub first: Vec<Vec<C>>,
    /// `second[a * dims + b][c] = ∂_a ∂_b f_c`
    pub second: Vec<Vec<C>>,
    pub dims: usize,
}

/// Partials of `f` at `x` with stencil step `h` along every real axis.
pub fn fd_jet_partials(f: &dyn Fn(&[f64]) -> Vec<C>, x: &[f64], h: f64) -> FdPartials {
    let dims = x.len();
    let value = f(x);
    let nc = value.len();
    let shifted = |steps: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(a, s) in steps {
            y[a] += s * h;
        }
        f(&y)
    };
    let axpy = |acc: &mut Vec<C>, v: &[C], w: f64| {
        for (a, b) in acc.iter_mut().zip(v) {
            *a += b * w;
        }
    };
    let mut first = vec![vec![C::new(0.0, 0.0); nc]; dims];
    let mut second = vec![vec![C::new(0.0, 0.0); nc]; dims * dims];
    for a in 0..dims {
        for (off, (c1, c2)) in OFFSETS.iter().zip(FIRST.iter().zip(SECOND)) {
            let v = shifted(&[(a, *off)]);
            axpy(&mut first[a], &v, c1 / h);
            axpy(&mut second[a * dims + a], &v, c2 / (h * h));
        }
        axpy(&mut second[a * dims + a], &value, SECOND_CENTER / (h * h));
        for b in a + 1..dims {
            let mut acc = vec![C::new(0.0, 0.0); nc];
            for (oa, ca) in OFFSETS.iter().zip(FIRST) {
                for (ob, cb) in OFFSETS.iter().zip(FIRST) {
                    let v = shifted(&[(a, *oa), (b, *ob)]);
                    axpy(&mut acc, &v, ca * cb / (h * h));
                }
            }
            second[a * dims + b] = acc.clone();
            second[b * dims + a] = acc;
        }
    }
    FdPartials { value, first, second, dims }
}
