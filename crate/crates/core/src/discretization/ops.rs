use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Index, LatticeChart, ScalarField, TensorField};
use crate::error::{Error, Result};
use crate::geometry::{linalg, MetricField};

type C = Complex64;

/// Spectral `Z_k f` (or `Z_k̄ f`), componentwise.
pub fn frame_derivative(chart: &LatticeChart, f: &TensorField, k: usize, conjugated: bool) -> Result<TensorField> {
    if k >= chart.n() {
        return Err(Error::IndexOutOfRange { index: k, dim: chart.n() });
    }
    if f.sites() != chart.sites() {
        return Err(Error::Shape(format!("field has {} sites, chart has {}", f.sites(), chart.sites())));
    }
    let Some(symbol) = chart.symbol(k, conjugated) else {
        return Ok(TensorField::zeros(f.dim(), f.shape().to_vec(), chart.sites()));
    };
    let comps = f
        .components()
        .iter()
        .map(|c| {
            let mut spec = c.clone();
            chart.forward(&mut spec);
            chart.apply_multiplier(&spec, symbol)
        })
        .collect();
    TensorField::from_components(f.dim(), f.shape().to_vec(), comps)
}

/// Riemann sum `sum_x f(x) dV`, exact for resolved trigonometric data.
pub fn integrate(chart: &LatticeChart, f: &ScalarField) -> C {
    let w = chart.volume_weight();
    f.values.iter().sum::<C>() * w
}

/// `|v|^2` at one site: every slot of `v` is paired with the matching slot of
/// `conj(v)` through `g` or its inverse (`ginv[a][b] = g^{āb}`).
pub fn norm_sq_contraction(shape: &[Index], v: &[C], n: usize, g: &[C], ginv: &[C]) -> C {
    let rank = shape.len();
    let mut u = v.to_vec();
    let mut next = vec![C::new(0.0, 0.0); u.len()];
    for (s, slot) in shape.iter().enumerate() {
        let inner = n.pow((rank - s - 1) as u32);
        let outer = n.pow(s as u32);
        next.iter_mut().for_each(|x| *x = C::new(0.0, 0.0));
        for o in 0..outer {
            for jj in 0..n {
                for ii in 0..n {
                    let weight = match slot {
                        Index::Lower => ginv[jj * n + ii],
                        Index::LowerBar => ginv[ii * n + jj],
                        Index::Upper => g[ii * n + jj],
                        Index::UpperBar => g[jj * n + ii],
                    };
                    if weight == C::new(0.0, 0.0) {
                        continue;
                    }
                    let src = (o * n + ii) * inner;
                    let dst = (o * n + jj) * inner;
                    for t in 0..inner {
                        next[dst + t] += weight * u[src + t];
                    }
                }
            }
        }
        std::mem::swap(&mut u, &mut next);
    }
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

/// `sqrt(∫ |v|^2_g dV)` with indices contracted by `g` and its inverse.
pub fn l2_norm(chart: &LatticeChart, v: &TensorField, g: &MetricField) -> Result<f64> {
    let n = v.dim();
    if v.rank() > 0 && g.n() != n {
        return Err(Error::Shape(format!("tensor dimension {n} but metric dimension {}", g.n())));
    }
    let sites = chart.sites();
    let mut total = 0.0;
    let mut gm = vec![C::new(0.0, 0.0); g.n() * g.n()];
    let mut ginv = gm.clone();
    let mut values = vec![C::new(0.0, 0.0); v.components().len()];
    for site in 0..sites {
        if v.rank() > 0 {
            g.fill_site(site, &mut gm);
            linalg::hermitian_inverse(&gm, g.n(), &mut ginv)
                .map_err(|e| e.at_site(site))?;
        }
        for (val, comp) in values.iter_mut().zip(v.components()) {
            *val = comp[site];
        }
        let q = norm_sq_contraction(v.shape(), &values, n, &gm, &ginv);
        total += q.re;
    }
    Ok((total * chart.volume_weight()).max(0.0).sqrt())
}

fn constant_metric_parts(ghat: &DMatrix<C>) -> Result<(Vec<C>, Vec<C>)> {
    let n = ghat.nrows();
    let g: Vec<C> = (0..n * n).map(|i| ghat[(i / n, i % n)]).collect();
    let mut ginv = vec![C::new(0.0, 0.0); n * n];
    linalg::hermitian_inverse(&g, n, &mut ginv).map_err(|e| e.at_site(0))?;
    Ok((g, ginv))
}

/// `H^m` norm built from all frame-derivative words of length `<= order`,
/// evaluated through Parseval: a word `w` multiplies each Fourier mode by the
/// product of its letter symbols, so the sum over words of length `j` is
/// `(sum_k |σ_k|^2 + |σ̄_k|^2)^j`.
pub fn sobolev_norm(chart: &LatticeChart, v: &TensorField, order: usize, ghat: &DMatrix<C>) -> Result<f64> {
    let n = v.dim();
    let (g, ginv) = if v.rank() > 0 { constant_metric_parts(ghat)? } else { (vec![], vec![]) };
    let spectra: Vec<Vec<C>> = v
        .components()
        .iter()
        .map(|c| {
            let mut s = c.clone();
            chart.forward(&mut s);
            s
        })
        .collect();
    let letters: Vec<&[C]> = (0..chart.n())
        .flat_map(|k| [chart.symbol(k, false), chart.symbol(k, true)])
        .flatten()
        .collect();
    let mut coeffs = vec![C::new(0.0, 0.0); spectra.len()];
    let mut total = 0.0;
    for idx in 0..chart.sites() {
        for (c, s) in coeffs.iter_mut().zip(&spectra) {
            *c = s[idx];
        }
        let q = norm_sq_contraction(v.shape(), &coeffs, n, &g, &ginv).re;
        if q == 0.0 {
            continue;
        }
        let lambda: f64 = letters.iter().map(|s| s[idx].norm_sqr()).sum();
        let mut weight = 0.0;
        let mut power = 1.0;
        for _ in 0..=order {
            weight += power;
            power *= lambda;
        }
        total += weight * q;
    }
    let sites = chart.sites() as f64;
    Ok((total * chart.volume_weight() / sites).max(0.0).sqrt())
}

/// Literal word-by-word evaluation of [`sobolev_norm`]: applies every word in
/// `Z_1..Z_n, Z_1̄..Z_n̄` of length `<= order` and sums squared `L^2` norms.
pub fn sobolev_norm_by_words(chart: &LatticeChart, v: &TensorField, order: usize, ghat: &DMatrix<C>) -> Result<f64> {
    let metric = MetricField::constant(ghat, chart.sites())?;
    let mut total = 0.0;
    let mut layer = vec![v.clone()];
    for depth in 0..=order {
        for w in &layer {
            total += l2_norm(chart, w, &metric)?.powi(2);
        }
        if depth == order {
            break;
        }
        let mut next = Vec::with_capacity(layer.len() * 2 * chart.n());
        for w in &layer {
            for k in 0..chart.n() {
                next.push(frame_derivative(chart, w, k, false)?);
                next.push(frame_derivative(chart, w, k, true)?);
            }
        }
        layer = next;
    }
    Ok(total.sqrt())
}

/// Smallest positive value of the symbol of `-Δ_ĝ = -ĝ^{l̄k} Z_k Z_l̄` over
/// the discrete frequency grid.
pub fn first_eigenvalue(chart: &LatticeChart, ghat: &DMatrix<C>) -> Result<f64> {
    let n = chart.n();
    if ghat.nrows() != n || ghat.ncols() != n {
        return Err(Error::Shape(format!("background metric must be {n} x {n}")));
    }
    let active: Vec<usize> = (0..n).filter(|&k| chart.row_active(k)).collect();
    if active.is_empty() {
        return Err(Error::DegenerateSymbol);
    }
    let (_, ginv) = constant_metric_parts(ghat)?;
    let mut best = f64::INFINITY;
    for idx in 1..chart.sites() {
        let mut val = C::new(0.0, 0.0);
        for &k in &active {
            let sk = chart.symbol(k, false).unwrap()[idx];
            for &l in &active {
                let sl = chart.symbol(l, true).unwrap()[idx];
                val -= ginv[l * n + k] * sk * sl;
            }
        }
        if val.re > 1e-12 && val.re < best {
            best = val.re;
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::DegenerateSymbol)
    }
}
