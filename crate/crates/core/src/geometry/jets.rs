use num_complex::Complex64;

use crate::discretization::{fd_jet_partials, LatticeChart};

type C = Complex64;

/// First and second frame derivatives of the metric at one site.
///
/// * `g[i*n + j] = g_{ij̄}`
/// * `d[(k*n + i)*n + j] = Z_k g_{ij̄}`
/// * `db[(l*n + i)*n + j] = Z_l̄ g_{ij̄}`
/// * `dd[((k*n + l)*n + i)*n + j] = Z_k Z_l̄ g_{ij̄}`
#[derive(Clone, Debug)]
pub struct SiteJet {
    pub n: usize,
    pub g: Vec<C>,
    pub d: Vec<C>,
    pub db: Vec<C>,
    pub dd: Vec<C>,
}

impl SiteJet {
    pub fn zeros(n: usize) -> Self {
        let z = C::new(0.0, 0.0);
        SiteJet { n, g: vec![z; n * n], d: vec![z; n * n * n], db: vec![z; n * n * n], dd: vec![z; n.pow(4)] }
    }
}

/// Spectral derivatives of every metric component over the whole lattice.
///
/// `rows[a]` is the chart frame row acting as the local frame vector `a`,
/// which lets a sub-block of the metric be differentiated on its own.
pub(crate) struct MetricJets {
    n: usize,
    g: Vec<Vec<C>>,
    // empty vectors stand for identically zero fields
    d: Vec<Vec<C>>,
    db: Vec<Vec<C>>,
    dd: Vec<Vec<C>>,
}

impl MetricJets {
    pub(crate) fn compute(chart: &LatticeChart, comps: &[&[C]], n: usize, rows: &[usize]) -> Self {
        debug_assert_eq!(comps.len(), n * n);
        debug_assert_eq!(rows.len(), n);
        let n2 = n * n;
        let mut d = vec![Vec::new(); n * n2];
        let mut db = vec![Vec::new(); n * n2];
        let mut dd = vec![Vec::new(); n * n * n2];
        let sym: Vec<Option<&[C]>> = rows.iter().map(|&r| chart.symbol(r, false)).collect();
        let symb: Vec<Option<&[C]>> = rows.iter().map(|&r| chart.symbol(r, true)).collect();
        for i in 0..n {
            for j in i..n {
                let c = i * n + j;
                // constant components have exactly zero derivatives
                if comps[c].iter().all(|v| *v == comps[c][0]) {
                    continue;
                }
                let mut spec = comps[c].to_vec();
                chart.forward(&mut spec);
                for k in 0..n {
                    if let Some(s) = sym[k] {
                        d[k * n2 + c] = chart.apply_multiplier(&spec, s);
                    }
                    if let Some(s) = symb[k] {
                        db[k * n2 + c] = chart.apply_multiplier(&spec, s);
                    }
                    for l in 0..n {
                        if let (Some(s), Some(t)) = (sym[k], symb[l]) {
                            dd[(k * n + l) * n2 + c] = chart.apply_multiplier2(&spec, s, t);
                        }
                    }
                }
            }
        }
        // g_{jī} = conj(g_{ij̄}) fixes the lower triangle
        let conj = |v: &Vec<C>| v.iter().map(|z| z.conj()).collect::<Vec<C>>();
        for i in 0..n {
            for j in 0..i {
                let (c, t) = (i * n + j, j * n + i);
                for k in 0..n {
                    d[k * n2 + c] = conj(&db[k * n2 + t]);
                    db[k * n2 + c] = conj(&d[k * n2 + t]);
                    for l in 0..n {
                        dd[(k * n + l) * n2 + c] = conj(&dd[(l * n + k) * n2 + t]);
                    }
                }
            }
        }
        MetricJets { n, g: comps.iter().map(|c| c.to_vec()).collect(), d, db, dd }
    }

    pub(crate) fn fill(&self, site: usize, jet: &mut SiteJet) {
        let z = C::new(0.0, 0.0);
        for (o, c) in jet.g.iter_mut().zip(&self.g) {
            *o = c[site];
        }
        for (o, c) in jet.d.iter_mut().zip(&self.d) {
            *o = if c.is_empty() { z } else { c[site] };
        }
        for (o, c) in jet.db.iter_mut().zip(&self.db) {
            *o = if c.is_empty() { z } else { c[site] };
        }
        for (o, c) in jet.dd.iter_mut().zip(&self.dd) {
            *o = if c.is_empty() { z } else { c[site] };
        }
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }
}

/// Site jet of an analytic metric `x -> g(x)` (row-major `n x n` values)
/// from fourth-order central differences with step `h`.
pub fn fd_site_jet(chart: &LatticeChart, metric: &dyn Fn(&[f64]) -> Vec<C>, x: &[f64], h: f64) -> SiteJet {
    let n = chart.n();
    let m = chart.m();
    let n2 = n * n;
    let p = fd_jet_partials(metric, x, h);
    let a = chart.frame_action();
    let half_i = C::new(0.0, 0.5);
    let mut jet = SiteJet::zeros(n);
    jet.g.copy_from_slice(&p.value);
    let dims = 2 * m;
    for k in 0..n {
        for mu in 0..m {
            let akm = a[k * m + mu];
            if akm.norm() == 0.0 {
                continue;
            }
            for c in 0..n2 {
                let dx = p.first[2 * mu][c];
                let dy = p.first[2 * mu + 1][c];
                // ∂/∂w = (∂_x - i ∂_y)/2, ∂/∂w̄ = (∂_x + i ∂_y)/2
                jet.d[k * n2 + c] += akm * (dx * 0.5 - half_i * dy);
                jet.db[k * n2 + c] += akm.conj() * (dx * 0.5 + half_i * dy);
            }
        }
    }
    for k in 0..n {
        for l in 0..n {
            for mu in 0..m {
                for nu in 0..m {
                    let coef = a[k * m + mu] * a[l * m + nu].conj() * 0.25;
                    if coef.norm() == 0.0 {
                        continue;
                    }
                    let (xm, ym, xn, yn) = (2 * mu, 2 * mu + 1, 2 * nu, 2 * nu + 1);
                    for c in 0..n2 {
                        let s = |a: usize, b: usize| p.second[a * dims + b][c];
                        let v = s(xm, xn) + s(ym, yn) + C::new(0.0, 1.0) * (s(xm, yn) - s(ym, xn));
                        jet.dd[(k * n + l) * n2 + c] += coef * v;
                    }
                }
            }
        }
    }
    jet
}
