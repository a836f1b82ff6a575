//! Chern connection, torsion, curvature and the scalar monitors built from
//! them, evaluated sitewise from spectral frame derivatives of the metric.

mod jets;
pub mod kernels;
pub mod linalg;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::LieGroupSpec;
use crate::discretization::{Index, LatticeChart, TensorField};
use crate::error::{Error, Result};

pub use jets::{fd_site_jet, SiteJet};
pub(crate) use jets::MetricJets;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const BLOCK: usize = 256;

/// Hermitian positive-definite `g_{ij̄}` at every site.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    field: TensorField,
}

impl MetricField {
    /// Validates shape, Hermitian symmetry (to `1e-12` relative) and
    /// positive-definiteness at every site.
    pub fn new(field: TensorField) -> Result<Self> {
        if field.shape() != [Index::Lower, Index::LowerBar] {
            return Err(Error::Shape(format!("metric must have shape (i, j̄), got {:?}", field.shape())));
        }
        let n = field.dim();
        let scale = field.max_abs().max(1.0);
        for i in 0..n {
            for j in i..n {
                let (a, b) = (field.component(&[i, j]), field.component(&[j, i]));
                for (site, (x, y)) in a.iter().zip(b).enumerate() {
                    let residue = (x - y.conj()).norm();
                    if residue > 1e-12 * scale {
                        return Err(Error::NotHermitian { site, residue });
                    }
                }
            }
        }
        let metric = MetricField { field };
        let mut g = vec![ZERO; n * n];
        let mut ginv = g.clone();
        for site in 0..metric.sites() {
            metric.fill_site(site, &mut g);
            linalg::hermitian_inverse(&g, n, &mut ginv).map_err(|e| e.at_site(site))?;
        }
        Ok(metric)
    }

    pub(crate) fn from_tensor_unchecked(field: TensorField) -> Self {
        MetricField { field }
    }

    pub fn identity(n: usize, sites: usize) -> Self {
        let comps = (0..n * n)
            .map(|c| vec![if c / n == c % n { C::new(1.0, 0.0) } else { ZERO }; sites])
            .collect();
        MetricField { field: TensorField::from_components(n, vec![Index::Lower, Index::LowerBar], comps).unwrap() }
    }

    pub fn constant(g: &DMatrix<C>, sites: usize) -> Result<Self> {
        let n = g.nrows();
        if g.ncols() != n {
            return Err(Error::Shape("metric matrix must be square".into()));
        }
        let comps = (0..n * n).map(|c| vec![g[(c / n, c % n)]; sites]).collect();
        MetricField::new(TensorField::from_components(n, vec![Index::Lower, Index::LowerBar], comps)?)
    }

    /// Samples `x -> g(x)` (row-major `n x n` values) at the chart's sites.
    pub fn from_fn(chart: &LatticeChart, f: impl Fn(&[f64]) -> Vec<C>) -> Result<Self> {
        let n = chart.n();
        let sites = chart.sites();
        let mut comps = vec![vec![ZERO; sites]; n * n];
        for site in 0..sites {
            let v = f(&chart.point(site));
            if v.len() != n * n {
                return Err(Error::Shape(format!("metric function returned {} values, expected {}", v.len(), n * n)));
            }
            for (c, val) in comps.iter_mut().zip(v) {
                c[site] = val;
            }
        }
        MetricField::new(TensorField::from_components(n, vec![Index::Lower, Index::LowerBar], comps)?)
    }

    pub fn n(&self) -> usize {
        self.field.dim()
    }

    pub fn sites(&self) -> usize {
        self.field.sites()
    }

    pub fn as_tensor(&self) -> &TensorField {
        &self.field
    }

    pub fn into_tensor(self) -> TensorField {
        self.field
    }

    pub fn component(&self, i: usize, j: usize) -> &[C] {
        self.field.component(&[i, j])
    }

    /// Row-major `g_{ij̄}` at one site.
    pub fn fill_site(&self, site: usize, out: &mut [C]) {
        for (o, c) in out.iter_mut().zip(self.field.components()) {
            *o = c[site];
        }
    }

    pub fn at(&self, site: usize) -> DMatrix<C> {
        let n = self.n();
        DMatrix::from_row_slice(n, n, &self.field.at_site(site))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.n();
        let mut g = vec![ZERO; n * n];
        (0..self.sites())
            .map(|s| {
                self.fill_site(s, &mut g);
                linalg::min_eigenvalue(&g, n)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest off-diagonal magnitude over all sites.
    pub fn max_offdiagonal(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = self.component(i, j).iter().map(|v| v.norm()).fold(worst, f64::max);
                }
            }
        }
        worst
    }

    /// Largest `|g(x) - g(x_0)|` over sites and components.
    pub fn max_variation(&self) -> f64 {
        self.field
            .components()
            .iter()
            .map(|c| c.iter().map(|v| (v - c[0]).norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Replaces `g` by `(g + g^H)/2` sitewise and returns the skew residue removed.
    pub fn symmetrize(&mut self) -> f64 {
        let n = self.n();
        let comps = self.field.components_mut();
        let mut worst = 0.0f64;
        for i in 0..n {
            for s in 0..comps[i * n + i].len() {
                let v = &mut comps[i * n + i][s];
                worst = worst.max(v.im.abs());
                v.im = 0.0;
            }
            for j in i + 1..n {
                let (lo, hi) = comps.split_at_mut(j * n + i);
                let a = &mut lo[i * n + j];
                let b = &mut hi[0];
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    worst = worst.max((*x - y.conj()).norm());
                    let mean = (*x + y.conj()) * 0.5;
                    *x = mean;
                    *y = mean.conj();
                }
            }
        }
        worst
    }
}

/// Per-thread buffers for sitewise kernels.
pub(crate) struct Work {
    pub jet: SiteJet,
    pub ginv: Vec<C>,
    pub scratch: Vec<C>,
    pub buf: Vec<C>,
}

impl Work {
    pub(crate) fn new(n: usize) -> Self {
        Work {
            jet: SiteJet::zeros(n),
            ginv: vec![ZERO; n * n],
            scratch: vec![ZERO; kernels::scratch_len(n)],
            buf: vec![ZERO; n.pow(4)],
        }
    }

    pub(crate) fn load(&mut self, jets: &MetricJets, site: usize) -> Result<()> {
        jets.fill(site, &mut self.jet);
        linalg::hermitian_inverse(&self.jet.g, self.jet.n, &mut self.ginv).map_err(|e| e.at_site(site))?;
        Ok(())
    }
}

/// Runs `f` at every site in parallel; `f` writes `width` values per site.
/// Returns the values site-major.
pub(crate) fn par_sites<F>(sites: usize, width: usize, n: usize, f: F) -> Result<Vec<C>>
where
    F: Fn(&mut Work, usize, &mut [C]) -> Result<()> + Sync + Send,
{
    let mut out = vec![ZERO; sites * width];
    if width == 0 || sites == 0 {
        return Ok(out);
    }
    out.par_chunks_mut(BLOCK * width)
        .enumerate()
        .try_for_each_init(
            || Work::new(n),
            |work, (b, chunk)| {
                for (i, o) in chunk.chunks_mut(width).enumerate() {
                    f(work, b * BLOCK + i, o)?;
                }
                Ok::<(), Error>(())
            },
        )?;
    Ok(out)
}

/// Site-major values to one field per component.
pub(crate) fn to_components(values: &[C], sites: usize, width: usize) -> Vec<Vec<C>> {
    let mut comps = vec![vec![ZERO; sites]; width];
    for (site, chunk) in values.chunks(width).enumerate() {
        for (c, v) in comps.iter_mut().zip(chunk) {
            c[site] = *v;
        }
    }
    comps
}

fn tensor(n: usize, shape: Vec<Index>, values: &[C], sites: usize) -> TensorField {
    let width = n.pow(shape.len() as u32);
    TensorField::from_components(n, shape, to_components(values, sites, width)).unwrap()
}

/// |w|_g^2 at every site and its maximum.
#[derive(Clone, Debug)]
pub struct TorsionTrace {
    pub w: TensorField,
    pub norm_sq: Vec<f64>,
    pub max_norm_sq: f64,
}

/// Spectral derivatives of one metric, shared by all kernels.
pub struct ChernGeometry<'a> {
    chart: &'a LatticeChart,
    jets: MetricJets,
}

impl<'a> ChernGeometry<'a> {
    pub fn new(chart: &'a LatticeChart, g: &MetricField) -> Result<Self> {
        if g.n() != chart.n() {
            return Err(Error::Shape(format!("metric dimension {} but chart dimension {}", g.n(), chart.n())));
        }
        if g.sites() != chart.sites() {
            return Err(Error::Shape(format!("metric has {} sites, chart has {}", g.sites(), chart.sites())));
        }
        let comps: Vec<&[C]> = g.as_tensor().components().iter().map(Vec::as_slice).collect();
        let rows: Vec<usize> = (0..g.n()).collect();
        Ok(ChernGeometry { chart, jets: MetricJets::compute(chart, &comps, g.n(), &rows) })
    }

    pub fn n(&self) -> usize {
        self.jets.n()
    }

    fn sites(&self) -> usize {
        self.chart.sites()
    }

    /// Metric jet at one site.
    pub fn jet(&self, site: usize) -> SiteJet {
        let mut jet = SiteJet::zeros(self.n());
        self.jets.fill(site, &mut jet);
        jet
    }

    fn map<F>(&self, width: usize, f: F) -> Result<Vec<C>>
    where
        F: Fn(&mut Work, usize, &mut [C]) -> Result<()> + Sync + Send,
    {
        let jets = &self.jets;
        par_sites(self.sites(), width, self.n(), |w, site, out| {
            w.load(jets, site)?;
            f(w, site, out)
        })
    }

    pub fn inverse_metric(&self) -> Result<TensorField> {
        let n = self.n();
        let v = self.map(n * n, |w, _, out| {
            out.copy_from_slice(&w.ginv);
            Ok(())
        })?;
        Ok(tensor(n, vec![Index::UpperBar, Index::Upper], &v, self.sites()))
    }

    pub fn christoffel(&self) -> Result<TensorField> {
        let n = self.n();
        let v = self.map(n * n * n, |w, _, out| {
            kernels::christoffel(&w.jet, &w.ginv, out);
            Ok(())
        })?;
        Ok(tensor(n, vec![Index::Lower, Index::Lower, Index::Upper], &v, self.sites()))
    }

    pub fn torsion(&self, spec: &LieGroupSpec) -> Result<TensorField> {
        let n = self.n();
        if spec.n() != n {
            return Err(Error::Shape(format!("group dimension {} but metric dimension {n}", spec.n())));
        }
        let c = spec.constants();
        let v = self.map(n * n * n, |w, _, out| {
            let gamma = &mut w.buf[..n * n * n];
            kernels::christoffel(&w.jet, &w.ginv, gamma);
            kernels::torsion(gamma, c, n, out);
            Ok(())
        })?;
        Ok(tensor(n, vec![Index::Lower, Index::Lower, Index::Upper], &v, self.sites()))
    }

    pub fn torsion_trace_w(&self) -> Result<TorsionTrace> {
        let n = self.n();
        // last slot carries |w|^2
        let v = self.map(n + 1, |w, site, out| {
            let gamma = &mut w.buf[..n * n * n];
            kernels::christoffel(&w.jet, &w.ginv, gamma);
            kernels::torsion_trace(gamma, n, &mut out[..n]);
            let (q, scale) = kernels::w_norm_sq(&out[..n], &w.ginv, n);
            out[n] = C::new(kernels::nonnegative_real(q, scale, site, "|w|^2")?, 0.0);
            Ok(())
        })?;
        let sites = self.sites();
        let mut comps = to_components(&v, sites, n + 1);
        let norm_sq: Vec<f64> = comps.pop().unwrap().into_iter().map(|z| z.re).collect();
        let max_norm_sq = norm_sq.iter().copied().fold(0.0, f64::max);
        let w = TensorField::from_components(n, vec![Index::Lower], comps)?;
        Ok(TorsionTrace { w, norm_sq, max_norm_sq })
    }

    pub fn curvature(&self) -> Result<TensorField> {
        let n = self.n();
        let v = self.map(n.pow(4), |w, _, out| {
            kernels::curvature(&w.jet, &w.ginv, &mut w.scratch, out);
            Ok(())
        })?;
        Ok(tensor(n, vec![Index::Lower, Index::LowerBar, Index::Lower, Index::LowerBar], &v, self.sites()))
    }

    /// Direct evaluation of `R̃_{rs̄}`, without the cross-check.
    pub fn second_chern_ricci_direct(&self) -> Result<Vec<C>> {
        let n = self.n();
        self.map(n * n, |w, _, out| {
            kernels::second_chern_ricci(&w.jet, &w.ginv, &mut w.scratch, out);
            Ok(())
        })
    }

    /// `R̃_{rs̄}` by the direct formula; in debug builds also traced from the
    /// full curvature and compared.
    pub fn second_chern_ricci(&self) -> Result<TensorField> {
        let n = self.n();
        let direct = self.second_chern_ricci_direct()?;
        if cfg!(debug_assertions) {
            let traced = self.second_chern_ricci_trace_values()?;
            let scale = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let floor = 1e-13 * self.jet_scale();
            let worst = direct.iter().zip(&traced).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            debug_assert!(
                worst <= 1e-10 * scale + floor,
                "second Chern-Ricci paths disagree: {worst:.3e} (scale {scale:.3e})"
            );
        }
        Ok(tensor(n, vec![Index::Lower, Index::LowerBar], &direct, self.sites()))
    }

    fn second_chern_ricci_trace_values(&self) -> Result<Vec<C>> {
        let n = self.n();
        self.map(n * n, |w, _, out| {
            let curv = &mut w.buf;
            kernels::curvature(&w.jet, &w.ginv, &mut w.scratch, curv);
            kernels::trace_first_pair(curv, &w.ginv, n, out);
            Ok(())
        })
    }

    /// `R̃_{rs̄} = g^{l̄k} R_{kl̄rs̄}` from the full curvature.
    pub fn second_chern_ricci_trace(&self) -> Result<TensorField> {
        let v = self.second_chern_ricci_trace_values()?;
        Ok(tensor(self.n(), vec![Index::Lower, Index::LowerBar], &v, self.sites()))
    }

    pub fn first_chern_ricci(&self) -> Result<TensorField> {
        let n = self.n();
        let v = self.map(n * n, |w, _, out| {
            let curv = &mut w.buf;
            kernels::curvature(&w.jet, &w.ginv, &mut w.scratch, curv);
            kernels::trace_second_pair(curv, &w.ginv, n, out);
            Ok(())
        })?;
        Ok(tensor(n, vec![Index::Lower, Index::LowerBar], &v, self.sites()))
    }

    /// `Δ_g f = g^{l̄k} Z_k Z_l̄ f`, componentwise.
    pub fn chern_laplacian(&self, f: &TensorField) -> Result<TensorField> {
        let n = self.n();
        if f.sites() != self.sites() {
            return Err(Error::Shape("field does not match chart".into()));
        }
        let ginv = self.map(n * n, |w, _, out| {
            out.copy_from_slice(&w.ginv);
            Ok(())
        })?;
        let chart = self.chart;
        let mut comps = Vec::with_capacity(f.components().len());
        for comp in f.components() {
            let mut spec = comp.clone();
            chart.forward(&mut spec);
            let mut acc = vec![ZERO; self.sites()];
            for k in 0..n {
                let Some(sk) = chart.symbol(k, false) else { continue };
                for l in 0..n {
                    let Some(sl) = chart.symbol(l, true) else { continue };
                    let d = chart.apply_multiplier2(&spec, sk, sl);
                    for (site, (a, v)) in acc.iter_mut().zip(d).enumerate() {
                        *a += ginv[site * n * n + l * n + k] * v;
                    }
                }
            }
            comps.push(acc);
        }
        TensorField::from_components(f.dim(), f.shape().to_vec(), comps)
    }

    /// `S = |Γ|^2_g` at every site.
    pub fn gamma_norm_s(&self) -> Result<Vec<f64>> {
        let n = self.n();
        let v = self.map(1, |w, site, out| {
            let gamma = &mut w.buf[..n * n * n];
            kernels::christoffel(&w.jet, &w.ginv, gamma);
            let (q, scale) = kernels::gamma_norm(&w.jet, gamma, &w.ginv, &mut w.scratch);
            out[0] = C::new(kernels::nonnegative_real(q, scale, site, "S")?, 0.0);
            Ok(())
        })?;
        Ok(v.into_iter().map(|z| z.re).collect())
    }

    /// `|T|^2_g` of a torsion-shaped field at every site.
    pub fn torsion_norm(&self, t: &TensorField) -> Result<Vec<f64>> {
        let n = self.n();
        if t.dim() != n || t.rank() != 3 {
            return Err(Error::Shape("torsion must be a rank-3 tensor in the metric dimension".into()));
        }
        let v = self.map(1, |w, site, out| {
            let tt = &mut w.buf[..n * n * n];
            for (o, c) in tt.iter_mut().zip(t.components()) {
                *o = c[site];
            }
            let (q, scale) = kernels::torsion_norm(tt, &w.jet.g, &w.ginv, n, &mut w.scratch);
            out[0] = C::new(kernels::nonnegative_real(q, scale, site, "|T|^2")?, 0.0);
            Ok(())
        })?;
        Ok(v.into_iter().map(|z| z.re).collect())
    }

    /// `|T̂|^2_g` with `T̂ = -c` constant.
    pub fn torsion_hat_norm(&self, spec: &LieGroupSpec) -> Result<Vec<f64>> {
        let n = self.n();
        let that: Vec<C> = spec.constants().iter().map(|c| -c).collect();
        let v = self.map(1, |w, site, out| {
            let (q, scale) = kernels::torsion_norm(&that, &w.jet.g, &w.ginv, n, &mut w.scratch);
            out[0] = C::new(kernels::nonnegative_real(q, scale, site, "|T̂|^2")?, 0.0);
            Ok(())
        })?;
        Ok(v.into_iter().map(|z| z.re).collect())
    }

    /// `max |Z_k Z_l̄ g| * max |g^{-1}|`, a magnitude for roundoff floors.
    fn jet_scale(&self) -> f64 {
        let n = self.n();
        let v = self.map(1, |w, _, out| {
            let dd = w.jet.dd.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let d = w.jet.d.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let gi = w.ginv.iter().map(|z| z.norm()).fold(0.0, f64::max);
            out[0] = C::new(n as f64 * gi * (dd + gi * d * d), 0.0);
            Ok(())
        });
        v.map(|v| v.iter().map(|z| z.re).fold(0.0, f64::max)).unwrap_or(0.0)
    }
}

pub fn inverse_metric(chart: &LatticeChart, g: &MetricField) -> Result<TensorField> {
    ChernGeometry::new(chart, g)?.inverse_metric()
}

pub fn christoffel(chart: &LatticeChart, g: &MetricField) -> Result<TensorField> {
    ChernGeometry::new(chart, g)?.christoffel()
}

pub fn torsion(chart: &LatticeChart, g: &MetricField, spec: &LieGroupSpec) -> Result<TensorField> {
    ChernGeometry::new(chart, g)?.torsion(spec)
}

pub fn torsion_trace_w(chart: &LatticeChart, g: &MetricField) -> Result<TorsionTrace> {
    ChernGeometry::new(chart, g)?.torsion_trace_w()
}

pub fn curvature(chart: &LatticeChart, g: &MetricField) -> Result<TensorField> {
    ChernGeometry::new(chart, g)?.curvature()
}

pub fn second_chern_ricci(chart: &LatticeChart, g: &MetricField) -> Result<TensorField> {
    ChernGeometry::new(chart, g)?.second_chern_ricci()
}

pub fn second_chern_ricci_trace(chart: &LatticeChart, g: &MetricField) -> Result<TensorField> {
    ChernGeometry::new(chart, g)?.second_chern_ricci_trace()
}

pub fn first_chern_ricci(chart: &LatticeChart, g: &MetricField) -> Result<TensorField> {
    ChernGeometry::new(chart, g)?.first_chern_ricci()
}

pub fn chern_laplacian(chart: &LatticeChart, g: &MetricField, f: &TensorField) -> Result<TensorField> {
    ChernGeometry::new(chart, g)?.chern_laplacian(f)
}

pub fn gamma_norm_s(chart: &LatticeChart, g: &MetricField) -> Result<Vec<f64>> {
    ChernGeometry::new(chart, g)?.gamma_norm_s()
}

pub fn torsion_norm(chart: &LatticeChart, g: &MetricField, t: &TensorField) -> Result<Vec<f64>> {
    ChernGeometry::new(chart, g)?.torsion_norm(t)
}

/// `tr_ĝ g` and `tr_g ĝ` at every site for a constant background `ĝ`.
pub fn background_traces(g: &MetricField, ghat: &DMatrix<C>) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = g.n();
    let gh: Vec<C> = (0..n * n).map(|c| ghat[(c / n, c % n)]).collect();
    let mut ghinv = vec![ZERO; n * n];
    linalg::hermitian_inverse(&gh, n, &mut ghinv).map_err(|e| e.at_site(0))?;
    let sites = g.sites();
    let v = par_sites(sites, 2, n, |w, site, out| {
        g.fill_site(site, &mut w.jet.g);
        linalg::hermitian_inverse(&w.jet.g, n, &mut w.ginv).map_err(|e| e.at_site(site))?;
        out[0] = kernels::trace_relative(&ghinv, &w.jet.g, n);
        out[1] = kernels::trace_relative(&w.ginv, &gh, n);
        Ok(())
    })?;
    Ok((v.iter().step_by(2).map(|z| z.re).collect(), v.iter().skip(1).step_by(2).map(|z| z.re).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{GroupName, LieGroupSpec};
    use std::f64::consts::PI;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    fn conformal(chart: &LatticeChart, u: impl Fn(&[f64]) -> f64) -> MetricField {
        let n = chart.n();
        MetricField::from_fn(chart, |x| {
            let e = u(x).exp();
            (0..n * n).map(|k| if k / n == k % n { c(e) } else { ZERO }).collect()
        })
        .unwrap()
    }

    #[test]
    fn metric_validation() {
        let t = TensorField::from_components(1, vec![Index::Lower, Index::LowerBar], vec![vec![c(-1.0); 4]]).unwrap();
        assert!(matches!(MetricField::new(t), Err(Error::SingularMetric { .. })));
        let comps = vec![vec![c(1.0); 4], vec![C::new(0.1, 0.2); 4], vec![C::new(0.1, 0.2); 4], vec![c(1.0); 4]];
        let t = TensorField::from_components(2, vec![Index::Lower, Index::LowerBar], comps).unwrap();
        assert!(matches!(MetricField::new(t), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn constant_metric_is_flat() {
        let chart = LatticeChart::torus(2, 8, 1.0).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[c(2.0), C::new(0.3, 0.1), C::new(0.3, -0.1), c(1.0)]);
        let g = MetricField::constant(&m, chart.sites()).unwrap();
        let geo = ChernGeometry::new(&chart, &g).unwrap();
        assert!(geo.christoffel().unwrap().max_abs() < 1e-13);
        assert!(geo.curvature().unwrap().max_abs() < 1e-13);
        assert!(geo.second_chern_ricci().unwrap().max_abs() < 1e-13);
        assert!(geo.gamma_norm_s().unwrap().iter().all(|&s| s < 1e-26));
        let inv = geo.inverse_metric().unwrap();
        let gi = inv.at_site(3);
        let prod = DMatrix::from_row_slice(2, 2, &gi) * &m;
        assert!((prod - DMatrix::<C>::identity(2, 2)).norm() < 1e-13);
    }

    #[test]
    fn conformal_identities() {
        // g = e^u I: Γ_{ij}^k = u_i δ_jk, R̃ = -(Δ̂u) I, S = n e^{-u} |∂u|^2
        let chart = LatticeChart::torus(2, 16, 1.0).unwrap();
        let u = |x: &[f64]| 0.2 * (2.0 * PI * x[0]).sin() + 0.1 * (2.0 * PI * (x[1] + x[2])).cos();
        let g = conformal(&chart, u);
        let geo = ChernGeometry::new(&chart, &g).unwrap();
        let uf = TensorField::scalar(crate::discretization::ScalarField::from_real(
            (0..chart.sites()).map(|s| u(&chart.point(s))),
        ));
        let du: Vec<TensorField> =
            (0..2).map(|k| crate::discretization::frame_derivative(&chart, &uf, k, false).unwrap()).collect();
        let gamma = geo.christoffel().unwrap();
        let flat = MetricField::identity(2, chart.sites());
        let lap = chern_laplacian(&chart, &flat, &uf).unwrap();
        let rt = geo.second_chern_ricci().unwrap();
        let s = geo.gamma_norm_s().unwrap();
        for site in (0..chart.sites()).step_by(97) {
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        let expect = if j == k { du[i].components()[0][site] } else { ZERO };
                        assert!((gamma.component(&[i, j, k])[site] - expect).norm() < 1e-11);
                    }
                    let expect = if i == j { -lap.components()[0][site] } else { ZERO };
                    // e^u is not band-limited; its tail at 16 points is ~1e-10
                    assert!((rt.component(&[i, j])[site] - expect).norm() < 1e-9);
                }
            }
            let grad: f64 = (0..2).map(|k| du[k].components()[0][site].norm_sqr()).sum();
            let expect = 2.0 * (-u(&chart.point(site))).exp() * grad;
            assert!((s[site] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn fd_jet_matches_spectral() {
        let chart = LatticeChart::torus(2, 16, 1.0).unwrap();
        let f = |x: &[f64]| {
            let a = 2.0 + 0.3 * (2.0 * PI * x[0]).sin() + 0.1 * (2.0 * PI * x[3]).cos();
            let b = C::new(0.2 * (2.0 * PI * x[1]).cos(), 0.1 * (2.0 * PI * x[2]).sin());
            let d = 1.5 + 0.2 * (2.0 * PI * (x[0] - x[3])).cos();
            vec![c(a), b, b.conj(), c(d)]
        };
        let g = MetricField::from_fn(&chart, f).unwrap();
        let geo = ChernGeometry::new(&chart, &g).unwrap();
        for site in [0, 1234, 40000, 65535] {
            let spec = geo.jet(site);
            let fd = fd_site_jet(&chart, &f, &chart.point(site), 1e-3);
            for (a, b) in spec.dd.iter().zip(&fd.dd) {
                assert!((a - b).norm() < 1e-6, "{a} {b}");
            }
            for (a, b) in spec.d.iter().zip(&fd.d) {
                assert!((a - b).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn torsion_of_constant_metric() {
        let chart = LatticeChart::base_pullback(3, 2, 8, 1.0).unwrap();
        let spec = LieGroupSpec::catalog(GroupName::Nil3, None).unwrap();
        let g = MetricField::identity(3, chart.sites());
        let geo = ChernGeometry::new(&chart, &g).unwrap();
        let t = geo.torsion(&spec).unwrap();
        // T(Z_1, Z_2) = -[Z_1, Z_2] = Z_3
        assert!((t.component(&[0, 1, 2])[5] - c(1.0)).norm() < 1e-14);
        assert!((t.component(&[1, 0, 2])[5] + c(1.0)).norm() < 1e-14);
        let norms = geo.torsion_norm(&t).unwrap();
        assert!((norms[0] - 2.0).abs() < 1e-13);
        let hat = geo.torsion_hat_norm(&spec).unwrap();
        assert!((hat[0] - 2.0).abs() < 1e-13);
        for i in 0..3 {
            let tr: C = (0..3).map(|r| t.component(&[i, r, r])[0]).sum();
            assert_eq!(tr, ZERO);
        }
    }

    #[test]
    fn symmetrize_removes_skew() {
        let comps = vec![vec![C::new(1.0, 1e-9)], vec![C::new(0.1, 0.2)], vec![C::new(0.1, -0.2 + 1e-9)], vec![c(1.0)]];
        let t = TensorField::from_components(2, vec![Index::Lower, Index::LowerBar], comps).unwrap();
        let mut g = MetricField::from_tensor_unchecked(t);
        let skew = g.symmetrize();
        assert!(skew > 0.0 && skew < 2e-9);
        assert!(g.as_tensor().hermitian_residue() == 0.0);
    }

    #[test]
    fn background_traces_of_scaled_identity() {
        let g = MetricField::constant(&(DMatrix::identity(2, 2) * c(3.0)), 4).unwrap();
        let (a, b) = background_traces(&g, &DMatrix::identity(2, 2)).unwrap();
        assert!((a[0] - 6.0).abs() < 1e-14 && (b[2] - 2.0 / 3.0).abs() < 1e-14);
    }
}
