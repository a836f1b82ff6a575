//! Periodic lattices over flat (reduced) charts and the constant-coefficient
//! action of the holomorphic frame.
//!
//! A chart has `m` complex base coordinates `w^μ = x_μ + i y_μ`. Every real
//! direction is sampled uniformly, so a chart with `m = 2` and 16 points per
//! direction has `16^4` sites. Sites are stored row-major over the real axes
//! in the order `x_1, y_1, x_2, y_2, ...`, the last axis fastest.
//!
//! Frame vectors act as `Z_k = sum_μ A[k][μ] ∂/∂w^μ` with `∂/∂w = (∂_x - i ∂_y) / 2`.
//! Rows of `A` that vanish describe directions along which every field is
//! constant (the fibers of a reduced chart).

mod fd;
mod field;
mod ops;
mod snapshot;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

pub use fd::{fd_frame_derivative, fd_jet_partials, FdPartials};
pub use field::{Index, ScalarField, TensorField};
pub use ops::{
    first_eigenvalue, frame_derivative, integrate, l2_norm, norm_sq_contraction, sobolev_norm,
    sobolev_norm_by_words,
};
pub use snapshot::{read_snapshot, read_snapshot_file, text_export, write_snapshot, write_snapshot_file};

type C = Complex64;

#[derive(Clone)]
struct AxisPlan {
    len: usize,
    stride: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Periodic lattice plus frame action, with precomputed spectral symbols.
#[derive(Clone)]
pub struct LatticeChart {
    n: usize,
    m: usize,
    sizes: Vec<usize>,
    periods: Vec<f64>,
    frame_action: Vec<C>,
    volume: f64,
    sites: usize,
    plans: Vec<AxisPlan>,
    /// Symbol of `Z_k` over the frequency grid, `None` for zero rows.
    symbols: Vec<Option<Vec<C>>>,
    /// Symbol of `Z_k̄`.
    symbols_bar: Vec<Option<Vec<C>>>,
    /// Frequency indices with a Nyquist component on some axis.
    nyquist: Vec<usize>,
}

impl std::fmt::Debug for LatticeChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LatticeChart")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("sizes", &self.sizes)
            .field("periods", &self.periods)
            .field("frame_action", &self.frame_action)
            .field("volume", &self.volume)
            .finish()
    }
}

/// Signed integer frequency of index `j` on an axis of length `len`, and
/// whether it is the Nyquist index.
#[inline]
pub(crate) fn frequency(j: usize, len: usize) -> (i64, bool) {
    if 2 * j < len {
        (j as i64, false)
    } else if 2 * j == len {
        (-(len as i64) / 2, true)
    } else {
        (j as i64 - len as i64, false)
    }
}

impl LatticeChart {
    /// `sizes` lists the point count of every real axis (`2m` entries),
    /// `periods` one period per complex coordinate, `frame_action` the `n x m`
    /// matrix `A` row-major.
    pub fn new(n: usize, sizes: Vec<usize>, periods: Vec<f64>, frame_action: Vec<C>) -> Result<Self> {
        let m = periods.len();
        if m == 0 || m > n {
            return Err(Error::Chart(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
        }
        if sizes.len() != 2 * m {
            return Err(Error::Chart(format!(
                "{} real axes need {} sizes, got {}",
                2 * m,
                2 * m,
                sizes.len()
            )));
        }
        if let Some(s) = sizes.iter().find(|&&s| s < 8 || s % 2 != 0) {
            return Err(Error::Chart(format!("axis sizes must be even and >= 8, got {s}")));
        }
        if let Some(p) = periods.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Chart(format!("periods must be positive, got {p}")));
        }
        if frame_action.len() != n * m {
            return Err(Error::Chart(format!(
                "frame action must be {n} x {m}, got {} entries",
                frame_action.len()
            )));
        }
        let a = DMatrix::from_row_slice(n, m, &frame_action);
        if a.rank(1e-12) != m {
            return Err(Error::Chart(
                "frame action must have rank m (some base direction is invisible to all frame vectors)"
                    .into(),
            ));
        }

        let sites: usize = sizes.iter().product();
        let mut planner = FftPlanner::new();
        let mut plans = Vec::with_capacity(sizes.len());
        for (axis, &len) in sizes.iter().enumerate() {
            let stride = sizes[axis + 1..].iter().product();
            plans.push(AxisPlan {
                len,
                stride,
                forward: planner.plan_fft(len, FftDirection::Forward),
                inverse: planner.plan_fft(len, FftDirection::Inverse),
            });
        }

        let mut chart = LatticeChart {
            n,
            m,
            sizes,
            periods,
            frame_action,
            volume: 1.0,
            sites,
            plans,
            symbols: Vec::new(),
            symbols_bar: Vec::new(),
            nyquist: Vec::new(),
        };
        chart.build_symbols();
        Ok(chart)
    }

    /// Flat chart of a complex torus: `m = n`, `Z_k = ∂/∂w^k`.
    pub fn torus(n: usize, points: usize, period: f64) -> Result<Self> {
        let mut a = vec![C::new(0.0, 0.0); n * n];
        for k in 0..n {
            a[k * n + k] = C::new(1.0, 0.0);
        }
        LatticeChart::new(n, vec![points; 2 * n], vec![period; n], a)
    }

    /// Chart of fields pulled back from an `m`-dimensional base torus: the
    /// first `m` frame vectors are `∂/∂w^μ`, the remaining rows vanish.
    pub fn base_pullback(n: usize, m: usize, points: usize, period: f64) -> Result<Self> {
        let mut a = vec![C::new(0.0, 0.0); n * m];
        for k in 0..m.min(n) {
            a[k * m + k] = C::new(1.0, 0.0);
        }
        LatticeChart::new(n, vec![points; 2 * m], vec![period; m], a)
    }

    /// Rescales the per-site weight so the total measure is `volume`.
    pub fn with_volume(mut self, volume: f64) -> Result<Self> {
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(Error::Chart(format!("volume must be positive, got {volume}")));
        }
        self.volume = volume;
        Ok(self)
    }

    fn build_symbols(&mut self) {
        self.nyquist = (0..self.sites).filter(|&idx| self.frequencies(idx).iter().any(|f| f.1)).collect();
        let (n, m) = (self.n, self.m);
        let pi = std::f64::consts::PI;
        let i_unit = C::new(0.0, 1.0);
        // complex frequency ζ_μ = (p + i q) / L per coordinate, Nyquist removed
        let zetas: Vec<Vec<C>> = (0..self.sites)
            .map(|idx| {
                let freqs = self.frequencies(idx);
                (0..m)
                    .map(|mu| {
                        let (p, pn) = freqs[2 * mu];
                        let (q, qn) = freqs[2 * mu + 1];
                        let p = if pn { 0.0 } else { p as f64 };
                        let q = if qn { 0.0 } else { q as f64 };
                        C::new(p, q) / self.periods[mu]
                    })
                    .collect()
            })
            .collect();
        self.symbols = (0..n)
            .map(|k| {
                let row = &self.frame_action[k * m..(k + 1) * m];
                if row.iter().all(|a| a.norm() == 0.0) {
                    return None;
                }
                Some(
                    zetas
                        .iter()
                        .map(|z| {
                            (0..m).map(|mu| row[mu] * i_unit * pi * z[mu].conj()).sum::<C>()
                        })
                        .collect(),
                )
            })
            .collect();
        self.symbols_bar = (0..n)
            .map(|k| {
                let row = &self.frame_action[k * m..(k + 1) * m];
                if row.iter().all(|a| a.norm() == 0.0) {
                    return None;
                }
                Some(
                    zetas
                        .iter()
                        .map(|z| {
                            (0..m).map(|mu| row[mu].conj() * i_unit * pi * z[mu]).sum::<C>()
                        })
                        .collect(),
                )
            })
            .collect();
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn frame_action(&self) -> &[C] {
        &self.frame_action
    }

    pub fn frame_action_matrix(&self) -> DMatrix<C> {
        DMatrix::from_row_slice(self.n, self.m, &self.frame_action)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Constant density `dV` carried by each site.
    pub fn volume_weight(&self) -> f64 {
        self.volume / self.sites as f64
    }

    /// Finest grid spacing over all real axes.
    pub fn min_spacing(&self) -> f64 {
        self.sizes
            .iter()
            .enumerate()
            .map(|(axis, &len)| self.periods[axis / 2] / len as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether `Z_k` acts nontrivially.
    pub fn row_active(&self, k: usize) -> bool {
        self.symbols.get(k).is_some_and(Option::is_some)
    }

    /// Real coordinates `(x_1, y_1, ..., x_m, y_m)` of a site.
    pub fn point(&self, site: usize) -> Vec<f64> {
        let mut rest = site;
        let mut out = vec![0.0; self.sizes.len()];
        for axis in (0..self.sizes.len()).rev() {
            let len = self.sizes[axis];
            let j = rest % len;
            rest /= len;
            out[axis] = j as f64 * self.periods[axis / 2] / len as f64;
        }
        out
    }

    /// Multi-index of a site, one entry per real axis.
    pub fn multi_index(&self, site: usize) -> Vec<usize> {
        let mut rest = site;
        let mut out = vec![0; self.sizes.len()];
        for axis in (0..self.sizes.len()).rev() {
            out[axis] = rest % self.sizes[axis];
            rest /= self.sizes[axis];
        }
        out
    }

    /// Site at a (possibly out-of-range) multi-index, wrapped periodically.
    pub fn site_at(&self, index: &[i64]) -> usize {
        index.iter().zip(&self.sizes).fold(0usize, |acc, (&j, &len)| {
            acc * len + j.rem_euclid(len as i64) as usize
        })
    }

    /// Signed frequency pair for every real axis at a frequency-grid index.
    pub(crate) fn frequencies(&self, idx: usize) -> Vec<(i64, bool)> {
        self.multi_index(idx)
            .into_iter()
            .zip(&self.sizes)
            .map(|(j, &len)| frequency(j, len))
            .collect()
    }

    /// Symbol of `Z_k` (or `Z_k̄`), `None` for a zero row.
    pub fn symbol(&self, k: usize, conjugated: bool) -> Option<&[C]> {
        let table = if conjugated { &self.symbols_bar } else { &self.symbols };
        table.get(k).and_then(|s| s.as_deref())
    }

    /// Unnormalized forward DFT over all real axes, in place.
    pub fn forward(&self, data: &mut [C]) {
        self.transform(data, false);
    }

    /// Inverse DFT including the `1 / sites` normalization, in place.
    pub fn inverse(&self, data: &mut [C]) {
        self.transform(data, true);
        let scale = 1.0 / self.sites as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, data: &mut [C], inverse: bool) {
        assert_eq!(data.len(), self.sites, "field length does not match chart");
        let mut lines = Vec::new();
        for plan in &self.plans {
            let fft = if inverse { &plan.inverse } else { &plan.forward };
            if plan.stride == 1 {
                fft.process(data);
                continue;
            }
            let (len, stride) = (plan.len, plan.stride);
            let block = len * stride;
            lines.resize(data.len(), C::new(0.0, 0.0));
            for (src, dst) in data.chunks(block).zip(lines.chunks_mut(block)) {
                for s in 0..stride {
                    for j in 0..len {
                        dst[s * len + j] = src[j * stride + s];
                    }
                }
            }
            fft.process(&mut lines);
            for (dst, src) in data.chunks_mut(block).zip(lines.chunks(block)) {
                for s in 0..stride {
                    for j in 0..len {
                        dst[j * stride + s] = src[s * len + j];
                    }
                }
            }
        }
    }

    /// Removes every Fourier mode with a Nyquist index, which all symbols
    /// annihilate.
    pub fn remove_nyquist(&self, data: &mut [C]) {
        self.forward(data);
        for &idx in &self.nyquist {
            data[idx] = C::new(0.0, 0.0);
        }
        self.inverse(data);
    }

    /// Inverse transform of `spectrum * multiplier`.
    pub fn apply_multiplier(&self, spectrum: &[C], multiplier: &[C]) -> Vec<C> {
        let mut out: Vec<C> = spectrum.iter().zip(multiplier).map(|(a, b)| a * b).collect();
        self.inverse(&mut out);
        out
    }

    /// Inverse transform of `spectrum * s1 * s2`.
    pub fn apply_multiplier2(&self, spectrum: &[C], s1: &[C], s2: &[C]) -> Vec<C> {
        let mut out: Vec<C> =
            spectrum.iter().zip(s1.iter().zip(s2)).map(|(a, (b, c))| a * b * c).collect();
        self.inverse(&mut out);
        out
    }
}
