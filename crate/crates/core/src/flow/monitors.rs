use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{FlowConfig, FlowState};
use crate::discretization::{integrate, l2_norm, sobolev_norm, LatticeChart, ScalarField};
use crate::error::{Error, Result};
use crate::geometry::{background_traces, linalg, ChernGeometry, MetricField};

type C = Complex64;

/// One time sample of the monitored scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    pub step: usize,
    pub max_tr_bg: f64,
    pub max_tr_gb: f64,
    pub min_eig: f64,
    pub max_s: f64,
    /// `max (log S + b tr_ĝ g)` over sites with `S > 0`, `-inf` if there are none.
    pub g_max: f64,
    pub w_inf: f64,
    pub r2_l2: f64,
    pub r2_max: f64,
    pub offdiag_max: f64,
    pub variation: f64,
    /// `(m, ‖R̃‖_{H^m})`
    pub hm: Vec<(usize, f64)>,
    /// Energies `∫ |∇̂ f_r|^2 dV`; empty unless the metric is diagonal.
    pub a: Vec<f64>,
    /// Means `∫ f_r dV`; empty unless the metric is diagonal.
    pub means: Vec<f64>,
}

impl DiagnosticsRecord {
    pub const BASE_COLUMNS: [&'static str; 13] = [
        "t", "dt", "step", "max_tr_bg", "max_tr_gb", "min_eig", "max_S", "G_max", "w_inf", "r2_l2", "r2_max",
        "offdiag_max", "variation",
    ];

    pub fn columns(&self) -> Vec<String> {
        let mut c: Vec<String> = Self::BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
        c.extend(self.hm.iter().map(|(m, _)| format!("hm_{m}")));
        c.extend((1..=self.a.len()).map(|r| format!("a_{r}")));
        c.extend((1..=self.means.len()).map(|r| format!("mean_{r}")));
        c
    }

    /// Values in [`columns`](Self::columns) order.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.t,
            self.dt,
            self.step as f64,
            self.max_tr_bg,
            self.max_tr_gb,
            self.min_eig,
            self.max_s,
            self.g_max,
            self.w_inf,
            self.r2_l2,
            self.r2_max,
            self.offdiag_max,
            self.variation,
        ];
        v.extend(self.hm.iter().map(|(_, x)| *x));
        v.extend(&self.a);
        v.extend(&self.means);
        v
    }

    /// Value of a named column.
    pub fn get(&self, column: &str) -> Option<f64> {
        self.columns().iter().position(|c| c == column).map(|i| self.values()[i])
    }
}

/// `8 / min_x λ_min(g₀ relative to ĝ)`.
pub fn default_b_monitor(g0: &MetricField, ghat: &DMatrix<C>) -> f64 {
    let n = g0.n();
    let gh: Vec<C> = (0..n * n).map(|c| ghat[(c / n, c % n)]).collect();
    let mut v = vec![C::new(0.0, 0.0); n * n];
    let mut lo = f64::INFINITY;
    for site in 0..g0.sites() {
        g0.fill_site(site, &mut v);
        lo = lo.min(linalg::relative_eigenvalues(&v, &gh, n)[0]);
    }
    8.0 / lo
}

fn max(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// `∫ ĝ^{l̄k} Z_k f conj(Z_l f) dV` for real `f`.
fn energy(chart: &LatticeChart, f: &[f64], ghinv: &[C]) -> f64 {
    let n = chart.n();
    let mut spec: Vec<C> = f.iter().map(|x| C::new(*x, 0.0)).collect();
    chart.forward(&mut spec);
    let d: Vec<Option<Vec<C>>> = (0..n).map(|k| chart.symbol(k, false).map(|s| chart.apply_multiplier(&spec, s))).collect();
    let mut total = C::new(0.0, 0.0);
    for k in 0..n {
        let Some(dk) = &d[k] else { continue };
        for l in 0..n {
            let Some(dl) = &d[l] else { continue };
            let w = ghinv[l * n + k];
            total += w * dk.iter().zip(dl).map(|(a, b)| a * b.conj()).sum::<C>();
        }
    }
    total.re * chart.volume_weight()
}

/// Evaluates every monitor on the current state.
pub fn compute_monitors(state: &FlowState, config: &FlowConfig, b: f64) -> Result<DiagnosticsRecord> {
    let chart = &config.chart;
    let ghat = &config.background;
    let g = &state.g;
    let n = g.n();
    let geo = ChernGeometry::new(chart, g)?;
    let (tr_bg, tr_gb) = background_traces(g, ghat)?;
    let s = geo.gamma_norm_s()?;
    let g_max = max(s.iter().zip(&tr_bg).filter(|(s, _)| **s > 0.0).map(|(s, t)| s.ln() + b * t));
    let w = geo.torsion_trace_w()?;
    let rt = geo.second_chern_ricci()?;
    let flat = MetricField::constant(ghat, chart.sites())?;
    let hm = config
        .sobolev_orders
        .iter()
        .map(|&m| Ok((m, sobolev_norm(chart, &rt, m, ghat)?)))
        .collect::<Result<Vec<_>>>()?;
    let (mut a, mut means) = (Vec::new(), Vec::new());
    if config.diagonal_monitors() {
        let gh: Vec<C> = (0..n * n).map(|c| ghat[(c / n, c % n)]).collect();
        let mut ghinv = vec![C::new(0.0, 0.0); n * n];
        linalg::hermitian_inverse(&gh, n, &mut ghinv).map_err(|e| e.at_site(0))?;
        for r in 0..n {
            let f: Vec<f64> = match state.log_diagonal(config.mode) {
                Some(y) => y[r].iter().map(|v| v.re).collect(),
                None => g.component(r, r).iter().map(|v| v.re.ln()).collect(),
            };
            a.push(energy(chart, &f, &ghinv));
            means.push(integrate(chart, &ScalarField::from_real(f.iter().copied())).re);
        }
    }
    let record = DiagnosticsRecord {
        t: state.t,
        dt: state.dt_last,
        step: state.step_index,
        max_tr_bg: max(tr_bg.iter().copied()),
        max_tr_gb: max(tr_gb.iter().copied()),
        min_eig: g.min_eigenvalue(),
        max_s: max(s.iter().copied()),
        g_max,
        w_inf: w.max_norm_sq.sqrt(),
        r2_l2: l2_norm(chart, &rt, &flat)?,
        r2_max: rt.max_abs(),
        offdiag_max: g.max_offdiagonal(),
        variation: g.max_variation(),
        hm,
        a,
        means,
    };
    let finite = record.values().iter().enumerate().all(|(i, v)| v.is_finite() || (i == 7 && *v == f64::NEG_INFINITY));
    if !finite {
        return Err(Error::Consistency(format!("non-finite monitor at t = {}", state.t)));
    }
    Ok(record)
}

/// Least-squares fit `y ≈ a e^{-β t}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub amplitude: f64,
    pub rate: f64,
    pub points: usize,
    /// Root-mean-square residual of `log y`.
    pub rms: f64,
}

/// Fits `log y` against `t` by least squares.
pub fn fit_log_linear(t: &[f64], y: &[f64]) -> Result<DecayFit> {
    if t.len() != y.len() || t.len() < 2 {
        return Err(Error::Fit(format!("need at least two samples, got {}", t.len().min(y.len()))));
    }
    if let Some(bad) = y.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Fit(format!("nonpositive value {bad} in fit window")));
    }
    let k = t.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let tm = t.iter().sum::<f64>() / k;
    let ym = ly.iter().sum::<f64>() / k;
    let stt: f64 = t.iter().map(|x| (x - tm).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::Fit("all samples share one time".into()));
    }
    let sty: f64 = t.iter().zip(&ly).map(|(x, v)| (x - tm) * (v - ym)).sum();
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let rms = (t.iter().zip(&ly).map(|(x, v)| (v - intercept - slope * x).powi(2)).sum::<f64>() / k).sqrt();
    Ok(DecayFit { amplitude: intercept.exp(), rate: -slope, points: t.len(), rms })
}

/// Fits a named column over records with `t₁ <= t <= t₂`; needs at least
/// eight samples.
pub fn fit_decay(series: &[DiagnosticsRecord], column: &str, window: (f64, f64)) -> Result<DecayFit> {
    let mut t = Vec::new();
    let mut y = Vec::new();
    for r in series.iter().filter(|r| r.t >= window.0 && r.t <= window.1) {
        let v = r.get(column).ok_or_else(|| Error::Fit(format!("no column `{column}`")))?;
        t.push(r.t);
        y.push(v);
    }
    if t.len() < 8 {
        return Err(Error::Fit(format!("{} records in [{}, {}], need 8", t.len(), window.0, window.1)));
    }
    fit_log_linear(&t, &y)
}

/// Observations bearing on the long-time existence criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct LongTimeReport {
    pub records: usize,
    pub t_last: f64,
    pub sup_w_inf: f64,
    /// Supremum of `G_max` over records where it is defined.
    pub sup_g_max: Option<f64>,
    /// `(t, site)` if the run broke down.
    pub breakdown: Option<(f64, usize)>,
    /// Breakdown with `|w|_∞` at the last record at least ten times its
    /// initial value.
    pub w_blowup_with_breakdown: bool,
    pub max_tr_bg_nonincreasing: bool,
}

pub fn long_time_criterion(series: &[DiagnosticsRecord], breakdown: Option<&Error>) -> LongTimeReport {
    let sup_w_inf = max(series.iter().map(|r| r.w_inf));
    let g = max(series.iter().map(|r| r.g_max));
    let breakdown = match breakdown {
        Some(Error::Breakdown { t, site, .. }) => Some((*t, *site)),
        _ => None,
    };
    let grew = match (series.first(), series.last()) {
        (Some(a), Some(b)) => b.w_inf > 10.0 * a.w_inf && b.w_inf > 0.0,
        _ => false,
    };
    LongTimeReport {
        records: series.len(),
        t_last: series.last().map_or(0.0, |r| r.t),
        sup_w_inf,
        sup_g_max: (g > f64::NEG_INFINITY).then_some(g),
        breakdown,
        w_blowup_with_breakdown: breakdown.is_some() && grew,
        max_tr_bg_nonincreasing: series.windows(2).all(|w| w[1].max_tr_bg <= w[0].max_tr_bg),
    }
}
