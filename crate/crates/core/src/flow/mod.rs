//! Explicit RK4 integration of `∂ₜg = -R̃(g)` and its diagonal, conformal and
//! block-diagonal reductions.

mod monitors;
mod series;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::LieGroupSpec;
use crate::discretization::{LatticeChart, TensorField};
use crate::error::{Error, Result};
use crate::geometry::{linalg, par_sites, to_components, MetricField, MetricJets, Work};

pub use monitors::{
    compute_monitors, default_b_monitor, fit_decay, fit_log_linear, long_time_criterion, DecayFit,
    DiagnosticsRecord, LongTimeReport,
};
pub use series::{read_series, read_series_file, write_series, write_series_file};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Right-hand side used by the integrator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowMode {
    /// Every component of `g` evolves by `-R̃`.
    Full,
    /// `g = diag(e^{f_r})` with `ḟ_r = Δ_g f_r`.
    Diagonal,
    /// `g = e^u ĝ` with `u̇ = e^{-u} Δ_ĝ u`.
    Conformal,
    /// `g = [[h, 0], [0, k]]`: the leading `b x b` block `h` evolves by its own
    /// `-R̃_h`, the fiber block `k` is left unchanged.
    Block(usize),
}

impl std::fmt::Display for FlowMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlowMode::Full => write!(f, "full"),
            FlowMode::Diagonal => write!(f, "diagonal"),
            FlowMode::Conformal => write!(f, "conformal"),
            FlowMode::Block(b) => write!(f, "block({b})"),
        }
    }
}

impl std::str::FromStr for FlowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "full" => Ok(FlowMode::Full),
            "diagonal" => Ok(FlowMode::Diagonal),
            "conformal" => Ok(FlowMode::Conformal),
            _ => t
                .strip_prefix("block(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|b| b.trim().parse().ok())
                .map(FlowMode::Block)
                .ok_or_else(|| Error::Config(format!("unknown flow mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub spec: LieGroupSpec,
    pub chart: LatticeChart,
    pub initial: MetricField,
    /// Constant Chern-flat background `ĝ`.
    pub background: DMatrix<C>,
    pub mode: FlowMode,
    pub t_end: f64,
    pub cfl_sigma: f64,
    /// Coefficient `b` of `G = log S + b tr_ĝ g`; `None` uses [`default_b_monitor`].
    pub b_monitor: Option<f64>,
    pub record_every: usize,
    /// Keep a metric snapshot every this many steps (besides the first and last).
    pub snapshot_every: Option<usize>,
    pub sobolev_orders: Vec<usize>,
    pub max_steps: usize,
}

impl FlowConfig {
    pub fn new(spec: LieGroupSpec, chart: LatticeChart, initial: MetricField, mode: FlowMode) -> Self {
        let n = initial.n();
        FlowConfig {
            spec,
            chart,
            initial,
            background: DMatrix::identity(n, n),
            mode,
            t_end: 1.0,
            cfl_sigma: 0.2,
            b_monitor: None,
            record_every: 10,
            snapshot_every: None,
            sobolev_orders: Vec::new(),
            max_steps: 10_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.chart.n();
        if self.spec.n() != n || self.initial.n() != n {
            return Err(Error::Config(format!(
                "group, chart and metric dimensions differ ({}, {n}, {})",
                self.spec.n(),
                self.initial.n()
            )));
        }
        if self.initial.sites() != self.chart.sites() {
            return Err(Error::Config("initial metric does not match the chart".into()));
        }
        if self.background.nrows() != n || self.background.ncols() != n {
            return Err(Error::Config(format!("background metric must be {n} x {n}")));
        }
        MetricField::constant(&self.background, 1).map_err(|e| Error::Config(format!("background metric: {e}")))?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be finite and >= 0, got {}", self.t_end)));
        }
        if !(self.cfl_sigma > 0.0 && self.cfl_sigma <= 1.0) {
            return Err(Error::Config(format!("cfl_sigma must lie in (0, 1], got {}", self.cfl_sigma)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be positive".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::Config("snapshot_every must be positive".into()));
        }
        if let Some(b) = self.b_monitor {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Config(format!("b_monitor must be positive, got {b}")));
            }
        }
        let g = &self.initial;
        match self.mode {
            FlowMode::Full => {}
            FlowMode::Diagonal => {
                if g.max_offdiagonal() != 0.0 {
                    return Err(Error::Config("diagonal mode needs an exactly diagonal initial metric".into()));
                }
            }
            FlowMode::Conformal => {
                conformal_factor(g, &self.background)?;
            }
            FlowMode::Block(b) => {
                if b == 0 || b >= n {
                    return Err(Error::Config(format!("block size must lie in 1..{n}, got {b}")));
                }
                if let Some(k) = (b..n).find(|&k| self.chart.row_active(k)) {
                    return Err(Error::Config(format!(
                        "block mode needs fiber frame vectors acting trivially, but Z_{} differentiates",
                        k + 1
                    )));
                }
                for i in 0..n {
                    for j in 0..n {
                        let comp = g.component(i, j);
                        let (bi, bj) = (i < b, j < b);
                        if bi != bj && comp.iter().any(|v| *v != ZERO) {
                            return Err(Error::Config("block mode needs a zero off-diagonal block".into()));
                        }
                        if !bi && !bj && comp.iter().any(|v| *v != comp[0]) {
                            return Err(Error::Config("block mode needs a constant fiber block".into()));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn b(&self) -> f64 {
        self.b_monitor.unwrap_or_else(|| default_b_monitor(&self.initial, &self.background))
    }

    /// Whether the diagonal energies and means are monitored.
    pub fn diagonal_monitors(&self) -> bool {
        self.mode == FlowMode::Diagonal || self.initial.max_offdiagonal() == 0.0
    }
}

/// `u` with `g = e^u ĝ`, checked to `1e-12` relative.
fn conformal_factor(g: &MetricField, ghat: &DMatrix<C>) -> Result<Vec<C>> {
    let n = g.n();
    let gh: Vec<C> = (0..n * n).map(|c| ghat[(c / n, c % n)]).collect();
    let trace: C = (0..n).map(|i| gh[i * n + i]).sum();
    let mut u = Vec::with_capacity(g.sites());
    let mut v = vec![ZERO; n * n];
    for site in 0..g.sites() {
        g.fill_site(site, &mut v);
        let t: C = (0..n).map(|i| v[i * n + i]).sum();
        let e = t.re / trace.re;
        let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(e > 0.0) || v.iter().zip(&gh).any(|(a, b)| (a - b * e).norm() > 1e-12 * scale) {
            return Err(Error::Config(format!("conformal mode needs g = e^u ĝ, violated at site {site}")));
        }
        u.push(C::new(e.ln(), 0.0));
    }
    Ok(u)
}

/// Current time, metric and integrator bookkeeping.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub g: MetricField,
    pub dt_last: f64,
    pub step_index: usize,
    /// Evolved variables: metric components, `f_r`, `u` or the base block.
    y: Vec<Vec<C>>,
}

impl FlowState {
    pub fn initial(config: &FlowConfig) -> Result<Self> {
        config.validate()?;
        let chart = &config.chart;
        let mut g = config.initial.clone();
        let n = g.n();
        // Nyquist modes have zero symbols, so content there would never evolve
        let filter = |comps: &mut [Vec<C>]| {
            for comp in comps.iter_mut() {
                if comp.iter().any(|v| *v != comp[0]) {
                    chart.remove_nyquist(comp);
                }
            }
        };
        if matches!(config.mode, FlowMode::Full | FlowMode::Block(_)) {
            let mut t = g.into_tensor();
            filter(t.components_mut());
            g = MetricField::from_tensor_unchecked(t);
            g.symmetrize();
            if g.min_eigenvalue() <= 0.0 {
                return Err(Error::Config("initial metric is not positive after removing its Nyquist modes".into()));
            }
        }
        let mut y = match config.mode {
            FlowMode::Full => g.as_tensor().components().to_vec(),
            FlowMode::Diagonal => {
                (0..n).map(|r| g.component(r, r).iter().map(|v| C::new(v.re.ln(), 0.0)).collect()).collect()
            }
            FlowMode::Conformal => vec![conformal_factor(&g, &config.background)?],
            FlowMode::Block(b) => {
                let mut y = Vec::with_capacity(b * b);
                for i in 0..b {
                    for j in 0..b {
                        y.push(g.component(i, j).to_vec());
                    }
                }
                y
            }
        };
        if matches!(config.mode, FlowMode::Diagonal | FlowMode::Conformal) {
            filter(&mut y);
            for v in y.iter_mut().flatten() {
                v.im = 0.0;
            }
            g = metric_from(&y, config);
        }
        Ok(FlowState { t: 0.0, g, dt_last: 0.0, step_index: 0, y })
    }

    /// Evolved variables: metric components (full), `f_r` (diagonal), `u`
    /// (conformal) or the base block components (block).
    pub fn variables(&self) -> &[Vec<C>] {
        &self.y
    }

    /// `log g_{rr̄}` when `mode` is diagonal.
    pub fn log_diagonal(&self, mode: FlowMode) -> Option<&[Vec<C>]> {
        (mode == FlowMode::Diagonal).then_some(&self.y[..])
    }
}

fn as_breakdown(e: Error, t: f64) -> Error {
    match e {
        Error::SingularMetric { site, condition, min_eig } => Error::Breakdown {
            t,
            site,
            reason: format!("metric lost positive-definiteness (condition {condition:.3e}, smallest eigenvalue {min_eig:.3e})"),
        },
        other => other,
    }
}

/// Rebuilds the full metric from evolved variables.
fn metric_from(y: &[Vec<C>], config: &FlowConfig) -> MetricField {
    let n = config.chart.n();
    let sites = config.chart.sites();
    match config.mode {
        FlowMode::Full => {
            let t = TensorField::from_components(n, config.initial.as_tensor().shape().to_vec(), y.to_vec()).unwrap();
            MetricField::from_tensor_unchecked(t)
        }
        FlowMode::Diagonal => {
            let mut comps = vec![vec![ZERO; sites]; n * n];
            for (r, f) in y.iter().enumerate() {
                comps[r * n + r] = f.iter().map(|v| C::new(v.re.exp(), 0.0)).collect();
            }
            let t = TensorField::from_components(n, config.initial.as_tensor().shape().to_vec(), comps).unwrap();
            MetricField::from_tensor_unchecked(t)
        }
        FlowMode::Conformal => {
            let e: Vec<f64> = y[0].iter().map(|v| v.re.exp()).collect();
            let comps = (0..n * n)
                .map(|c| {
                    let gh = config.background[(c / n, c % n)];
                    e.iter().map(|x| gh * *x).collect()
                })
                .collect();
            let t = TensorField::from_components(n, config.initial.as_tensor().shape().to_vec(), comps).unwrap();
            MetricField::from_tensor_unchecked(t)
        }
        FlowMode::Block(b) => {
            let mut t = config.initial.as_tensor().clone();
            for i in 0..b {
                for j in 0..b {
                    t.component_mut(&[i, j]).clone_from(&y[i * b + j]);
                }
            }
            MetricField::from_tensor_unchecked(t)
        }
    }
}

fn neg_second_chern_ricci(chart: &LatticeChart, comps: &[&[C]], n: usize, rows: &[usize]) -> Result<Vec<Vec<C>>> {
    let jets = MetricJets::compute(chart, comps, n, rows);
    let v = par_sites(chart.sites(), n * n, n, |w: &mut Work, site, out| {
        w.load(&jets, site)?;
        crate::geometry::kernels::second_chern_ricci(&w.jet, &w.ginv, &mut w.scratch, out);
        for o in out.iter_mut() {
            *o = -*o;
        }
        Ok(())
    })?;
    Ok(to_components(&v, chart.sites(), n * n))
}

/// Fourier multiplier of `Σ_{k,l} w[l][k] Z_k Z_l̄` for constant weights.
fn laplacian_symbol(chart: &LatticeChart, weights: &[C]) -> Vec<C> {
    let n = chart.n();
    let mut sym = vec![ZERO; chart.sites()];
    for k in 0..n {
        let Some(sk) = chart.symbol(k, false) else { continue };
        for l in 0..n {
            let Some(sl) = chart.symbol(l, true) else { continue };
            let w = weights[l * n + k];
            if w == ZERO {
                continue;
            }
            for (s, (a, b)) in sym.iter_mut().zip(sk.iter().zip(sl)) {
                *s += w * a * b;
            }
        }
    }
    sym
}

fn rhs(y: &[Vec<C>], config: &FlowConfig, t: f64) -> Result<Vec<Vec<C>>> {
    let chart = &config.chart;
    let n = chart.n();
    let out = match config.mode {
        FlowMode::Full => {
            let comps: Vec<&[C]> = y.iter().map(Vec::as_slice).collect();
            let rows: Vec<usize> = (0..n).collect();
            neg_second_chern_ricci(chart, &comps, n, &rows)
        }
        FlowMode::Block(b) => {
            let comps: Vec<&[C]> = y.iter().map(Vec::as_slice).collect();
            let rows: Vec<usize> = (0..b).collect();
            neg_second_chern_ricci(chart, &comps, b, &rows)
        }
        FlowMode::Diagonal => Ok(diagonal_rhs(chart, y)),
        FlowMode::Conformal => {
            let gh: Vec<C> = (0..n * n).map(|c| config.background[(c / n, c % n)]).collect();
            let mut ghinv = vec![ZERO; n * n];
            linalg::hermitian_inverse(&gh, n, &mut ghinv).map_err(|e| e.at_site(0))?;
            let sym = laplacian_symbol(chart, &ghinv);
            let mut spec = y[0].clone();
            chart.forward(&mut spec);
            let lap = chart.apply_multiplier(&spec, &sym);
            Ok(vec![lap.iter().zip(&y[0]).map(|(l, u)| C::new(l.re * (-u.re).exp(), 0.0)).collect()])
        }
    };
    let mut out = out.map_err(|e| as_breakdown(e, t))?;
    // products alias into the Nyquist modes, which the symbols cannot damp
    for comp in out.iter_mut() {
        if comp.iter().any(|v| *v != comp[0]) {
            chart.remove_nyquist(comp);
        }
    }
    Ok(out)
}

/// `ḟ_r = Δ_g f_r = Σ_k e^{-f_k} Z_k Z_k̄ f_r` for `g = diag(e^{f_r})`.
pub fn diagonal_rhs(chart: &LatticeChart, f: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = f.len();
    let inv: Vec<Vec<f64>> = f.iter().map(|fk| fk.iter().map(|v| (-v.re).exp()).collect()).collect();
    let symbols: Vec<Option<Vec<C>>> = (0..n)
        .map(|k| {
            let (s, sb) = (chart.symbol(k, false)?, chart.symbol(k, true)?);
            Some(s.iter().zip(sb).map(|(a, b)| a * b).collect())
        })
        .collect();
    f.iter()
        .map(|fr| {
            let mut spec = fr.clone();
            chart.forward(&mut spec);
            let mut acc = vec![0.0; fr.len()];
            for (k, sym) in symbols.iter().enumerate() {
                let Some(sym) = sym else { continue };
                let d = chart.apply_multiplier(&spec, sym);
                for ((a, v), w) in acc.iter_mut().zip(d).zip(&inv[k]) {
                    *a += w * v.re;
                }
            }
            acc.into_iter().map(|v| C::new(v, 0.0)).collect()
        })
        .collect()
}

/// `m * max_x λ_max(A^H g^{-1}(x) A)`, bounding the principal symbol of `-Δ_g`
/// by `π^2 ρ / (2 h^2)`.
pub fn spectral_radius(chart: &LatticeChart, g: &MetricField) -> Result<f64> {
    let n = chart.n();
    let m = chart.m();
    let a = chart.frame_action().to_vec();
    let v = par_sites(chart.sites(), 1, n, |w, site, out| {
        g.fill_site(site, &mut w.jet.g);
        linalg::hermitian_inverse(&w.jet.g, n, &mut w.ginv).map_err(|e| e.at_site(site))?;
        let mut q = vec![ZERO; m * m];
        for mu in 0..m {
            for nu in 0..m {
                let mut s = ZERO;
                for k in 0..n {
                    for l in 0..n {
                        // (A^H G^{-1} A)_{μν} with the Laplacian weight g^{l̄k} on Z_k Z_l̄
                        s += a[l * m + mu].conj() * w.ginv[l * n + k] * a[k * m + nu];
                    }
                }
                q[mu * m + nu] = s;
            }
        }
        out[0] = C::new(linalg::max_eigenvalue(&q, m), 0.0);
        Ok(())
    })?;
    Ok(m as f64 * v.iter().map(|z| z.re).fold(0.0, f64::max))
}

/// Parabolic step size `σ h_min^2 / ρ`.
pub fn stable_dt(config: &FlowConfig, g: &MetricField) -> Result<f64> {
    let rho = spectral_radius(&config.chart, g)?;
    if !(rho > 0.0) {
        return Err(Error::DegenerateSymbol);
    }
    let h = config.chart.min_spacing();
    Ok(config.cfl_sigma * h * h / rho)
}

fn axpy(y: &[Vec<C>], k: &[Vec<C>], a: f64) -> Vec<Vec<C>> {
    y.iter().zip(k).map(|(yc, kc)| yc.iter().zip(kc).map(|(u, v)| u + v * a).collect()).collect()
}

/// One RK4 step of size `dt`.
pub fn step_with_dt(state: &FlowState, config: &FlowConfig, dt: f64) -> Result<FlowState> {
    let t = state.t;
    let y = &state.y;
    let k1 = rhs(y, config, t)?;
    let k2 = rhs(&axpy(y, &k1, dt / 2.0), config, t + dt / 2.0)?;
    let k3 = rhs(&axpy(y, &k2, dt / 2.0), config, t + dt / 2.0)?;
    let k4 = rhs(&axpy(y, &k3, dt), config, t + dt)?;
    let mut next: Vec<Vec<C>> = y.clone();
    for (c, yc) in next.iter_mut().enumerate() {
        for (s, v) in yc.iter_mut().enumerate() {
            *v += (k1[c][s] + (k2[c][s] + k3[c][s]) * 2.0 + k4[c][s]) * (dt / 6.0);
        }
    }
    let t_next = t + dt;
    let mut g = metric_from(&next, config);
    if matches!(config.mode, FlowMode::Full | FlowMode::Block(_)) {
        let scale = g.as_tensor().max_abs().max(1.0);
        let skew = g.symmetrize();
        if skew > 1e-11 * scale {
            return Err(Error::Consistency(format!("Hermitian skew residue {skew:.3e} after step at t = {t_next}")));
        }
        // write the symmetrized values back
        next = match config.mode {
            FlowMode::Full => g.as_tensor().components().to_vec(),
            FlowMode::Block(b) => {
                let mut y = Vec::with_capacity(b * b);
                for i in 0..b {
                    for j in 0..b {
                        y.push(g.component(i, j).to_vec());
                    }
                }
                y
            }
            _ => unreachable!(),
        };
        let n = g.n();
        let mut v = vec![ZERO; n * n];
        let mut inv = v.clone();
        for site in 0..g.sites() {
            g.fill_site(site, &mut v);
            linalg::hermitian_inverse(&v, n, &mut inv).map_err(|e| as_breakdown(e.at_site(site), t_next))?;
        }
    }
    if let Some(site) = next.iter().flat_map(|c| c.iter().enumerate()).find(|(_, v)| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Breakdown { t: t_next, site: site.0, reason: "non-finite value".into() });
    }
    Ok(FlowState { t: t_next, g, dt_last: dt, step_index: state.step_index + 1, y: next })
}

/// One RK4 step with the parabolic step size, clipped to end at `t_end`.
pub fn step(state: &FlowState, config: &FlowConfig) -> Result<FlowState> {
    let dt = stable_dt(config, &state.g).map_err(|e| as_breakdown(e, state.t))?;
    let remaining = config.t_end - state.t;
    let dt = if remaining > 0.0 && remaining < dt * (1.0 + 1e-9) { remaining } else { dt };
    step_with_dt(state, config, dt)
}

/// Metric at one point of a run.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub step: usize,
    pub g: MetricField,
}

#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: FlowState,
    pub snapshots: Vec<Snapshot>,
    /// The error that stopped the run early, if any.
    pub breakdown: Option<Error>,
}

/// Integrates to `t_end` (or breakdown), recording diagnostics every
/// `record_every` steps and at the end.
pub fn run(config: &FlowConfig) -> Result<RunOutput> {
    let mut state = FlowState::initial(config)?;
    let b = config.b();
    let mut records = vec![compute_monitors(&state, config, b)?];
    let mut snapshots = vec![Snapshot { t: 0.0, step: 0, g: state.g.clone() }];
    let mut breakdown = None;
    while state.t < config.t_end && state.step_index < config.max_steps {
        match step(&state, config) {
            Ok(next) => state = next,
            Err(e @ Error::Breakdown { .. }) => {
                breakdown = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
        let last = state.t >= config.t_end;
        if state.step_index % config.record_every == 0 || last {
            records.push(compute_monitors(&state, config, b)?);
        }
        if let Some(every) = config.snapshot_every {
            if state.step_index % every == 0 && !last {
                snapshots.push(Snapshot { t: state.t, step: state.step_index, g: state.g.clone() });
            }
        }
    }
    if breakdown.is_some() && records.last().map(|r| r.step) != Some(state.step_index) {
        records.push(compute_monitors(&state, config, b)?);
    }
    if snapshots.last().map(|s| s.step) != Some(state.step_index) {
        snapshots.push(Snapshot { t: state.t, step: state.step_index, g: state.g.clone() });
    }
    Ok(RunOutput { records, final_state: state, snapshots, breakdown })
}
