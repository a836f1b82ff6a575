use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chernflow_core::algebra::validate_structure;
use chernflow_core::discretization::{first_eigenvalue, integrate, write_snapshot_file, ScalarField};
use chernflow_core::flow::{fit_decay, long_time_criterion, run, write_series_file, DiagnosticsRecord, FlowMode, RunOutput};
use chernflow_core::recipe::InitialMetric;
use chernflow_core::Error;

use crate::config::ExperimentConfig;

/// Convergence thresholds for the summary verdict.
pub const FLAT_R2: f64 = 1e-8;
pub const FLAT_VARIATION: f64 = 1e-6;

#[derive(Debug, Default)]
pub struct ValidateReport {
    pub lines: Vec<String>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

impl ValidateReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            let _ = writeln!(s, "{l}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        for e in &self.errors {
            let _ = writeln!(s, "error: {e}");
        }
        let _ = writeln!(s, "{}", if self.ok() { "valid" } else { "invalid" });
        s
    }
}

/// Structure, chart and initial-metric checks. Touches no files.
pub fn cmd_validate(cfg: &ExperimentConfig) -> ValidateReport {
    let mut r = ValidateReport::default();
    let spec = match cfg.spec() {
        Ok(s) => s,
        Err(e) => {
            r.errors.push(e.to_string());
            return r;
        }
    };
    let v = validate_structure(&spec);
    r.lines.push(format!(
        "group {}: antisymmetry {}, Jacobi {}, unimodular {}",
        cfg.group,
        yes(v.antisymmetric),
        yes(v.jacobi),
        yes(v.unimodular)
    ));
    if !v.is_lie_algebra() {
        r.errors.extend(v.failures.iter().cloned());
    } else if !v.unimodular {
        r.warnings.push(format!("{} is not unimodular, so it admits no lattice", cfg.group));
    }
    let chart = match cfg.chart.build() {
        Ok(c) => c,
        Err(e) => {
            r.errors.push(e.to_string());
            return r;
        }
    };
    r.lines.push(format!("chart: n = {}, m = {}, sizes {:?}, periods {:?}", chart.n(), chart.m(), chart.sizes(), chart.periods()));
    match cfg.flow_config() {
        Ok(f) => match f.validate() {
            Ok(()) => r.lines.push(format!(
                "initial metric: {} recipe, min eigenvalue {:.6e}, mode {}",
                cfg.metric.kind(),
                f.initial.min_eigenvalue(),
                f.mode
            )),
            Err(e) => r.errors.push(e.to_string()),
        },
        Err(e) => r.errors.push(e.to_string()),
    }
    r
}

fn yes(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

/// Files and figures of a finished run.
#[derive(Debug)]
pub struct FlowSummary {
    pub text: String,
    pub series_path: PathBuf,
    pub snapshot_paths: Vec<PathBuf>,
    pub output: RunOutput,
    pub converged: bool,
}

impl FlowSummary {
    pub fn broke_down(&self) -> bool {
        self.output.breakdown.is_some()
    }
}

fn write_outputs(cfg: &ExperimentConfig, out: &RunOutput, chart: &chernflow_core::discretization::LatticeChart) -> anyhow::Result<(PathBuf, Vec<PathBuf>)> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let series = cfg.output_dir.join(format!("{}.csv", cfg.name));
    write_series_file(&series, &out.records)?;
    let mut snaps = Vec::new();
    for s in &out.snapshots {
        let p = cfg.output_dir.join(format!("{}_{:08}.chfs", cfg.name, s.step));
        write_snapshot_file(&p, chart, s.g.as_tensor(), s.t)?;
        snaps.push(p);
    }
    Ok((series, snaps))
}

fn extremes(records: &[DiagnosticsRecord]) -> String {
    let max = |f: fn(&DiagnosticsRecord) -> f64| records.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let min = |f: fn(&DiagnosticsRecord) -> f64| records.iter().map(f).fold(f64::INFINITY, f64::min);
    let mut s = String::new();
    let _ = writeln!(s, "sup max tr_ĝ g      {:.6e}", max(|r| r.max_tr_bg));
    let _ = writeln!(s, "sup max tr_g ĝ      {:.6e}", max(|r| r.max_tr_gb));
    let _ = writeln!(s, "inf min eigenvalue  {:.6e}", min(|r| r.min_eig));
    let _ = writeln!(s, "sup max S           {:.6e}", max(|r| r.max_s));
    let _ = writeln!(s, "sup max off-diag    {:.6e}", max(|r| r.offdiag_max));
    s
}

/// Runs the flow, writes the series CSV, snapshots and `<name>_summary.txt`.
pub fn cmd_flow(cfg: &ExperimentConfig) -> anyhow::Result<FlowSummary> {
    let fc = cfg.flow_config()?;
    let out = run(&fc)?;
    let (series_path, snapshot_paths) = write_outputs(cfg, &out, &fc.chart)?;
    let first = &out.records[0];
    let last = out.records.last().unwrap();
    let mut text = String::new();
    let _ = writeln!(text, "run {} ({} on {}, mode {})", cfg.name, cfg.metric.kind(), cfg.group, fc.mode);
    let _ = writeln!(text, "steps {}, t = {:.6}, records {}", out.final_state.step_index, out.final_state.t, out.records.len());
    let _ = writeln!(text, "final max|R̃|        {:.6e}", last.r2_max);
    let _ = writeln!(text, "final ‖R̃‖_L2        {:.6e}", last.r2_l2);
    let _ = writeln!(text, "final variation     {:.6e}", last.variation);
    text.push_str(&extremes(&out.records));
    let report = long_time_criterion(&out.records, out.breakdown.as_ref());
    let _ = writeln!(text, "sup |w|_g           {:.6e}", report.sup_w_inf);
    match report.sup_g_max {
        Some(g) => {
            let _ = writeln!(text, "sup G_max           {g:.6e} (b = {:.6})", fc.b());
        }
        None => {
            let _ = writeln!(text, "sup G_max           undefined (S = 0 everywhere)");
        }
    }
    let drift = field_drift(&fc.initial, &out.final_state.g);
    let converged = out.breakdown.is_none() && last.r2_max <= FLAT_R2 && last.variation <= FLAT_VARIATION;
    if let Some(e) = &out.breakdown {
        let _ = writeln!(text, "verdict: breakdown, {e}");
        if report.w_blowup_with_breakdown {
            let _ = writeln!(text, "|w|_g grew by more than 10x before the breakdown");
        }
    } else if first.r2_max == 0.0 {
        let _ = writeln!(text, "verdict: fixed point, drift {drift:.3e}{}", if drift <= 1e-13 { " <= 1e-13" } else { "" });
    } else if converged {
        let _ = writeln!(text, "verdict: converged to a Chern-flat metric");
    } else {
        let _ = writeln!(text, "verdict: not converged by t = {}", out.final_state.t);
    }
    if matches!(cfg.metric, InitialMetric::Conformal { .. }) || fc.mode == FlowMode::Conformal {
        // f = tr_ĝ g / n tends to its initial average when n = 1
        let n = fc.initial.n() as f64;
        let f0 = conformal_f(&fc.initial, &fc.background);
        let predicted = integrate(&fc.chart, &ScalarField::from_real(f0)).re / fc.chart.volume();
        let f1 = conformal_f(&out.final_state.g, &fc.background);
        let err = f1.iter().map(|v| (v - predicted).abs()).fold(0.0, f64::max);
        let _ = writeln!(text, "conformal factor: predicted limit ∫f₀ dV / V = {predicted:.12}, max deviation {err:.3e}{}", if n > 1.0 { " (prediction holds for n = 1)" } else { "" });
    }
    if fc.diagonal_monitors() {
        let _ = writeln!(text, "diagonal: off-diagonal max over the run {:.3e}", out.records.iter().map(|r| r.offdiag_max).fold(0.0, f64::max));
        for (r, (m0, m1)) in first.means.iter().zip(&last.means).enumerate() {
            let _ = writeln!(text, "diagonal: ∫f_{} dV {m0:.12} -> {m1:.12}, a_{} {:.6e} -> {:.6e}", r + 1, r + 1, first.a[r], last.a[r]);
        }
    }
    let _ = writeln!(text, "series {}", series_path.display());
    let _ = writeln!(text, "snapshots {}", snapshot_paths.len());
    std::fs::write(cfg.output_dir.join(format!("{}_summary.txt", cfg.name)), &text)?;
    Ok(FlowSummary { text, series_path, snapshot_paths, output: out, converged })
}

fn conformal_f(g: &chernflow_core::geometry::MetricField, ghat: &nalgebra::DMatrix<num_complex::Complex64>) -> Vec<f64> {
    let n = g.n();
    let trace: f64 = (0..n).map(|i| ghat[(i, i)].re).sum();
    (0..g.sites()).map(|s| (0..n).map(|i| g.component(i, i)[s].re).sum::<f64>() / trace).collect()
}

fn field_drift(a: &chernflow_core::geometry::MetricField, b: &chernflow_core::geometry::MetricField) -> f64 {
    a.as_tensor()
        .components()
        .iter()
        .zip(b.as_tensor().components())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

#[derive(Debug)]
pub struct StabilityReport {
    pub text: String,
    pub lambda: f64,
    /// `(amplitude, β)` of the `L²` fit, `None` when the start is already flat.
    pub fit: Option<(f64, f64)>,
    pub ratio: Option<f64>,
    /// Fitted rate per requested Sobolev order.
    pub hm_rates: Vec<(usize, Option<f64>)>,
    /// Set when the series does not decay.
    pub failed: bool,
    pub flow: FlowSummary,
}

/// Runs a perturbation experiment and fits the decay of `‖R̃‖_{L²}`.
pub fn cmd_stability(cfg: &ExperimentConfig) -> anyhow::Result<StabilityReport> {
    if !matches!(cfg.metric, InitialMetric::Perturbation { .. }) {
        anyhow::bail!("stability needs `metric.kind = perturbation`");
    }
    let flow = cmd_flow(cfg)?;
    let fc = cfg.flow_config()?;
    let lambda = first_eigenvalue(&fc.chart, &fc.background)?;
    let records = &flow.output.records;
    let t_last = records.last().unwrap().t;
    let window = cfg.window.unwrap_or((0.2 * t_last, 0.8 * t_last));
    let mut text = String::new();
    let _ = writeln!(text, "stability {}: λ = {lambda:.12} (first eigenvalue of -Δ_ĝ)", cfg.name);
    let _ = writeln!(text, "fit window [{}, {}]", window.0, window.1);
    let (fit, ratio, mut failed) = if records[0].r2_l2 == 0.0 {
        let _ = writeln!(text, "verdict: already flat, R̃ = 0 at t = 0; fit skipped");
        (None, None, false)
    } else {
        match fit_decay(records, "r2_l2", window) {
            Ok(f) => {
                let ratio = f.rate / lambda;
                let _ = writeln!(text, "‖R̃‖_L2 ≈ a e^(-βt): a = {:.6e}, β = {:.6e}, β/λ = {ratio:.6} ({} points, rms {:.2e})", f.amplitude, f.rate, f.points, f.rms);
                let decays = f.rate > 0.0;
                let _ = writeln!(text, "verdict: {}", if decays { "decaying" } else { "NOT decaying" });
                (Some((f.amplitude, f.rate)), Some(ratio), !decays)
            }
            Err(e) => {
                let _ = writeln!(text, "verdict: fit failed, {e}");
                (None, None, true)
            }
        }
    };
    let mut hm_rates = Vec::new();
    for &m in &cfg.sobolev_orders {
        let rate = if fit.is_some() { fit_decay(records, &format!("hm_{m}"), window).ok().map(|f| f.rate) } else { None };
        match rate {
            Some(r) => {
                let _ = writeln!(text, "‖R̃‖_H{m}: rate {r:.6e}, rate/λ {:.6}", r / lambda);
                failed |= r <= 0.0;
            }
            None => {
                let _ = writeln!(text, "‖R̃‖_H{m}: no fit");
            }
        }
        hm_rates.push((m, rate));
    }
    if flow.broke_down() {
        failed = true;
    }
    std::fs::write(cfg.output_dir.join(format!("{}_stability.txt", cfg.name)), &text)?;
    Ok(StabilityReport { text, lambda, fit, ratio, hm_rates, failed, flow })
}

/// Exit status of a failed command: 2 for breakdown, 3 for I/O, 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Breakdown { .. } => 2,
                Error::Io(_) | Error::Csv(_) => 3,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}

/// Stem used as a legend label.
pub fn series_label(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}
