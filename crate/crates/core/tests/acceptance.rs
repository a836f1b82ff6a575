//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion; the
//! process fails only on a criterion outside `KNOWN_FAILURES`.

use std::f64::consts::PI;
use std::time::Instant;

use chernflow_core::algebra::{validate_structure, GroupName, LieGroupSpec};
use chernflow_core::discretization::{read_snapshot, write_snapshot, first_eigenvalue, LatticeChart};
use chernflow_core::flow::{fit_decay, run, write_series, DiagnosticsRecord, FlowConfig, FlowMode, RunOutput, Snapshot};
use chernflow_core::geometry::{fd_site_jet, kernels, ChernGeometry, MetricField};
use chernflow_core::recipe::{InitialMetric, ModePattern, TrigPoly, Wave};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

type C = Complex64;

/// Diagonal case: the log-means are not conserved for generic data and the
/// limit is not `diag(e^{f̄_r})` (see the notes on the diagonal proposition).
const KNOWN_FAILURES: &[usize] = &[4];

struct Outcome {
    id: usize,
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(id: usize) -> Self {
        Outcome { id, pass: true, summary: String::new(), details: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.pass &= ok;
        self.details.push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
    }
}

/// Snapshots kept for the torsion inequality.
struct Collected {
    label: String,
    spec: LieGroupSpec,
    chart: LatticeChart,
    snapshots: Vec<Snapshot>,
}

fn c(v: f64) -> C {
    C::new(v, 0.0)
}

fn max_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn field_diff(a: &MetricField, b: &MetricField) -> f64 {
    a.as_tensor().components().iter().zip(b.as_tensor().components()).map(|(x, y)| max_diff(x, y)).fold(0.0, f64::max)
}

/// Largest increase between consecutive records.
fn slack(series: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    series.windows(2).map(|w| f(&w[1]) - f(&w[0])).fold(0.0, f64::max)
}

fn final_r2_max(out: &RunOutput) -> f64 {
    out.records.last().unwrap().r2_max
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new(1);
    let start = Instant::now();
    let lie = |name: GroupName, lam: Option<f64>| LieGroupSpec::catalog(name, lam.map(c)).unwrap();
    for (label, spec) in [
        ("abelian(1)", lie(GroupName::Abelian(1), None)),
        ("abelian(2)", lie(GroupName::Abelian(2), None)),
        ("abelian(3)", lie(GroupName::Abelian(3), None)),
        ("nil3", lie(GroupName::Nil3, None)),
        ("sl2c", lie(GroupName::Sl2c, None)),
        ("s3lambda(-1)", lie(GroupName::S3Lambda, Some(-1.0))),
    ] {
        let r = validate_structure(&spec);
        o.check(r.antisymmetric && r.jacobi && r.unimodular, format!("{label}: all structure checks pass"));
    }
    for lam in [2.0, 0.5, 1.0] {
        let r = validate_structure(&lie(GroupName::S3Lambda, Some(lam)));
        o.check(r.is_lie_algebra() && !r.unimodular, format!("s3lambda({lam}): Lie algebra, not unimodular"));
    }
    let secs = start.elapsed().as_secs_f64();
    o.check(secs < 1.0, format!("runtime {secs:.3} s < 1 s"));
    o.summary = "structure validation of the group catalog".into();
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new(2);
    let start = Instant::now();
    let bg3 = DMatrix::from_row_slice(3, 3, &[
        c(2.0), C::new(0.2, 0.1), c(0.0),
        C::new(0.2, -0.1), c(1.5), C::new(0.0, 0.1),
        c(0.0), C::new(0.0, -0.1), c(1.0),
    ]);
    let cases = [
        ("abelian(1) 8^2", LatticeChart::torus(1, 8, 1.0).unwrap(), DMatrix::identity(1, 1), 11u64),
        ("abelian(1) 16^2", LatticeChart::torus(1, 16, 1.0).unwrap(), DMatrix::identity(1, 1), 12),
        ("nil3 16^4", LatticeChart::base_pullback(3, 2, 16, 1.0).unwrap(), bg3, 13),
    ];
    let mut worst_path = 0.0f64;
    let mut worst_fd = 0.0f64;
    for (label, chart, bg, seed) in cases {
        let recipe = InitialMetric::Perturbation { background: bg, epsilon: 0.3, pattern: ModePattern::LowModes(1), seed };
        let g = recipe.sample(&chart).unwrap();
        let geo = ChernGeometry::new(&chart, &g).unwrap();
        let direct = geo.second_chern_ricci_direct().unwrap();
        let trace = geo.second_chern_ricci_trace().unwrap();
        let n = chart.n();
        let scale = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut path = 0.0f64;
        for (site, chunk) in direct.chunks(n * n).enumerate() {
            for (a, v) in chunk.iter().enumerate() {
                path = path.max((v - trace.components()[a][site]).norm());
            }
        }
        let rel_path = path / scale;
        worst_path = worst_path.max(rel_path);
        o.check(rel_path <= 1e-10, format!("{label}: direct vs curvature-trace R̃, relative {rel_path:.2e} <= 1e-10"));

        // spectral jets and R̃ against fourth-order differences of the analytic metric
        let f = recipe.function(&chart).unwrap();
        let metric = |x: &[f64]| f.eval(x);
        let mut fd = 0.0f64;
        let mut jet_scale = 0.0f64;
        let mut ric_fd = 0.0f64;
        let mut ric_scale = 0.0f64;
        let stride = (chart.sites() / 37).max(1);
        for site in (0..chart.sites()).step_by(stride) {
            let spectral = geo.jet(site);
            let numeric = fd_site_jet(&chart, &metric, &chart.point(site), 1e-3);
            for (a, b) in [(&spectral.d, &numeric.d), (&spectral.db, &numeric.db), (&spectral.dd, &numeric.dd)] {
                fd = fd.max(max_diff(a, b));
                jet_scale = jet_scale.max(a.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
            let mut ginv = vec![c(0.0); n * n];
            chernflow_core::geometry::linalg::hermitian_inverse(&numeric.g, n, &mut ginv).unwrap();
            let mut scratch = vec![c(0.0); kernels::scratch_len(n)];
            let mut r = vec![c(0.0); n * n];
            kernels::second_chern_ricci(&numeric, &ginv, &mut scratch, &mut r);
            ric_fd = ric_fd.max(max_diff(&r, &direct[site * n * n..(site + 1) * n * n]));
            ric_scale = ric_scale.max(r.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        let rel_fd = fd / jet_scale;
        let rel_ric = ric_fd / ric_scale;
        worst_fd = worst_fd.max(rel_fd).max(rel_ric);
        o.check(rel_fd <= 1e-6, format!("{label}: spectral vs finite-difference jets, relative {rel_fd:.2e} <= 1e-6"));
        o.check(rel_ric <= 1e-6, format!("{label}: spectral vs finite-difference R̃, relative {rel_ric:.2e} <= 1e-6"));
    }
    let secs = start.elapsed().as_secs_f64();
    o.check(secs < 30.0, format!("runtime {secs:.1} s < 30 s"));
    o.summary = format!("kernel paths agree (paths {worst_path:.1e}, finite differences {worst_fd:.1e})");
    o
}

fn conformal_u0() -> TrigPoly {
    TrigPoly::constant(0.0).term(0.3, Wave::Sin, &[1, 0])
}

fn conformal_config(sigma: f64, t_end: f64) -> FlowConfig {
    let chart = LatticeChart::torus(1, 32, 1.0).unwrap();
    let g = InitialMetric::Conformal { background: DMatrix::identity(1, 1), u: conformal_u0() }.sample(&chart).unwrap();
    let mut cfg = FlowConfig::new(LieGroupSpec::abelian(1), chart, g, FlowMode::Full);
    cfg.t_end = t_end;
    cfg.cfl_sigma = sigma;
    cfg.record_every = 4;
    cfg.snapshot_every = Some(100);
    cfg
}

/// Independent scalar integrator for `e^u u̇ = (1/4)(u_xx + u_yy)` on the unit
/// square with `len x len` points, fixed-step RK4.
fn scalar_oracle(len: usize, u0: impl Fn(f64, f64) -> f64, t_end: f64, steps: usize) -> Vec<f64> {
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let k = |j: usize| if j <= len / 2 { j as f64 } else { j as f64 - len as f64 };
    let lap = |u: &[f64]| -> Vec<f64> {
        let mut a: Vec<C> = u.iter().map(|v| c(*v)).collect();
        let transform = |a: &mut Vec<C>, plan: &std::sync::Arc<dyn rustfft::Fft<f64>>| {
            for row in a.chunks_mut(len) {
                plan.process(row);
            }
            let mut col = vec![c(0.0); len];
            for j in 0..len {
                for i in 0..len {
                    col[i] = a[i * len + j];
                }
                plan.process(&mut col);
                for i in 0..len {
                    a[i * len + j] = col[i];
                }
            }
        };
        transform(&mut a, &fwd);
        for i in 0..len {
            for j in 0..len {
                let w = -(2.0 * PI).powi(2) * (k(i).powi(2) + k(j).powi(2)) / 4.0;
                a[i * len + j] *= w / (len * len) as f64;
            }
        }
        transform(&mut a, &inv);
        a.iter().map(|z| z.re).collect()
    };
    let rhs = |u: &[f64]| -> Vec<f64> { lap(u).iter().zip(u).map(|(l, v)| l * (-v).exp()).collect() };
    let mut u: Vec<f64> = (0..len * len).map(|s| u0((s / len) as f64 / len as f64, (s % len) as f64 / len as f64)).collect();
    let dt = t_end / steps as f64;
    let add = |u: &[f64], k: &[f64], a: f64| -> Vec<f64> { u.iter().zip(k).map(|(x, y)| x + a * y).collect() };
    for _ in 0..steps {
        let k1 = rhs(&u);
        let k2 = rhs(&add(&u, &k1, dt / 2.0));
        let k3 = rhs(&add(&u, &k2, dt / 2.0));
        let k4 = rhs(&add(&u, &k3, dt));
        for i in 0..u.len() {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    u
}

fn criterion_3(collected: &mut Vec<Collected>, monitor_runs: &mut Vec<(String, f64, Vec<DiagnosticsRecord>)>) -> Outcome {
    let mut o = Outcome::new(3);
    let start = Instant::now();
    let cfg = conformal_config(0.2, 0.1);
    let out = run(&cfg).unwrap();
    o.check(out.breakdown.is_none(), "no breakdown".into());
    let oracle = scalar_oracle(32, |x, _| 0.3 * (2.0 * PI * x).sin(), 0.1, 4000);
    let g = out.final_state.g.component(0, 0);
    let err = g.iter().zip(&oracle).map(|(a, u)| (a - c(u.exp())).norm()).fold(0.0, f64::max);
    o.check(err <= 1e-7, format!("max |g - e^u| at t = 0.1 against the scalar integrator {err:.2e} <= 1e-7"));
    let first = &out.records[0];
    o.check((first.max_tr_bg - 0.3f64.exp()).abs() <= 1e-12, format!("initial max tr_ĝ g = {:.15} = e^0.3", first.max_tr_bg));
    let secs = start.elapsed().as_secs_f64();
    o.check(secs < 60.0, format!("runtime {secs:.1} s < 60 s"));
    o.summary = format!("conformal flow matches the scalar reduction ({err:.1e})");
    collected.push(Collected { label: "conformal".into(), spec: cfg.spec.clone(), chart: cfg.chart.clone(), snapshots: out.snapshots });
    monitor_runs.push(("conformal".into(), 0.2, out.records));
    let half = run(&conformal_config(0.1, 0.1)).unwrap();
    monitor_runs.push(("conformal".into(), 0.1, half.records));

    // n = 1 conformal limit: f = e^u tends to ∫ e^{u₀} dV_ĝ
    let long = run(&conformal_config(0.2, 2.0)).unwrap();
    let area: f64 = (0..32).map(|i| (0.3 * (2.0 * PI * i as f64 / 32.0).sin()).exp()).sum::<f64>() / 32.0;
    let tail = long.final_state.g.component(0, 0).iter().map(|v| (v.re - area).abs()).fold(0.0, f64::max);
    o.details.push(format!("info conformal run to t = 2: max|R̃| = {:.2e}, max |f - ∫e^u₀| = {tail:.2e}", final_r2_max(&long)));
    o
}

// RK4 stays stable up to σ ≈ 0.56
const DIAGONAL_SIGMA: f64 = 0.3;

fn diagonal_config(sigma: f64) -> FlowConfig {
    // on 8 points per axis the spectral operator loses the discrete maximum
    // principle for tr_g ĝ; 10 is the coarsest grid where it holds
    let chart = LatticeChart::torus(2, 10, 1.0).unwrap();
    let f = vec![
        TrigPoly::constant(0.1).term(0.2, Wave::Sin, &[1, 0, 0, 0]).term(0.1, Wave::Cos, &[1, 0, 0, 1]),
        TrigPoly::constant(-0.05).term(-0.15, Wave::Cos, &[0, 1, 0, 0]).term(0.1, Wave::Sin, &[0, 0, 1, 0]),
    ];
    let g = InitialMetric::Diagonal { f }.sample(&chart).unwrap();
    let mut cfg = FlowConfig::new(LieGroupSpec::abelian(2), chart, g, FlowMode::Full);
    cfg.t_end = 4.0;
    cfg.cfl_sigma = sigma;
    cfg.record_every = 20;
    cfg.snapshot_every = Some(400);
    cfg
}

fn criterion_4(collected: &mut Vec<Collected>, monitor_runs: &mut Vec<(String, f64, Vec<DiagnosticsRecord>)>) -> Outcome {
    let mut o = Outcome::new(4);
    let start = Instant::now();
    let cfg = diagonal_config(DIAGONAL_SIGMA);
    let out = run(&cfg).unwrap();
    o.check(out.breakdown.is_none(), "no breakdown".into());
    let rec = &out.records;
    let off = rec.iter().map(|r| r.offdiag_max).fold(0.0, f64::max);
    o.check(off <= 1e-11, format!("off-diagonal entries stay {off:.2e} <= 1e-11"));
    let n = 2;
    for r in 0..n {
        let drift = rec.iter().filter(|x| x.t <= 2.0).map(|x| (x.means[r] - rec[0].means[r]).abs()).fold(0.0, f64::max);
        o.check(drift <= 1e-9, format!("mean ∫f_{} dV drift over [0, 2]: {drift:.3e} <= 1e-9", r + 1));
        let inc = slack(rec, |x| x.a[r]);
        o.check(inc <= 1e-9, format!("a_{} non-increasing, largest increase {inc:.2e} <= 1e-9", r + 1));
    }
    let rmax = final_r2_max(&out);
    o.check(rmax <= 1e-8, format!("final max|R̃| = {rmax:.2e} <= 1e-8"));
    let var = out.final_state.g.max_variation();
    o.check(var <= 1e-6, format!("final sitewise variation {var:.2e} <= 1e-6"));
    let g = &out.final_state.g;
    for r in 0..n {
        let target = rec[0].means[r].exp();
        let err = g.component(r, r).iter().map(|v| (v.re - target).abs()).fold(0.0, f64::max);
        o.check(err <= 1e-5, format!("g_{0}{0} -> e^(f̄_{0}) = {target:.9}: error {err:.3e} <= 1e-5", r + 1));
        let reached = g.component(r, r)[0].re;
        o.details.push(format!("info limit g_{0}{0} = {1:.9}, e^(mean f_{0}(t_end)) = {2:.9}", r + 1, reached, rec.last().unwrap().means[r].exp()));
    }
    let secs = start.elapsed().as_secs_f64();
    o.check(secs < 300.0, format!("runtime {secs:.1} s < 300 s"));
    let diag = {
        let mut d = diagonal_config(DIAGONAL_SIGMA);
        d.mode = FlowMode::Diagonal;
        d.t_end = 0.5;
        d.snapshot_every = None;
        run(&d).unwrap()
    };
    let full_half = {
        let mut d = diagonal_config(DIAGONAL_SIGMA);
        d.t_end = 0.5;
        d.snapshot_every = None;
        run(&d).unwrap()
    };
    let dm = field_diff(&diag.final_state.g, &full_half.final_state.g);
    o.details.push(format!("info diagonal mode vs full mode at t = 0.5: {dm:.2e}"));
    o.summary = "diagonal proposition (off-diagonals, means, energies, limit)".into();
    collected.push(Collected { label: "diagonal".into(), spec: cfg.spec.clone(), chart: cfg.chart.clone(), snapshots: out.snapshots });
    monitor_runs.push(("diagonal".into(), DIAGONAL_SIGMA, out.records));
    let half = run(&diagonal_config(DIAGONAL_SIGMA / 2.0)).unwrap();
    monitor_runs.push(("diagonal".into(), DIAGONAL_SIGMA / 2.0, half.records));
    o
}

fn stability_config(epsilon: f64, sigma: f64) -> FlowConfig {
    let chart = LatticeChart::torus(1, 32, 1.0).unwrap();
    let g = InitialMetric::Perturbation { background: DMatrix::identity(1, 1), epsilon, pattern: ModePattern::LowModes(1), seed: 2024 }
        .sample(&chart)
        .unwrap();
    let mut cfg = FlowConfig::new(LieGroupSpec::abelian(1), chart, g, FlowMode::Full);
    cfg.t_end = 1.0;
    cfg.cfl_sigma = sigma;
    cfg.record_every = 25;
    cfg.snapshot_every = Some(1000);
    cfg.sobolev_orders = vec![1, 2];
    cfg
}

fn criterion_5(collected: &mut Vec<Collected>, monitor_runs: &mut Vec<(String, f64, Vec<DiagnosticsRecord>)>) -> Outcome {
    let mut o = Outcome::new(5);
    let start = Instant::now();
    let cfg = stability_config(1e-3, 0.2);
    let lambda = first_eigenvalue(&cfg.chart, &cfg.background).unwrap();
    o.check((lambda - PI * PI).abs() <= 1e-12, format!("first eigenvalue {lambda:.12} = π²"));
    let out = run(&cfg).unwrap();
    o.check(out.breakdown.is_none(), "no breakdown".into());
    let window = (0.2, 0.8);
    let fit = fit_decay(&out.records, "r2_l2", window).unwrap();
    let ratio = fit.rate / lambda;
    o.check((0.7..=1.3).contains(&ratio), format!("β = {:.6}, β/λ = {ratio:.4} in [0.7, 1.3] ({} points)", fit.rate, fit.points));
    for m in [1usize, 2] {
        let col = format!("hm_{m}");
        let tail: Vec<f64> = out.records.iter().filter(|r| r.t >= 0.05).map(|r| r.get(&col).unwrap()).collect();
        let mono = tail.windows(2).all(|w| w[1] <= w[0]);
        o.check(mono, format!("‖R̃‖_H{m} decreasing after t = 0.05 ({:.3e} -> {:.3e})", tail[0], tail[tail.len() - 1]));
    }
    let doubled = run(&stability_config(2e-3, 0.2)).unwrap();
    let fit2 = fit_decay(&doubled.records, "r2_l2", window).unwrap();
    let rel = (fit2.rate - fit.rate).abs() / fit.rate;
    o.check(rel <= 0.1, format!("ε = 2e-3 rate {:.6}, relative change {rel:.2e} <= 0.1", fit2.rate));
    let secs = start.elapsed().as_secs_f64();
    o.check(secs < 300.0, format!("runtime {secs:.1} s < 300 s"));
    o.summary = format!("perturbation of the flat metric decays at β/λ = {ratio:.4}");
    collected.push(Collected { label: "stability".into(), spec: cfg.spec.clone(), chart: cfg.chart.clone(), snapshots: out.snapshots });
    monitor_runs.push(("stability".into(), 0.2, out.records));
    let half = run(&stability_config(1e-3, 0.1)).unwrap();
    monitor_runs.push(("stability".into(), 0.1, half.records));
    o
}

fn criterion_6(monitor_runs: &[(String, f64, Vec<DiagnosticsRecord>)]) -> Outcome {
    let mut o = Outcome::new(6);
    // increases below this are roundoff in the maxima themselves
    let floor = 1e-13;
    for label in ["conformal", "diagonal", "stability"] {
        let mut runs: Vec<_> = monitor_runs.iter().filter(|(l, _, _)| l == label).collect();
        runs.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (sc, sf) = (runs[0].1, runs[1].1);
        assert_eq!(sf * 2.0, sc);
        for (name, f) in [
            ("max tr_ĝ g", (|r: &DiagnosticsRecord| r.max_tr_bg) as fn(&DiagnosticsRecord) -> f64),
            ("max tr_g ĝ", |r: &DiagnosticsRecord| r.max_tr_gb),
        ] {
            let coarse = slack(&runs[0].2, f);
            let fine = slack(&runs[1].2, f);
            o.check(coarse <= 1e-8, format!("{label}: {name} non-increasing at σ = {sc}, slack {coarse:.2e} <= 1e-8"));
            let shrinks = coarse <= floor || fine * 4.0 <= coarse;
            o.check(shrinks, format!("{label}: {name} slack at σ = {sf} {fine:.2e} (shrink >= 4x or below {floor:.0e})"));
        }
    }
    o.summary = "maximum-principle monitors are monotone".into();
    o
}

/// `I + i∂∂̄φ` on the unit base torus for a sum of cosine modes of `φ`.
fn kaehler_base(x: &[f64]) -> Vec<C> {
    let modes: [(f64, [f64; 4]); 2] = [(0.01, [1.0, 0.0, 0.0, 0.0]), (0.008, [0.0, 1.0, 1.0, 0.0])];
    let mut h = vec![c(1.0), c(0.0), c(0.0), c(1.0)];
    for (amp, k) in modes {
        let theta: f64 = 2.0 * PI * k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let kappa = [C::new(k[0], -k[1]) / 2.0, C::new(k[2], -k[3]) / 2.0];
        for j in 0..2 {
            for l in 0..2 {
                h[j * 2 + l] -= kappa[j] * kappa[l].conj() * (2.0 * PI).powi(2) * amp * theta.cos();
            }
        }
    }
    h
}

fn criterion_7(collected: &mut Vec<Collected>) -> Outcome {
    let mut o = Outcome::new(7);
    let start = Instant::now();
    let fiber = 1.5;
    let chart = LatticeChart::base_pullback(3, 2, 8, 1.0).unwrap();
    let g = MetricField::from_fn(&chart, |x| {
        let h = kaehler_base(x);
        let mut g = vec![c(0.0); 9];
        for j in 0..2 {
            for l in 0..2 {
                g[j * 3 + l] = h[j * 2 + l];
            }
        }
        g[8] = c(fiber);
        g
    })
    .unwrap();
    let nil3 = LieGroupSpec::catalog(GroupName::Nil3, None).unwrap();
    let mut cfg = FlowConfig::new(nil3, chart, g, FlowMode::Full);
    cfg.t_end = 1.0;
    cfg.record_every = 50;
    cfg.snapshot_every = Some(50);
    o.check(cfg.validate().is_ok(), "block metric accepted".into());
    let out = run(&cfg).unwrap();
    o.check(out.breakdown.is_none(), "no breakdown".into());
    let mut drift = 0.0f64;
    for s in &out.snapshots {
        for (i, j) in [(0, 2), (1, 2), (2, 0), (2, 1)] {
            drift = drift.max(s.g.component(i, j).iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        drift = drift.max(s.g.component(2, 2).iter().map(|v| (v - c(fiber)).norm()).fold(0.0, f64::max));
    }
    o.check(drift <= 1e-11, format!("fiber block drift over [0, 1]: {drift:.2e} <= 1e-11 ({} snapshots)", out.snapshots.len()));

    let torus = LatticeChart::torus(2, 8, 1.0).unwrap();
    let h = MetricField::from_fn(&torus, kaehler_base).unwrap();
    let mut base = FlowConfig::new(LieGroupSpec::abelian(2), torus, h, FlowMode::Full);
    base.t_end = 1.0;
    base.record_every = 50;
    base.snapshot_every = Some(50);
    let base_out = run(&base).unwrap();
    let mut err = 0.0f64;
    for j in 0..2 {
        for l in 0..2 {
            err = err.max(max_diff(out.final_state.g.component(j, l), base_out.final_state.g.component(j, l)));
        }
    }
    o.check(out.final_state.step_index == base_out.final_state.step_index, format!("same step count {}", base_out.final_state.step_index));
    o.check(err <= 1e-9, format!("base block vs standalone abelian(2) run: {err:.2e} <= 1e-9"));

    let mut block = cfg.clone();
    block.mode = FlowMode::Block(2);
    block.snapshot_every = None;
    let block_out = run(&block).unwrap();
    let bm = field_diff(&block_out.final_state.g, &out.final_state.g);
    o.check(bm <= 1e-9, format!("block(2) mode vs full mode: {bm:.2e} <= 1e-9"));
    o.details.push(format!("info final max|R̃| = {:.2e}, variation {:.2e}", final_r2_max(&out), out.final_state.g.max_variation()));
    let secs = start.elapsed().as_secs_f64();
    o.check(secs < 300.0, format!("runtime {secs:.1} s < 300 s"));
    o.summary = "nil3 block metric: fibers fixed, base follows the base flow".into();
    collected.push(Collected { label: "block nil3".into(), spec: cfg.spec.clone(), chart: cfg.chart.clone(), snapshots: out.snapshots });
    collected.push(Collected { label: "block base".into(), spec: base.spec.clone(), chart: base.chart.clone(), snapshots: base_out.snapshots });
    o
}

fn criterion_8(collected: &[Collected]) -> Outcome {
    let mut o = Outcome::new(8);
    let mut worst = f64::NEG_INFINITY;
    for run in collected {
        let mut margin = f64::NEG_INFINITY;
        for s in &run.snapshots {
            let geo = ChernGeometry::new(&run.chart, &s.g).unwrap();
            let t = geo.torsion(&run.spec).unwrap();
            let t2 = geo.torsion_norm(&t).unwrap();
            let that = geo.torsion_hat_norm(&run.spec).unwrap();
            let sq = geo.gamma_norm_s().unwrap();
            for i in 0..t2.len() {
                margin = margin.max(t2[i] - 2.0 * that[i] - 8.0 * sq[i]);
            }
        }
        worst = worst.max(margin);
        o.check(margin <= 1e-8, format!("{}: max(|T|² - 2|T̂|² - 8S) = {margin:.3e} <= 1e-8 over {} snapshots", run.label, run.snapshots.len()));
    }
    o.summary = format!("torsion bound holds sitewise (worst margin {worst:.2e})");
    o
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new(9);
    // at t = 0.1 the error at σ = 0.05 is already at roundoff; a short horizon
    // keeps the generated harmonics, whose time error dominates
    let t_end = 0.005;
    let sigmas = [0.4, 0.2, 0.1, 0.05];
    let finals: Vec<MetricField> = sigmas.iter().map(|&s| run(&conformal_config(s, t_end)).unwrap().final_state.g).collect();
    let diffs: Vec<f64> = finals.windows(2).map(|w| field_diff(&w[0], &w[1])).collect();
    for (i, w) in diffs.windows(2).enumerate() {
        let factor = w[0] / w[1];
        o.check(factor >= 12.0, format!("σ {} -> {}: differences {:.2e} / {:.2e} = {factor:.1} >= 12", sigmas[i + 1], sigmas[i + 2], w[0], w[1]));
    }
    o.summary = format!("RK4 self-convergence over σ = {sigmas:?} to t = {t_end}");
    o
}

fn criterion_10() -> Outcome {
    let mut o = Outcome::new(10);
    let make = || {
        let chart = LatticeChart::torus(2, 8, 1.0).unwrap();
        let bg = DMatrix::from_row_slice(2, 2, &[c(1.5), C::new(0.2, 0.3), C::new(0.2, -0.3), c(1.0)]);
        let g = InitialMetric::Perturbation { background: bg.clone(), epsilon: 0.05, pattern: ModePattern::LowModes(1), seed: 99 }
            .sample(&chart)
            .unwrap();
        let mut cfg = FlowConfig::new(LieGroupSpec::abelian(2), chart, g, FlowMode::Full);
        cfg.background = bg;
        cfg.t_end = 0.05;
        cfg.record_every = 5;
        cfg.sobolev_orders = vec![1];
        cfg
    };
    let csv = |cfg: &FlowConfig| {
        let out = run(cfg).unwrap();
        let mut buf = Vec::new();
        write_series(&mut buf, &out.records).unwrap();
        (buf, out)
    };
    let (a, out) = csv(&make());
    let (b, _) = csv(&make());
    o.check(a == b && !a.is_empty(), format!("two runs give identical CSV ({} bytes)", a.len()));
    let cfg = make();
    let snap = out.snapshots.last().unwrap();
    let mut bytes = Vec::new();
    write_snapshot(&mut bytes, &cfg.chart, snap.g.as_tensor(), snap.t).unwrap();
    let (header, field) = read_snapshot(bytes.as_slice()).unwrap();
    let exact = header.time.to_bits() == snap.t.to_bits()
        && field.shape() == snap.g.as_tensor().shape()
        && field.components().iter().zip(snap.g.as_tensor().components()).all(|(x, y)| {
            x.iter().zip(y).all(|(p, q)| p.re.to_bits() == q.re.to_bits() && p.im.to_bits() == q.im.to_bits())
        });
    o.check(exact, "snapshot write/read is bit-exact".into());
    o.summary = "determinism and round trip".into();
    o
}

fn main() {
    let mut collected = Vec::new();
    let mut monitor_runs = Vec::new();
    let mut outcomes = vec![criterion_1(), criterion_2()];
    outcomes.push(criterion_3(&mut collected, &mut monitor_runs));
    outcomes.push(criterion_4(&mut collected, &mut monitor_runs));
    outcomes.push(criterion_5(&mut collected, &mut monitor_runs));
    outcomes.push(criterion_6(&monitor_runs));
    outcomes.push(criterion_7(&mut collected));
    outcomes.push(criterion_8(&collected));
    outcomes.push(criterion_9());
    outcomes.push(criterion_10());

    let mut unexpected = Vec::new();
    for o in &outcomes {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && KNOWN_FAILURES.contains(&o.id) { " (known)" } else { "" };
        println!("criterion {:>2}: {verdict}{note}  {}", o.id, o.summary);
        for d in &o.details {
            println!("      {d}");
        }
        if !o.pass && !KNOWN_FAILURES.contains(&o.id) {
            unexpected.push(o.id);
        }
        if o.pass && KNOWN_FAILURES.contains(&o.id) {
            println!("      note: listed as a known failure but passed");
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
