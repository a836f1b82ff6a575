//! Initial metrics given analytically, so they can be sampled on any chart and
//! evaluated off-grid by finite-difference oracles.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::LatticeChart;
use crate::error::{Error, Result};
use crate::geometry::MetricField;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wave {
    Sin,
    Cos,
}

/// `amp * sin|cos(2π sum_a freq[a] x_a / L_a)` over the real axes.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigTerm {
    pub amp: f64,
    pub wave: Wave,
    pub freq: Vec<i64>,
}

/// A real trigonometric polynomial on the chart's real axes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrigPoly {
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn constant(value: f64) -> Self {
        TrigPoly { constant: value, terms: Vec::new() }
    }

    pub fn term(mut self, amp: f64, wave: Wave, freq: &[i64]) -> Self {
        self.terms.push(TrigTerm { amp, wave, freq: freq.to_vec() });
        self
    }

    /// Parses `c; amp sin f1 f2 ...; amp cos f1 f2 ...`. A bare number is the
    /// constant part.
    pub fn parse(text: &str, axes: usize) -> Result<Self> {
        let mut poly = TrigPoly::default();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let words: Vec<&str> = part.split_whitespace().collect();
            let num = |w: &str| w.parse::<f64>().map_err(|_| Error::Config(format!("bad number `{w}` in `{part}`")));
            if words.len() == 1 {
                poly.constant += num(words[0])?;
                continue;
            }
            if words.len() != 2 + axes {
                return Err(Error::Config(format!("term `{part}` needs amplitude, wave and {axes} frequencies")));
            }
            let wave = match words[1] {
                "sin" => Wave::Sin,
                "cos" => Wave::Cos,
                w => return Err(Error::Config(format!("unknown wave `{w}` (sin or cos)"))),
            };
            let freq = words[2..]
                .iter()
                .map(|w| w.parse::<i64>().map_err(|_| Error::Config(format!("bad frequency `{w}` in `{part}`"))))
                .collect::<Result<Vec<_>>>()?;
            poly.terms.push(TrigTerm { amp: num(words[0])?, wave, freq });
        }
        Ok(poly)
    }

    pub fn eval(&self, x: &[f64], periods: &[f64]) -> f64 {
        let mut v = self.constant;
        for t in &self.terms {
            let phase: f64 =
                t.freq.iter().zip(x).enumerate().map(|(a, (f, xa))| 2.0 * PI * *f as f64 * xa / periods[a / 2]).sum();
            v += t.amp * match t.wave {
                Wave::Sin => phase.sin(),
                Wave::Cos => phase.cos(),
            };
        }
        v
    }

    fn check_axes(&self, axes: usize) -> Result<()> {
        match self.terms.iter().find(|t| t.freq.len() != axes) {
            Some(t) => Err(Error::Config(format!("term has {} frequencies, chart has {axes} real axes", t.freq.len()))),
            None => Ok(()),
        }
    }
}

/// Which Fourier modes a seeded perturbation draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModePattern {
    /// The single lowest mode along the first real axis.
    Single,
    /// Every mode with all integer frequencies in `-k..=k`, except zero.
    LowModes(i64),
}

/// Recipe for an initial metric.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialMetric {
    Constant(DMatrix<C>),
    /// `e^u ĝ`
    Conformal { background: DMatrix<C>, u: TrigPoly },
    /// `diag(e^{f_1}, ..., e^{f_n})`
    Diagonal { f: Vec<TrigPoly> },
    /// `[[h, 0], [0, k]]` with `h` varying on the base and `k` constant.
    Block { base: Box<InitialMetric>, fiber: DMatrix<C> },
    /// `ĝ + ε P` with `P` Hermitian, `|P_ij| <= 1`, drawn from `seed`.
    Perturbation { background: DMatrix<C>, epsilon: f64, pattern: ModePattern, seed: u64 },
}

/// An [`InitialMetric`] bound to a chart's axis count and periods.
pub struct MetricFunction {
    n: usize,
    periods: Vec<f64>,
    kind: Kind,
}

enum Kind {
    Constant(Vec<C>),
    Conformal(Vec<C>, TrigPoly),
    Diagonal(Vec<TrigPoly>),
    Block(Box<MetricFunction>, Vec<C>),
    // per upper-triangle component: (mode, coefficient of cos, coefficient of sin)
    Perturbation(Vec<C>, f64, Vec<Vec<(Vec<i64>, C, C)>>),
}

fn flat(m: &DMatrix<C>) -> Vec<C> {
    let n = m.nrows();
    (0..n * n).map(|c| m[(c / n, c % n)]).collect()
}

fn phase(freq: &[i64], x: &[f64], periods: &[f64]) -> f64 {
    freq.iter().zip(x).enumerate().map(|(a, (f, xa))| 2.0 * PI * *f as f64 * xa / periods[a / 2]).sum()
}

impl MetricFunction {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major `g_{ij̄}(x)`.
    pub fn eval(&self, x: &[f64]) -> Vec<C> {
        let n = self.n;
        match &self.kind {
            Kind::Constant(g) => g.clone(),
            Kind::Conformal(g, u) => {
                let e = u.eval(x, &self.periods).exp();
                g.iter().map(|v| v * e).collect()
            }
            Kind::Diagonal(f) => {
                let mut g = vec![ZERO; n * n];
                for (r, fr) in f.iter().enumerate() {
                    g[r * n + r] = C::new(fr.eval(x, &self.periods).exp(), 0.0);
                }
                g
            }
            Kind::Block(base, fiber) => {
                let b = base.n;
                let h = base.eval(x);
                let k = n - b;
                let mut g = vec![ZERO; n * n];
                for i in 0..b {
                    for j in 0..b {
                        g[i * n + j] = h[i * b + j];
                    }
                }
                for i in 0..k {
                    for j in 0..k {
                        g[(b + i) * n + b + j] = fiber[i * k + j];
                    }
                }
                g
            }
            Kind::Perturbation(g, eps, modes) => {
                let mut out = g.clone();
                let mut idx = 0;
                for i in 0..n {
                    for j in i..n {
                        let mut p = ZERO;
                        for (freq, a, b) in &modes[idx] {
                            let ph = phase(freq, x, &self.periods);
                            p += a * ph.cos() + b * ph.sin();
                        }
                        if i == j {
                            p.im = 0.0;
                        }
                        out[i * n + j] += p * *eps;
                        if i != j {
                            out[j * n + i] += p.conj() * *eps;
                        }
                        idx += 1;
                    }
                }
                out
            }
        }
    }
}

fn square(m: &DMatrix<C>, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Config(format!("{what} must be a nonempty square matrix")));
    }
    Ok(m.nrows())
}

impl InitialMetric {
    pub fn n(&self) -> usize {
        match self {
            InitialMetric::Constant(g) => g.nrows(),
            InitialMetric::Conformal { background, .. } => background.nrows(),
            InitialMetric::Diagonal { f } => f.len(),
            InitialMetric::Block { base, fiber } => base.n() + fiber.nrows(),
            InitialMetric::Perturbation { background, .. } => background.nrows(),
        }
    }

    /// Short name of the recipe kind.
    pub fn kind(&self) -> &'static str {
        match self {
            InitialMetric::Constant(_) => "constant",
            InitialMetric::Conformal { .. } => "conformal",
            InitialMetric::Diagonal { .. } => "diagonal",
            InitialMetric::Block { .. } => "block",
            InitialMetric::Perturbation { .. } => "perturbation",
        }
    }

    pub fn function(&self, chart: &LatticeChart) -> Result<MetricFunction> {
        self.function_on(2 * chart.m(), chart.periods())
    }

    fn function_on(&self, axes: usize, periods: &[f64]) -> Result<MetricFunction> {
        let n = self.n();
        let kind = match self {
            InitialMetric::Constant(g) => {
                square(g, "constant metric")?;
                Kind::Constant(flat(g))
            }
            InitialMetric::Conformal { background, u } => {
                square(background, "conformal background")?;
                u.check_axes(axes)?;
                Kind::Conformal(flat(background), u.clone())
            }
            InitialMetric::Diagonal { f } => {
                if f.is_empty() {
                    return Err(Error::Config("diagonal recipe needs at least one entry".into()));
                }
                for fr in f {
                    fr.check_axes(axes)?;
                }
                Kind::Diagonal(f.clone())
            }
            InitialMetric::Block { base, fiber } => {
                square(fiber, "fiber block")?;
                if matches!(**base, InitialMetric::Block { .. }) {
                    return Err(Error::Config("block recipes do not nest".into()));
                }
                Kind::Block(Box::new(base.function_on(axes, periods)?), flat(fiber))
            }
            InitialMetric::Perturbation { background, epsilon, pattern, seed } => {
                square(background, "perturbation background")?;
                if !epsilon.is_finite() || *epsilon < 0.0 {
                    return Err(Error::Config(format!("perturbation amplitude must be >= 0, got {epsilon}")));
                }
                Kind::Perturbation(flat(background), *epsilon, perturbation_modes(n, axes, *pattern, *seed)?)
            }
        };
        Ok(MetricFunction { n, periods: periods.to_vec(), kind })
    }

    /// Samples the recipe on the chart's sites.
    pub fn sample(&self, chart: &LatticeChart) -> Result<MetricField> {
        if self.n() != chart.n() {
            return Err(Error::Config(format!("recipe has dimension {}, chart has {}", self.n(), chart.n())));
        }
        let f = self.function(chart)?;
        MetricField::from_fn(chart, |x| f.eval(x))
    }

    /// Constant background `ĝ` the recipe is built around, if any.
    pub fn background(&self) -> DMatrix<C> {
        match self {
            InitialMetric::Constant(g) => g.clone(),
            InitialMetric::Conformal { background, .. } | InitialMetric::Perturbation { background, .. } => {
                background.clone()
            }
            InitialMetric::Diagonal { f } => DMatrix::identity(f.len(), f.len()),
            InitialMetric::Block { base, fiber } => {
                let (b, k) = (base.n(), fiber.nrows());
                let mut m = DMatrix::zeros(b + k, b + k);
                m.view_mut((0, 0), (b, b)).copy_from(&base.background());
                m.view_mut((b, b), (k, k)).copy_from(fiber);
                m
            }
        }
    }
}

fn perturbation_modes(n: usize, axes: usize, pattern: ModePattern, seed: u64) -> Result<Vec<Vec<(Vec<i64>, C, C)>>> {
    let mut freqs: Vec<Vec<i64>> = Vec::new();
    match pattern {
        ModePattern::Single => {
            let mut f = vec![0; axes];
            f[0] = 1;
            freqs.push(f);
        }
        ModePattern::LowModes(k) => {
            if k < 1 {
                return Err(Error::Config("perturbation needs a mode bound >= 1".into()));
            }
            let width = (2 * k + 1) as usize;
            for code in 0..width.pow(axes as u32) {
                let mut rest = code;
                let f: Vec<i64> = (0..axes)
                    .map(|_| {
                        let v = (rest % width) as i64 - k;
                        rest /= width;
                        v
                    })
                    .collect();
                if f.iter().any(|&v| v != 0) {
                    freqs.push(f);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng, real: bool| {
        let re = rng.gen_range(-1.0..1.0);
        let im = if real { 0.0 } else { rng.gen_range(-1.0..1.0) };
        C::new(re, im)
    };
    let mut comps = Vec::new();
    for i in 0..n {
        for j in i..n {
            let real = i == j;
            let mut modes: Vec<(Vec<i64>, C, C)> =
                freqs.iter().map(|f| (f.clone(), unit(&mut rng, real), unit(&mut rng, real))).collect();
            // normalize so |P_ij| <= 1 everywhere
            let bound: f64 = modes.iter().map(|(_, a, b)| a.norm() + b.norm()).sum();
            if bound > 0.0 {
                for (_, a, b) in modes.iter_mut() {
                    *a /= bound;
                    *b /= bound;
                }
            }
            comps.push(modes);
        }
    }
    Ok(comps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_parse_and_eval() {
        let p = TrigPoly::parse("0.5; 0.3 sin 1 0; -0.2 cos 0 2", 2).unwrap();
        assert_eq!(p.terms.len(), 2);
        let v = p.eval(&[0.25, 0.0], &[1.0]);
        assert!((v - (0.5 + 0.3 - 0.2)).abs() < 1e-15);
        assert!(TrigPoly::parse("0.3 sin 1", 2).is_err());
        assert!(TrigPoly::parse("0.3 tan 1 0", 2).is_err());
    }

    #[test]
    fn perturbation_is_bounded_and_seeded() {
        let chart = LatticeChart::torus(2, 8, 1.0).unwrap();
        let r = InitialMetric::Perturbation {
            background: DMatrix::identity(2, 2),
            epsilon: 0.3,
            pattern: ModePattern::LowModes(1),
            seed: 7,
        };
        let g = r.sample(&chart).unwrap();
        let again = r.sample(&chart).unwrap();
        assert_eq!(g, again);
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!(g.component(i, j).iter().all(|v| (v - target).norm() <= 0.3 + 1e-15));
            }
        }
        assert!(g.as_tensor().hermitian_residue() < 1e-16);
        let other = InitialMetric::Perturbation {
            background: DMatrix::identity(2, 2),
            epsilon: 0.3,
            pattern: ModePattern::LowModes(1),
            seed: 8,
        };
        assert_ne!(other.sample(&chart).unwrap(), g);
    }

    #[test]
    fn block_layout() {
        let chart = LatticeChart::base_pullback(3, 2, 8, 1.0).unwrap();
        let base = InitialMetric::Diagonal {
            f: vec![TrigPoly::constant(0.0).term(0.2, Wave::Sin, &[1, 0, 0, 0]), TrigPoly::constant(0.1)],
        };
        let r = InitialMetric::Block { base: Box::new(base), fiber: DMatrix::from_element(1, 1, C::new(2.0, 0.0)) };
        let g = r.sample(&chart).unwrap();
        assert!(g.component(2, 2).iter().all(|v| *v == C::new(2.0, 0.0)));
        assert!(g.component(0, 2).iter().all(|v| *v == ZERO));
        assert_eq!(r.background()[(2, 2)], C::new(2.0, 0.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let chart = LatticeChart::torus(1, 8, 1.0).unwrap();
        assert!(InitialMetric::Constant(DMatrix::identity(2, 2)).sample(&chart).is_err());
        let bad = InitialMetric::Conformal { background: DMatrix::identity(1, 1), u: TrigPoly::parse("0.1 sin 1 0 0", 3).unwrap() };
        assert!(bad.sample(&chart).is_err());
    }
}
