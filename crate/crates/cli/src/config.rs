//! Run files: one `key = value` per line, dotted keys, `#` comments.
//!
//! ```text
//! name = conformal-abelian1
//! group = abelian(1)
//! chart.sizes = 32 32
//! metric.kind = conformal
//! metric.u = 0; 0.3 sin 1 0
//! flow.t_end = 2
//! output.dir = out/conformal
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chernflow_core::algebra::{GroupName, LieGroupSpec};
use chernflow_core::discretization::LatticeChart;
use chernflow_core::flow::{FlowConfig, FlowMode};
use chernflow_core::recipe::{InitialMetric, ModePattern, TrigPoly};
use nalgebra::DMatrix;
use num_complex::Complex64;

type C = Complex64;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error(transparent)]
    Core(#[from] chernflow_core::Error),
}

type Result<T> = std::result::Result<T, ConfigError>;

const KEYS: &[&str] = &[
    "name",
    "group",
    "group.lambda",
    "chart.kind",
    "chart.m",
    "chart.sizes",
    "chart.periods",
    "chart.frame",
    "chart.volume",
    "metric.kind",
    "metric.matrix",
    "metric.background",
    "metric.u",
    "metric.fiber",
    "metric.epsilon",
    "metric.pattern",
    "metric.seed",
    "metric.base.kind",
    "metric.base.matrix",
    "metric.base.background",
    "metric.base.u",
    "flow.mode",
    "flow.t_end",
    "flow.cfl_sigma",
    "flow.b_monitor",
    "flow.record_every",
    "flow.snapshot_every",
    "flow.max_steps",
    "flow.background",
    "sobolev.orders",
    "stability.window",
    "output.dir",
];

fn known(key: &str) -> bool {
    if KEYS.contains(&key) {
        return true;
    }
    // metric.f1, metric.f2, ... and metric.base.f1, ...
    let rest = key.strip_prefix("metric.base.f").or_else(|| key.strip_prefix("metric.f"));
    rest.is_some_and(|r| r.parse::<usize>().is_ok_and(|i| i >= 1))
}

/// Key-value pairs with their line numbers.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::Syntax { line, message: format!("expected `key = value`, got `{body}`") });
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax { line, message: format!("malformed key `{key}`") });
            }
            if !known(key) {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
            if let Some((_, first)) = entries.get(key) {
                return Err(ConfigError::Duplicate { line, key: key.to_string(), first: *first });
            }
            entries.insert(key.to_string(), (value.trim().to_string(), line));
        }
        Ok(RawConfig { entries })
    }

    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn value<T>(&self, key: &str, f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => f(v).map(Some).map_err(|message| ConfigError::Value { line, key: key.to_string(), message }),
        }
    }

    fn required<T>(&self, key: &str, f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<T> {
        self.value(key, f)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }
}

fn number<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.trim().parse::<T>().map_err(|_| format!("`{s}` is not a valid number"))
}

fn list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    s.split_whitespace().map(number).collect()
}

/// `1.5`, `-2i`, `0.2+0.1i`, `0.2-0.1i`.
pub fn parse_complex(s: &str) -> std::result::Result<C, String> {
    let t = s.trim();
    let bad = || format!("`{s}` is not a complex number");
    let Some(body) = t.strip_suffix('i') else {
        return number::<f64>(t).map(|re| C::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not an exponent sign or the leading sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        other => other,
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = im.trim_start_matches('+').parse().map_err(|_| bad())?;
    Ok(C::new(re, im))
}

/// Rows separated by `;`, entries by whitespace. A single number means that
/// multiple of the identity of the expected size.
fn matrix(s: &str, n: usize) -> std::result::Result<DMatrix<C>, String> {
    let rows: Vec<Vec<C>> = s
        .split(';')
        .map(|r| r.split_whitespace().map(parse_complex).collect::<std::result::Result<Vec<_>, _>>())
        .collect::<std::result::Result<_, _>>()?;
    if rows.len() == 1 && rows[0].len() == 1 {
        return Ok(DMatrix::identity(n, n) * rows[0][0]);
    }
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(format!("expected a {n} x {n} matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rect(s: &str, n: usize, m: usize) -> std::result::Result<Vec<C>, String> {
    let rows: Vec<Vec<C>> = s
        .split(';')
        .map(|r| r.split_whitespace().map(parse_complex).collect::<std::result::Result<Vec<_>, _>>())
        .collect::<std::result::Result<_, _>>()?;
    if rows.len() != n || rows.iter().any(|r| r.len() != m) {
        return Err(format!("expected {n} rows of {m} entries"));
    }
    Ok(rows.into_iter().flatten().collect())
}

fn pattern(s: &str) -> std::result::Result<ModePattern, String> {
    let t = s.trim();
    if t == "single" {
        return Ok(ModePattern::Single);
    }
    t.strip_prefix("low(")
        .and_then(|r| r.strip_suffix(')'))
        .and_then(|k| k.trim().parse().ok())
        .map(ModePattern::LowModes)
        .ok_or_else(|| format!("`{s}` is not `single` or `low(k)`"))
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChartKind {
    Torus,
    BasePullback,
    Explicit,
}

#[derive(Clone, Debug)]
pub struct ChartSpec {
    pub kind: ChartKind,
    pub n: usize,
    pub m: usize,
    pub sizes: Vec<usize>,
    pub periods: Vec<f64>,
    pub frame: Option<Vec<C>>,
    pub volume: Option<f64>,
}

impl ChartSpec {
    pub fn build(&self) -> chernflow_core::Result<LatticeChart> {
        let frame = match self.kind {
            ChartKind::Explicit => self.frame.clone().unwrap_or_default(),
            _ => {
                let mut a = vec![C::new(0.0, 0.0); self.n * self.m];
                for k in 0..self.m.min(self.n) {
                    a[k * self.m + k] = C::new(1.0, 0.0);
                }
                a
            }
        };
        let chart = LatticeChart::new(self.n, self.sizes.clone(), self.periods.clone(), frame)?;
        match self.volume {
            Some(v) => chart.with_volume(v),
            None => Ok(chart),
        }
    }
}

/// Parsed run file.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub name: String,
    pub group: GroupName,
    pub lambda: Option<f64>,
    pub chart: ChartSpec,
    pub metric: InitialMetric,
    pub mode: FlowMode,
    pub t_end: f64,
    pub cfl_sigma: f64,
    pub b_monitor: Option<f64>,
    pub record_every: usize,
    pub snapshot_every: Option<usize>,
    pub max_steps: usize,
    /// `ĝ`; defaults to the recipe's background.
    pub background: Option<DMatrix<C>>,
    pub sobolev_orders: Vec<usize>,
    pub window: Option<(f64, f64)>,
    pub output_dir: PathBuf,
}

fn metric_recipe(raw: &RawConfig, prefix: &str, n: usize, axes: usize) -> Result<InitialMetric> {
    let key = |k: &str| format!("{prefix}.{k}");
    let kind = raw.required(&key("kind"), |s| Ok(s.trim().to_string()))?;
    let trig = |s: &str| TrigPoly::parse(s, axes).map_err(|e| e.to_string());
    let background = |raw: &RawConfig| -> Result<DMatrix<C>> {
        Ok(raw.value(&key("background"), |s| matrix(s, n))?.unwrap_or_else(|| DMatrix::identity(n, n)))
    };
    Ok(match kind.as_str() {
        "constant" => InitialMetric::Constant(raw.required(&key("matrix"), |s| matrix(s, n))?),
        "conformal" => InitialMetric::Conformal { background: background(raw)?, u: raw.required(&key("u"), trig)? },
        "diagonal" => {
            let f = (1..=n).map(|r| raw.required(&key(&format!("f{r}")), trig)).collect::<Result<Vec<_>>>()?;
            InitialMetric::Diagonal { f }
        }
        "perturbation" if prefix == "metric" => InitialMetric::Perturbation {
            background: background(raw)?,
            epsilon: raw.required(&key("epsilon"), number)?,
            pattern: raw.value(&key("pattern"), pattern)?.unwrap_or(ModePattern::Single),
            seed: raw.value(&key("seed"), number)?.unwrap_or(0),
        },
        "block" if prefix == "metric" => {
            let (fv, line) = raw.get("metric.fiber").ok_or_else(|| ConfigError::Missing("metric.fiber".into()))?;
            let k = fv.split(';').count().max(1);
            let k = if k == 1 && fv.split_whitespace().count() == 1 { n.saturating_sub(base_dims(raw)?) } else { k };
            let fiber = matrix(fv, k).map_err(|message| ConfigError::Value { line, key: "metric.fiber".into(), message })?;
            let b = n.checked_sub(k).filter(|b| *b > 0).ok_or_else(|| ConfigError::Value {
                line,
                key: "metric.fiber".into(),
                message: format!("fiber block of size {k} leaves no base in dimension {n}"),
            })?;
            InitialMetric::Block { base: Box::new(metric_recipe(raw, "metric.base", b, axes)?), fiber }
        }
        other => {
            let (_, line) = raw.get(&key("kind")).unwrap();
            return Err(ConfigError::Value { line, key: key("kind"), message: format!("unknown recipe `{other}`") });
        }
    })
}

/// Base size of a block recipe with a scalar fiber: `flow.mode = block(b)` or
/// the chart's base dimension.
fn base_dims(raw: &RawConfig) -> Result<usize> {
    if let Some(FlowMode::Block(b)) = raw.value("flow.mode", |s| s.parse::<FlowMode>().map_err(|e| e.to_string()))? {
        return Ok(b);
    }
    Ok(raw.value("chart.m", number)?.unwrap_or(2))
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let raw = RawConfig::parse(text)?;
        let group = raw.required("group", |s| s.parse::<GroupName>().map_err(|e| e.to_string()))?;
        let lambda = raw.value("group.lambda", number)?;
        let n = match group {
            GroupName::Abelian(n) => n,
            _ => 3,
        };
        let default_kind = if matches!(group, GroupName::Abelian(_)) { ChartKind::Torus } else { ChartKind::BasePullback };
        let kind = raw
            .value("chart.kind", |s| match s.trim() {
                "torus" => Ok(ChartKind::Torus),
                "base_pullback" => Ok(ChartKind::BasePullback),
                "explicit" => Ok(ChartKind::Explicit),
                other => Err(format!("unknown chart kind `{other}` (torus, base_pullback, explicit)")),
            })?
            .unwrap_or(default_kind);
        let m = match kind {
            ChartKind::Torus => n,
            _ => raw.value("chart.m", number)?.unwrap_or(match group {
                GroupName::Nil3 => 2,
                _ => 1,
            }),
        };
        let sizes: Vec<usize> = raw.required("chart.sizes", list)?;
        let sizes = if sizes.len() == 1 { vec![sizes[0]; 2 * m] } else { sizes };
        let periods: Vec<f64> = raw.value("chart.periods", list)?.unwrap_or_else(|| vec![1.0]);
        let periods = if periods.len() == 1 { vec![periods[0]; m] } else { periods };
        let frame = raw.value("chart.frame", |s| rect(s, n, m))?;
        if kind == ChartKind::Explicit && frame.is_none() {
            return Err(ConfigError::Missing("chart.frame".into()));
        }
        let chart = ChartSpec { kind, n, m, sizes, periods, frame, volume: raw.value("chart.volume", number)? };
        let metric = metric_recipe(&raw, "metric", n, 2 * m)?;
        let mode = raw.value("flow.mode", |s| s.parse::<FlowMode>().map_err(|e| e.to_string()))?.unwrap_or(FlowMode::Full);
        let window = raw
            .value("stability.window", |s| match list::<f64>(s)?.as_slice() {
                [a, b] if a < b => Ok((*a, *b)),
                _ => Err("expected `t1 t2` with t1 < t2".to_string()),
            })?;
        let output_dir = raw.value("output.dir", |s| Ok(PathBuf::from(s)))?.unwrap_or_else(|| PathBuf::from("out"));
        let output_dir = if output_dir.is_absolute() { output_dir } else { base_dir.join(output_dir) };
        Ok(ExperimentConfig {
            name: raw.value("name", |s| Ok(s.to_string()))?.unwrap_or_else(|| "run".into()),
            group,
            lambda,
            chart,
            metric,
            mode,
            t_end: raw.value("flow.t_end", number)?.unwrap_or(1.0),
            cfl_sigma: raw.value("flow.cfl_sigma", number)?.unwrap_or(0.2),
            b_monitor: raw.value("flow.b_monitor", number)?,
            record_every: raw.value("flow.record_every", number)?.unwrap_or(10),
            snapshot_every: raw.value("flow.snapshot_every", number)?,
            max_steps: raw.value("flow.max_steps", number)?.unwrap_or(10_000_000),
            background: raw.value("flow.background", |s| matrix(s, n))?,
            sobolev_orders: raw.value("sobolev.orders", list)?.unwrap_or_default(),
            window,
            output_dir,
        })
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::parse(&text, dir).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    pub fn spec(&self) -> chernflow_core::Result<LieGroupSpec> {
        LieGroupSpec::catalog(self.group, self.lambda.map(|l| C::new(l, 0.0)))
    }

    pub fn background_metric(&self) -> DMatrix<C> {
        self.background.clone().unwrap_or_else(|| self.metric.background())
    }

    /// Builds the flow configuration, sampling the initial metric.
    pub fn flow_config(&self) -> chernflow_core::Result<FlowConfig> {
        let chart = self.chart.build()?;
        let g = self.metric.sample(&chart)?;
        let mut cfg = FlowConfig::new(self.spec()?, chart, g, self.mode);
        cfg.background = self.background_metric();
        cfg.t_end = self.t_end;
        cfg.cfl_sigma = self.cfl_sigma;
        cfg.b_monitor = self.b_monitor;
        cfg.record_every = self.record_every;
        cfg.snapshot_every = self.snapshot_every;
        cfg.sobolev_orders = self.sobolev_orders.clone();
        cfg.max_steps = self.max_steps;
        Ok(cfg)
    }
}
