use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use chernflow_core::flow::{fit_decay, read_series_file, DiagnosticsRecord};
use plotters::prelude::*;

use crate::commands::series_label;

const COLORS: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

/// Columns drawn on a logarithmic axis.
pub fn is_norm(column: &str) -> bool {
    matches!(column, "r2_l2" | "r2_max" | "w_inf" | "variation" | "offdiag_max" | "max_S") || column.starts_with("hm_") || column.starts_with("a_")
}

pub struct Series {
    pub label: String,
    pub records: Vec<DiagnosticsRecord>,
}

pub fn load(paths: &[PathBuf]) -> anyhow::Result<Vec<Series>> {
    paths
        .iter()
        .map(|p| {
            let records = read_series_file(p).with_context(|| format!("reading {}", p.display()))?;
            if records.is_empty() {
                bail!("{} has no records", p.display());
            }
            Ok(Series { label: series_label(p), records })
        })
        .collect()
}

/// Columns present in the first series, in file order, minus `t`, `dt` and `step`.
fn default_columns(series: &[Series]) -> Vec<String> {
    series[0].records[0].columns().into_iter().filter(|c| !matches!(c.as_str(), "t" | "dt" | "step")).collect()
}

/// Writes one SVG per column into `out`; returns the written paths.
pub fn cmd_report(paths: &[PathBuf], columns: Option<&[String]>, window: Option<(f64, f64)>, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if paths.is_empty() {
        bail!("no series given");
    }
    let series = load(paths)?;
    let columns = match columns {
        Some(c) => c.to_vec(),
        None => default_columns(&series),
    };
    for c in &columns {
        for s in &series {
            if s.records[0].get(c).is_none() {
                bail!("column `{c}` is missing from {}", s.label);
            }
        }
    }
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for c in &columns {
        let path = out.join(format!("{c}.svg"));
        draw_column(&series, c, window, &path).map_err(|e| anyhow!("drawing {}: {e}", path.display()))?;
        written.push(path);
    }
    let summary = out.join("summary.txt");
    std::fs::write(&summary, summary_text(&series, &columns, window))?;
    written.push(summary);
    Ok(written)
}

/// Final value of every column per series, plus the `r2_l2` decay fits.
pub fn summary_text(series: &[Series], columns: &[String], window: Option<(f64, f64)>) -> String {
    let mut s = String::new();
    for x in series {
        let last = x.records.last().unwrap();
        let _ = writeln!(s, "{}: {} records, t in [{}, {}]", x.label, x.records.len(), x.records[0].t, last.t);
        for c in columns {
            let _ = writeln!(s, "  {c:<12} {:.6e}", last.get(c).unwrap());
        }
    }
    if columns.iter().any(|c| c == "r2_l2") {
        for f in fit_lines(series, "r2_l2", window) {
            let _ = writeln!(s, "{}: ‖R̃‖_L2 fit on [{}, {}], a = {:.6e}, β = {:.6e}", series[f.index].label, f.window.0, f.window.1, f.amplitude, f.beta);
        }
    }
    s
}

fn draw_column(series: &[Series], column: &str, window: Option<(f64, f64)>, path: &Path) -> Result<(), Box<dyn std::error::Error>> {
    let log = is_norm(column);
    let curves: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.records
                .iter()
                .map(|r| (r.t, r.get(column).unwrap()))
                .filter(|(_, v)| v.is_finite() && (!log || *v > 0.0))
                .collect()
        })
        .collect();
    let (mut t0, mut t1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(t, y) in curves.iter().flatten() {
        t0 = t0.min(t);
        t1 = t1.max(t);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !t0.is_finite() {
        (t0, t1, y0, y1) = (0.0, 1.0, if log { 1e-16 } else { 0.0 }, 1.0);
    }
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    if log {
        y0 /= 2.0;
        y1 *= 2.0;
    } else {
        let pad = ((y1 - y0) * 0.05).max(1e-12 * y1.abs().max(1.0));
        y0 -= pad;
        y1 += pad;
    }

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut builder = ChartBuilder::on(&root);
    builder.caption(column, ("sans-serif", 22)).margin(12).x_label_area_size(40).y_label_area_size(80);
    let fits = fit_lines(series, column, window);
    if log {
        let mut chart = builder.build_cartesian_2d(t0..t1, (y0..y1).log_scale())?;
        chart.configure_mesh().x_desc("t").y_label_formatter(&|v| format!("{v:.1e}")).draw()?;
        draw_curves(&mut chart, series, &curves, &fits)?;
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    } else {
        let mut chart = builder.build_cartesian_2d(t0..t1, y0..y1)?;
        chart.configure_mesh().x_desc("t").y_label_formatter(&|v| format!("{v:.4}")).draw()?;
        draw_curves(&mut chart, series, &curves, &fits)?;
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    }
    root.present()?;
    Ok(())
}

struct FitLine {
    index: usize,
    window: (f64, f64),
    amplitude: f64,
    beta: f64,
}

fn fit_lines(series: &[Series], column: &str, window: Option<(f64, f64)>) -> Vec<FitLine> {
    if column != "r2_l2" {
        return Vec::new();
    }
    series
        .iter()
        .enumerate()
        .filter_map(|(index, s)| {
            let t_last = s.records.last()?.t;
            let w = window.unwrap_or((0.2 * t_last, 0.8 * t_last));
            let f = fit_decay(&s.records, column, w).ok()?;
            Some(FitLine { index, window: w, amplitude: f.amplitude, beta: f.rate })
        })
        .collect()
}

fn draw_curves<DB, CT>(chart: &mut ChartContext<'_, DB, CT>, series: &[Series], curves: &[Vec<(f64, f64)>], fits: &[FitLine]) -> Result<(), Box<dyn std::error::Error>>
where
    DB: DrawingBackend,
    DB::ErrorType: 'static,
    CT: CoordTranslate<From = (f64, f64)>,
{
    for (i, (s, pts)) in series.iter().zip(curves).enumerate() {
        let color = COLORS[i % COLORS.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    for f in fits {
        let color = COLORS[f.index % COLORS.len()];
        let line: Vec<(f64, f64)> = (0..=40)
            .map(|k| {
                let t = f.window.0 + (f.window.1 - f.window.0) * k as f64 / 40.0;
                (t, f.amplitude * (-f.beta * t).exp())
            })
            .collect();
        chart
            .draw_series(DashedLineSeries::new(line, 6, 4, BLACK.stroke_width(1)))?
            .label(format!("{}: β = {:.4e}", series[f.index].label, f.beta))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(1)));
    }
    Ok(())
}
