use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use chernflow::commands::{cmd_flow, cmd_stability, cmd_validate, exit_code};
use chernflow::config::ExperimentConfig;
use chernflow::plot::cmd_report;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chernflow", version, about = "Hermitian curvature flow on complex parallelizable manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check structure constants, chart and initial metric without running.
    Validate { config: PathBuf },
    /// Run the flow and write the series, snapshots and summary.
    Flow {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a perturbation experiment and fit the curvature decay.
    Stability {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw one SVG per monitor from one or more series.
    Report {
        #[arg(required = true)]
        series: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma separated column names; all monitors by default.
        #[arg(long, value_delimiter = ',')]
        columns: Option<Vec<String>>,
        /// Fit window `t0,t1` for the decay overlay.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        window: Option<Vec<f64>>,
    },
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("CHERNFLOW_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("CHERNFLOW_THREADS = `{v}` is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load(path: &Path, out: Option<PathBuf>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> anyhow::Result<u8> {
    configure_threads()?;
    match cli.command {
        Command::Validate { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let report = cmd_validate(&cfg);
            print!("{}", report.render());
            Ok(if report.ok() { 0 } else { 1 })
        }
        Command::Flow { config, out } => {
            let cfg = load(&config, out)?;
            let summary = cmd_flow(&cfg)?;
            print!("{}", summary.text);
            Ok(if summary.broke_down() { 2 } else { 0 })
        }
        Command::Stability { config, out } => {
            let cfg = load(&config, out)?;
            let report = cmd_stability(&cfg)?;
            print!("{}{}", report.flow.text, report.text);
            Ok(if report.flow.broke_down() {
                2
            } else if report.failed {
                1
            } else {
                0
            })
        }
        Command::Report { series, out, columns, window } => {
            let window = window.map(|w| (w[0], w[1]));
            let written = cmd_report(&series, columns.as_deref(), window, &out)?;
            for p in written {
                println!("{}", p.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
