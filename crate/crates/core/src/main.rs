use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use semitopo::cli::{self, AnalysisConfig, CalibrationOptions, Status};
use std::path::PathBuf;
use std::process::ExitCode;

/// Topological charges, slice invariants and Euler chains of band structures
/// on the Brillouin torus.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    /// Run every parallel stage on a single thread.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on a config and write the report and tables.
    Analyze {
        config: PathBuf,
        /// Overrides `output.report`.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Overrides `output.tables`.
        #[arg(long)]
        tables: Option<PathBuf>,
    },
    /// Check the invariant routines against reference values.
    Calibrate {
        #[arg(long)]
        coarse: bool,
        #[arg(long)]
        tamper_orientation: bool,
        /// Also write the rows as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Compare the Euler chains of two configs with matching charges.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        match_tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Dump band energies along a polyline `k;k;...` (components may use `pi`).
    Spectrum {
        config: PathBuf,
        #[arg(long)]
        path: String,
        /// Samples per segment.
        #[arg(long, default_value_t = 64)]
        points: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sample the configured field on the configured grid.
    BuildField {
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn configure_threads(deterministic: bool) -> anyhow::Result<()> {
    let threads = if deterministic {
        Some(1)
    } else {
        match std::env::var("SEMITOPO_THREADS") {
            Ok(v) => Some(v.parse::<usize>().context("SEMITOPO_THREADS must be a positive integer")?),
            Err(_) => None,
        }
    };
    if let Some(n) = threads {
        if n == 0 {
            bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: Args) -> anyhow::Result<i32> {
    configure_threads(args.deterministic)?;
    match args.command {
        Command::Analyze { config, report, tables } => {
            let cfg = AnalysisConfig::load(&config)?;
            let analysis = cli::analyze(&cfg)?;
            let r = &analysis.report;
            let report_path = report.or_else(|| cfg.output.report.clone());
            let tables = tables.or_else(|| cfg.output.tables.clone());
            cli::write_outputs(r, report_path.as_deref(), tables.as_deref())?;
            for g in r.failing_gates() {
                eprintln!("gate {} failed: {}", g.name, g.message.clone().unwrap_or_default());
            }
            Ok(analysis.status().exit_code())
        }
        Command::Calibrate { coarse, tamper_orientation, json } => {
            let rows = cli::calibrate(CalibrationOptions { coarse, tamper_orientation });
            print!("{}", cli::calibration_table(&rows));
            if let Some(p) = json {
                std::fs::write(&p, serde_json::to_string_pretty(&rows)? + "\n")?;
            }
            let failing: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| format!("{}@{}", r.check, r.resolution)).collect();
            if failing.is_empty() {
                Ok(0)
            } else {
                eprintln!("failing rows: {}", failing.join(", "));
                Ok(Status::NumericalGateFailure.exit_code())
            }
        }
        Command::Compare { a, b, match_tol, output } => {
            let ca = AnalysisConfig::load(&a)?;
            let cb = AnalysisConfig::load(&b)?;
            let cmp = cli::compare(&ca, &cb, match_tol)?;
            write_or_print(output.as_ref(), &cmp.to_json())?;
            Ok(0)
        }
        Command::Spectrum { config, path, points, output } => {
            let cfg = AnalysisConfig::load(&config)?;
            let field = cfg.field.build()?;
            let rows = cli::spectrum(&field, &cli::parse_path(&path)?, points, cfg.tolerances.hermiticity)?;
            write_or_print(output.as_ref(), &cli::spectrum_csv(&rows))?;
            Ok(0)
        }
        Command::BuildField { config, output } => {
            let cfg = AnalysisConfig::load(&config)?;
            let file = std::fs::File::create(&output).with_context(|| format!("creating {}", output.display()))?;
            cli::build_field(&cfg, std::io::BufWriter::new(file))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<semitopo::Error>() {
                Some(err) if err.is_numerical_gate() => 3,
                Some(err) if err.is_verification_failure() => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
