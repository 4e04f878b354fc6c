use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use holodof::Method;
use holodof_cli::config::GammaSection;
use holodof_cli::experiment::{write_outputs, write_sweep};
use holodof_cli::{evaluate, load_config, run_sweep, ExitStatus, ExperimentConfig, SweepAxis};

#[derive(Parser)]
#[command(name = "holodof", version, about = "Effective degrees of freedom between planar apertures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured methods and write spectrum.csv, edof.csv and report.json.
    Run {
        config: PathBuf,
        /// Output directory, overriding output.directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of svd,cutset,landau.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Accuracy level as MODE:VALUE, e.g. relative:0.5.
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Repeat the run along one axis and write sweep.csv.
    Sweep {
        config: PathBuf,
        /// distance, tx_size, rx_size, wavelength or scale_r.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values; scale_r defaults to landau_options.scales.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse the config and check the geometry only.
    Validate { config: PathBuf },
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(ExitStatus::Validation.code() as u8)
}

fn parse_method(name: &str) -> Option<Method> {
    match name.trim() {
        "svd" => Some(Method::Svd),
        "cutset" => Some(Method::Cutset),
        "landau" => Some(Method::Landau),
        _ => None,
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, String> {
    load_config(path).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    faer::set_global_parallelism(faer::Par::Seq);
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load(&config) {
            Ok(_) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Run { config, out, methods, gamma } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if let Some(list) = methods {
                let parsed: Option<Vec<Method>> = list.iter().map(|m| parse_method(m)).collect();
                match parsed {
                    Some(m) => cfg.methods = m,
                    None => return fail(format!("unknown method in {list:?}; expected svd, cutset, landau")),
                }
            }
            if let Some(g) = gamma {
                match GammaSection::parse(&g) {
                    Ok(g) => cfg.gamma = g,
                    Err(e) => return fail(e),
                }
            }
            let outcome = match evaluate(&cfg) {
                Ok(o) => o,
                Err(e) => return fail(e),
            };
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
            if let Err(e) = write_outputs(&outcome, &dir) {
                eprintln!("error: {e}");
                return ExitCode::from(ExitStatus::Partial.code() as u8);
            }
            for entry in &outcome.report.methods {
                match (&entry.report, &entry.error) {
                    (Some(r), _) => println!("{:<8} {:.6}", entry.method.as_str(), r.n_edof),
                    (None, Some(e)) => println!("{:<8} failed: {e}", entry.method.as_str()),
                    _ => {}
                }
            }
            ExitCode::from(outcome.status().code() as u8)
        }
        Command::Sweep { config, axis, values, out } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let Some(axis) = SweepAxis::parse(&axis) else {
                return fail(format!("unknown axis {axis:?}; expected distance, tx_size, rx_size, wavelength, scale_r"));
            };
            let values = if values.is_empty() && axis == SweepAxis::ScaleR {
                cfg.landau_options.scales.clone()
            } else {
                values
            };
            let outcome = match run_sweep(&cfg, axis, &values) {
                Ok(o) => o,
                Err(e) => return fail(e),
            };
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
            if let Err(e) = write_sweep(&outcome, &cfg, &dir) {
                eprintln!("error: {e}");
                return ExitCode::from(ExitStatus::Partial.code() as u8);
            }
            for row in &outcome.rows {
                match row.n_edof {
                    Some(n) => println!("{:<12} {:<12} {n:.6}", row.axis_value, row.method),
                    None => println!("{:<12} {:<12} failed: {}", row.axis_value, row.method, row.error.as_deref().unwrap_or("")),
                }
            }
            ExitCode::from(outcome.status.code() as u8)
        }
    }
}
