use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ergoloc::io::{
    cmd_classify, cmd_plotdata, cmd_run, cmd_sweep, exit_code, ExperimentConfig, PlotPreset, Preset, RunOptions,
    SweepAxis,
};
use ergoloc::{Error, Result};

/// Local ergotropy and localization dynamics of the disordered XXZ chain.
#[derive(Parser, Debug)]
#[command(name = "ergoloc", version)]
struct Cli {
    /// Master seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: ERGOLOC_WORKERS, else all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output root directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one ensemble and write its result bundle.
    Run {
        /// Experiment file (JSON), or `preset:<name>` for a built-in preset.
        config: String,
    },
    /// Run one ensemble per value of a parameter.
    Sweep {
        config: String,
        /// W, Jz or N.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Classify the dynamical phase recorded in a bundle.
    Classify {
        bundle: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Write figure-ready CSV and SVG from one or more bundles.
    Plotdata {
        #[arg(required = true)]
        bundles: Vec<PathBuf>,
        /// fig1b, fig2, fig3, fig4 or figA1.
        #[arg(long)]
        preset: String,
    },
}

fn load_config(spec: &str) -> Result<ExperimentConfig> {
    match spec.strip_prefix("preset:") {
        Some(name) => Ok(name.parse::<Preset>()?.config()),
        None => ExperimentConfig::load(std::path::Path::new(spec)),
    }
}

fn workers(flag: Option<usize>) -> Result<usize> {
    if let Some(w) = flag {
        return if w == 0 {
            Err(Error::Config("--workers must be at least 1".into()))
        } else {
            Ok(w)
        };
    }
    if let Ok(v) = std::env::var("ERGOLOC_WORKERS") {
        return match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Error::Config(format!("ERGOLOC_WORKERS must be a positive integer, got `{v}`"))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run(cli: Cli) -> Result<()> {
    let opts = RunOptions {
        out: cli.out.clone(),
        seed: cli.seed,
        workers: workers(cli.workers)?,
    };
    match cli.command {
        Command::Run { config } => {
            let path = cmd_run(&load_config(&config)?, &opts)?;
            println!("{}", path.display());
        }
        Command::Sweep { config, axis, values } => {
            let outcome = cmd_sweep(&load_config(&config)?, axis.parse::<SweepAxis>()?, &values, &opts)?;
            for b in &outcome.bundles {
                println!("{}", b.display());
            }
            println!("{}", outcome.summary.display());
        }
        Command::Classify { bundle, json } => {
            let report = cmd_classify(&bundle)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                println!("phase: {}", report.label);
                for (name, fit) in [
                    ("block entropy", &report.entropy_fit),
                    ("local ergotropy", &report.ergotropy_fit),
                    ("work fluctuation", &report.sigma_fit),
                ] {
                    println!(
                        "  {name:<17} slope {:+.4e} +- {:.2e} per ln t ({} points)",
                        fit.slope, fit.stderr, fit.points
                    );
                }
                println!(
                    "  late-time local ergotropy {:.4e} (ERG below {:.4e})",
                    report.late_ergotropy, report.erg_threshold
                );
                for d in &report.diagnostics {
                    println!("  note: {d}");
                }
            }
        }
        Command::Plotdata { bundles, preset } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("plots"));
            for p in cmd_plotdata(&bundles, preset.parse::<PlotPreset>()?, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
