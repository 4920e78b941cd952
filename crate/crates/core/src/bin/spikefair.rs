use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;
use spikefair::harness::{self, bundled, ConfigIssue, ExperimentConfig, SweepError};

#[derive(Parser)]
#[command(name = "spikefair", version, about = "Fairness audits for spiking networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (run and sweep).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment. CONFIG is a JSON file or a bundled name.
    Run { config: String },
    /// Check a config and print every problem found.
    Validate { config: String },
    /// Print the reports of a finished run.
    Report {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run one experiment per value of a config field.
    Sweep {
        config: String,
        /// `<path>=<v1>,<v2>,...`, e.g. `dataset.spurious_strength=0.5,0.95`.
        #[arg(long)]
        vary: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Config(Vec<ConfigIssue>),
    Runtime(String),
}

impl Failure {
    fn config(path: &str, message: impl Into<String>) -> Self {
        Failure::Config(vec![ConfigIssue {
            path: path.into(),
            message: message.into(),
        }])
    }
}

/// Reads a config file, falling back to the bundled configs by name.
fn load_text(source: &str) -> Result<(String, String), Failure> {
    let path = Path::new(source);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Failure::config("", format!("{source}: {e}")))?;
        let stem = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
        return Ok((text, stem));
    }
    match bundled::get(source) {
        Some(text) => Ok((text.to_string(), source.to_string())),
        None => Err(Failure::config("", format!("{source}: no such file or bundled config"))),
    }
}

fn load_config(source: &str, seed: Option<u64>) -> Result<(ExperimentConfig, String), Failure> {
    let (text, stem) = load_text(source)?;
    let mut cfg = harness::validate_config(&text).map_err(Failure::Config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok((cfg, stem))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate { config } => {
            let (cfg, _) = load_config(config, cli.seed)?;
            if !cli.quiet {
                println!("{}", cfg.to_json());
            }
        }
        Command::Run { config } => {
            let (cfg, stem) = load_config(config, cli.seed)?;
            let dir = cli
                .out
                .clone()
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("runs").join(format!("{stem}-seed{}", cfg.seed)));
            let art = harness::run_experiment(&cfg, &dir).map_err(|e| Failure::Runtime(e.to_string()))?;
            if !cli.quiet {
                let r = &art.result;
                println!("{}", art.dir.display());
                println!("accuracy {:.4}", r.evaluation.accuracy.to_f64());
                for f in &r.fairness {
                    println!(
                        "positive class {}: delta_sp {} delta_eo {} delta_acc {:.4}",
                        f.positive_class,
                        f.delta_sp.map_or("-".into(), |v| format!("{v:.4}")),
                        f.delta_eo.map_or("-".into(), |v| format!("{v:.4}")),
                        f.delta_acc
                    );
                }
                println!(
                    "epoch-0 gap {:.4}, {} collapse events",
                    r.asymmetry.epoch0_gap,
                    r.asymmetry.collapse_events.len()
                );
            }
        }
        Command::Report { dir, format } => {
            let summary = harness::load_summary(dir).map_err(|e| Failure::Runtime(e.to_string()))?;
            match format {
                Format::Json => println!("{}", summary.to_json().map_err(|e| Failure::Runtime(e.to_string()))?),
                Format::Csv => summary
                    .write_csv(std::io::stdout().lock())
                    .map_err(|e| Failure::Runtime(e.to_string()))?,
            }
        }
        Command::Sweep { config, vary } => {
            let (text, stem) = load_text(config)?;
            // Validate the base first so its problems are reported as such.
            harness::validate_config(&text).map_err(Failure::Config)?;
            let mut base: Value = serde_json::from_str(&text).map_err(|e| Failure::config("", e.to_string()))?;
            if let Some(s) = cli.seed {
                base["seed"] = Value::from(s);
            }
            let (path, values) = harness::parse_vary(vary).map_err(|i| Failure::Config(vec![i]))?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("sweeps").join(&stem));
            let points = harness::sweep(&base, &path, &values, &out).map_err(|e| match e {
                SweepError::Config { index, issues } => Failure::Config(
                    issues
                        .into_iter()
                        .map(|i| ConfigIssue {
                            path: i.path,
                            message: format!("point {index}: {}", i.message),
                        })
                        .collect(),
                ),
                other => Failure::Runtime(other.to_string()),
            })?;
            if !cli.quiet {
                for p in &points {
                    println!(
                        "{} {}={} seed {} accuracy {:.4} delta_acc {:.4}",
                        p.dir.display(),
                        path,
                        p.value,
                        p.seed,
                        p.accuracy,
                        p.delta_acc
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(issues)) => {
            for i in issues {
                eprintln!("config error: {i}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
