use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use m3fair::error::{Error, Stage, StageExt};
use m3fair::experiment::{grid_search, run_detection, run_experiment, training_weights, GridSearchConfig};
use m3fair::{emit_report, ExperimentConfig, ExperimentReport};

#[derive(Parser)]
#[command(name = "m3fair", version, about = "Bias detection and multi-attribute reweighting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank columns by group unfairness under an unweighted baseline.
    Detect {
        config: PathBuf,
        /// Write the detection result as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one or more experiment configs and print a combined table.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Report path; `.json` and `.txt` are written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search level weights for an m3fair config.
    Grid {
        config: PathBuf,
        /// Grid search settings (JSON).
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export training-row weights as a single-column CSV.
    Weights {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Path) -> m3fair::Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).stage(Stage::Config)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> m3fair::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn emit(report: &ExperimentReport, out: Option<&Path>) -> m3fair::Result<()> {
    print!("{}", report.to_table());
    if let Some(out) = out {
        let (json, txt) = emit_report(report, out).stage(Stage::Report)?;
        eprintln!("wrote {} and {}", json.display(), txt.display());
    }
    Ok(())
}

fn run(cli: Cli) -> m3fair::Result<()> {
    match cli.command {
        Command::Detect { config, out } => {
            let config = load_config(&config)?;
            let result = run_detection(&config)?;
            println!("top {} intersection: {}", result.top_n, result.intersection.join(", "));
            for s in &result.skipped {
                println!("skipped {}: {}", s.column, s.reason);
            }
            if let Some(out) = out {
                write_json(&out, &result).stage(Stage::Report)?;
            }
        }
        Command::Run { configs, out } => {
            let mut report = ExperimentReport::default();
            let mut default_out = None;
            for path in &configs {
                let config = load_config(path)?;
                if default_out.is_none() {
                    default_out = config.report_path.clone();
                }
                report.append(run_experiment(&config)?);
            }
            emit(&report, out.or(default_out).as_deref())?;
        }
        Command::Grid { config, grid, out } => {
            let config = load_config(&config)?;
            let grid = match grid {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| Error::Io { path: p.clone(), source: e })
                        .stage(Stage::Config)?;
                    serde_json::from_str::<GridSearchConfig>(&text).map_err(Error::from).stage(Stage::Config)?
                }
                None => GridSearchConfig::default(),
            };
            let outcome = grid_search(&config, &grid)?;
            for p in &outcome.points {
                let levels: Vec<String> = p.level_weights.iter().map(|(a, l)| format!("{a}={l}")).collect();
                match (&p.score, &p.error) {
                    (Some(s), _) => println!("{:<40} score {s:.4}", levels.join(" ")),
                    (_, Some(e)) => println!("{:<40} failed: {e}", levels.join(" ")),
                    _ => {}
                }
            }
            let best: Vec<String> = outcome.best.iter().map(|(a, l)| format!("{a}={l}")).collect();
            println!("best: {}\n", best.join(" "));
            emit(&outcome.report, out.as_deref().or(config.report_path.as_deref()))?;
            if let Some(out) = out {
                write_json(&out.with_extension("grid.json"), &outcome.points).stage(Stage::Report)?;
            }
        }
        Command::Weights { config, out } => {
            let config = load_config(&config)?;
            let weights = training_weights(&config)?;
            weights.write_csv(&out).stage(Stage::Report)?;
            eprintln!("wrote {} weights to {}", weights.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
