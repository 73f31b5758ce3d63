use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use roundabout_cli::report::{summarize, write_csv, write_report};
use roundabout_cli::{parse_config, run_campaign, ExperimentConfig, SEED_ENV};

/// Monte-Carlo campaigns of game-theoretic vehicles at a roundabout.
#[derive(Parser)]
#[command(name = "roundabout-sim", version)]
struct Cli {
    /// Experiment configuration file; defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for summary.csv, summary.json and traces/.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one CSV trace per run.
    #[arg(long)]
    traces: bool,
    /// Base seed for every campaign row.
    #[arg(long)]
    seed: Option<u64>,
    /// Runs per campaign row.
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads; all logical CPUs by default.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Rebuild the summary from a directory of trace files. Prints the CSV,
    /// or writes both summary files with --out.
    Summarize { dir: PathBuf },
}

fn load(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| path.display().to_string())?
        }
        None => ExperimentConfig::default(),
    };
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(s) => Some(s.trim().parse::<u64>().with_context(|| format!("{SEED_ENV}=`{s}` is not a u64"))?),
        Err(_) => None,
    };
    cfg.override_campaign(cli.seed.or(env_seed), cli.runs);
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    cfg.output.traces |= cli.traces;
    Ok(cfg)
}

fn main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(Command::Summarize { dir }) = &cli.command {
        let (report, skipped) = summarize(dir).with_context(|| format!("reading {}", dir.display()))?;
        for s in &skipped {
            eprintln!("warning: skipped {}: {}", s.file, s.reason);
        }
        if !skipped.is_empty() {
            eprintln!("warning: {} trace file(s) skipped", skipped.len());
        }
        match &cli.out {
            Some(out) => write_report(&report, out).with_context(|| out.display().to_string())?,
            None => write_csv(&report, std::io::stdout().lock())?,
        }
        return Ok(ExitCode::SUCCESS);
    }
    let cfg = load(&cli)?;
    if cli.jobs == Some(0) {
        bail!("--jobs must be at least 1");
    }
    let outcome = run_campaign(&cfg, cli.jobs)?;
    for f in &outcome.failures {
        eprintln!("error: n={} seed={}: {}", f.n_vehicles, f.seed, f.message);
    }
    for row in &outcome.report.rows {
        eprintln!(
            "n={} runs={} collisions={} avg_min_distance={} avg_mission_time={}",
            row.n_vehicles,
            row.runs,
            row.collisions,
            row.avg_min_distance_m.map_or("-".into(), |v| format!("{v:.2}")),
            row.avg_mission_time_s.map_or("-".into(), |v| format!("{v:.2}")),
        );
    }
    eprintln!("wrote {}", cfg.output.dir.join("summary.csv").display());
    Ok(if outcome.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
