//! Seeded batches of simulations.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use roundabout::sim::{init_scenario, run};
use roundabout::trace::{trace_file_name, write_trace};

use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{build_report, write_report, RunResult, SummaryReport};

/// A run that produced no result, or whose trace could not be written.
#[derive(Clone, Debug, PartialEq)]
pub struct RunFailure {
    pub n_vehicles: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignOutcome {
    pub report: SummaryReport,
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub fn traces_dir(out: &Path) -> PathBuf {
    out.join("traces")
}

/// Runs every campaign row on `jobs` threads (all logical CPUs when
/// `None`), writes traces if enabled and then the summary files.
/// Failed runs are left out of the report and listed in the outcome.
pub fn run_campaign(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<CampaignOutcome, CampaignError> {
    let model = Arc::new(cfg.model()?);
    cfg.validate()?;
    let out = &cfg.output.dir;
    let traces = cfg.output.traces.then(|| traces_dir(out));
    if let Some(dir) = &traces {
        fs::create_dir_all(dir).map_err(|source| CampaignError::Io { path: dir.clone(), source })?;
    }
    let tasks: Vec<(usize, u64)> = cfg
        .campaign
        .iter()
        .flat_map(|row| (0..row.runs as u64).map(move |k| (row.n_vehicles, row.base_seed + k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CampaignError::Pool(e.to_string()))?;
    let outcomes: Vec<Result<RunResult, RunFailure>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(n, seed)| {
                let fail = |message: String| RunFailure { n_vehicles: n, seed, message };
                let world = init_scenario(n, seed, model.clone(), cfg.sim.clone()).map_err(|e| fail(e.to_string()))?;
                let trace = run(world).map_err(|e| fail(e.to_string()))?;
                if let Some(dir) = &traces {
                    let path = dir.join(trace_file_name(n, seed));
                    let file = fs::File::create(&path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
                    write_trace(&trace, std::io::BufWriter::new(file)).map_err(|e| fail(format!("{}: {e}", path.display())))?;
                }
                Ok(RunResult { n_vehicles: n, seed, metrics: trace.metrics() })
            })
            .collect()
    });
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    let report = build_report(results, failures.len());
    write_report(&report, out).map_err(|source| CampaignError::Io { path: out.clone(), source })?;
    Ok(CampaignOutcome { report, failures })
}
