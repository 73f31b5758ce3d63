//! Campaign summaries: one row per vehicle count, plus box-plot figures of
//! min distance and mission time bucketed by mean aggressiveness.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use roundabout::sim::RunMetrics;
use roundabout::trace::read_trace;
use serde::{Deserialize, Serialize};

/// Metrics of one finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub n_vehicles: usize,
    pub seed: u64,
    pub metrics: RunMetrics,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme values within 1.5 IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggressivenessBucket {
    pub lo: f64,
    pub hi: f64,
    pub runs: usize,
    pub min_distance: Option<BoxStats>,
    pub mission_time: Option<BoxStats>,
}

/// Summary CSV columns, in order. The JSON rows carry the same keys plus
/// `buckets`.
pub const COLUMNS: [&str; 13] = [
    "n_vehicles",
    "runs",
    "collisions",
    "collision_rate_pct",
    "avg_min_distance_m",
    "avg_mission_time_s",
    "p25_min_distance_m",
    "p50_min_distance_m",
    "p75_min_distance_m",
    "p25_mission_s",
    "p50_mission_s",
    "p75_mission_s",
    "censored_runs",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n_vehicles: usize,
    pub runs: usize,
    pub collisions: usize,
    pub collision_rate_pct: f64,
    pub avg_min_distance_m: Option<f64>,
    pub avg_mission_time_s: Option<f64>,
    pub p25_min_distance_m: Option<f64>,
    pub p50_min_distance_m: Option<f64>,
    pub p75_min_distance_m: Option<f64>,
    pub p25_mission_s: Option<f64>,
    pub p50_mission_s: Option<f64>,
    pub p75_mission_s: Option<f64>,
    pub censored_runs: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub buckets: Vec<AggressivenessBucket>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryReport {
    pub rows: Vec<SummaryRow>,
    /// Runs that failed, or trace files that could not be read.
    pub skipped_runs: usize,
}

/// Quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let xs = sorted(values.to_vec());
    let (q1, q3) = (quantile(&xs, 0.25), quantile(&xs, 0.75));
    let reach = 1.5 * (q3 - q1);
    let inside = || xs.iter().copied().filter(|x| *x >= q1 - reach && *x <= q3 + reach);
    Some(BoxStats {
        median: quantile(&xs, 0.5),
        q1,
        q3,
        whisker_low: inside().fold(f64::INFINITY, f64::min),
        whisker_high: inside().fold(f64::NEG_INFINITY, f64::max),
    })
}

pub const BUCKET_LO: f64 = 0.2;
pub const BUCKET_WIDTH: f64 = 0.1;
pub const BUCKET_COUNT: usize = 6;

/// Lower edge of bucket `k`, computed in tenths so edges print cleanly.
fn bucket_edge(k: usize) -> f64 {
    (BUCKET_LO * 10.0 + k as f64).round() / 10.0
}

/// Bucket of a mean aggressiveness; the top bucket includes 0.8.
pub fn bucket_index(mean_aggressiveness: f64) -> Option<usize> {
    let k = ((mean_aggressiveness - BUCKET_LO) / BUCKET_WIDTH + 1e-9).floor();
    if !(0.0..=BUCKET_COUNT as f64).contains(&k) || mean_aggressiveness > BUCKET_LO + BUCKET_WIDTH * BUCKET_COUNT as f64 + 1e-9 {
        return None;
    }
    Some((k as usize).min(BUCKET_COUNT - 1))
}

/// Mission time of a run, if it counts toward mission-time figures.
fn mission_time(m: &RunMetrics) -> Option<f64> {
    if m.collided || m.censored {
        None
    } else {
        m.mean_mission_time
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn quartiles(xs: Vec<f64>) -> [Option<f64>; 3] {
    if xs.is_empty() {
        return [None; 3];
    }
    let xs = sorted(xs);
    [0.25, 0.5, 0.75].map(|q| Some(quantile(&xs, q)))
}

pub fn summary_row(n_vehicles: usize, runs: &[RunMetrics]) -> SummaryRow {
    let distances: Vec<f64> = runs.iter().filter_map(|m| m.min_distance).collect();
    let missions: Vec<f64> = runs.iter().filter_map(mission_time).collect();
    let collisions = runs.iter().filter(|m| m.collided).count();
    let [p25d, p50d, p75d] = quartiles(distances.clone());
    let [p25m, p50m, p75m] = quartiles(missions.clone());
    let mut per_bucket: Vec<Vec<&RunMetrics>> = vec![Vec::new(); BUCKET_COUNT];
    for m in runs {
        if let Some(k) = m.mean_aggressiveness.and_then(bucket_index) {
            per_bucket[k].push(m);
        }
    }
    let buckets = per_bucket
        .iter()
        .enumerate()
        .map(|(k, ms)| AggressivenessBucket {
            lo: bucket_edge(k),
            hi: bucket_edge(k + 1),
            runs: ms.len(),
            min_distance: box_stats(&ms.iter().filter_map(|m| m.min_distance).collect::<Vec<_>>()),
            mission_time: box_stats(&ms.iter().copied().filter_map(mission_time).collect::<Vec<_>>()),
        })
        .collect();
    SummaryRow {
        n_vehicles,
        runs: runs.len(),
        collisions,
        collision_rate_pct: if runs.is_empty() { 0.0 } else { 100.0 * collisions as f64 / runs.len() as f64 },
        avg_min_distance_m: mean(&distances),
        avg_mission_time_s: mean(&missions),
        p25_min_distance_m: p25d,
        p50_min_distance_m: p50d,
        p75_min_distance_m: p75d,
        p25_mission_s: p25m,
        p50_mission_s: p50m,
        p75_mission_s: p75m,
        censored_runs: runs.iter().filter(|m| m.censored).count(),
        buckets,
    }
}

/// Groups runs by vehicle count, orders each group by seed and summarises.
pub fn build_report(mut results: Vec<RunResult>, skipped_runs: usize) -> SummaryReport {
    results.sort_by_key(|r| (r.n_vehicles, r.seed));
    let mut groups: BTreeMap<usize, Vec<RunMetrics>> = BTreeMap::new();
    for r in results {
        groups.entry(r.n_vehicles).or_default().push(r.metrics);
    }
    SummaryReport {
        rows: groups.iter().map(|(n, ms)| summary_row(*n, ms)).collect(),
        skipped_runs,
    }
}

/// Parses `trace_n{n}_seed{seed}.csv`.
pub fn parse_trace_file_name(name: &str) -> Option<(usize, u64)> {
    let rest = name.strip_prefix("trace_n")?.strip_suffix(".csv")?;
    let (n, seed) = rest.split_once("_seed")?;
    Some((n.parse().ok()?, seed.parse().ok()?))
}

/// A trace file that could not be used.
#[derive(Clone, Debug, PartialEq)]
pub struct Skipped {
    pub file: String,
    pub reason: String,
}

/// Rebuilds the report from the trace files in `dir`. Files that do not
/// parse are skipped and listed; other files are ignored.
pub fn summarize(dir: &Path) -> std::io::Result<(SummaryReport, Vec<Skipped>)> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|name| name.starts_with("trace_") && name.ends_with(".csv"))
        .collect();
    names.sort();
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for name in names {
        let Some((n_vehicles, seed)) = parse_trace_file_name(&name) else {
            skipped.push(Skipped { file: name, reason: "name is not trace_n<N>_seed<S>.csv".into() });
            continue;
        };
        let parsed = fs::File::open(dir.join(&name))
            .map_err(|e| e.to_string())
            .and_then(|f| read_trace(f).map_err(|e| e.to_string()));
        match parsed {
            Ok(table) => results.push(RunResult { n_vehicles, seed, metrics: table.metrics() }),
            Err(reason) => skipped.push(Skipped { file: name, reason }),
        }
    }
    Ok((build_report(results, skipped.len()), skipped))
}

pub fn write_csv<W: Write>(report: &SummaryReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    let num = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &report.rows {
        w.write_record([
            r.n_vehicles.to_string(),
            r.runs.to_string(),
            r.collisions.to_string(),
            r.collision_rate_pct.to_string(),
            num(r.avg_min_distance_m),
            num(r.avg_mission_time_s),
            num(r.p25_min_distance_m),
            num(r.p50_min_distance_m),
            num(r.p75_min_distance_m),
            num(r.p25_mission_s),
            num(r.p50_mission_s),
            num(r.p75_mission_s),
            r.censored_runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `summary.csv` and `summary.json` into `dir`.
pub fn write_report(report: &SummaryReport, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(report, fs::File::create(dir.join("summary.csv"))?).map_err(std::io::Error::other)?;
    let json = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    fs::write(dir.join("summary.json"), json + "\n")
}
