use std::fs;
use std::path::Path;
use std::process::Command;

use roundabout::sim::SimParams;
use roundabout_cli::config::OutputConfig;
use roundabout_cli::report::summarize;
use roundabout_cli::{parse_config, run_campaign, CampaignRow, ExperimentConfig};

fn small(out: &Path, rows: &[(usize, usize)], traces: bool) -> ExperimentConfig {
    ExperimentConfig {
        campaign: rows.iter().map(|&(n, runs)| CampaignRow { n_vehicles: n, runs, base_seed: 11 }).collect(),
        output: OutputConfig { dir: out.to_path_buf(), traces },
        ..ExperimentConfig::default()
    }
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_roundabout-sim"));
    c.env_remove("ROUNDABOUT_SIM_SEED");
    c
}

#[test]
fn summarize_reproduces_the_campaign_report() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_campaign(&small(dir.path(), &[(4, 6), (6, 6)], true), Some(2)).unwrap();
    assert!(outcome.failures.is_empty());
    let (again, skipped) = summarize(&dir.path().join("traces")).unwrap();
    assert!(skipped.is_empty());
    assert_eq!(again, outcome.report);
    assert_eq!(outcome.report.rows.iter().map(|r| r.runs).sum::<usize>(), 12);
}

#[test]
fn thread_count_does_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_campaign(&small(a.path(), &[(5, 8)], false), Some(1)).unwrap();
    run_campaign(&small(b.path(), &[(5, 8)], false), Some(4)).unwrap();
    for f in ["summary.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn zero_runs_give_an_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_campaign(&small(dir.path(), &[(4, 0)], false), None).unwrap();
    assert!(outcome.report.rows.is_empty());
    let csv = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn empty_directory_gives_an_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let (report, skipped) = summarize(dir.path()).unwrap();
    assert!(report.rows.is_empty() && skipped.is_empty());
}

#[test]
fn malformed_traces_are_skipped_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    run_campaign(&small(dir.path(), &[(4, 2)], true), None).unwrap();
    let traces = dir.path().join("traces");
    fs::write(traces.join("trace_n4_seed99.csv"), "not,a,trace\n").unwrap();
    fs::write(traces.join("trace_bogus.csv"), "").unwrap();
    let (report, skipped) = summarize(&traces).unwrap();
    assert_eq!(report.skipped_runs, 2);
    assert_eq!(skipped.len(), 2);
    assert_eq!(report.rows[0].runs, 2);
}

#[test]
fn censored_runs_are_counted_apart() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), &[(8, 3)], false);
    cfg.sim = SimParams { max_steps: 4, ..cfg.sim };
    let row = run_campaign(&cfg, None).unwrap().report.rows.remove(0);
    assert_eq!(row.censored_runs, 3);
    assert_eq!(row.avg_mission_time_s, None);
    assert!(row.avg_min_distance_m.is_some());
}

#[test]
fn config_file_examples() {
    let cfg = parse_config("campaign = 6 x 1000 seed 42\n").unwrap();
    assert_eq!(cfg.campaign, vec![CampaignRow { n_vehicles: 6, runs: 1000, base_seed: 42 }]);
    assert_eq!(parse_config("").unwrap(), ExperimentConfig::default());
    assert!(parse_config("[cost]\nlambda = 1.5\n").unwrap_err().to_string().contains("lambda must lie in (0, 1)"));
}

#[test]
fn binary_writes_reports_and_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    fs::write(&config, "campaign = 4 x 3 seed 5\n[output]\ntraces = false\n").unwrap();
    let out = dir.path().join("a");
    let status = bin()
        .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--traces", "--runs", "2"])
        .env("ROUNDABOUT_SIM_SEED", "7")
        .status()
        .unwrap();
    assert!(status.success());
    // environment beats the file, --traces turns traces on, --runs trims
    let mut names: Vec<_> = fs::read_dir(out.join("traces")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["trace_n4_seed7.csv", "trace_n4_seed8.csv"]);
    let header = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(header.starts_with("n_vehicles,runs,collisions,collision_rate_pct,avg_min_distance_m,"));
    assert!(out.join("summary.json").exists());

    // the flag beats the environment
    let out = dir.path().join("b");
    let status = bin()
        .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--traces", "--runs", "1", "--seed", "3"])
        .env("ROUNDABOUT_SIM_SEED", "7")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("traces/trace_n4_seed3.csv").exists());

    // summarize prints the same CSV the campaign wrote
    let printed = bin().args(["summarize", out.join("traces").to_str().unwrap()]).output().unwrap();
    assert!(printed.status.success());
    assert_eq!(printed.stdout, fs::read(out.join("summary.csv")).unwrap());
}

#[test]
fn binary_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    fs::write(&config, "[cost]\nlambda = 1.5\n").unwrap();
    let out = bin().args(["--config", config.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda must lie in (0, 1)"));
    assert!(!bin().arg("--frobnicate").status().unwrap().success());
    let version = bin().arg("--version").output().unwrap();
    assert!(String::from_utf8_lossy(&version.stdout).starts_with("roundabout-sim "));
}
