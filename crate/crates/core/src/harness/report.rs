use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bounds::BoundRow;
use super::profile::Curve;
use super::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: &str = "planner,budget,mean,stderr,n";
pub const TIMINGS_HEADER: &str = "iteration,cumulative_seconds,variant";
pub const BOUNDS_HEADER: &str = "t,level,tau,path,threshold,observed,bound,floor,vacuous,violated";

/// Everything needed to rerun an experiment exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    /// Episode seeds, in episode order.
    pub seeds: Vec<u64>,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            seeds: (0..config.episodes).map(|e| config.episode_seed(e)).collect(),
        }
    }
}

/// Read an experiment from either a plain configuration or a manifest.
pub fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("config").is_some() && value.get("seeds").is_some() {
        let manifest: Manifest = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        return Ok(manifest.config);
    }
    ExperimentConfig::from_json(&text)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn summary_csv(experiment: &Experiment) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in &experiment.summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(&r.planner),
            csv_field(&r.budget),
            r.mean,
            r.stderr,
            r.n
        );
    }
    out
}

pub fn timings_csv(curves: &[Curve]) -> String {
    let mut out = String::from(TIMINGS_HEADER);
    out.push('\n');
    for c in curves {
        for (i, t) in c.times.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, t, csv_field(&c.variant));
        }
    }
    out
}

pub fn bounds_csv(rows: &[BoundRow]) -> String {
    let mut out = String::from(BOUNDS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t, r.level, r.tau, r.path, r.threshold, r.observed, r.bound, r.floor, r.vacuous, r.violated
        );
    }
    out
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn write_timings_csv(curves: &[Curve], dir: &Path) -> Result<PathBuf> {
    prepare(dir)?;
    let path = dir.join("timings.csv");
    fs::write(&path, timings_csv(curves))?;
    Ok(path)
}

pub fn write_bounds_csv(rows: &[BoundRow], dir: &Path) -> Result<PathBuf> {
    prepare(dir)?;
    let path = dir.join("bounds.csv");
    fs::write(&path, bounds_csv(rows))?;
    Ok(path)
}

/// Write `summary.csv`, `runs.jsonl`, `manifest.json` and, when iteration
/// times were recorded, `timings.csv` into `dir`. Returns the written paths.
pub fn emit_reports(experiment: &Experiment, dir: &Path) -> Result<Vec<PathBuf>> {
    if experiment.records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    prepare(dir)?;
    let mut written = Vec::new();

    let path = dir.join("summary.csv");
    fs::write(&path, summary_csv(experiment))?;
    written.push(path);

    let mut runs = String::new();
    for r in &experiment.records {
        runs.push_str(&serde_json::to_string(r)?);
        runs.push('\n');
    }
    let path = dir.join("runs.jsonl");
    fs::write(&path, runs)?;
    written.push(path);

    let curves: Vec<Curve> = experiment
        .records
        .iter()
        .filter(|r| r.episode == 0 && !r.iteration_times.is_empty())
        .map(|r| Curve::from_times(format!("{}@{}", r.planner, r.budget), r.iteration_times.clone()))
        .collect();
    if !curves.is_empty() {
        written.push(write_timings_csv(&curves, dir)?);
    }

    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&Manifest::new(&experiment.config))?)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::stats::SummaryRow;
    use crate::harness::{BudgetSpec, PlannerEntry, ProblemId};
    use crate::planner::{Algorithm, PlannerConfig};
    use crate::select::{AugerParams, Strategy};

    fn experiment(records: bool) -> Experiment {
        let config = ExperimentConfig {
            problem: ProblemId::LightDark,
            map: None,
            planners: vec![PlannerEntry::labelled(
                "a,b",
                PlannerConfig::new(Algorithm::Pomcpow, Strategy::Auger(AugerParams::default()), 2, 5),
            )],
            budgets: vec![BudgetSpec::Iterations(5)],
            episodes: 1,
            seed: 0,
            out_dir: None,
            incremental: None,
            filter_particles: 10,
            record_iterations: false,
        };
        let summary = vec![SummaryRow::new("a,b".into(), "5it".into(), &[1.5, 2.5])];
        let records = if records {
            crate::harness::run_experiment(&config, Some(1)).unwrap().records
        } else {
            Vec::new()
        };
        Experiment {
            config,
            records,
            summary,
        }
    }

    #[test]
    fn empty_records_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_reports(&experiment(false), dir.path()), Err(Error::EmptyRecords)));
    }

    #[test]
    fn summary_quotes_labels() {
        let csv = summary_csv(&experiment(false));
        assert_eq!(csv, "planner,budget,mean,stderr,n\n\"a,b\",5it,2,0.5,2\n");
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let exp = experiment(true);
        emit_reports(&exp, dir.path()).unwrap();
        let loaded = load_experiment(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(loaded, exp.config);
    }
}
