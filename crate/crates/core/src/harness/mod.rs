//! Experiments on the benchmark problems: episodes with a particle-filter
//! agent, summary statistics, timing profiles, the visitation-bound
//! experiment and report files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::{BeaconWorld, MapConfig, Variant};
use crate::error::{Error, Result};
use crate::planner::PlannerConfig;

pub mod bounds;
pub mod episode;
pub mod oracle;
pub mod profile;
pub mod report;
pub mod stats;

pub use bounds::{run_bounds, BoundRow, BoundsSpec};
pub use episode::{run_episode, EpisodeSettings, RunRecord};
pub use profile::{timing_profile, Curve, Profile, ProfileSpec, ProfileVariant};
pub use report::{emit_reports, load_experiment, write_bounds_csv, write_timings_csv, Manifest};
pub use stats::{loglog_slope, mean, pooled_stderr, stderr, SummaryRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemId {
    LightDark,
    ActiveLocalization,
    /// Active Localization with every obstacle removed.
    ActiveLocalizationFree,
}

impl ProblemId {
    /// The benchmark world, on `map` or the repo's default layout.
    pub fn world(&self, map: Option<&MapConfig>) -> Result<BeaconWorld> {
        match self {
            ProblemId::LightDark => BeaconWorld::new(
                Variant::LightDark,
                map.cloned().unwrap_or_else(MapConfig::light_dark_default),
            ),
            ProblemId::ActiveLocalization | ProblemId::ActiveLocalizationFree => {
                let w = BeaconWorld::new(
                    Variant::ActiveLocalization,
                    map.cloned().unwrap_or_else(MapConfig::active_localization_default),
                )?;
                Ok(if *self == ProblemId::ActiveLocalizationFree {
                    w.without_obstacles()
                } else {
                    w
                })
            }
        }
    }
}

/// Planning budget per call.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetSpec {
    Iterations(u64),
    Seconds(f64),
}

impl BudgetSpec {
    pub fn label(&self) -> String {
        match self {
            BudgetSpec::Iterations(n) => format!("{n}it"),
            BudgetSpec::Seconds(s) => format!("{s}s"),
        }
    }

    /// `config` with its budget replaced by this one.
    pub fn apply(&self, config: &PlannerConfig) -> PlannerConfig {
        let mut c = config.clone();
        match *self {
            BudgetSpec::Iterations(n) => {
                c.iterations = Some(n);
                c.time_budget = None;
            }
            BudgetSpec::Seconds(s) => {
                c.iterations = None;
                c.time_budget = Some(s);
            }
        }
        c
    }
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerEntry {
    /// Row label; defaults to the algorithm name.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(flatten)]
    pub config: PlannerConfig,
}

impl PlannerEntry {
    pub fn new(config: PlannerConfig) -> Self {
        Self { label: None, config }
    }

    pub fn labelled(label: &str, config: PlannerConfig) -> Self {
        Self {
            label: Some(label.to_string()),
            config,
        }
    }

    pub fn name(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.config.algorithm.name().to_string())
    }
}

fn default_filter_particles() -> usize {
    300
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    /// Map override; the problem's default layout when absent.
    #[serde(default)]
    pub map: Option<MapConfig>,
    pub planners: Vec<PlannerEntry>,
    pub budgets: Vec<BudgetSpec>,
    pub episodes: usize,
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Overrides every planner's `incremental_rewards` when set.
    #[serde(default)]
    pub incremental: Option<bool>,
    /// Particles in the agent's belief between planning calls.
    #[serde(default = "default_filter_particles")]
    pub filter_particles: usize,
    /// Record cumulative iteration times of each episode's first call.
    #[serde(default)]
    pub record_iterations: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn world(&self) -> Result<BeaconWorld> {
        self.problem.world(self.map.as_ref())
    }

    /// Planner configuration for entry `p` under budget `b`.
    pub fn planner_config(&self, p: usize, b: usize) -> PlannerConfig {
        let mut c = self.budgets[b].apply(&self.planners[p].config);
        if let Some(flag) = self.incremental {
            c.incremental_rewards = flag;
        }
        c.record_timings |= self.record_iterations;
        c
    }

    /// Seed of episode `e`: the master seed plus the episode index.
    pub fn episode_seed(&self, e: usize) -> u64 {
        self.seed.wrapping_add(e as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".into()));
        }
        if self.budgets.is_empty() {
            return Err(Error::Config("budgets must not be empty".into()));
        }
        if self.planners.is_empty() {
            return Err(Error::Config("planners must not be empty".into()));
        }
        if self.filter_particles == 0 {
            return Err(Error::Config("filter_particles must be positive".into()));
        }
        self.world()?;
        for p in 0..self.planners.len() {
            for b in 0..self.budgets.len() {
                self.planner_config(p, b).validate()?;
            }
        }
        Ok(())
    }
}

/// Records of a finished experiment in (planner, budget, episode) order.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

impl Experiment {
    /// Records of one table cell.
    pub fn cell(&self, planner: &str, budget: &str) -> Vec<&RunRecord> {
        self.records
            .iter()
            .filter(|r| r.planner == planner && r.budget == budget)
            .collect()
    }

    pub fn row(&self, planner: &str, budget: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.planner == planner && r.budget == budget)
    }
}

/// Run every (planner, budget, episode) combination on `threads` workers
/// (all available cores when `None`). Episode `e` uses the same seed under
/// every planner and budget, and results do not depend on the thread count.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<Experiment> {
    use rayon::prelude::*;

    config.validate()?;
    let world = config.world()?;
    let settings = EpisodeSettings {
        filter_particles: config.filter_particles,
    };
    let mut jobs = Vec::new();
    for p in 0..config.planners.len() {
        for b in 0..config.budgets.len() {
            for e in 0..config.episodes {
                jobs.push((p, b, e));
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    let records: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, b, e)| {
                let planner = config.planner_config(p, b);
                let mut r = run_episode(&world, &planner, config.episode_seed(e), &settings)?;
                r.planner = config.planners[p].name();
                r.budget = config.budgets[b].label();
                r.episode = e;
                Ok(r)
            })
            .collect::<Result<_>>()
    })?;
    log::info!("finished {} episodes", records.len());

    let mut summary = Vec::new();
    for entry in &config.planners {
        for budget in &config.budgets {
            let (planner, budget) = (entry.name(), budget.label());
            let returns: Vec<f64> = records
                .iter()
                .filter(|r| r.planner == planner && r.budget == budget)
                .map(|r| r.total_return)
                .collect();
            summary.push(SummaryRow::new(planner, budget, &returns));
        }
    }
    Ok(Experiment {
        config: config.clone(),
        records,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::Algorithm;
    use crate::select::{AugerParams, Strategy};

    fn small() -> ExperimentConfig {
        let planner = PlannerConfig::new(
            Algorithm::Pomcpow,
            Strategy::Auger(AugerParams::default()),
            3,
            10,
        );
        ExperimentConfig {
            problem: ProblemId::LightDark,
            map: None,
            planners: vec![PlannerEntry::new(planner)],
            budgets: vec![BudgetSpec::Iterations(20)],
            episodes: 2,
            seed: 5,
            out_dir: None,
            incremental: None,
            filter_particles: 50,
            record_iterations: false,
        }
    }

    #[test]
    fn validation_rejects_empty_sets() {
        let mut c = small();
        assert!(c.validate().is_ok());
        c.budgets.clear();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = small();
        c.episodes = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_ids_are_config_errors() {
        let text = serde_json::to_string(&small()).unwrap();
        let bad = text.replace("light_dark", "dark_light");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = text.replace("\"pomcpow\"", "\"pomdp\"");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), small());
    }

    #[test]
    fn budgets_override_the_planner() {
        let c = small();
        let p = c.planner_config(0, 0);
        assert_eq!(p.iterations, Some(20));
        let p = BudgetSpec::Seconds(0.1).apply(&p);
        assert_eq!((p.iterations, p.time_budget), (None, Some(0.1)));
        assert_eq!(BudgetSpec::Seconds(0.1).label(), "0.1s");
    }

    #[test]
    fn results_follow_job_order() {
        let exp = run_experiment(&small(), Some(2)).unwrap();
        let episodes: Vec<usize> = exp.records.iter().map(|r| r.episode).collect();
        assert_eq!(episodes, vec![0, 1]);
        assert_eq!(exp.summary.len(), 1);
        assert_eq!(exp.summary[0].n, 2);
        assert_eq!(exp.records[1].seed, 6);
    }
}
