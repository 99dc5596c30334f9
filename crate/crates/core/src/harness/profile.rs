use serde::{Deserialize, Serialize};

use super::episode::{episode_rng, ENV_STREAM, PLANNER_STREAM};
use super::stats::loglog_slope;
use super::ProblemId;
use crate::envs::MapConfig;
use crate::error::{Error, Result};
use crate::planner::{plan, Algorithm, Backup, PlannerConfig, Root};
use crate::tree::TreeStats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileVariant {
    /// ρPOMCPOW with incremental reward updates.
    Incremental,
    /// ρPOMCPOW recomputing every reward from scratch.
    FromScratch,
    /// POMCPOW with last-value backups.
    Pomcpow,
}

impl ProfileVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileVariant::Incremental => "incremental",
            ProfileVariant::FromScratch => "from_scratch",
            ProfileVariant::Pomcpow => "pomcpow",
        }
    }
}

fn default_root_particles() -> usize {
    300
}

/// One planning call per variant, from the same root belief and seed.
///
/// When POMCPOW is among the variants every variant plans with zero
/// shaping weight: ρPOMCPOW still maintains its belief-dependent rewards but
/// they do not steer the search, so all variants grow the same tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub problem: ProblemId,
    #[serde(default)]
    pub map: Option<MapConfig>,
    /// ρPOMCPOW configuration shared by all variants.
    pub planner: PlannerConfig,
    pub iterations: u64,
    pub seed: u64,
    pub variants: Vec<ProfileVariant>,
    #[serde(default = "default_root_particles")]
    pub root_particles: usize,
}

/// Cumulative seconds after each iteration of one variant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Curve {
    pub variant: String,
    pub times: Vec<f64>,
    pub digest: u64,
    pub tree: Option<TreeStats>,
    pub action: Option<usize>,
}

impl Curve {
    pub fn from_times(variant: String, times: Vec<f64>) -> Self {
        Self {
            variant,
            times,
            digest: 0,
            tree: None,
            action: None,
        }
    }

    /// Log-log slope of cumulative time over iterations `lo..=hi`, fitted on
    /// `points` log-spaced iterations.
    pub fn slope(&self, lo: u64, hi: u64, points: usize) -> f64 {
        let hi = hi.min(self.times.len() as u64);
        let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
        let mut pts: Vec<(f64, f64)> = (0..points)
            .map(|k| {
                let t = (a + (b - a) * k as f64 / (points - 1).max(1) as f64).exp().round() as u64;
                let t = t.clamp(lo, hi);
                (t as f64, self.times[t as usize - 1])
            })
            .collect();
        pts.dedup_by(|x, y| x.0 == y.0);
        loglog_slope(&pts)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Profile {
    pub curves: Vec<Curve>,
}

impl Profile {
    pub fn curve(&self, variant: ProfileVariant) -> Option<&Curve> {
        self.curves.iter().find(|c| c.variant == variant.name())
    }
}

/// Run every variant for `spec.iterations` iterations and check that they
/// built identical trees.
pub fn timing_profile(spec: &ProfileSpec) -> Result<Profile> {
    if spec.variants.is_empty() {
        return Err(Error::Config("profile needs at least one variant".into()));
    }
    let mut world = spec.problem.world(spec.map.as_ref())?;
    if spec.variants.contains(&ProfileVariant::Pomcpow) {
        world = world.with_lambda(0.0);
    }
    let root = Root {
        belief: world.initial_belief(&mut episode_rng(spec.seed, ENV_STREAM), spec.root_particles),
        entropy: world.initial_distribution().entropy(),
    };
    let mut curves = Vec::new();
    for &variant in &spec.variants {
        let mut config = spec.planner.clone();
        config.iterations = Some(spec.iterations);
        config.time_budget = None;
        config.record_timings = true;
        match variant {
            ProfileVariant::Incremental => {
                config.algorithm = Algorithm::RhoPomcpow;
                config.incremental_rewards = true;
            }
            ProfileVariant::FromScratch => {
                config.algorithm = Algorithm::RhoPomcpow;
                config.incremental_rewards = false;
            }
            ProfileVariant::Pomcpow => {
                config.algorithm = Algorithm::Pomcpow;
                config.backup = Backup::LastValue;
            }
        }
        let result = plan(&config, &root, &world, &mut episode_rng(spec.seed, PLANNER_STREAM))?;
        log::info!(
            "{}: {} iterations in {:.3}s",
            variant.name(),
            result.iterations,
            result.timings.last().copied().unwrap_or(0.0)
        );
        curves.push(Curve {
            variant: variant.name().to_string(),
            times: result.timings,
            digest: result.digest,
            tree: Some(result.tree),
            action: Some(result.action.0),
        });
    }
    let first = &curves[0];
    for c in &curves[1..] {
        if c.digest != first.digest || c.tree != first.tree || c.action != first.action {
            return Err(Error::TreeDigestMismatch(format!(
                "{} and {} built different trees",
                first.variant, c.variant
            )));
        }
    }
    Ok(Profile { curves })
}
