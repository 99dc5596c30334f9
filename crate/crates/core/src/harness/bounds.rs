use serde::{Deserialize, Serialize};

use super::episode::{episode_rng, PLANNER_STREAM};
use crate::belief::ParticleBelief;
use crate::envs::toy::Branching;
use crate::error::{Error, Result};
use crate::model::Vec2;
use crate::planner::{Algorithm, PlannerConfig, RhoSearch, Root};
use crate::select::{AugerParams, Level, Strategy};
use crate::tree::{BeliefId, BeliefTree};

/// Visitation-bound experiment on the synthetic [`Branching`] problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsSpec {
    pub actions: usize,
    pub depth: usize,
    pub params: AugerParams,
    /// Root iteration counts at which the tree is inspected.
    pub checkpoints: Vec<u64>,
    pub seed: u64,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        Self {
            actions: 128,
            depth: 2,
            params: AugerParams {
                alpha_a: 0.5,
                alpha_o: 0.5,
                e: vec![0.5],
            },
            checkpoints: vec![100, 1_000, 10_000],
            seed: 0,
        }
    }
}

/// One node past its eligibility threshold at checkpoint `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub t: u64,
    /// `belief` or `action`.
    pub level: &'static str,
    pub tau: usize,
    /// 1-based child indices from the root, dash separated.
    pub path: String,
    pub threshold: u64,
    pub observed: u64,
    pub bound: f64,
    pub floor: u64,
    /// The bound is below one and says nothing.
    pub vacuous: bool,
    pub violated: bool,
}

fn row(params: &AugerParams, t: u64, level: Level, path: &[usize], observed: u64) -> Option<BoundRow> {
    let threshold = if path.is_empty() {
        1
    } else {
        params.eligibility_threshold(path)?
    };
    if t < threshold {
        return None;
    }
    let bound = params.bound(level, t as f64);
    let floor = bound.max(0.0).floor() as u64;
    let (name, tau) = match level {
        Level::Belief(tau) => ("belief", tau),
        Level::Action(tau) => ("action", tau),
    };
    Some(BoundRow {
        t,
        level: name,
        tau,
        path: path.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("-"),
        threshold,
        observed,
        bound,
        floor,
        vacuous: bound < 1.0,
        violated: observed < floor,
    })
}

/// Every node of `tree` past its eligibility threshold at `t`, with its
/// visit count against `floor(K(t))`.
pub fn check_tree(tree: &BeliefTree, params: &AugerParams, t: u64) -> Vec<BoundRow> {
    let mut rows = Vec::new();
    let mut stack: Vec<(BeliefId, Vec<usize>)> = vec![(BeliefTree::ROOT, Vec::new())];
    while let Some((h, path)) = stack.pop() {
        let node = tree.belief(h);
        rows.extend(row(params, t, Level::Belief(node.depth), &path, node.visits));
        for (i, &ha) in node.children.iter().enumerate() {
            let mut a_path = path.clone();
            a_path.push(i + 1);
            let action = tree.action(ha);
            rows.extend(row(params, t, Level::Action(node.depth + 1), &a_path, action.visits));
            for (j, &hao) in action.children.iter().enumerate().rev() {
                let mut o_path = a_path.clone();
                o_path.push(j + 1);
                stack.push((hao, o_path));
            }
        }
    }
    rows.sort_by(|a, b| (a.tau, a.level, &a.path).cmp(&(b.tau, b.level, &b.path)));
    rows
}

/// Grow one tree with the Auger strategy and check every eligible node at
/// each checkpoint.
pub fn run_bounds(spec: &BoundsSpec) -> Result<Vec<BoundRow>> {
    if spec.checkpoints.is_empty() {
        return Err(Error::Config("bounds need at least one checkpoint".into()));
    }
    let problem = Branching::new(spec.actions);
    let mut config = PlannerConfig::new(
        Algorithm::RhoPomcpow,
        Strategy::Auger(spec.params.clone()),
        spec.depth,
        0,
    );
    config.validate()?;
    config.iterations = None;
    let root = Root {
        belief: ParticleBelief::from_states([Vec2::ZERO]),
        entropy: 0.0,
    };
    let mut search = RhoSearch::new(&config, &root, &problem);
    let mut rng = episode_rng(spec.seed, PLANNER_STREAM);
    let mut checkpoints = spec.checkpoints.clone();
    checkpoints.sort_unstable();
    let mut rows = Vec::new();
    for t in checkpoints {
        while search.iterations() < t {
            search.iterate(&mut rng)?;
        }
        let found = check_tree(search.tree(), &spec.params, t);
        log::info!(
            "t = {t}: {} eligible nodes, {} vacuous, {} violations",
            found.len(),
            found.iter().filter(|r| r.vacuous).count(),
            found.iter().filter(|r| r.violated).count()
        );
        rows.extend(found);
    }
    Ok(rows)
}
