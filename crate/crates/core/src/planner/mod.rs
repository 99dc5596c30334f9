//! Online planners behind one entry point, [`plan`].
//!
//! * [`Algorithm::RhoPomcpow`] grows particle beliefs along simulated state
//!   trajectories, scores every observation node with a belief-dependent
//!   reward and backs values up with last-value updates.
//! * [`Algorithm::Pomcpow`] is the same state simulator with state rewards
//!   only and running-average backups.
//! * [`Algorithm::PftDpw`] is a belief simulator with `m` particles per node
//!   whose reward is computed once, when the node is created.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::ParticleBelief;
use crate::error::{Error, Result};
use crate::model::{ActionId, Observation, Problem, SimRng, State};
use crate::select::{beats, ActionChoice, ObservationChoice, Strategy};
use crate::tree::{ActionNodeId, BeliefId, BeliefTree, TreeStats};

mod pft;
mod pomcpow;
mod rho;

pub use rho::RhoSearch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    RhoPomcpow,
    Pomcpow,
    PftDpw,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::RhoPomcpow => "rho_pomcpow",
            Algorithm::Pomcpow => "pomcpow",
            Algorithm::PftDpw => "pft_dpw",
        }
    }
}

/// How POMCPOW backs up returns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backup {
    /// Monte Carlo running average of sampled returns.
    #[default]
    RunningAverage,
    /// Last-value estimates recomputed from scratch at every visit.
    LastValue,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "action")]
pub enum RolloutPolicy {
    /// Uniform over actions; terminating actions only in the last third of
    /// the rollout.
    #[default]
    Random,
    Fixed(ActionId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub algorithm: Algorithm,
    pub max_depth: usize,
    /// Iterations per planning call.
    #[serde(default)]
    pub iterations: Option<u64>,
    /// Wall-clock seconds per planning call.
    #[serde(default)]
    pub time_budget: Option<f64>,
    pub strategy: Strategy,
    /// Update entropy and expected state reward incrementally; when off both
    /// are recomputed from scratch after every insertion.
    #[serde(default = "yes")]
    pub incremental_rewards: bool,
    /// Particles placed in a belief node when it is created.
    #[serde(default = "one")]
    pub init_particles: usize,
    /// Particles per node for PFT-DPW.
    #[serde(default = "fifty")]
    pub pft_particles: usize,
    #[serde(default)]
    pub backup: Backup,
    #[serde(default)]
    pub rollout: RolloutPolicy,
    /// Record cumulative wall-clock time after every iteration.
    #[serde(default)]
    pub record_timings: bool,
    /// Record one [`TraceRecord`] per iteration.
    #[serde(default)]
    pub trace: bool,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

fn fifty() -> usize {
    50
}

impl PlannerConfig {
    pub fn new(algorithm: Algorithm, strategy: Strategy, max_depth: usize, iterations: u64) -> Self {
        Self {
            algorithm,
            max_depth,
            iterations: Some(iterations),
            time_budget: None,
            strategy,
            incremental_rewards: true,
            init_particles: 1,
            pft_particles: 50,
            backup: Backup::RunningAverage,
            rollout: RolloutPolicy::Random,
            record_timings: false,
            trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if self.iterations.is_none() && self.time_budget.is_none() {
            return Err(Error::Config("set an iteration budget, a time budget, or both".into()));
        }
        if let Some(t) = self.time_budget {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("time budget must be finite and non-negative, got {t}")));
            }
        }
        if self.init_particles == 0 || self.pft_particles == 0 {
            return Err(Error::Config("particle counts must be positive".into()));
        }
        self.strategy.validate()
    }
}

/// Belief at the root of a planning call together with its entropy.
#[derive(Clone, Debug)]
pub struct Root {
    pub belief: ParticleBelief,
    pub entropy: f64,
}

/// Statistics of one root action.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RootAction {
    pub action: ActionId,
    pub visits: u64,
    pub q: f64,
}

/// One line of the optional planner trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: u64,
    pub depth_reached: usize,
    pub best_action: Option<ActionId>,
    pub best_visits: u64,
    pub best_q: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanResult {
    pub action: ActionId,
    /// Set when no iteration ran and the action was drawn at random.
    pub zero_budget: bool,
    pub iterations: u64,
    pub root_actions: Vec<RootAction>,
    pub tree: TreeStats,
    /// Hash of every branch decision, equal for identical searches.
    pub digest: u64,
    /// Belief-dependent reward evaluations (PFT-DPW: once per node).
    pub reward_evaluations: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRecord>,
}

/// Run one planning call from `root` and return the chosen action.
pub fn plan(config: &PlannerConfig, root: &Root, problem: &dyn Problem, rng: &mut SimRng) -> Result<PlanResult> {
    config.validate()?;
    if root.belief.is_empty() {
        return Err(Error::EmptyBelief);
    }
    if problem.num_actions() == 0 {
        return Err(Error::Config("problem has no actions".into()));
    }
    match config.algorithm {
        Algorithm::RhoPomcpow => {
            let mut search = RhoSearch::new(config, root, problem);
            search.run(rng)?;
            Ok(search.finish(rng))
        }
        Algorithm::Pomcpow => pomcpow::plan(config, root, problem, rng),
        Algorithm::PftDpw => pft::plan(config, root, problem, rng),
    }
}

/// Clock checks happen every this many iterations under a time budget.
pub const CLOCK_STRIDE: u64 = 32;

pub(crate) struct Budget {
    iterations: Option<u64>,
    seconds: Option<f64>,
    start: Instant,
    done: u64,
    out_of_time: bool,
}

impl Budget {
    pub(crate) fn new(config: &PlannerConfig) -> Self {
        Self {
            iterations: config.iterations,
            seconds: config.time_budget,
            start: Instant::now(),
            done: 0,
            out_of_time: false,
        }
    }

    pub(crate) fn next(&mut self) -> bool {
        if self.iterations.is_some_and(|n| self.done >= n) || self.out_of_time {
            return false;
        }
        if let Some(limit) = self.seconds {
            if self.done % CLOCK_STRIDE == 0 && self.start.elapsed().as_secs_f64() >= limit {
                self.out_of_time = true;
                return false;
            }
        }
        self.done += 1;
        true
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    pub(crate) fn done(&self) -> u64 {
        self.done
    }
}

/// Order-sensitive hash of branch decisions.
#[derive(Default)]
pub(crate) struct Digest(DefaultHasher);

impl Digest {
    pub(crate) fn push(&mut self, tag: u8, id: usize) {
        self.0.write_u8(tag);
        self.0.write_usize(id);
    }

    pub(crate) fn finish(&self, tree: &BeliefTree) -> u64 {
        let mut h = DefaultHasher::default();
        h.write_u64(self.0.finish());
        h.write_usize(tree.belief_count());
        h.write_usize(tree.action_count());
        h.finish()
    }
}

/// Discounted sum of state rewards along a default-policy trajectory of at
/// most `depth` steps.
pub fn rollout(problem: &dyn Problem, policy: RolloutPolicy, s: State, depth: usize, rng: &mut SimRng) -> f64 {
    let gamma = problem.discount();
    let mut total = 0.0;
    let mut discount = 1.0;
    let mut s = s;
    for step in 0..depth {
        let a = match policy {
            RolloutPolicy::Fixed(a) => a,
            RolloutPolicy::Random => random_rollout_action(problem, depth - step, depth, rng),
        };
        let s_next = problem.transition_sample(&s, a, rng);
        total += discount * problem.state_reward(&s, a, &s_next);
        if problem.is_terminal_action(a) {
            break;
        }
        discount *= gamma;
        s = s_next;
    }
    total
}

fn random_rollout_action(problem: &dyn Problem, remaining: usize, depth: usize, rng: &mut SimRng) -> ActionId {
    let n = problem.num_actions();
    let allow_terminal = 3 * remaining <= depth;
    loop {
        let a = ActionId(rng.random_range(0..n));
        if allow_terminal || !problem.is_terminal_action(a) {
            return a;
        }
        if (0..n).all(|i| problem.is_terminal_action(ActionId(i))) {
            return a;
        }
    }
}

/// Which action to open when a node expands: the next index when actions
/// open in order, otherwise a uniformly random unexpanded one.
pub(crate) fn expansion_action(
    tree: &BeliefTree,
    h: BeliefId,
    num_actions: usize,
    in_order: bool,
    rng: &mut SimRng,
) -> ActionId {
    let node = tree.belief(h);
    if in_order {
        return ActionId(node.children.len());
    }
    let mut open = vec![true; num_actions];
    for &c in &node.children {
        open[tree.action(c).action.0] = false;
    }
    let candidates: Vec<usize> = (0..num_actions).filter(|&a| open[a]).collect();
    ActionId(*candidates.choose(rng).expect("expansion requires an unexpanded action"))
}

/// Pick or open an action child of `h` with the configured strategy.
pub(crate) fn choose_action(
    tree: &mut BeliefTree,
    strategy: &Strategy,
    num_actions: usize,
    h: BeliefId,
    digest: &mut Digest,
    rng: &mut SimRng,
) -> ActionNodeId {
    let node = tree.belief(h);
    let n_children = node.children.len();
    let choice = strategy.select_action(
        node.selections(),
        node.depth,
        node.children.iter().map(|&c| {
            let a = tree.action(c);
            (a.visits, a.q)
        }),
        n_children,
        n_children < num_actions,
    );
    match choice {
        ActionChoice::Expand => {
            let a = expansion_action(tree, h, num_actions, strategy.expands_in_order(), rng);
            digest.push(0, a.0);
            tree.add_action(h, a)
        }
        ActionChoice::Child(i) => {
            digest.push(1, i);
            tree.belief(h).children[i]
        }
    }
}

/// Observation branch chosen below `ha`.
pub(crate) enum Branch {
    /// A fresh child was created for this observation.
    New(BeliefId, Observation),
    Existing(BeliefId, Observation),
}

/// Revisit an observation child of `ha` or create one with an observation
/// drawn by `sample_observation`.
pub(crate) fn choose_observation(
    tree: &mut BeliefTree,
    strategy: &Strategy,
    ha: ActionNodeId,
    digest: &mut Digest,
    rng: &mut SimRng,
    sample_observation: impl FnOnce(&mut SimRng) -> Observation,
) -> Branch {
    let child_visits: Vec<u64> = tree
        .action(ha)
        .children
        .iter()
        .map(|&c| tree.belief(c).visits)
        .collect();
    match strategy.select_observation(tree.action(ha).visits, &child_visits, rng) {
        ObservationChoice::Sample => {
            let o = sample_observation(rng);
            digest.push(2, child_visits.len());
            Branch::New(tree.add_observation(ha, o), o)
        }
        ObservationChoice::Child(i) => {
            digest.push(3, i);
            let id = tree.action(ha).children[i];
            let o = tree
                .belief(id)
                .observation
                .expect("observation nodes carry their observation");
            Branch::Existing(id, o)
        }
    }
}

/// Root children in creation order, best first on ties by lowest index.
pub(crate) fn root_summary(tree: &BeliefTree) -> (Option<ActionId>, Vec<RootAction>) {
    let actions: Vec<RootAction> = tree
        .root()
        .children
        .iter()
        .map(|&c| {
            let a = tree.action(c);
            RootAction {
                action: a.action,
                visits: a.visits,
                q: a.q,
            }
        })
        .collect();
    let mut best: Option<&RootAction> = None;
    for r in &actions {
        if best.is_none_or(|b| beats(r.q, b.q)) {
            best = Some(r);
        }
    }
    (best.map(|b| b.action), actions)
}

pub(crate) fn trace_record(tree: &BeliefTree, iteration: u64, depth_reached: usize) -> TraceRecord {
    let (best, actions) = root_summary(tree);
    let stats = actions.iter().find(|r| Some(r.action) == best);
    TraceRecord {
        iteration,
        depth_reached,
        best_action: best,
        best_visits: stats.map_or(0, |s| s.visits),
        best_q: stats.map_or(0.0, |s| s.q),
    }
}

pub(crate) fn finish_result(
    tree: &BeliefTree,
    problem: &dyn Problem,
    digest: &Digest,
    iterations: u64,
    reward_evaluations: u64,
    timings: Vec<f64>,
    trace: Vec<TraceRecord>,
    rng: &mut SimRng,
) -> PlanResult {
    let (best, root_actions) = root_summary(tree);
    let (action, zero_budget) = match best {
        Some(a) if iterations > 0 => (a, false),
        _ => {
            log::warn!("planner ran no iterations; choosing a random action");
            (ActionId(rng.random_range(0..problem.num_actions())), true)
        }
    };
    PlanResult {
        action,
        zero_budget,
        iterations,
        root_actions,
        tree: tree.stats(),
        digest: digest.finish(tree),
        reward_evaluations,
        timings,
        trace,
    }
}
