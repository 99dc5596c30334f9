//! Incremental-versus-batch sweeps behind the `oracle` subcommand.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::Serialize;

use super::episode::{episode_rng, ENV_STREAM};
use crate::belief::{floor_weight, ParticleBelief};
use crate::entropy::{boers_batch, shannon_batch, BoersCache};
use crate::envs::BeaconWorld;
use crate::error::Result;
use crate::model::{ActionId, Problem, Vec2};
use crate::tree::{BeliefId, BeliefTree};

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub name: &'static str,
    pub steps: usize,
    pub checks: usize,
    pub max_abs_error: f64,
    /// Error relative to `max(|batch|, 1)`, so entropies near zero do not blow it up.
    pub max_rel_error: f64,
    pub incremental_seconds: f64,
    pub batch_seconds: f64,
}

impl OracleReport {
    fn new(name: &'static str, steps: usize) -> Self {
        Self {
            name,
            steps,
            checks: 0,
            max_abs_error: 0.0,
            max_rel_error: 0.0,
            incremental_seconds: 0.0,
            batch_seconds: 0.0,
        }
    }

    fn record(&mut self, incremental: f64, batch: f64) {
        let abs = (incremental - batch).abs();
        self.checks += 1;
        self.max_abs_error = self.max_abs_error.max(abs);
        self.max_rel_error = self.max_rel_error.max(abs / batch.abs().max(1.0));
    }

    pub fn speedup(&self) -> f64 {
        self.batch_seconds / self.incremental_seconds.max(1e-12)
    }
}

/// `n` random insertions, a fifth of them bit-identical repeats; the cached
/// Shannon entropy is compared with a batch recomputation after every step.
pub fn shannon_sweep(n: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = episode_rng(seed, ENV_STREAM);
    let mut belief = ParticleBelief::new();
    let mut states: Vec<Vec2> = Vec::new();
    let mut report = OracleReport::new("shannon", n);
    let (mut inc, mut batch) = (Duration::ZERO, Duration::ZERO);
    for _ in 0..n {
        let s = if !states.is_empty() && rng.random_bool(0.2) {
            states[rng.random_range(0..states.len())]
        } else {
            let s = Vec2::new(rng.random(), rng.random());
            states.push(s);
            s
        };
        let w = rng.random_range(1e-3..10.0);
        let start = Instant::now();
        belief.insert(s, w, s, 1.0)?;
        let h = belief.shannon_entropy();
        inc += start.elapsed();
        let start = Instant::now();
        let h_batch = shannon_batch(&belief)?;
        batch += start.elapsed();
        report.record(h, h_batch);
    }
    report.incremental_seconds = inc.as_secs_f64();
    report.batch_seconds = batch.as_secs_f64();
    Ok(report)
}

/// Grow one posterior under the Light-Dark models to `n` particles and
/// compare the incremental Boers estimate with the batch one every `every`
/// insertions. Both paths are timed at every step.
pub fn boers_sweep(n: usize, every: usize, seed: u64) -> Result<OracleReport> {
    let world = BeaconWorld::light_dark();
    let mut rng = episode_rng(seed, ENV_STREAM);
    let a = ActionId(0);
    let parent = world.initial_belief(&mut rng, 500);
    let truth = world.transition_sample(&parent.sample_state(&mut rng)?, a, &mut rng);
    let o = world.observation_sample(a, &truth, &mut rng);

    let mut belief = ParticleBelief::new();
    let mut cache = BoersCache::new(a, o);
    let mut report = OracleReport::new("boers", n);
    let (mut inc, mut batch) = (Duration::ZERO, Duration::ZERO);
    for k in 1..=n {
        let prior = parent.sample_state(&mut rng)?;
        let next = world.transition_sample(&prior, a, &mut rng);
        let w = floor_weight(world.observation_density(&o, a, &next));
        let start = Instant::now();
        let ins = belief.insert(next, w, prior, 1.0)?;
        cache.update(&belief, &ins, &world)?;
        inc += start.elapsed();
        let start = Instant::now();
        let value = boers_batch(&belief, a, &o, &world)?.value;
        batch += start.elapsed();
        if k % every == 0 || k == n {
            report.record(cache.value(), value);
        }
    }
    report.incremental_seconds = inc.as_secs_f64();
    report.batch_seconds = batch.as_secs_f64();
    Ok(report)
}

fn random_descent(t: &mut BeliefTree, h: BeliefId, depth: usize, rng: &mut crate::model::SimRng) {
    if depth == 0 {
        t.belief_mut(h).visits += 1;
        return;
    }
    let n_children = t.belief(h).children.len();
    let ha = if n_children == 0 || (n_children < 4 && rng.random_bool(0.3)) {
        t.add_action(h, ActionId(n_children))
    } else {
        t.belief(h).children[rng.random_range(0..n_children)]
    };
    let q_prev = t.action(ha).q;
    let n_obs = t.action(ha).children.len();
    let (hao, new) = if n_obs == 0 || (n_obs < 4 && rng.random_bool(0.3)) {
        (t.add_observation(ha, Vec2::ZERO), true)
    } else {
        (t.action(ha).children[rng.random_range(0..n_obs)], false)
    };
    let (rho_prev, v_prev) = (t.belief(hao).rho, t.belief(hao).value);
    t.belief_mut(hao).rho = rng.random_range(-10.0..10.0);
    if new {
        // nodes with no remaining depth get an empty rollout, as in the planner
        let rollout = if depth == 1 { 0.0 } else { rng.random_range(-50.0..50.0) };
        t.seed_leaf(hao, rollout);
    } else {
        random_descent(t, hao, depth - 1, rng);
    }
    t.action_mut(ha).visits += 1;
    t.lvu_update_q(ha, hao, rho_prev, v_prev);
    t.belief_mut(h).visits += 1;
    t.lvu_update_v(h, ha, q_prev);
}

/// `updates` random root-to-leaf updates with fresh rewards and rollouts;
/// every incremental `V` and `Q` is compared with its full recomputation
/// every `every` updates.
pub fn lvu_sweep(updates: usize, every: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = episode_rng(seed, ENV_STREAM);
    let mut tree = BeliefTree::new(ParticleBelief::new(), 0.95);
    let mut report = OracleReport::new("lvu", updates);
    let start = Instant::now();
    for k in 1..=updates {
        random_descent(&mut tree, BeliefTree::ROOT, 4, &mut rng);
        if k % every == 0 || k == updates {
            for (id, node) in tree.beliefs() {
                report.record(node.value, tree.full_recompute_v(id));
            }
            for (id, a) in tree.actions() {
                report.record(a.q, tree.full_recompute_q(id));
            }
        }
    }
    report.incremental_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}
