use std::time::Instant;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::belief::{floor_weight, ParticleBelief};
use crate::entropy::boers_batch;
use crate::envs::BeaconWorld;
use crate::error::Result;
use crate::model::{ActionId, Observation, Problem, SimRng, State};
use crate::planner::{plan, PlannerConfig, Root};

/// Generator stream of the true state, transitions and observations.
pub const ENV_STREAM: u64 = 0;
/// Generator stream handed to the planner.
pub const PLANNER_STREAM: u64 = 1;
/// Generator stream of the agent's particle filter.
pub const FILTER_STREAM: u64 = 2;

/// Stream `stream` of the episode generator seeded with `seed`.
pub fn episode_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug)]
pub struct EpisodeSettings {
    pub filter_particles: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub planner: String,
    pub budget: String,
    pub episode: usize,
    pub seed: u64,
    /// Discounted return of the problem's objective: state rewards for
    /// Light-Dark, state rewards plus `lambda` times the belief's information
    /// gain for Active Localization.
    pub total_return: f64,
    /// Discounted sum of state rewards alone.
    pub state_return: f64,
    pub steps: usize,
    pub actions: Vec<usize>,
    /// Entropy of the agent's belief before the first and after the last step.
    pub initial_entropy: f64,
    pub final_entropy: f64,
    pub reached_goal: bool,
    pub collisions: usize,
    /// Wall-clock seconds of each planning call.
    pub plan_seconds: Vec<f64>,
    /// Cumulative seconds after each iteration of the first planning call.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iteration_times: Vec<f64>,
}

/// Posterior of an equally weighted particle set after `a` and `o`: each
/// particle is propagated once and weighted by `Z(o | a, s')`.
pub fn filter_update(
    particles: &[State],
    world: &BeaconWorld,
    a: ActionId,
    o: &Observation,
    rng: &mut SimRng,
) -> Result<ParticleBelief> {
    let mut posterior = ParticleBelief::new();
    for prior in particles {
        let next = world.transition_sample(prior, a, rng);
        let w = floor_weight(world.observation_density(o, a, &next));
        posterior.insert(next, w, *prior, 1.0)?;
    }
    Ok(posterior)
}

/// Systematic resampling to `n` equally weighted states.
pub fn systematic_resample(belief: &ParticleBelief, n: usize, rng: &mut SimRng) -> Vec<State> {
    let particles = belief.particles();
    let total = belief.weight_sum();
    let step = total / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    let mut cumulative = particles[0].weight;
    for _ in 0..n {
        while u > cumulative && i + 1 < particles.len() {
            i += 1;
            cumulative += particles[i].weight;
        }
        out.push(particles[i].state);
        u += step;
    }
    out
}

/// One episode of `planner` on `world` with episode seed `seed`.
///
/// The agent tracks its belief with a particle filter of
/// `settings.filter_particles` particles and plans from it at every step,
/// until a terminating action or the step cap.
pub fn run_episode(
    world: &BeaconWorld,
    planner: &PlannerConfig,
    seed: u64,
    settings: &EpisodeSettings,
) -> Result<RunRecord> {
    let mut env_rng = episode_rng(seed, ENV_STREAM);
    let mut planner_rng = episode_rng(seed, PLANNER_STREAM);
    let mut filter_rng = episode_rng(seed, FILTER_STREAM);

    let n = settings.filter_particles;
    let gamma = world.discount();
    let lambda = world.shaping_weight();
    let mut s = world.sample_initial_state(&mut env_rng);
    let initial = world.initial_distribution();
    let mut particles: Vec<State> = (0..n).map(|_| initial.sample(world.map().x0, &mut filter_rng)).collect();
    let initial_entropy = initial.entropy();
    let mut entropy = initial_entropy;

    let mut record = RunRecord {
        planner: planner.algorithm.name().to_string(),
        budget: String::new(),
        episode: 0,
        seed,
        total_return: 0.0,
        state_return: 0.0,
        steps: 0,
        actions: Vec::new(),
        initial_entropy,
        final_entropy: initial_entropy,
        reached_goal: false,
        collisions: 0,
        plan_seconds: Vec::new(),
        iteration_times: Vec::new(),
    };
    let mut config = planner.clone();
    let mut discount = 1.0;
    for _ in 0..world.step_cap() {
        let root = Root {
            belief: ParticleBelief::from_states(particles.iter().copied()),
            entropy,
        };
        let start = Instant::now();
        let result = plan(&config, &root, world, &mut planner_rng)?;
        record.plan_seconds.push(start.elapsed().as_secs_f64());
        if config.record_timings {
            record.iteration_times = result.timings;
            config.record_timings = false;
        }

        let a = result.action;
        let out = world.step(&s, a, &mut env_rng);
        let posterior = filter_update(&particles, world, a, &out.observation, &mut filter_rng)?;
        let next_entropy = boers_batch(&posterior, a, &out.observation, world)?.value;

        record.state_return += discount * out.reward;
        let info = if lambda == 0.0 { 0.0 } else { lambda * (entropy - next_entropy) };
        record.total_return += discount * (out.reward + info);
        if world.in_obstacle(out.next_state) {
            record.collisions += 1;
        }
        record.actions.push(a.0);
        record.steps += 1;
        discount *= gamma;

        particles = systematic_resample(&posterior, n, &mut filter_rng);
        s = out.next_state;
        entropy = next_entropy;
        if out.terminal {
            record.reached_goal = world.in_goal(s);
            break;
        }
    }
    if world.variant() == crate::envs::Variant::LightDark {
        record.total_return = record.state_return;
    }
    record.final_entropy = entropy;
    Ok(record)
}
