//! Small problems with known answers, used by tests and the bound experiment.

use crate::model::{ActionId, IsoGaussian, Observation, Problem, SimRng, State, Vec2};

/// Near-deterministic motion noise, small enough to be irrelevant to rewards
/// but keeping every density positive.
const JITTER: f64 = 1e-2;

/// One-step problem: arm `a` pays `rewards[a]` and ends the episode.
#[derive(Clone, Debug)]
pub struct Bandit {
    pub rewards: Vec<f64>,
    noise: IsoGaussian,
}

impl Bandit {
    pub fn new(rewards: Vec<f64>) -> Self {
        assert!(!rewards.is_empty());
        Self {
            rewards,
            noise: IsoGaussian::new(JITTER),
        }
    }
}

impl Problem for Bandit {
    fn discount(&self) -> f64 {
        0.95
    }
    fn shaping_weight(&self) -> f64 {
        0.0
    }
    fn num_actions(&self) -> usize {
        self.rewards.len()
    }
    fn is_terminal_action(&self, _: ActionId) -> bool {
        true
    }
    fn transition_sample(&self, s: &State, _: ActionId, rng: &mut SimRng) -> State {
        self.noise.sample(*s, rng)
    }
    fn transition_density(&self, s_next: &State, s: &State, _: ActionId) -> f64 {
        self.noise.density(*s_next, *s)
    }
    fn observation_sample(&self, _: ActionId, s_next: &State, rng: &mut SimRng) -> Observation {
        self.noise.sample(*s_next, rng)
    }
    fn observation_density(&self, o: &Observation, _: ActionId, s_next: &State) -> f64 {
        self.noise.density(*o, *s_next)
    }
    fn state_reward(&self, _: &State, a: ActionId, _: &State) -> f64 {
        self.rewards[a.0]
    }
}

/// Endless corridor: action 0 steps forward, action 1 back, each costing 1.
#[derive(Clone, Debug)]
pub struct Corridor {
    pub discount: f64,
    noise: IsoGaussian,
}

impl Corridor {
    pub const FORWARD: ActionId = ActionId(0);
    pub const BACK: ActionId = ActionId(1);

    pub fn new(discount: f64) -> Self {
        Self {
            discount,
            noise: IsoGaussian::new(JITTER),
        }
    }

    fn step(a: ActionId) -> Vec2 {
        if a == Self::FORWARD {
            Vec2::new(1.0, 0.0)
        } else {
            Vec2::new(-1.0, 0.0)
        }
    }
}

impl Problem for Corridor {
    fn discount(&self) -> f64 {
        self.discount
    }
    fn shaping_weight(&self) -> f64 {
        0.0
    }
    fn num_actions(&self) -> usize {
        2
    }
    fn is_terminal_action(&self, _: ActionId) -> bool {
        false
    }
    fn transition_sample(&self, s: &State, a: ActionId, rng: &mut SimRng) -> State {
        self.noise.sample(*s + Self::step(a), rng)
    }
    fn transition_density(&self, s_next: &State, s: &State, a: ActionId) -> f64 {
        self.noise.density(*s_next, *s + Self::step(a))
    }
    fn observation_sample(&self, _: ActionId, s_next: &State, rng: &mut SimRng) -> Observation {
        self.noise.sample(*s_next, rng)
    }
    fn observation_density(&self, o: &Observation, _: ActionId, s_next: &State) -> f64 {
        self.noise.density(*o, *s_next)
    }
    fn state_reward(&self, _: &State, _: ActionId, _: &State) -> f64 {
        -1.0
    }
}

/// Wide synthetic problem for visitation experiments: many actions with
/// rewards in `[0, 1]`, unit Gaussian motion and observations, so every
/// observation is distinct and every branch keeps widening.
#[derive(Clone, Debug)]
pub struct Branching {
    pub num_actions: usize,
    noise: IsoGaussian,
}

impl Branching {
    pub fn new(num_actions: usize) -> Self {
        assert!(num_actions >= 1);
        Self {
            num_actions,
            noise: IsoGaussian::new(1.0),
        }
    }
}

impl Problem for Branching {
    fn discount(&self) -> f64 {
        0.95
    }
    fn shaping_weight(&self) -> f64 {
        0.0
    }
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn is_terminal_action(&self, _: ActionId) -> bool {
        false
    }
    fn transition_sample(&self, s: &State, _: ActionId, rng: &mut SimRng) -> State {
        self.noise.sample(*s, rng)
    }
    fn transition_density(&self, s_next: &State, s: &State, _: ActionId) -> f64 {
        self.noise.density(*s_next, *s)
    }
    fn observation_sample(&self, _: ActionId, s_next: &State, rng: &mut SimRng) -> Observation {
        self.noise.sample(*s_next, rng)
    }
    fn observation_density(&self, o: &Observation, _: ActionId, s_next: &State) -> f64 {
        self.noise.density(*o, *s_next)
    }
    fn state_reward(&self, _: &State, a: ActionId, s_next: &State) -> f64 {
        let base = (a.0 % 7) as f64 / 7.0;
        (base + 0.1 * s_next.x.tanh()).clamp(0.0, 1.0)
    }
}
