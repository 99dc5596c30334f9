use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::ParticleBelief;
use crate::error::{Error, Result};
use crate::model::{ActionId, IsoGaussian, Observation, Problem, SimRng, State, Vec2};

pub const TRANSITION_VARIANCE: f64 = 0.1;
pub const INITIAL_VARIANCE: f64 = 2.5;
pub const STEP_COST: f64 = -1.0;
pub const GOAL_REWARD: f64 = 100.0;
pub const COLLISION_PENALTY: f64 = -50.0;
pub const GOAL_RADIUS: f64 = 1.0;
pub const LIGHT_DARK_BEACON_VARIANCE: f64 = 0.5;

/// The eight unit moves at 45 degree steps, then "stay".
pub const NUM_ACTIONS: usize = 9;
pub const STAY: ActionId = ActionId(8);

pub fn action_vector(a: ActionId) -> Vec2 {
    if a == STAY {
        return Vec2::ZERO;
    }
    let angle = a.0 as f64 * PI / 4.0;
    let (s, c) = angle.sin_cos();
    // exact zeros keep axis-aligned moves free of 1e-16 drift
    let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
    Vec2::new(snap(c), snap(s))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub c: Vec2,
    pub r: f64,
}

impl Disc {
    pub fn contains(&self, p: Vec2) -> bool {
        p.distance(self.c) <= self.r
    }
}

/// Map and reward parameters, as stored in a map JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub beacons: Vec<Vec2>,
    #[serde(default)]
    pub obstacles: Vec<Disc>,
    #[serde(default)]
    pub goal: Option<Vec2>,
    pub x0: Vec2,
    pub lambda: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_step_cap")]
    pub step_cap: usize,
}

fn default_gamma() -> f64 {
    0.95
}

fn default_step_cap() -> usize {
    50
}

impl MapConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Default Light-Dark layout: a single beacon marks the goal, four steps
    /// from the start, so observations sharpen only near it.
    pub fn light_dark_default() -> Self {
        Self {
            beacons: vec![Vec2::new(4.0, 0.0)],
            obstacles: Vec::new(),
            goal: Some(Vec2::new(4.0, 0.0)),
            x0: Vec2::new(0.0, 0.0),
            lambda: 30.0,
            gamma: 0.95,
            step_cap: 50,
        }
    }

    /// Default Active Localization layout: a near beacon, two far beacons
    /// with sharper observations, and obstacles on the way to them.
    pub fn active_localization_default() -> Self {
        Self {
            beacons: vec![Vec2::new(1.0, 1.0), Vec2::new(6.0, 0.0), Vec2::new(0.0, -6.0)],
            obstacles: vec![
                Disc { c: Vec2::new(3.0, 0.5), r: 0.8 },
                Disc { c: Vec2::new(0.5, -3.0), r: 0.8 },
            ],
            goal: None,
            x0: Vec2::new(0.0, 0.0),
            lambda: 30.0,
            gamma: 0.95,
            step_cap: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Reach the goal disc and stay: +100 inside, -100 outside.
    LightDark,
    /// Localize; collisions with obstacle discs cost 50.
    ActiveLocalization,
}

/// One environment transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: State,
    pub observation: Observation,
    pub reward: f64,
    pub terminal: bool,
}

/// The two benchmark problems: linear-Gaussian motion in the plane with
/// relative-position observations of the nearest beacon whose noise grows
/// with distance.
#[derive(Clone, Debug)]
pub struct BeaconWorld {
    variant: Variant,
    map: MapConfig,
    beacon_variance: Vec<f64>,
    transition: IsoGaussian,
}

impl BeaconWorld {
    pub fn new(variant: Variant, map: MapConfig) -> Result<Self> {
        if map.beacons.is_empty() {
            return Err(Error::Config("at least one beacon is required".into()));
        }
        if !(map.gamma > 0.0 && map.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", map.gamma)));
        }
        if !(map.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be non-negative, got {}", map.lambda)));
        }
        let beacon_variance = match variant {
            Variant::LightDark => {
                if map.goal.is_none() {
                    return Err(Error::Config("light-dark maps need a goal".into()));
                }
                vec![LIGHT_DARK_BEACON_VARIANCE; map.beacons.len()]
            }
            Variant::ActiveLocalization => map
                .beacons
                .iter()
                .map(|b| {
                    let r = b.norm();
                    if r > 0.0 {
                        Ok(0.5 / r)
                    } else {
                        Err(Error::Config("beacons cannot sit at the origin".into()))
                    }
                })
                .collect::<Result<_>>()?,
        };
        Ok(Self {
            variant,
            map,
            beacon_variance,
            transition: IsoGaussian::new(TRANSITION_VARIANCE),
        })
    }

    pub fn light_dark() -> Self {
        Self::new(Variant::LightDark, MapConfig::light_dark_default()).expect("default map is valid")
    }

    pub fn active_localization() -> Self {
        Self::new(Variant::ActiveLocalization, MapConfig::active_localization_default())
            .expect("default map is valid")
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn map(&self) -> &MapConfig {
        &self.map
    }

    /// Same world with every obstacle removed.
    pub fn without_obstacles(&self) -> Self {
        let mut w = self.clone();
        w.map.obstacles.clear();
        w
    }

    /// Same world with a different shaping weight.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut w = self.clone();
        w.map.lambda = lambda;
        w
    }

    pub fn step_cap(&self) -> usize {
        self.map.step_cap
    }

    /// Euclidean-nearest beacon index and distance; ties go to the lower index.
    pub fn nearest_beacon(&self, p: Vec2) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, b) in self.map.beacons.iter().enumerate() {
            let d = b.distance(p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Isotropic observation variance at `s`:
    /// `(sqrt 2 / 2) |x_b - s| + sigma_b` for the nearest beacon `x_b`.
    pub fn observation_variance(&self, s: Vec2) -> f64 {
        let (i, d) = self.nearest_beacon(s);
        FRAC_1_SQRT_2 * d + self.beacon_variance[i]
    }

    fn observation_model(&self, s: Vec2) -> (Vec2, IsoGaussian) {
        let (i, d) = self.nearest_beacon(s);
        let mean = self.map.beacons[i] - s;
        (mean, IsoGaussian::new(FRAC_1_SQRT_2 * d + self.beacon_variance[i]))
    }

    pub fn initial_distribution(&self) -> IsoGaussian {
        IsoGaussian::new(INITIAL_VARIANCE)
    }

    /// `n` equally weighted samples from `N(x0, 2.5 I)`.
    pub fn initial_belief(&self, rng: &mut SimRng, n: usize) -> ParticleBelief {
        let g = self.initial_distribution();
        ParticleBelief::from_states((0..n).map(|_| g.sample(self.map.x0, rng)))
    }

    pub fn sample_initial_state(&self, rng: &mut SimRng) -> State {
        self.initial_distribution().sample(self.map.x0, rng)
    }

    pub fn in_goal(&self, s: Vec2) -> bool {
        self.map.goal.is_some_and(|g| s.distance(g) <= GOAL_RADIUS)
    }

    pub fn in_obstacle(&self, s: Vec2) -> bool {
        self.map.obstacles.iter().any(|o| o.contains(s))
    }

    pub fn step(&self, s: &State, a: ActionId, rng: &mut SimRng) -> StepOutcome {
        let next_state = self.transition_sample(s, a, rng);
        let observation = self.observation_sample(a, &next_state, rng);
        StepOutcome {
            next_state,
            observation,
            reward: self.state_reward(s, a, &next_state),
            terminal: self.is_terminal_action(a),
        }
    }
}

impl Problem for BeaconWorld {
    fn discount(&self) -> f64 {
        self.map.gamma
    }

    fn shaping_weight(&self) -> f64 {
        self.map.lambda
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn is_terminal_action(&self, a: ActionId) -> bool {
        a == STAY
    }

    fn transition_sample(&self, s: &State, a: ActionId, rng: &mut SimRng) -> State {
        self.transition.sample(*s + action_vector(a), rng)
    }

    fn transition_density(&self, s_next: &State, s: &State, a: ActionId) -> f64 {
        self.transition.density(*s_next, *s + action_vector(a))
    }

    fn observation_sample(&self, _: ActionId, s_next: &State, rng: &mut SimRng) -> Observation {
        let (mean, g) = self.observation_model(*s_next);
        g.sample(mean, rng)
    }

    fn observation_density(&self, o: &Observation, _: ActionId, s_next: &State) -> f64 {
        let (mean, g) = self.observation_model(*s_next);
        g.density(*o, mean)
    }

    /// Step cost, plus the goal check on "stay" (Light-Dark, judged at the
    /// state where the agent stops) or the collision penalty on landing in an
    /// obstacle (Active Localization).
    fn state_reward(&self, s: &State, a: ActionId, s_next: &State) -> f64 {
        let mut r = STEP_COST;
        match self.variant {
            Variant::LightDark => {
                if a == STAY {
                    r += if self.in_goal(*s) { GOAL_REWARD } else { -GOAL_REWARD };
                }
            }
            Variant::ActiveLocalization => {
                if self.in_obstacle(*s_next) {
                    r += COLLISION_PENALTY;
                }
            }
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn ld() -> BeaconWorld {
        BeaconWorld::light_dark()
    }

    #[test]
    fn actions_are_unit_moves_plus_stay() {
        for k in 0..8 {
            assert!((action_vector(ActionId(k)).norm() - 1.0).abs() < 1e-15);
        }
        assert_eq!(action_vector(ActionId(0)), Vec2::new(1.0, 0.0));
        assert_eq!(action_vector(ActionId(2)), Vec2::new(0.0, 1.0));
        assert_eq!(action_vector(STAY), Vec2::ZERO);
    }

    #[test]
    fn transition_peak_and_symmetry() {
        let w = ld();
        let s = Vec2::new(0.3, -0.2);
        let peak = w.transition_density(&(s + action_vector(ActionId(1))), &s, ActionId(1));
        assert!((peak - 1.0 / (2.0 * PI * 0.1)).abs() < 1e-12);
        assert!((peak - 1.5915).abs() < 1e-4);
    }

    #[test]
    fn transition_density_integrates_to_one() {
        let w = ld();
        let s = Vec2::ZERO;
        let mean = action_vector(ActionId(0));
        let half = 3.0 * 0.1f64.sqrt();
        let n = 400;
        let h = 2.0 * half / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = Vec2::new(mean.x - half + (i as f64 + 0.5) * h, mean.y - half + (j as f64 + 0.5) * h);
                total += w.transition_density(&p, &s, ActionId(0)) * h * h;
            }
        }
        // mass of the 3-sigma box is (erf(3 / sqrt 2))^2 = 0.99461
        assert!((total - 0.994_613_4).abs() < 1e-3, "{total}");
    }

    #[test]
    fn zero_noise_transition_hits_the_mean() {
        let g = IsoGaussian::new(0.0);
        let mut rng = SimRng::seed_from_u64(0);
        assert_eq!(g.sample(Vec2::ZERO + action_vector(ActionId(0)), &mut rng), Vec2::new(1.0, 0.0));
    }

    #[test]
    fn light_dark_observation_variance() {
        let w = ld();
        let b = w.map().beacons[0];
        let s = b - Vec2::new(1.0, 1.0);
        assert!((w.observation_variance(s) - 1.5).abs() < 1e-12);
        let o = b - s;
        let peak = w.observation_density(&o, ActionId(0), &s);
        assert!((peak - 1.0 / (2.0 * PI * 1.5)).abs() < 1e-12);
        assert!(w.observation_density(&(o + Vec2::new(0.1, 0.0)), ActionId(0), &s) < peak);
    }

    #[test]
    fn active_localization_beacon_noise() {
        let map = MapConfig {
            beacons: vec![Vec2::new(2.0, 0.0), Vec2::new(0.0, 8.0)],
            ..MapConfig::active_localization_default()
        };
        let w = BeaconWorld::new(Variant::ActiveLocalization, map).unwrap();
        assert!((w.observation_variance(Vec2::new(2.0, 0.0)) - 0.25).abs() < 1e-15);
        assert!(w.observation_variance(Vec2::new(0.0, 8.0)) < w.observation_variance(Vec2::new(2.0, 0.0)));
    }

    #[test]
    fn beacon_at_origin_rejected() {
        let map = MapConfig {
            beacons: vec![Vec2::ZERO],
            ..MapConfig::active_localization_default()
        };
        assert!(matches!(
            BeaconWorld::new(Variant::ActiveLocalization, map),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn noise_grows_with_beacon_distance() {
        let w = ld();
        let b = w.map().beacons[0];
        let mut prev = 0.0;
        for k in 0..20 {
            let v = w.observation_variance(b + Vec2::new(0.0, -0.1 * k as f64));
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn nearest_beacon_rules() {
        let single = BeaconWorld::new(
            Variant::LightDark,
            MapConfig {
                beacons: vec![Vec2::new(3.0, 3.0)],
                ..MapConfig::light_dark_default()
            },
        )
        .unwrap();
        assert_eq!(single.nearest_beacon(Vec2::new(-9.0, 0.0)).0, 0);
        assert_eq!(single.nearest_beacon(Vec2::new(3.0, 3.0)), (0, 0.0));
        let pair = BeaconWorld::new(
            Variant::LightDark,
            MapConfig {
                beacons: vec![Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)],
                ..MapConfig::light_dark_default()
            },
        )
        .unwrap();
        assert_eq!(pair.nearest_beacon(Vec2::new(0.0, 5.0)).0, 0);
    }

    #[test]
    fn light_dark_terminal_rewards() {
        let w = ld();
        let goal = w.map().goal.unwrap();
        let mut rng = SimRng::seed_from_u64(4);
        let out = w.step(&goal, STAY, &mut rng);
        assert!(out.terminal);
        assert_eq!(out.reward, -1.0 + 100.0);
        let out = w.step(&(goal + Vec2::new(1.5, 0.0)), STAY, &mut rng);
        assert_eq!(out.reward, -1.0 - 100.0);
        let out = w.step(&goal, ActionId(0), &mut rng);
        assert!(!out.terminal);
        assert_eq!(out.reward, -1.0);
    }

    #[test]
    fn collision_penalty() {
        let w = BeaconWorld::active_localization();
        let c = w.map().obstacles[0].c;
        assert_eq!(w.state_reward(&(c - Vec2::new(1.0, 0.0)), ActionId(0), &c), -51.0);
        assert_eq!(w.state_reward(&Vec2::ZERO, ActionId(0), &Vec2::new(-5.0, 5.0)), -1.0);
        assert_eq!(w.without_obstacles().state_reward(&Vec2::ZERO, ActionId(0), &c), -1.0);
    }

    #[test]
    fn map_json_format() {
        let json = r#"{
            "beacons": [[0, 4], [6, 4]],
            "obstacles": [{"c": [3, 0.5], "r": 0.8}],
            "goal": [6, 0],
            "x0": [0, 0],
            "lambda": 30.0,
            "gamma": 0.95,
            "step_cap": 50
        }"#;
        let map: MapConfig = serde_json::from_str(json).unwrap();
        assert_eq!(map.beacons[1], Vec2::new(6.0, 4.0));
        assert_eq!(map.obstacles[0].r, 0.8);
        let back: MapConfig = serde_json::from_str(&serde_json::to_string(&map).unwrap()).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn initial_belief_is_uniformly_weighted() {
        let w = ld();
        let mut rng = SimRng::seed_from_u64(9);
        let b = w.initial_belief(&mut rng, 64);
        assert_eq!(b.len(), 64);
        assert!((b.shannon_entropy() - 64f64.ln()).abs() < 1e-12);
    }
}
