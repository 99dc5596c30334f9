//! Generative contracts for belief-dependent-reward POMDPs.
//!
//! Every planner and environment in the crate talks to a problem through the
//! [`Problem`] trait: a transition sampler and density, an observation sampler
//! and density, a state reward, and the shaping weight used to compose
//! belief-dependent rewards. States and observations are points in the plane.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Random generator threaded explicitly through every stochastic call.
pub type SimRng = ChaCha8Rng;

/// A point (or displacement) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_squared(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Bit pattern used for exact-equality particle merging.
    pub fn bits(self) -> [u64; 2] {
        [self.x.to_bits(), self.y.to_bits()]
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

pub type State = Vec2;
pub type Observation = Vec2;

/// Index into a problem's finite action set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// Isotropic bivariate Gaussian `N(mean, variance * I)`.
///
/// Every covariance in the benchmark problems is a multiple of the identity,
/// so densities are evaluated in closed form without a linear-algebra crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoGaussian {
    variance: f64,
}

impl IsoGaussian {
    /// A zero variance is accepted for deterministic sampling only; its
    /// density is degenerate.
    pub fn new(variance: f64) -> Self {
        assert!(
            variance >= 0.0 && variance.is_finite(),
            "variance must be finite and non-negative, got {variance}"
        );
        Self { variance }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn density(&self, x: Vec2, mean: Vec2) -> f64 {
        let v = self.variance;
        (-(x - mean).norm_squared() / (2.0 * v)).exp() / (2.0 * PI * v)
    }

    pub fn log_density(&self, x: Vec2, mean: Vec2) -> f64 {
        let v = self.variance;
        -(x - mean).norm_squared() / (2.0 * v) - (2.0 * PI * v).ln()
    }

    pub fn sample(&self, mean: Vec2, rng: &mut SimRng) -> Vec2 {
        if self.variance == 0.0 {
            return mean;
        }
        let sd = self.variance.sqrt();
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        Vec2::new(mean.x + sd * dx, mean.y + sd * dy)
    }

    /// Differential entropy in nats, `ln(2 pi e v)` for the 2-D isotropic case.
    pub fn entropy(&self) -> f64 {
        (2.0 * PI * std::f64::consts::E * self.variance).ln()
    }
}

/// Belief-dependent reward split into its state part and its information part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapedReward {
    /// Expected state reward under the weighted particle pairs.
    pub state_term: f64,
    /// `lambda * (H(b) - H(b'))`.
    pub info_term: f64,
    pub total: f64,
}

impl ShapedReward {
    pub fn compose(state_term: f64, shaping_weight: f64, h_prior: f64, h_post: f64) -> Self {
        let info_term = shaping_weight * crate::entropy::info_gain(h_prior, h_post);
        Self {
            state_term,
            info_term,
            total: state_term + info_term,
        }
    }
}

/// A continuous-state POMDP with belief-dependent rewards.
///
/// Implementations must be immutable once built: planners share them across
/// threads while each episode owns its own [`SimRng`].
pub trait Problem: Send + Sync {
    /// Dimension of the state space.
    fn state_dim(&self) -> usize {
        2
    }

    /// Discount factor, in `(0, 1]`.
    fn discount(&self) -> f64;

    /// Weight on the information-gain term of the shaped reward.
    fn shaping_weight(&self) -> f64;

    fn num_actions(&self) -> usize;

    /// Whether executing `a` ends the episode ("stay" in the benchmarks).
    fn is_terminal_action(&self, a: ActionId) -> bool;

    fn transition_sample(&self, s: &State, a: ActionId, rng: &mut SimRng) -> State;

    fn transition_density(&self, s_next: &State, s: &State, a: ActionId) -> f64;

    fn observation_sample(&self, a: ActionId, s_next: &State, rng: &mut SimRng) -> Observation;

    fn observation_density(&self, o: &Observation, a: ActionId, s_next: &State) -> f64;

    /// `R_s(s, a, s')`.
    fn state_reward(&self, s: &State, a: ActionId, s_next: &State) -> f64;

    fn shaped_reward(&self, state_term: f64, h_prior: f64, h_post: f64) -> ShapedReward {
        ShapedReward::compose(state_term, self.shaping_weight(), h_prior, h_post)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gaussian_peak_density() {
        let g = IsoGaussian::new(0.1);
        let peak = g.density(Vec2::new(1.0, 2.0), Vec2::new(1.0, 2.0));
        assert!((peak - 1.0 / (2.0 * PI * 0.1)).abs() < 1e-12);
        assert!((peak - 1.5915).abs() < 1e-4);
        assert!((g.log_density(Vec2::ZERO, Vec2::ZERO) - peak.ln()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_density_is_symmetric() {
        let g = IsoGaussian::new(0.1);
        let m = Vec2::new(0.3, -0.7);
        let d = Vec2::new(0.21, 0.05);
        let (p, q) = (g.density(m + d, m), g.density(m - d, m));
        assert!((p - q).abs() <= 1e-14 * p);
    }

    #[test]
    fn zero_variance_samples_the_mean() {
        let mut rng = SimRng::seed_from_u64(1);
        let g = IsoGaussian::new(0.0);
        assert_eq!(g.sample(Vec2::new(1.0, 0.0), &mut rng), Vec2::new(1.0, 0.0));
    }

    #[test]
    fn vec2_serializes_as_pair() {
        let v = Vec2::new(1.5, -2.0);
        assert_eq!(serde_json::to_string(&v).unwrap(), "[1.5,-2.0]");
        let back: Vec2 = serde_json::from_str("[1.5,-2.0]").unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn shaped_reward_adds_terms() {
        let r = ShapedReward::compose(-1.0, 30.0, 2.0, 0.5);
        assert_eq!(r.info_term, 45.0);
        assert_eq!(r.total, r.state_term + r.info_term);
    }
}
