//! Growing weighted-particle beliefs.
//!
//! A [`ParticleBelief`] only ever grows: particles are appended (or merged
//! into a bit-identical existing particle) and never removed. Every posterior
//! particle remembers the prior particle that generated it, which is what the
//! Boers estimator sums over. Aggregates (weight sums, the Shannon cache and a
//! Fenwick tree for weighted sampling) are maintained on insertion so that no
//! operation on the planning hot path needs a full pass over the particles.

use rustc_hash::FxHashMap;

use rand::Rng;
use serde::ser::{Serialize, Serializer};
use serde::Deserialize;

use crate::entropy::ShannonCache;
use crate::error::{Error, Result};
use crate::model::{ActionId, Problem, SimRng, State};

/// Smallest weight a particle may carry. Gaussian tails underflow to zero
/// far from the mode; such weights are lifted to this floor.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// Lift a raw likelihood to [`WEIGHT_FLOOR`]. Non-finite and negative inputs
/// pass through unchanged so that insertion still rejects them.
pub fn floor_weight(w: f64) -> f64 {
    if w >= 0.0 && w < WEIGHT_FLOOR {
        WEIGHT_FLOOR
    } else {
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, Deserialize)]
pub struct Particle {
    pub state: State,
    pub weight: f64,
    /// The prior particle this one was propagated from.
    pub prior_state: State,
    pub prior_weight: f64,
}

/// What an insertion did, as needed by incremental reward caches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Insertion {
    pub index: usize,
    /// `true` when the state matched an existing particle bit for bit.
    pub merged: bool,
    /// Posterior weight of the particle before the insertion (0 when new).
    pub old_weight: f64,
    pub weight_delta: f64,
    pub prior_weight_delta: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ParticleBelief {
    particles: Vec<Particle>,
    weight_sum: f64,
    prior_weight_sum: f64,
    shannon: ShannonCache,
    sampler: Fenwick,
    by_bits: FxHashMap<[u64; 2], usize>,
}

impl ParticleBelief {
    pub fn new() -> Self {
        Self::default()
    }

    /// Equally weighted belief whose particles are their own priors.
    pub fn from_states<I: IntoIterator<Item = State>>(states: I) -> Self {
        let mut b = Self::new();
        for s in states {
            b.insert(s, 1.0, s, 1.0)
                .expect("unit weights are always accepted");
        }
        b
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    pub fn prior_weight_sum(&self) -> f64 {
        self.prior_weight_sum
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn particle(&self, i: usize) -> Result<&Particle> {
        self.particles.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.len(),
        })
    }

    /// Add a posterior particle together with the prior particle it came from.
    ///
    /// A state bit-identical to an existing particle is merged into it: both
    /// the posterior and the prior weights are added and the stored prior
    /// state is kept. Weight sums and the Shannon entropy update in O(1).
    pub fn insert(
        &mut self,
        state: State,
        weight: f64,
        prior_state: State,
        prior_weight: f64,
    ) -> Result<Insertion> {
        let weight = validated(weight)?;
        let prior_weight = validated(prior_weight)?;
        let old_sum = self.weight_sum;
        let new_sum = old_sum + weight;

        let insertion = match self.by_bits.get(&state.bits()) {
            Some(&k) => {
                let p = &mut self.particles[k];
                let old_weight = p.weight;
                p.weight += weight;
                p.prior_weight += prior_weight;
                self.shannon.update(old_sum, new_sum, old_weight, p.weight)?;
                self.sampler.add(k, weight);
                Insertion {
                    index: k,
                    merged: true,
                    old_weight,
                    weight_delta: weight,
                    prior_weight_delta: prior_weight,
                }
            }
            None => {
                let k = self.particles.len();
                self.particles.push(Particle {
                    state,
                    weight,
                    prior_state,
                    prior_weight,
                });
                self.by_bits.insert(state.bits(), k);
                self.shannon.update(old_sum, new_sum, 0.0, weight)?;
                self.sampler.push(weight);
                Insertion {
                    index: k,
                    merged: false,
                    old_weight: 0.0,
                    weight_delta: weight,
                    prior_weight_delta: prior_weight,
                }
            }
        };
        self.weight_sum = new_sum;
        self.prior_weight_sum += prior_weight;
        Ok(insertion)
    }

    /// `w_i / sum_j w_j`.
    pub fn normalized_weight(&self, i: usize) -> Result<f64> {
        Ok(self.particle(i)?.weight / self.weight_sum)
    }

    /// Draw a particle index with probability proportional to its weight,
    /// in O(log N).
    pub fn sample_index(&self, rng: &mut SimRng) -> Result<usize> {
        if self.is_empty() {
            return Err(Error::EmptyBelief);
        }
        let u = rng.random::<f64>() * self.sampler.total();
        Ok(self.sampler.find(u).min(self.len() - 1))
    }

    pub fn sample_state(&self, rng: &mut SimRng) -> Result<State> {
        Ok(self.particles[self.sample_index(rng)?].state)
    }

    /// Cached Shannon entropy of the normalized weights.
    pub fn shannon_entropy(&self) -> f64 {
        self.shannon.value()
    }

    pub fn shannon_cache(&self) -> &ShannonCache {
        &self.shannon
    }

    /// `sum_i w_i * R_s(prior_i, a, s_i) / sum_j w_j`, recomputed in O(N).
    pub fn expected_state_reward(&self, problem: &dyn Problem, a: ActionId) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyBelief);
        }
        let acc: f64 = self
            .particles
            .iter()
            .map(|p| p.weight * problem.state_reward(&p.prior_state, a, &p.state))
            .sum();
        Ok(acc / self.weight_sum)
    }

    /// Weighted mean of the particle states.
    pub fn mean(&self) -> State {
        let mut m = State::ZERO;
        for p in &self.particles {
            m = m + p.state * (p.weight / self.weight_sum);
        }
        m
    }
}

impl Serialize for ParticleBelief {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.particles.serialize(serializer)
    }
}

fn validated(w: f64) -> Result<f64> {
    if w > 0.0 && w.is_finite() {
        Ok(floor_weight(w))
    } else {
        Err(Error::NonPositiveWeight(w))
    }
}

/// Binary indexed tree over particle weights.
#[derive(Clone, Debug, Default)]
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn push(&mut self, w: f64) {
        let n = self.tree.len() + 1;
        let low = n & n.wrapping_neg();
        let mut v = w;
        let mut j = n - 1;
        while j > n - low {
            v += self.tree[j - 1];
            j -= j & j.wrapping_neg();
        }
        self.tree.push(v);
    }

    fn add(&mut self, index: usize, delta: f64) {
        let mut i = index + 1;
        while i <= self.tree.len() {
            self.tree[i - 1] += delta;
            i += i & i.wrapping_neg();
        }
    }

    fn prefix(&self, count: usize) -> f64 {
        let mut i = count;
        let mut acc = 0.0;
        while i > 0 {
            acc += self.tree[i - 1];
            i -= i & i.wrapping_neg();
        }
        acc
    }

    fn total(&self) -> f64 {
        self.prefix(self.tree.len())
    }

    /// Smallest index whose inclusive prefix sum exceeds `u`.
    fn find(&self, mut u: f64) -> usize {
        let n = self.tree.len();
        let mut pos = 0;
        let mut step = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] <= u {
                pos = next;
                u -= self.tree[next - 1];
            }
            step >>= 1;
        }
        pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Vec2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn pt(x: f64) -> State {
        Vec2::new(x, -x)
    }

    #[test]
    fn insert_into_empty() {
        let mut b = ParticleBelief::new();
        let ins = b.insert(pt(1.0), 0.7, pt(0.0), 1.0).unwrap();
        assert_eq!(ins.index, 0);
        assert!(!ins.merged);
        assert_eq!(b.len(), 1);
        assert_eq!(b.weight_sum(), 0.7);
        assert_eq!(b.normalized_weight(0).unwrap(), 1.0);
    }

    #[test]
    fn identical_states_merge() {
        let mut b = ParticleBelief::new();
        b.insert(pt(2.0), 1.0, pt(0.0), 1.0).unwrap();
        let ins = b.insert(pt(2.0), 1.0, pt(0.5), 1.0).unwrap();
        assert!(ins.merged);
        assert_eq!(ins.old_weight, 1.0);
        assert_eq!(b.len(), 1);
        assert_eq!(b.weight_sum(), 2.0);
        assert_eq!(b.particles()[0].prior_weight, 2.0);
        assert_eq!(b.particles()[0].prior_state, pt(0.0));
    }

    #[test]
    fn non_positive_weight_rejected() {
        let mut b = ParticleBelief::new();
        assert!(matches!(
            b.insert(pt(0.0), 0.0, pt(0.0), 1.0),
            Err(Error::NonPositiveWeight(_))
        ));
        assert!(b.insert(pt(0.0), -1.0, pt(0.0), 1.0).is_err());
        assert!(b.insert(pt(0.0), f64::NAN, pt(0.0), 1.0).is_err());
        assert!(b.insert(pt(0.0), 1.0, pt(0.0), 0.0).is_err());
        assert!(b.is_empty());
    }

    #[test]
    fn tiny_weights_are_floored() {
        let mut b = ParticleBelief::new();
        b.insert(pt(0.0), 1e-320, pt(0.0), 1.0).unwrap();
        assert_eq!(b.particles()[0].weight, WEIGHT_FLOOR);
        assert_eq!(floor_weight(0.0), WEIGHT_FLOOR);
        assert_eq!(floor_weight(0.5), 0.5);
    }

    #[test]
    fn normalized_weights_ratio() {
        let mut b = ParticleBelief::new();
        b.insert(pt(0.0), 1.0, pt(0.0), 1.0).unwrap();
        b.insert(pt(1.0), 3.0, pt(0.0), 1.0).unwrap();
        assert_eq!(b.normalized_weight(0).unwrap(), 0.25);
        assert_eq!(b.normalized_weight(1).unwrap(), 0.75);
        assert!(matches!(
            b.normalized_weight(2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn incremental_weight_sum_matches_resum() {
        let mut rng = SimRng::seed_from_u64(11);
        let mut b = ParticleBelief::new();
        for i in 0..1000 {
            let w = rng.random::<f64>() * 10.0 + 1e-3;
            b.insert(pt(i as f64), w, pt(0.0), 1.0).unwrap();
        }
        let resum: f64 = b.particles().iter().map(|p| p.weight).sum();
        assert!((b.weight_sum() - resum).abs() / resum <= 1e-12);
        let total: f64 = (0..b.len()).map(|i| b.normalized_weight(i).unwrap()).sum();
        assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sampling_single_particle() {
        let mut rng = SimRng::seed_from_u64(3);
        let b = ParticleBelief::from_states([pt(4.0)]);
        for _ in 0..100 {
            assert_eq!(b.sample_index(&mut rng).unwrap(), 0);
        }
        assert!(matches!(
            ParticleBelief::new().sample_index(&mut rng),
            Err(Error::EmptyBelief)
        ));
    }

    fn frequency_of(weights: &[f64], target: usize, draws: usize, seed: u64) -> f64 {
        let mut b = ParticleBelief::new();
        for (i, &w) in weights.iter().enumerate() {
            b.insert(pt(i as f64), w, pt(0.0), 1.0).unwrap();
        }
        let mut rng = SimRng::seed_from_u64(seed);
        let hits = (0..draws)
            .filter(|_| b.sample_index(&mut rng).unwrap() == target)
            .count();
        hits as f64 / draws as f64
    }

    #[test]
    fn sampling_frequencies_follow_weights() {
        assert!((frequency_of(&[1.0, 1.0], 0, 100_000, 5) - 0.5).abs() <= 0.01);
        assert!((frequency_of(&[1.0, 9.0], 1, 100_000, 6) - 0.9).abs() <= 0.01);
    }

    #[test]
    fn sampling_sees_merged_weight() {
        let mut b = ParticleBelief::new();
        b.insert(pt(0.0), 1.0, pt(0.0), 1.0).unwrap();
        b.insert(pt(1.0), 1.0, pt(0.0), 1.0).unwrap();
        b.insert(pt(1.0), 2.0, pt(0.0), 1.0).unwrap();
        let mut rng = SimRng::seed_from_u64(8);
        let hits = (0..100_000)
            .filter(|_| b.sample_index(&mut rng).unwrap() == 1)
            .count();
        assert!((hits as f64 / 1e5 - 0.75).abs() < 0.01);
    }

    #[test]
    fn belief_serializes_as_particle_array() {
        let b = ParticleBelief::from_states([pt(1.0)]);
        let v: serde_json::Value = serde_json::to_value(&b).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 1);
        assert_eq!(v[0]["state"], serde_json::json!([1.0, -1.0]));
        assert_eq!(v[0]["weight"], serde_json::json!(1.0));
    }

    #[test]
    fn fenwick_prefix_sums() {
        let mut f = Fenwick::default();
        let ws = [0.5, 1.5, 2.0, 0.25, 3.0, 1.0, 0.75];
        for &w in &ws {
            f.push(w);
        }
        for k in 0..=ws.len() {
            let direct: f64 = ws[..k].iter().sum();
            assert!((f.prefix(k) - direct).abs() < 1e-12);
        }
        assert_eq!(f.find(0.0), 0);
        assert_eq!(f.find(0.6), 1);
        assert_eq!(f.find(4.1), 3);
        f.add(3, 1.0);
        assert!((f.total() - 10.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn weight_sum_tracks_batch(ops in prop::collection::vec((0u8..6, 1e-6f64..100.0), 1..12)) {
            let mut b = ParticleBelief::new();
            for &(slot, w) in &ops {
                b.insert(pt(slot as f64), w, pt(0.0), 1.0).unwrap();
            }
            let resum: f64 = b.particles().iter().map(|p| p.weight).sum();
            prop_assert!((b.weight_sum() - resum).abs() <= 1e-12 * resum);
            let prior: f64 = b.particles().iter().map(|p| p.prior_weight).sum();
            prop_assert!((b.prior_weight_sum() - prior).abs() <= 1e-12 * prior);
        }

        #[test]
        fn merge_is_idempotent(x in -10.0f64..10.0, w in 1e-3f64..10.0) {
            let mut twice = ParticleBelief::new();
            twice.insert(pt(x), w, pt(0.0), 1.0).unwrap();
            twice.insert(pt(x), w, pt(0.0), 1.0).unwrap();
            let mut once = ParticleBelief::new();
            once.insert(pt(x), 2.0 * w, pt(0.0), 2.0).unwrap();
            prop_assert_eq!(twice.particles(), once.particles());
            prop_assert_eq!(twice.weight_sum(), once.weight_sum());
            prop_assert!((twice.shannon_entropy() - once.shannon_entropy()).abs() < 1e-12);
        }
    }
}
