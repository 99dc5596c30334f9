//! Entropy estimators over particle beliefs, batch and incremental.
//!
//! Two estimators are provided:
//!
//! * Shannon entropy of the normalized particle weights. Writing it as
//!   `log W - (1/W) sum_i w_i log w_i` with `W = sum_i w_i` means a single
//!   weight change only touches one term of the sum, so [`ShannonCache`]
//!   updates it in O(1).
//! * The Boers particle estimator of differential entropy, which compares
//!   a posterior particle set against the prior set it was propagated from:
//!
//!   ```text
//!   H(b') = log[ sum_i Z(o|a,s'_i) w_i ]
//!         - sum_i w'_i log Z(o|a,s'_i)
//!         - sum_i w'_i log c_i,        c_i = sum_j T(s'_i|s_j,a) w_j
//!   ```
//!
//!   with normalized prior weights `w_j` and posterior weights `w'_i`. The
//!   `c_i` double sum makes a fresh evaluation O(N^2). [`BoersCache`] keeps
//!   every `c_i` normalized by the prior weight sum; adding prior weight `dw`
//!   at prior particle `k` turns each cached value into
//!   `c_i * W / (W + dw) + T(s'_i|s_k,a) * dw / (W + dw)`, which is one pass
//!   over the particles, plus one O(N) sum for the new particle's own `c`.

use crate::belief::{Insertion, ParticleBelief, WEIGHT_FLOOR};
use crate::error::{Error, Result};
use crate::model::{ActionId, Observation, Problem};

/// Floor applied to every logarithm argument.
pub const LOG_FLOOR: f64 = 1e-300;

fn w_log_w(w: f64) -> f64 {
    if w > 0.0 {
        w * w.ln()
    } else {
        0.0
    }
}

/// `IG(b, b') = H(b) - H(b')`.
pub fn info_gain(h_prior: f64, h_post: f64) -> f64 {
    h_prior - h_post
}

/// Shannon entropy of the normalized weights, from scratch (`0 log 0 = 0`).
pub fn shannon_batch(belief: &ParticleBelief) -> Result<f64> {
    if belief.is_empty() {
        return Err(Error::EmptyBelief);
    }
    Ok(shannon_of_weights(belief.particles().iter().map(|p| p.weight)))
}

/// Shannon entropy of an arbitrary list of non-negative weights.
pub fn shannon_of_weights<I: IntoIterator<Item = f64>>(weights: I) -> f64 {
    let ws: Vec<f64> = weights.into_iter().collect();
    let total: f64 = ws.iter().sum();
    -ws.iter().map(|&w| w_log_w(w / total)).sum::<f64>()
}

/// O(1) Shannon entropy maintenance under single-weight changes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShannonCache {
    wlogw_sum: f64,
    value: f64,
}

impl ShannonCache {
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Cached `sum_i w_i log w_i` over unnormalized weights.
    pub fn wlogw_sum(&self) -> f64 {
        self.wlogw_sum
    }

    /// Entropy from the cached weight-log-weight sum: `log W - S / W`.
    pub fn value_from_sum(&self, weight_sum: f64) -> f64 {
        weight_sum.ln() - self.wlogw_sum / weight_sum
    }

    /// Account for weight `k` moving from `w_old` to `w_new` (with `w_old = 0`
    /// for a new particle) while the total moves from `W` to `W~`.
    ///
    /// Only the weight-log-weight sum changes, by `w~ log w~ - w log w`, and the
    /// entropy follows as `log W~ - S~ / W~`. Written as a recurrence on the
    /// previous value this is
    ///
    /// ```text
    /// H <- (W/W~) H - (w~ log w~ - w log w)/W~ + log W~ - (W/W~) log W
    /// ```
    ///
    /// The closed form is used because it does not accumulate rounding error.
    pub fn update(&mut self, old_sum: f64, new_sum: f64, w_old: f64, w_new: f64) -> Result<f64> {
        if !(new_sum > 0.0) {
            return Err(Error::NonPositiveWeightSum(new_sum));
        }
        debug_assert!(old_sum >= 0.0);
        self.wlogw_sum += w_log_w(w_new) - w_log_w(w_old);
        self.value = self.value_from_sum(new_sum);
        Ok(self.value)
    }
}

/// The recurrence form of [`ShannonCache::update`], kept for cross-checking.
pub fn shannon_recurrence(h: f64, old_sum: f64, new_sum: f64, w_old: f64, w_new: f64) -> f64 {
    if old_sum <= 0.0 {
        return 0.0;
    }
    let ratio = old_sum / new_sum;
    ratio * h - (w_log_w(w_new) - w_log_w(w_old)) / new_sum + new_sum.ln() - ratio * old_sum.ln()
}

/// Result of a from-scratch Boers evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoersEstimate {
    pub value: f64,
    /// Number of density terms that had to be lifted to [`LOG_FLOOR`].
    pub floor_events: usize,
}

fn floored_ln(x: f64, events: &mut usize) -> f64 {
    if x < LOG_FLOOR {
        *events += 1;
        LOG_FLOOR.ln()
    } else {
        x.ln()
    }
}

fn floored(x: f64, events: &mut usize) -> f64 {
    if x < WEIGHT_FLOOR {
        *events += 1;
        WEIGHT_FLOOR
    } else {
        x
    }
}

/// Boers entropy of `belief` (posterior side: `state`, `weight`; prior side:
/// `prior_state`, `prior_weight`) for action `a` and observation `o`,
/// evaluated from scratch in O(N^2).
pub fn boers_batch(
    belief: &ParticleBelief,
    a: ActionId,
    o: &Observation,
    problem: &dyn Problem,
) -> Result<BoersEstimate> {
    if belief.is_empty() {
        return Err(Error::EmptyBelief);
    }
    let particles = belief.particles();
    let post_sum = belief.weight_sum();
    let prior_sum = belief.prior_weight_sum();
    let mut events = 0;

    let mut predictive = 0.0;
    let mut log_z = 0.0;
    let mut log_c = 0.0;
    for p in particles {
        let z = floored(problem.observation_density(o, a, &p.state), &mut events);
        predictive += z * p.prior_weight;
        log_z += p.weight * z.ln();
        let c: f64 = particles
            .iter()
            .map(|q| problem.transition_density(&p.state, &q.prior_state, a) * q.prior_weight)
            .sum::<f64>()
            / prior_sum;
        log_c += p.weight * floored_ln(c, &mut events);
    }
    let value = (predictive / prior_sum).ln() - log_z / post_sum - log_c / post_sum;
    Ok(BoersEstimate {
        value,
        floor_events: events,
    })
}

/// Incremental Boers state for one posterior node, kept in lockstep with the
/// node's [`ParticleBelief`].
#[derive(Clone, Debug)]
pub struct BoersCache {
    action: ActionId,
    observation: Observation,
    /// `c_i`, normalized by `prior_weight_sum`.
    c: Vec<f64>,
    /// Floored `Z(o|a,s'_i)`.
    z: Vec<f64>,
    prior_weight_sum: f64,
    post_weight_sum: f64,
    /// `sum_i prior_weight_i * Z_i`.
    term1_num: f64,
    /// `sum_i weight_i * log Z_i`.
    term2_num: f64,
    value: f64,
    floor_events: usize,
}

impl BoersCache {
    pub fn new(action: ActionId, observation: Observation) -> Self {
        Self {
            action,
            observation,
            c: Vec::new(),
            z: Vec::new(),
            prior_weight_sum: 0.0,
            post_weight_sum: 0.0,
            term1_num: 0.0,
            term2_num: 0.0,
            value: 0.0,
            floor_events: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn action(&self) -> ActionId {
        self.action
    }

    pub fn observation(&self) -> Observation {
        self.observation
    }

    pub fn floor_events(&self) -> usize {
        self.floor_events
    }

    /// Cached `c_i` values.
    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Fold the insertion just applied to `belief` into the cache and return
    /// the updated entropy. O(N) in the number of particles.
    pub fn update(
        &mut self,
        belief: &ParticleBelief,
        ins: &Insertion,
        problem: &dyn Problem,
    ) -> Result<f64> {
        let cached = self.c.len();
        let expected = if ins.merged { cached } else { cached + 1 };
        if belief.len() != expected || ins.index >= belief.len() {
            return Err(Error::CacheDesync {
                cache: cached,
                belief: belief.len(),
            });
        }
        let particles = belief.particles();
        let a = self.action;
        let k = ins.index;
        let source = particles[k].prior_state;

        let old_prior = self.prior_weight_sum;
        let new_prior = old_prior + ins.prior_weight_delta;
        let scale = old_prior / new_prior;
        let add = ins.prior_weight_delta / new_prior;
        for (c, p) in self.c.iter_mut().zip(particles) {
            *c = scale * *c + problem.transition_density(&p.state, &source, a) * add;
        }

        if !ins.merged {
            let s_new = particles[k].state;
            let z = floored(
                problem.observation_density(&self.observation, a, &s_new),
                &mut self.floor_events,
            );
            self.z.push(z);
            let c_new: f64 = particles
                .iter()
                .map(|q| problem.transition_density(&s_new, &q.prior_state, a) * q.prior_weight)
                .sum::<f64>()
                / new_prior;
            self.c.push(c_new);
        }

        let z_k = self.z[k];
        self.prior_weight_sum = new_prior;
        self.post_weight_sum += ins.weight_delta;
        self.term1_num += ins.prior_weight_delta * z_k;
        self.term2_num += ins.weight_delta * z_k.ln();

        let mut log_c = 0.0;
        for (c, p) in self.c.iter().zip(particles) {
            log_c += p.weight * floored_ln(*c, &mut self.floor_events);
        }
        self.value = (self.term1_num / new_prior).ln()
            - self.term2_num / self.post_weight_sum
            - log_c / self.post_weight_sum;
        Ok(self.value)
    }
}
