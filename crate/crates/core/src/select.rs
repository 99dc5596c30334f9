//! Action and observation selection strategies.
//!
//! Two families are provided. Double progressive widening ([`DpwParams`])
//! caps the number of children at `k * n^alpha` and picks among them by UCB.
//! The Auger-style strategy ([`AugerParams`]) expands whenever `floor(n^alpha)`
//! increments, picks actions by `Q + sqrt(n^e(d) / N(ha))` and observations by
//! least visits. It is consistent with
//!
//! ```text
//! f(i) = i^(1 / (alpha_a (1 - alpha_a)))     F(n) = n^(e(d) (1 - alpha_a)) / 4
//! g(i) = ceil((i + 1)^(1 / alpha_o))         G(n) = n / floor(n)^alpha_o - 1
//! ```
//!
//! meaning a parent visited at least `f(i)` times gives its `i`-th action child
//! at least `F(n)` visits (and likewise `g`, `G` for observations). Composing
//! these along a path yields a deterministic lower bound `K_tau(t)` on the
//! visits of a depth-`tau` node after `t` root iterations; see
//! [`AugerParams::bound`] and [`AugerParams::eligibility_threshold`].
//!
//! Counts passed to the strategies are *selection* counts: the number of times
//! the strategy has already run at the node. A belief node's creation visit
//! runs a rollout and is not a selection. All ties go to the lowest index;
//! scores within [`TIE_TOLERANCE`] (relative) of each other are ties.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SimRng;

/// Decision at an action node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionChoice {
    /// Add a new action child.
    Expand,
    /// Descend into the existing child at this position.
    Child(usize),
}

/// Decision at an observation branch point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservationChoice {
    /// Generate a fresh observation and add a new child.
    Sample,
    Child(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpwParams {
    /// UCB exploration constant.
    pub c: f64,
    #[serde(default = "one")]
    pub k_a: f64,
    #[serde(default = "half")]
    pub alpha_a: f64,
    pub k_o: f64,
    pub alpha_o: f64,
    /// Widen over actions; when off, every action is tried once (lowest index
    /// first) before UCB takes over.
    #[serde(default)]
    pub widen_actions: bool,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl DpwParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !(unit(self.alpha_a) && unit(self.alpha_o)) {
            return Err(Error::Config(format!(
                "widening exponents must lie in (0, 1), got alpha_a={} alpha_o={}",
                self.alpha_a, self.alpha_o
            )));
        }
        if !(self.k_a > 0.0 && self.k_o > 0.0 && self.c >= 0.0) {
            return Err(Error::Config("widening constants must be positive".into()));
        }
        Ok(())
    }

    /// `selections` is how many times this node has already selected.
    pub fn select_action<I>(&self, selections: u64, children: I, n_children: usize, can_expand: bool) -> ActionChoice
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        if can_expand {
            let cap = self.k_a * (selections as f64).powf(self.alpha_a);
            if !self.widen_actions || n_children as f64 <= cap {
                return ActionChoice::Expand;
            }
        }
        let log_n = ((selections + 1) as f64).ln();
        argmax(children, |n, q| {
            if n == 0 {
                f64::INFINITY
            } else {
                q + self.c * (log_n / n as f64).sqrt()
            }
        })
    }

    /// POMCPOW observation widening: sample while `|C| <= k_o N^alpha_o`,
    /// otherwise revisit a child with probability proportional to its visits.
    pub fn select_observation(&self, selections: u64, child_visits: &[u64], rng: &mut SimRng) -> ObservationChoice {
        let cap = self.k_o * (selections as f64).powf(self.alpha_o);
        if child_visits.is_empty() || child_visits.len() as f64 <= cap {
            return ObservationChoice::Sample;
        }
        let total: u64 = child_visits.iter().sum();
        if total == 0 {
            return ObservationChoice::Child(0);
        }
        let mut r = rng.random_range(0..total);
        for (i, &n) in child_visits.iter().enumerate() {
            if r < n {
                return ObservationChoice::Child(i);
            }
            r -= n;
        }
        ObservationChoice::Child(child_visits.len() - 1)
    }
}

/// `floor(n^alpha) > floor((n - 1)^alpha)`, for `n >= 1`.
pub fn floor_power_increments(n: u64, alpha: f64) -> bool {
    debug_assert!(n >= 1);
    (n as f64).powf(alpha).floor() > ((n - 1) as f64).powf(alpha).floor()
}

/// Relative gap below which two scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `score` is better than `best` by more than rounding noise.
pub fn beats(score: f64, best: f64) -> bool {
    if !best.is_finite() {
        return score > best;
    }
    score > best + TIE_TOLERANCE * best.abs().max(1.0)
}

fn argmax<I, S>(children: I, score: S) -> ActionChoice
where
    I: IntoIterator<Item = (u64, f64)>,
    S: Fn(u64, f64) -> f64,
{
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, (n, q)) in children.into_iter().enumerate() {
        let s = score(n, q);
        if i == 0 || beats(s, best_score) {
            best = i;
            best_score = s;
        }
    }
    ActionChoice::Child(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugerParams {
    pub alpha_a: f64,
    pub alpha_o: f64,
    /// Exploration exponent `e(d)` per depth; depths past the end reuse the
    /// last entry.
    #[serde(default = "default_e")]
    pub e: Vec<f64>,
}

fn default_e() -> Vec<f64> {
    vec![0.5]
}

impl Default for AugerParams {
    fn default() -> Self {
        Self {
            alpha_a: 0.5,
            alpha_o: 0.5,
            e: default_e(),
        }
    }
}

impl AugerParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !(unit(self.alpha_a) && unit(self.alpha_o)) {
            return Err(Error::Config(format!(
                "widening exponents must lie in (0, 1), got alpha_a={} alpha_o={}",
                self.alpha_a, self.alpha_o
            )));
        }
        if self.e.is_empty() || self.e.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("e(d) must be positive at every depth".into()));
        }
        Ok(())
    }

    pub fn e_at(&self, depth: usize) -> f64 {
        self.e[depth.min(self.e.len() - 1)]
    }

    pub fn select_action<I>(&self, selections: u64, depth: usize, children: I, can_expand: bool) -> ActionChoice
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        let n = selections + 1;
        if can_expand && floor_power_increments(n, self.alpha_a) {
            return ActionChoice::Expand;
        }
        let explore = (n as f64).powf(self.e_at(depth));
        argmax(children, |n_ha, q| {
            if n_ha == 0 {
                f64::INFINITY
            } else {
                q + (explore / n_ha as f64).sqrt()
            }
        })
    }

    pub fn select_observation(&self, selections: u64, child_visits: &[u64]) -> ObservationChoice {
        if child_visits.is_empty() || floor_power_increments(selections + 1, self.alpha_o) {
            return ObservationChoice::Sample;
        }
        let mut best = 0;
        for (i, &n) in child_visits.iter().enumerate() {
            if n < child_visits[best] {
                best = i;
            }
        }
        ObservationChoice::Child(best)
    }

    /// `f(i)`, the parent count after which action child `i` (1-based) is
    /// guaranteed `F` visits.
    pub fn f(&self, i: usize) -> f64 {
        (i as f64).powf(1.0 / (self.alpha_a * (1.0 - self.alpha_a)))
    }

    /// `g(i)` for observation child `i` (1-based).
    pub fn g(&self, i: usize) -> f64 {
        ((i + 1) as f64).powf(1.0 / self.alpha_o).ceil()
    }

    /// `F(n)` for an action chosen at depth `depth`.
    pub fn big_f(&self, n: f64, depth: usize) -> f64 {
        0.25 * n.max(0.0).powf(self.e_at(depth) * (1.0 - self.alpha_a))
    }

    /// `G(n)`; zero below one, where `floor(n)` vanishes.
    pub fn big_g(&self, n: f64) -> f64 {
        if n < 1.0 {
            return 0.0;
        }
        n / n.floor().powf(self.alpha_o) - 1.0
    }

    /// `K` at `level` after `t` root iterations: `K_0(t) = t`,
    /// `K-_{tau+1} = F(K_tau)`, `K_{tau+1} = G(ceil(K-_{tau+1}))`.
    ///
    /// `G` is applied to the ceiling because visit counts are integers and `G`
    /// is only monotone on the integers.
    pub fn bound(&self, level: Level, t: f64) -> f64 {
        let (tau, action) = match level {
            Level::Belief(tau) => (tau, false),
            Level::Action(tau) => {
                assert!(tau >= 1, "action prefixes start at depth 1");
                (tau, true)
            }
        };
        let mut k = t;
        for d in 0..tau {
            k = self.big_f(k, d);
            if action && d + 1 == tau {
                break;
            }
            k = self.big_g(k.ceil());
        }
        k
    }

    /// Smallest integer `t >= 1` with `K(t) >= y`, or `None` if no such `t`
    /// exists below `2^62`.
    pub fn inverse(&self, level: Level, y: f64) -> Option<u64> {
        if self.bound(level, 1.0) >= y {
            return Some(1);
        }
        let mut hi: u64 = 2;
        while self.bound(level, hi as f64) < y {
            if hi >= 1 << 62 {
                return None;
            }
            hi *= 2;
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.bound(level, mid as f64) >= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Iteration count past which the bound holds for the node reached by
    /// the 1-based child indices `i_0, j_1, i_1, j_2, ...`. An odd-length
    /// path ends at an action node. Returns `None` when some `K` cannot be
    /// inverted on the searched range.
    pub fn eligibility_threshold(&self, indices: &[usize]) -> Option<u64> {
        let mut k = 0u64;
        for (step, &idx) in indices.iter().enumerate() {
            let tau = step / 2;
            let needed = if step % 2 == 0 {
                self.inverse(Level::Belief(tau), self.f(idx))?
            } else {
                self.inverse(Level::Action(tau + 1), self.g(idx))?
            };
            k = k.max(needed);
        }
        Some(k.max(1))
    }

    /// Consistency floor for an action child: `Some(F(n))` when the parent
    /// has made `n >= f(i)` selections, `None` when it is not yet eligible.
    pub fn action_child_floor(&self, n_parent: u64, i: usize, depth: usize) -> Option<f64> {
        (n_parent as f64 >= self.f(i)).then(|| self.big_f(n_parent as f64, depth))
    }

    /// Consistency floor for an observation child.
    pub fn observation_child_floor(&self, n_parent: u64, j: usize) -> Option<f64> {
        (n_parent as f64 >= self.g(j)).then(|| self.big_g(n_parent as f64))
    }
}

/// Position in the alternating composition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    /// Belief node at depth `tau`.
    Belief(usize),
    /// Action node below a depth `tau - 1` belief node.
    Action(usize),
}

/// Either strategy family, as chosen in a planner configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Dpw(DpwParams),
    Auger(AugerParams),
}

impl Strategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            Strategy::Dpw(p) => p.validate(),
            Strategy::Auger(p) => p.validate(),
        }
    }

    pub fn select_action<I>(
        &self,
        selections: u64,
        depth: usize,
        children: I,
        n_children: usize,
        can_expand: bool,
    ) -> ActionChoice
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        match self {
            Strategy::Dpw(p) => p.select_action(selections, children, n_children, can_expand),
            Strategy::Auger(p) => p.select_action(selections, depth, children, can_expand),
        }
    }

    pub fn select_observation(&self, selections: u64, child_visits: &[u64], rng: &mut SimRng) -> ObservationChoice {
        match self {
            Strategy::Dpw(p) => p.select_observation(selections, child_visits, rng),
            Strategy::Auger(p) => p.select_observation(selections, child_visits),
        }
    }

    /// Expansion picks a random unexpanded action; without action widening
    /// actions are opened in index order.
    pub fn expands_in_order(&self) -> bool {
        matches!(self, Strategy::Dpw(p) if !p.widen_actions)
    }
}
