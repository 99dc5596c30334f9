use crate::belief::floor_weight;
use crate::entropy::{boers_batch, BoersCache};
use crate::error::Result;
use crate::model::{ActionId, Observation, Problem, SimRng, State};
use crate::tree::{ActionNodeId, BeliefId, BeliefTree};

use super::{
    choose_action, choose_observation, finish_result, rollout, trace_record, Branch, Budget, Digest, PlanResult,
    PlannerConfig, Root, TraceRecord,
};

/// Incremental reward state of one observation node.
#[derive(Clone, Debug)]
pub struct NodeReward {
    pub boers: BoersCache,
    /// `sum_i w_i R(s_i, a, s'_i)` over the node's particle pairs.
    pub state_sum: f64,
    /// Parent entropy used the last time `rho` was refreshed.
    pub parent_entropy: f64,
}

/// A ρPOMCPOW search tree that can be grown one iteration at a time.
pub struct RhoSearch<'a> {
    config: &'a PlannerConfig,
    problem: &'a dyn Problem,
    tree: BeliefTree,
    rewards: Vec<Option<NodeReward>>,
    digest: Digest,
    iterations: u64,
    reward_evaluations: u64,
    depth_reached: usize,
    timings: Vec<f64>,
    trace: Vec<TraceRecord>,
}

impl<'a> RhoSearch<'a> {
    pub fn new(config: &'a PlannerConfig, root: &Root, problem: &'a dyn Problem) -> Self {
        let mut tree = BeliefTree::new(root.belief.clone(), problem.discount());
        tree.belief_mut(BeliefTree::ROOT).entropy = root.entropy;
        Self {
            config,
            problem,
            tree,
            rewards: vec![None],
            digest: Digest::default(),
            iterations: 0,
            reward_evaluations: 0,
            depth_reached: 0,
            timings: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn tree(&self) -> &BeliefTree {
        &self.tree
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn node_reward(&self, id: BeliefId) -> Option<&NodeReward> {
        self.rewards.get(id.0).and_then(Option::as_ref)
    }

    /// Run iterations until the configured budget is spent.
    pub fn run(&mut self, rng: &mut SimRng) -> Result<()> {
        let mut budget = Budget::new(self.config);
        while budget.next() {
            self.iterate(rng)?;
            if self.config.record_timings {
                self.timings.push(budget.elapsed());
            }
        }
        debug_assert_eq!(budget.done(), self.iterations);
        Ok(())
    }

    /// One simulation from a state drawn from the root belief.
    pub fn iterate(&mut self, rng: &mut SimRng) -> Result<()> {
        let s = self.tree.root().belief.sample_state(rng)?;
        self.depth_reached = 0;
        self.simulate_v(s, BeliefTree::ROOT, self.config.max_depth, rng)?;
        self.iterations += 1;
        if self.config.trace {
            self.trace
                .push(trace_record(&self.tree, self.iterations, self.depth_reached));
        }
        Ok(())
    }

    pub fn finish(self, rng: &mut SimRng) -> PlanResult {
        finish_result(
            &self.tree,
            self.problem,
            &self.digest,
            self.iterations,
            self.reward_evaluations,
            self.timings,
            self.trace,
            rng,
        )
    }

    fn simulate_v(&mut self, s: State, h: BeliefId, d: usize, rng: &mut SimRng) -> Result<f64> {
        let depth = self.tree.belief(h).depth;
        self.depth_reached = self.depth_reached.max(depth);
        if d == 0 || self.tree.belief(h).terminal {
            // V(h) stays at Rollout(h) / N(h) = 0
            let node = self.tree.belief_mut(h);
            node.visits += 1;
            return Ok(node.value);
        }
        let ha = choose_action(
            &mut self.tree,
            &self.config.strategy,
            self.problem.num_actions(),
            h,
            &mut self.digest,
            rng,
        );
        let q_prev = self.tree.action(ha).q;
        self.simulate_q(s, ha, d, rng)?;
        self.tree.belief_mut(h).visits += 1;
        Ok(self.tree.lvu_update_v(h, ha, q_prev))
    }

    fn simulate_q(&mut self, s: State, ha: ActionNodeId, d: usize, rng: &mut SimRng) -> Result<f64> {
        let (a, h) = {
            let node = self.tree.action(ha);
            (node.action, node.parent)
        };
        let s_next = self.problem.transition_sample(&s, a, rng);

        let problem = self.problem;
        let branch = choose_observation(&mut self.tree, &self.config.strategy, ha, &mut self.digest, rng, |rng| {
            problem.observation_sample(a, &s_next, rng)
        });
        let (hao, o, new) = match branch {
            Branch::New(id, o) => {
                debug_assert_eq!(id.0, self.rewards.len());
                self.rewards.push(Some(NodeReward {
                    boers: BoersCache::new(a, o),
                    state_sum: 0.0,
                    parent_entropy: f64::NAN,
                }));
                (id, o, true)
            }
            Branch::Existing(id, o) => (id, o, false),
        };

        self.insert_pair(hao, s, s_next, a, o)?;
        if new {
            for _ in 1..self.config.init_particles {
                let prior = self.tree.belief(h).belief.sample_state(rng)?;
                let next = self.problem.transition_sample(&prior, a, rng);
                self.insert_pair(hao, prior, next, a, o)?;
            }
        }

        let (rho_prev, v_prev) = {
            let node = self.tree.belief(hao);
            (node.rho, node.value)
        };
        let h_parent = self.tree.belief(h).entropy;
        self.update_reward(hao, a, h_parent)?;

        if new {
            let terminal = self.problem.is_terminal_action(a);
            let v = if terminal || d == 1 {
                0.0
            } else {
                rollout(self.problem, self.config.rollout, s_next, d - 1, rng)
            };
            self.tree.belief_mut(hao).terminal = terminal;
            self.tree.seed_leaf(hao, v);
        } else {
            let belief = &self.tree.belief(hao).belief;
            let s_resampled = belief.particles()[belief.sample_index(rng)?].state;
            self.simulate_v(s_resampled, hao, d - 1, rng)?;
        }

        self.tree.action_mut(ha).visits += 1;
        Ok(self.tree.lvu_update_q(ha, hao, rho_prev, v_prev))
    }

    /// Append `s_next` (generated from `prior`) to `B(hao)` with weight
    /// `Z(o | a, s_next)`.
    fn insert_pair(&mut self, hao: BeliefId, prior: State, s_next: State, a: ActionId, o: Observation) -> Result<()> {
        let w = floor_weight(self.problem.observation_density(&o, a, &s_next));
        let node = self.tree.belief_mut(hao);
        let ins = node.belief.insert(s_next, w, prior, 1.0)?;
        if self.config.incremental_rewards {
            let reward = self.rewards[hao.0].as_mut().expect("observation node has reward state");
            reward.boers.update(&node.belief, &ins, self.problem)?;
            let p = &node.belief.particles()[ins.index];
            reward.state_sum += ins.weight_delta * self.problem.state_reward(&p.prior_state, a, &p.state);
        }
        Ok(())
    }

    /// `rho = E[R_s] + lambda (H(parent) - H(node))`.
    fn update_reward(&mut self, hao: BeliefId, a: ActionId, h_parent: f64) -> Result<f64> {
        let node = self.tree.belief(hao);
        let (entropy, state_term) = if self.config.incremental_rewards {
            let reward = self.rewards[hao.0].as_ref().expect("observation node has reward state");
            (reward.boers.value(), reward.state_sum / node.belief.weight_sum())
        } else {
            let o = node.observation.expect("observation nodes carry their observation");
            let est = boers_batch(&node.belief, a, &o, self.problem)?;
            (est.value, node.belief.expected_state_reward(self.problem, a)?)
        };
        self.reward_evaluations += 1;
        if let Some(reward) = self.rewards[hao.0].as_mut() {
            reward.parent_entropy = h_parent;
        }
        let rho = self.problem.shaped_reward(state_term, h_parent, entropy).total;
        let node = self.tree.belief_mut(hao);
        node.entropy = entropy;
        node.rho = rho;
        Ok(rho)
    }
}
