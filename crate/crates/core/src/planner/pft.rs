use crate::belief::{floor_weight, ParticleBelief};
use crate::entropy::boers_batch;
use crate::error::Result;
use crate::model::{ActionId, Observation, Problem, SimRng};
use crate::tree::{ActionNodeId, BeliefId, BeliefTree};

use super::{
    choose_action, choose_observation, finish_result, rollout, trace_record, Branch, Budget, Digest, PlanResult,
    PlannerConfig, Root,
};

struct PftDpw<'a> {
    config: &'a PlannerConfig,
    problem: &'a dyn Problem,
    tree: BeliefTree,
    digest: Digest,
    reward_evaluations: u64,
    depth_reached: usize,
}

pub(super) fn plan(config: &PlannerConfig, root: &Root, problem: &dyn Problem, rng: &mut SimRng) -> Result<PlanResult> {
    let mut tree = BeliefTree::new(root.belief.clone(), problem.discount());
    tree.belief_mut(BeliefTree::ROOT).entropy = root.entropy;
    let mut search = PftDpw {
        config,
        problem,
        tree,
        digest: Digest::default(),
        reward_evaluations: 0,
        depth_reached: 0,
    };
    let mut budget = Budget::new(config);
    let mut timings = Vec::new();
    let mut trace = Vec::new();
    while budget.next() {
        search.depth_reached = 0;
        search.simulate(BeliefTree::ROOT, config.max_depth, rng)?;
        if config.record_timings {
            timings.push(budget.elapsed());
        }
        if config.trace {
            trace.push(trace_record(&search.tree, budget.done(), search.depth_reached));
        }
    }
    Ok(finish_result(
        &search.tree,
        problem,
        &search.digest,
        budget.done(),
        search.reward_evaluations,
        timings,
        trace,
        rng,
    ))
}

impl PftDpw<'_> {
    fn simulate(&mut self, h: BeliefId, d: usize, rng: &mut SimRng) -> Result<f64> {
        self.depth_reached = self.depth_reached.max(self.tree.belief(h).depth);
        if d == 0 || self.tree.belief(h).terminal {
            self.tree.belief_mut(h).visits += 1;
            return Ok(0.0);
        }
        let ha = choose_action(
            &mut self.tree,
            &self.config.strategy,
            self.problem.num_actions(),
            h,
            &mut self.digest,
            rng,
        );
        let total = self.simulate_action(h, ha, d, rng)?;
        self.tree.belief_mut(h).visits += 1;
        Ok(total)
    }

    fn simulate_action(&mut self, h: BeliefId, ha: ActionNodeId, d: usize, rng: &mut SimRng) -> Result<f64> {
        let a = self.tree.action(ha).action;
        let gamma = self.problem.discount();
        let s = self.tree.belief(h).belief.sample_state(rng)?;
        let s_next = self.problem.transition_sample(&s, a, rng);
        let problem = self.problem;
        let branch = choose_observation(&mut self.tree, &self.config.strategy, ha, &mut self.digest, rng, |rng| {
            problem.observation_sample(a, &s_next, rng)
        });
        let total = match branch {
            Branch::New(hao, o) => {
                let belief = self.filter(h, a, &o, rng)?;
                let (rho, entropy) = self.reward(h, a, &o, &belief)?;
                let terminal = self.problem.is_terminal_action(a);
                let v = if terminal || d == 1 {
                    0.0
                } else {
                    let start = belief.sample_state(rng)?;
                    rollout(self.problem, self.config.rollout, start, d - 1, rng)
                };
                let node = self.tree.belief_mut(hao);
                node.belief = belief;
                node.terminal = terminal;
                node.rho = rho;
                node.entropy = entropy;
                self.tree.seed_leaf(hao, v);
                rho + gamma * v
            }
            Branch::Existing(hao, _) => {
                let rho = self.tree.belief(hao).rho;
                rho + gamma * self.simulate(hao, d - 1, rng)?
            }
        };
        let node = self.tree.action_mut(ha);
        node.visits += 1;
        node.q += (total - node.q) / node.visits as f64;
        Ok(total)
    }

    /// Resample `m` priors from `B(h)`, propagate them through `a` and weight
    /// them by `Z(o | a, s')`.
    fn filter(&self, h: BeliefId, a: ActionId, o: &Observation, rng: &mut SimRng) -> Result<ParticleBelief> {
        let parent = &self.tree.belief(h).belief;
        let mut belief = ParticleBelief::new();
        for _ in 0..self.config.pft_particles {
            let prior = parent.sample_state(rng)?;
            let next = self.problem.transition_sample(&prior, a, rng);
            let w = floor_weight(self.problem.observation_density(o, a, &next));
            belief.insert(next, w, prior, 1.0)?;
        }
        Ok(belief)
    }

    /// Reward of a new node, evaluated once and stored in the node.
    fn reward(&mut self, h: BeliefId, a: ActionId, o: &Observation, belief: &ParticleBelief) -> Result<(f64, f64)> {
        self.reward_evaluations += 1;
        let h_parent = self.tree.belief(h).entropy;
        let state_term = belief.expected_state_reward(self.problem, a)?;
        let entropy = if self.problem.shaping_weight() == 0.0 {
            h_parent
        } else {
            boers_batch(belief, a, o, self.problem)?.value
        };
        let rho = self.problem.shaped_reward(state_term, h_parent, entropy).total;
        Ok((rho, entropy))
    }
}

#[cfg(test)]
mod tests {
    use crate::envs::toy::Bandit;
    use crate::envs::BeaconWorld;
    use crate::model::{ActionId, SimRng};
    use crate::planner::{plan, Algorithm, PlannerConfig, Root};
    use crate::select::{DpwParams, Strategy};
    use rand::SeedableRng;

    fn dpw() -> Strategy {
        Strategy::Dpw(DpwParams {
            c: 1.0,
            k_a: 1.0,
            alpha_a: 0.5,
            k_o: 2.0,
            alpha_o: 0.1,
            widen_actions: false,
        })
    }

    #[test]
    fn bandit_best_arm() {
        let p = Bandit::new(vec![0.2, 0.9, 0.1]);
        let root = Root {
            belief: crate::belief::ParticleBelief::from_states([crate::model::Vec2::ZERO]),
            entropy: 0.0,
        };
        let mut config = PlannerConfig::new(Algorithm::PftDpw, dpw(), 1, 200);
        config.pft_particles = 5;
        let out = plan(&config, &root, &p, &mut SimRng::seed_from_u64(0)).unwrap();
        assert_eq!(out.action, ActionId(1));
    }

    #[test]
    fn reward_is_evaluated_once_per_node() {
        let world = BeaconWorld::light_dark();
        let mut rng = SimRng::seed_from_u64(1);
        let root = Root {
            belief: world.initial_belief(&mut rng, 100),
            entropy: world.initial_distribution().entropy(),
        };
        let mut config = PlannerConfig::new(Algorithm::PftDpw, dpw(), 4, 300);
        config.pft_particles = 20;
        let out = plan(&config, &root, &world, &mut rng).unwrap();
        assert_eq!(out.reward_evaluations as usize, out.tree.belief_nodes - 1);
        assert!(out.tree.particles_per_depth[1..].iter().all(|&n| n > 0));
    }
}
