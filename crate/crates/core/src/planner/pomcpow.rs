use crate::belief::floor_weight;
use crate::error::Result;
use crate::model::{Problem, SimRng, State};
use crate::tree::{ActionNodeId, BeliefId, BeliefTree};

use super::{
    choose_action, choose_observation, finish_result, rollout, trace_record, Backup, Branch, Budget, Digest,
    PlanResult, PlannerConfig, Root,
};

struct Pomcpow<'a> {
    config: &'a PlannerConfig,
    problem: &'a dyn Problem,
    tree: BeliefTree,
    digest: Digest,
    depth_reached: usize,
    /// Running `sum_i w_i R(s_i, a, s'_i)` per belief node, for last-value
    /// backups.
    state_sums: Vec<f64>,
}

pub(super) fn plan(config: &PlannerConfig, root: &Root, problem: &dyn Problem, rng: &mut SimRng) -> Result<PlanResult> {
    let mut search = Pomcpow {
        config,
        problem,
        tree: BeliefTree::new(root.belief.clone(), problem.discount()),
        digest: Digest::default(),
        depth_reached: 0,
        state_sums: vec![0.0],
    };
    let mut budget = Budget::new(config);
    let mut timings = Vec::new();
    let mut trace = Vec::new();
    while budget.next() {
        let s = search.tree.root().belief.sample_state(rng)?;
        search.depth_reached = 0;
        search.simulate(s, BeliefTree::ROOT, config.max_depth, rng)?;
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
        0,
        timings,
        trace,
        rng,
    ))
}

impl Pomcpow<'_> {
    /// Returns the sampled discounted return (running average) or `V(h)`
    /// (last value).
    fn simulate(&mut self, s: State, h: BeliefId, d: usize, rng: &mut SimRng) -> Result<f64> {
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
        let total = self.simulate_action(s, ha, d, rng)?;
        self.tree.belief_mut(h).visits += 1;
        Ok(match self.config.backup {
            Backup::RunningAverage => total,
            Backup::LastValue => {
                let v = self.tree.full_recompute_v(h);
                self.tree.belief_mut(h).value = v;
                v
            }
        })
    }

    fn simulate_action(&mut self, s: State, ha: ActionNodeId, d: usize, rng: &mut SimRng) -> Result<f64> {
        let a = self.tree.action(ha).action;
        let gamma = self.problem.discount();
        let s_next = self.problem.transition_sample(&s, a, rng);
        let problem = self.problem;
        let branch = choose_observation(&mut self.tree, &self.config.strategy, ha, &mut self.digest, rng, |rng| {
            problem.observation_sample(a, &s_next, rng)
        });
        let (hao, o, new) = match branch {
            Branch::New(id, o) => (id, o, true),
            Branch::Existing(id, o) => (id, o, false),
        };
        let w = floor_weight(self.problem.observation_density(&o, a, &s_next));
        let ins = self.tree.belief_mut(hao).belief.insert(s_next, w, s, 1.0)?;
        if self.config.backup == Backup::LastValue {
            if new {
                debug_assert_eq!(hao.0, self.state_sums.len());
                self.state_sums.push(0.0);
            }
            let p = &self.tree.belief(hao).belief.particles()[ins.index];
            self.state_sums[hao.0] += ins.weight_delta * self.problem.state_reward(&p.prior_state, a, &p.state);
        }

        let total = if new {
            let terminal = self.problem.is_terminal_action(a);
            let v = if terminal || d == 1 {
                0.0
            } else {
                rollout(self.problem, self.config.rollout, s_next, d - 1, rng)
            };
            self.tree.belief_mut(hao).terminal = terminal;
            self.tree.seed_leaf(hao, v);
            self.problem.state_reward(&s, a, &s_next) + gamma * v
        } else {
            let belief = &self.tree.belief(hao).belief;
            let s_resampled = belief.particles()[belief.sample_index(rng)?].state;
            let r = self.problem.state_reward(&s, a, &s_resampled);
            r + gamma * self.simulate(s_resampled, hao, d - 1, rng)?
        };

        let node = self.tree.action_mut(ha);
        node.visits += 1;
        match self.config.backup {
            Backup::RunningAverage => {
                node.q += (total - node.q) / node.visits as f64;
                Ok(total)
            }
            Backup::LastValue => {
                let rho = self.state_sums[hao.0] / self.tree.belief(hao).belief.weight_sum();
                self.tree.belief_mut(hao).rho = rho;
                let q = self.tree.full_recompute_q(ha);
                self.tree.action_mut(ha).q = q;
                Ok(q)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::belief::ParticleBelief;
    use crate::envs::toy::Bandit;
    use crate::envs::BeaconWorld;
    use crate::model::{ActionId, SimRng, Vec2};
    use crate::planner::{plan, Algorithm, Backup, PlannerConfig, RhoSearch, Root};
    use crate::select::{DpwParams, Strategy};
    use rand::SeedableRng;

    fn dpw(c: f64) -> Strategy {
        Strategy::Dpw(DpwParams {
            c,
            k_a: 1.0,
            alpha_a: 0.5,
            k_o: 4.0,
            alpha_o: 1.0 / 30.0,
            widen_actions: false,
        })
    }

    #[test]
    fn single_action_and_bandit() {
        let root = Root {
            belief: ParticleBelief::from_states([Vec2::ZERO]),
            entropy: 0.0,
        };
        let one = Bandit::new(vec![5.0]);
        let config = PlannerConfig::new(Algorithm::Pomcpow, dpw(1.0), 2, 10);
        let mut rng = SimRng::seed_from_u64(0);
        assert_eq!(plan(&config, &root, &one, &mut rng).unwrap().action, ActionId(0));
        let arms = Bandit::new(vec![0.0, 0.0, 1.0, 0.0]);
        let config = PlannerConfig::new(Algorithm::Pomcpow, dpw(1.0), 1, 100);
        assert_eq!(plan(&config, &root, &arms, &mut rng).unwrap().action, ActionId(2));
    }

    #[test]
    fn last_value_pomcpow_matches_unshaped_rho() {
        let world = BeaconWorld::light_dark().with_lambda(0.0);
        let mut rng = SimRng::seed_from_u64(1);
        let root = Root {
            belief: world.initial_belief(&mut rng, 100),
            entropy: world.initial_distribution().entropy(),
        };
        let mut config = PlannerConfig::new(Algorithm::Pomcpow, dpw(100.0), 6, 400);
        config.backup = Backup::LastValue;
        let reference = plan(&config, &root, &world, &mut SimRng::seed_from_u64(2)).unwrap();

        config.algorithm = Algorithm::RhoPomcpow;
        let mut search = RhoSearch::new(&config, &root, &world);
        search.run(&mut SimRng::seed_from_u64(2)).unwrap();
        let rho = search.finish(&mut SimRng::seed_from_u64(3));

        assert_eq!(reference.digest, rho.digest);
        assert_eq!(reference.tree, rho.tree);
        for (x, y) in reference.root_actions.iter().zip(&rho.root_actions) {
            assert_eq!(x.visits, y.visits);
            assert!((x.q - y.q).abs() <= 1e-9 * x.q.abs().max(1.0), "{} vs {}", x.q, y.q);
        }
    }
}
