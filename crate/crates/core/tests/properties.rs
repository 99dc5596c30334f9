use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use rhopomcpow::belief::ParticleBelief;
use rhopomcpow::entropy::{boers_batch, BoersCache};
use rhopomcpow::envs::BeaconWorld;
use rhopomcpow::harness::episode::systematic_resample;
use rhopomcpow::harness::{pooled_stderr, stderr};
use rhopomcpow::model::{ActionId, Problem, SimRng, Vec2};
use rhopomcpow::planner::{plan, Algorithm, PlannerConfig, Root};
use rhopomcpow::select::{floor_power_increments, AugerParams, DpwParams, Level, ObservationChoice, Strategy};
use rhopomcpow::tree::BeliefTree;

fn shannon_reference(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .map(|w| w / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

fn ld_dpw() -> Strategy {
    Strategy::Dpw(DpwParams {
        c: 100.0,
        k_a: 1.0,
        alpha_a: 0.5,
        k_o: 4.0,
        alpha_o: 1.0 / 30.0,
        widen_actions: false,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shannon_cache_tracks_merged_weights(
        ops in prop::collection::vec((0usize..12, 1e-3f64..50.0), 1..200)
    ) {
        // a small state pool forces many bit-identical merges
        let mut belief = ParticleBelief::new();
        let mut weights = std::collections::BTreeMap::new();
        for (k, w) in ops {
            let s = Vec2::new(k as f64 * 0.37, -(k as f64));
            belief.insert(s, w, Vec2::ZERO, 1.0).unwrap();
            *weights.entry(k).or_insert(0.0) += w;
            let ws: Vec<f64> = weights.values().copied().collect();
            prop_assert_eq!(belief.len(), ws.len());
            let total: f64 = ws.iter().sum();
            prop_assert!((belief.weight_sum() - total).abs() <= 1e-9 * total);
            prop_assert!((belief.shannon_entropy() - shannon_reference(&ws)).abs() <= 1e-9);
        }
    }

    #[test]
    fn normalized_weights_sum_to_one(ws in prop::collection::vec(1e-6f64..1e3, 1..60)) {
        let mut belief = ParticleBelief::new();
        for (i, &w) in ws.iter().enumerate() {
            belief.insert(Vec2::new(i as f64, 0.0), w, Vec2::ZERO, 1.0).unwrap();
        }
        let sum: f64 = (0..belief.len()).map(|i| belief.normalized_weight(i).unwrap()).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn boers_cache_matches_batch(seed in any::<u64>(), n in 1usize..60, a in 0usize..8) {
        let world = BeaconWorld::light_dark();
        let mut rng = SimRng::seed_from_u64(seed);
        let a = ActionId(a);
        let parent = world.initial_belief(&mut rng, 40);
        let truth = world.transition_sample(&parent.sample_state(&mut rng).unwrap(), a, &mut rng);
        let o = world.observation_sample(a, &truth, &mut rng);
        let mut belief = ParticleBelief::new();
        let mut cache = BoersCache::new(a, o);
        for _ in 0..n {
            // occasionally replay an existing pair to exercise merges
            let (prior, next) = if !belief.is_empty() && rng.random_bool(0.15) {
                let p = belief.particles()[rng.random_range(0..belief.len())];
                (p.prior_state, p.state)
            } else {
                let prior = parent.sample_state(&mut rng).unwrap();
                (prior, world.transition_sample(&prior, a, &mut rng))
            };
            let w = world.observation_density(&o, a, &next).max(1e-300);
            let ins = belief.insert(next, w, prior, 1.0).unwrap();
            let value = cache.update(&belief, &ins, &world).unwrap();
            let batch = boers_batch(&belief, a, &o, &world).unwrap().value;
            prop_assert!((value - batch).abs() <= 1e-8 * batch.abs().max(1.0), "{} vs {}", value, batch);
        }
    }

    #[test]
    fn lvu_patches_equal_recomputation(seed in any::<u64>(), updates in 1usize..300) {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut tree = BeliefTree::new(ParticleBelief::new(), 0.9);
        tree.seed_leaf(BeliefTree::ROOT, rng.random_range(-5.0..5.0));
        for _ in 0..updates {
            let mut path = Vec::new();
            let mut h = BeliefTree::ROOT;
            loop {
                let n = tree.belief(h).children.len();
                let ha = if n == 0 || (n < 3 && rng.random_bool(0.4)) {
                    tree.add_action(h, ActionId(n))
                } else {
                    tree.belief(h).children[rng.random_range(0..n)]
                };
                let m = tree.action(ha).children.len();
                let (hao, fresh) = if m == 0 || (m < 3 && rng.random_bool(0.4)) {
                    (tree.add_observation(ha, Vec2::ZERO), true)
                } else {
                    (tree.action(ha).children[rng.random_range(0..m)], false)
                };
                path.push((h, ha, tree.action(ha).q, hao, tree.belief(hao).rho, tree.belief(hao).value));
                tree.belief_mut(hao).rho = rng.random_range(-3.0..3.0);
                if fresh {
                    tree.seed_leaf(hao, rng.random_range(-10.0..10.0));
                    break;
                }
                h = hao;
            }
            for &(h, ha, q_prev, hao, rho_prev, v_prev) in path.iter().rev() {
                tree.action_mut(ha).visits += 1;
                tree.lvu_update_q(ha, hao, rho_prev, v_prev);
                tree.belief_mut(h).visits += 1;
                tree.lvu_update_v(h, ha, q_prev);
            }
        }
        for (id, node) in tree.beliefs() {
            prop_assert!((node.value - tree.full_recompute_v(id)).abs() <= 1e-9);
        }
        for (id, a) in tree.actions() {
            prop_assert!((a.q - tree.full_recompute_q(id)).abs() <= 1e-9);
        }
    }

    #[test]
    fn expansions_count_the_floored_power(n in 1u64..5_000, k in 1u32..5) {
        let alpha = 1.0 / (k as f64 + 1.0);
        let count = (1..=n).filter(|&m| floor_power_increments(m, alpha)).count() as u64;
        // floor(n^(1/(k+1))) in integer arithmetic
        let expected = (1..=n).take_while(|j| j.pow(k + 1) <= n).count() as u64;
        prop_assert_eq!(count, expected);
    }

    #[test]
    fn observation_widening_respects_the_cap(seed in any::<u64>(), steps in 1u64..2_000) {
        let params = DpwParams { c: 1.0, k_a: 1.0, alpha_a: 0.5, k_o: 3.0, alpha_o: 0.25, widen_actions: false };
        let mut rng = SimRng::seed_from_u64(seed);
        let mut visits: Vec<u64> = Vec::new();
        for n in 0..steps {
            match params.select_observation(n, &visits, &mut rng) {
                ObservationChoice::Sample => visits.push(1),
                ObservationChoice::Child(i) => visits[i] += 1,
            }
            let cap = params.k_o * (n as f64).powf(params.alpha_o);
            prop_assert!(visits.len() as f64 <= cap.max(0.0) + 1.0);
        }
        prop_assert_eq!(visits.iter().sum::<u64>(), steps);
    }

    #[test]
    fn bounds_are_monotone_in_t(t in 1u64..1_000_000, dt in 1u64..1_000_000) {
        let p = AugerParams::default();
        for level in [Level::Belief(0), Level::Action(1), Level::Belief(1), Level::Action(2), Level::Belief(2)] {
            prop_assert!(p.bound(level, (t + dt) as f64) >= p.bound(level, t as f64));
        }
    }

    #[test]
    fn systematic_resample_draws_existing_states(seed in any::<u64>(), n in 1usize..200, m in 1usize..50) {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut belief = ParticleBelief::new();
        for i in 0..m {
            belief.insert(Vec2::new(i as f64, 1.0), rng.random_range(0.01..5.0), Vec2::ZERO, 1.0).unwrap();
        }
        let drawn = systematic_resample(&belief, n, &mut rng);
        prop_assert_eq!(drawn.len(), n);
        for s in drawn {
            prop_assert!(belief.particles().iter().any(|p| p.state == s));
        }
    }

    #[test]
    fn pooled_stderr_is_symmetric(a in prop::collection::vec(-100f64..100.0, 2..40), b in prop::collection::vec(-100f64..100.0, 2..40)) {
        let p = pooled_stderr(&a, &b);
        prop_assert!((p - pooled_stderr(&b, &a)).abs() <= 1e-12);
        prop_assert!(p >= stderr(&a) && p >= stderr(&b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn planning_is_a_function_of_the_seed(seed in any::<u64>(), iterations in 1u64..150, alg in 0usize..3) {
        let world = BeaconWorld::light_dark();
        let root = Root {
            belief: world.initial_belief(&mut SimRng::seed_from_u64(seed ^ 1), 30),
            entropy: world.initial_distribution().entropy(),
        };
        let algorithm = [Algorithm::RhoPomcpow, Algorithm::Pomcpow, Algorithm::PftDpw][alg];
        let mut config = PlannerConfig::new(algorithm, ld_dpw(), 6, iterations);
        config.pft_particles = 10;
        let a = plan(&config, &root, &world, &mut SimRng::seed_from_u64(seed)).unwrap();
        let b = plan(&config, &root, &world, &mut SimRng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a.digest, b.digest);
        prop_assert_eq!(a.action, b.action);
        prop_assert_eq!(a.iterations, iterations);
        prop_assert!(a.action.0 < world.num_actions());
        let root_visits: u64 = a.root_actions.iter().map(|r| r.visits).sum();
        prop_assert_eq!(root_visits, iterations);
    }

    #[test]
    fn incremental_and_scratch_rewards_grow_one_tree(seed in any::<u64>(), iterations in 1u64..200) {
        let world = BeaconWorld::light_dark();
        let root = Root {
            belief: world.initial_belief(&mut SimRng::seed_from_u64(seed ^ 2), 30),
            entropy: world.initial_distribution().entropy(),
        };
        let mut config = PlannerConfig::new(Algorithm::RhoPomcpow, ld_dpw(), 6, iterations);
        let a = plan(&config, &root, &world, &mut SimRng::seed_from_u64(seed)).unwrap();
        config.incremental_rewards = false;
        let b = plan(&config, &root, &world, &mut SimRng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a.digest, b.digest);
        prop_assert_eq!(a.tree, b.tree);
    }
}
