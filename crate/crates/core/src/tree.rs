//! Belief-tree arena with Last-Value-Update statistics.
//!
//! Belief nodes and action nodes live in two flat vectors and refer to each
//! other by index. Values follow the last-value semantics
//!
//! ```text
//! V(h)  = (1/N(h))  [ Rollout(h) + sum_a N(ha) Q(ha) ]
//! Q(ha) = (1/N(ha)) sum_o N(hao) [ rho(hao) + gamma V(hao) ]
//! ```
//!
//! where every child contributes its *latest* estimate. After a visit changes
//! a single child, both sums are patched in O(1) by swapping that child's old
//! contribution for its new one ([`lvu_value_step`], [`lvu_action_value_step`]).
//! The `full_recompute_*` methods evaluate the sums directly and exist as
//! oracles.

use serde::Serialize;

use crate::belief::ParticleBelief;
use crate::model::{ActionId, Observation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BeliefId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ActionNodeId(pub usize);

#[derive(Clone, Debug)]
pub struct BeliefNode {
    pub depth: usize,
    pub parent: Option<ActionNodeId>,
    pub observation: Option<Observation>,
    /// `N(h)`; the creation visit (which ran the rollout) counts as one.
    pub visits: u64,
    pub value: f64,
    /// `Rollout(h)`, fixed when the node is created.
    pub rollout_value: f64,
    pub has_rollout: bool,
    /// Reached through a terminating action; never expanded.
    pub terminal: bool,
    pub children: Vec<ActionNodeId>,
    pub belief: ParticleBelief,
    /// `rho(hao)` for this node as a child of its action node.
    pub rho: f64,
    pub rho_prev: f64,
    pub v_prev: f64,
    /// Latest entropy estimate of this node's belief.
    pub entropy: f64,
}

impl BeliefNode {
    fn new(depth: usize, parent: Option<ActionNodeId>, observation: Option<Observation>) -> Self {
        Self {
            depth,
            parent,
            observation,
            visits: 0,
            value: 0.0,
            rollout_value: 0.0,
            has_rollout: false,
            terminal: false,
            children: Vec::new(),
            belief: ParticleBelief::new(),
            rho: 0.0,
            rho_prev: 0.0,
            v_prev: 0.0,
            entropy: 0.0,
        }
    }

    /// Number of action selections performed at this node so far.
    pub fn selections(&self) -> u64 {
        self.visits - u64::from(self.has_rollout)
    }
}

#[derive(Clone, Debug)]
pub struct ActionNode {
    pub parent: BeliefId,
    pub action: ActionId,
    pub visits: u64,
    pub q: f64,
    pub children: Vec<BeliefId>,
}

/// One O(1) value update:
/// `V + (1/N(h)) [N(ha) q_new - (N(ha) - 1) q_prev - V]`.
pub fn lvu_value_step(v: f64, n_h: u64, n_ha: u64, q_new: f64, q_prev: f64) -> f64 {
    let n_ha = n_ha as f64;
    v + (n_ha * q_new - (n_ha - 1.0) * q_prev - v) / n_h as f64
}

/// One O(1) action-value update with `x = rho + gamma V` for the visited child:
/// `Q + (1/N(ha)) [N(hao) x_new - (N(hao) - 1) x_prev - Q]`.
pub fn lvu_action_value_step(q: f64, n_ha: u64, n_hao: u64, x_new: f64, x_prev: f64) -> f64 {
    let n_hao = n_hao as f64;
    q + (n_hao * x_new - (n_hao - 1.0) * x_prev - q) / n_ha as f64
}

#[derive(Clone, Debug)]
pub struct BeliefTree {
    beliefs: Vec<BeliefNode>,
    actions: Vec<ActionNode>,
    discount: f64,
}

impl BeliefTree {
    pub const ROOT: BeliefId = BeliefId(0);

    pub fn new(root_belief: ParticleBelief, discount: f64) -> Self {
        let mut root = BeliefNode::new(0, None, None);
        root.belief = root_belief;
        Self {
            beliefs: vec![root],
            actions: Vec::new(),
            discount,
        }
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn root(&self) -> &BeliefNode {
        &self.beliefs[0]
    }

    pub fn belief(&self, id: BeliefId) -> &BeliefNode {
        &self.beliefs[id.0]
    }

    pub fn belief_mut(&mut self, id: BeliefId) -> &mut BeliefNode {
        &mut self.beliefs[id.0]
    }

    pub fn action(&self, id: ActionNodeId) -> &ActionNode {
        &self.actions[id.0]
    }

    pub fn action_mut(&mut self, id: ActionNodeId) -> &mut ActionNode {
        &mut self.actions[id.0]
    }

    pub fn belief_count(&self) -> usize {
        self.beliefs.len()
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn beliefs(&self) -> impl Iterator<Item = (BeliefId, &BeliefNode)> {
        self.beliefs.iter().enumerate().map(|(i, n)| (BeliefId(i), n))
    }

    pub fn actions(&self) -> impl Iterator<Item = (ActionNodeId, &ActionNode)> {
        self.actions
            .iter()
            .enumerate()
            .map(|(i, n)| (ActionNodeId(i), n))
    }

    pub fn add_action(&mut self, h: BeliefId, action: ActionId) -> ActionNodeId {
        let id = ActionNodeId(self.actions.len());
        self.actions.push(ActionNode {
            parent: h,
            action,
            visits: 0,
            q: 0.0,
            children: Vec::new(),
        });
        self.beliefs[h.0].children.push(id);
        id
    }

    /// Adds an unvisited observation child; the caller fills in its belief and
    /// calls [`BeliefTree::seed_leaf`] once its rollout is known.
    pub fn add_observation(&mut self, ha: ActionNodeId, observation: Observation) -> BeliefId {
        let id = BeliefId(self.beliefs.len());
        let depth = self.beliefs[self.actions[ha.0].parent.0].depth + 1;
        self.beliefs
            .push(BeliefNode::new(depth, Some(ha), Some(observation)));
        self.actions[ha.0].children.push(id);
        id
    }

    /// First visit of a new node: `N(h) = 1` and `V(h) = Rollout(h)`.
    pub fn seed_leaf(&mut self, h: BeliefId, rollout_value: f64) {
        let node = &mut self.beliefs[h.0];
        debug_assert_eq!(node.visits, 0, "a node is seeded exactly once");
        node.visits = 1;
        node.has_rollout = true;
        node.rollout_value = rollout_value;
        node.value = rollout_value;
    }

    /// Patch `V(h)` after child `ha` moved from `q_prev` to its current `Q`.
    /// `N(h)` and `N(ha)` must already include the visit.
    pub fn lvu_update_v(&mut self, h: BeliefId, ha: ActionNodeId, q_prev: f64) -> f64 {
        let (n_ha, q_new) = {
            let a = &self.actions[ha.0];
            (a.visits, a.q)
        };
        let node = &mut self.beliefs[h.0];
        node.value = lvu_value_step(node.value, node.visits, n_ha, q_new, q_prev);
        node.value
    }

    /// Patch `Q(ha)` after child `hao` moved from `(rho_prev, v_prev)` to its
    /// current `(rho, V)`. `N(ha)` and `N(hao)` must already include the visit.
    pub fn lvu_update_q(&mut self, ha: ActionNodeId, hao: BeliefId, rho_prev: f64, v_prev: f64) -> f64 {
        let gamma = self.discount;
        let child = &self.beliefs[hao.0];
        let x_new = child.rho + gamma * child.value;
        let x_prev = rho_prev + gamma * v_prev;
        let n_hao = child.visits;
        let a = &mut self.actions[ha.0];
        a.q = lvu_action_value_step(a.q, a.visits, n_hao, x_new, x_prev);
        a.q
    }

    /// `(1/N(h)) [Rollout(h) + sum_a N(ha) Q(ha)]`, or the rollout value for a
    /// node that has never been visited through its children.
    pub fn full_recompute_v(&self, h: BeliefId) -> f64 {
        let node = &self.beliefs[h.0];
        if node.visits == 0 {
            return 0.0;
        }
        let sum: f64 = node
            .children
            .iter()
            .map(|&ha| {
                let a = &self.actions[ha.0];
                a.visits as f64 * a.q
            })
            .sum();
        (node.rollout_value + sum) / node.visits as f64
    }

    /// `(1/N(ha)) sum_o N(hao) [rho(hao) + gamma V(hao)]`.
    pub fn full_recompute_q(&self, ha: ActionNodeId) -> f64 {
        let a = &self.actions[ha.0];
        if a.visits == 0 {
            return 0.0;
        }
        let sum: f64 = a
            .children
            .iter()
            .map(|&hao| {
                let c = &self.beliefs[hao.0];
                c.visits as f64 * (c.rho + self.discount * c.value)
            })
            .sum();
        sum / a.visits as f64
    }

    pub fn stats(&self) -> TreeStats {
        let max_depth = self.beliefs.iter().map(|n| n.depth).max().unwrap_or(0);
        let mut nodes_per_depth = vec![0; max_depth + 1];
        let mut particles_per_depth = vec![0; max_depth + 1];
        for n in &self.beliefs {
            nodes_per_depth[n.depth] += 1;
            particles_per_depth[n.depth] += n.belief.len();
        }
        TreeStats {
            belief_nodes: self.beliefs.len(),
            action_nodes: self.actions.len(),
            max_depth,
            nodes_per_depth,
            particles_per_depth,
        }
    }
}

/// Size summary of a tree, serialized for the visitation experiments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TreeStats {
    pub belief_nodes: usize,
    pub action_nodes: usize,
    pub max_depth: usize,
    pub nodes_per_depth: Vec<usize>,
    pub particles_per_depth: Vec<usize>,
}
