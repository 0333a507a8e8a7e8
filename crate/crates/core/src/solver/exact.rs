use std::collections::HashMap;

use crate::costs::{BeliefCost, StageCosts};
use crate::error::{Error, Result};
use crate::model::BeliefDynamics;
use crate::scalar::Scalar;

pub const DEFAULT_NODE_CAP: usize = 10_000_000;

/// Optimal discounted cost over `horizon` stages by full belief-tree expansion.
///
/// Uses exact Bayes updates, exact `ψ`, and exact observation probabilities.
/// Identical beliefs at equal depth are evaluated once; `node_cap` bounds the
/// number of distinct (belief, depth) nodes expanded.
pub fn solve_exact_finite_horizon<T: Scalar, M: BeliefDynamics<T>>(
    model: &M,
    costs: &StageCosts<T>,
    psi: &BeliefCost<T>,
    belief: &[T],
    horizon: usize,
    node_cap: usize,
) -> Result<T> {
    let mut tree = Tree::new(model, costs, psi, node_cap);
    tree.value(belief, horizon)
}

/// Exact `Q_H(b, u)` for every control: stage cost plus the discounted exact
/// `(H − 1)`-stage value of the successor beliefs.
pub fn exact_q_values<T: Scalar, M: BeliefDynamics<T>>(
    model: &M,
    costs: &StageCosts<T>,
    psi: &BeliefCost<T>,
    belief: &[T],
    horizon: usize,
    node_cap: usize,
) -> Result<Vec<T>> {
    let mut tree = Tree::new(model, costs, psi, node_cap);
    if horizon == 0 {
        return Ok(vec![T::zero(); model.n_controls()]);
    }
    tree.q_values(belief, horizon)
}

struct Tree<'a, T, M> {
    model: &'a M,
    costs: &'a StageCosts<T>,
    psi: &'a BeliefCost<T>,
    node_cap: usize,
    nodes: usize,
    memo: HashMap<(usize, Vec<u64>), T>,
}

impl<'a, T: Scalar, M: BeliefDynamics<T>> Tree<'a, T, M> {
    fn new(model: &'a M, costs: &'a StageCosts<T>, psi: &'a BeliefCost<T>, node_cap: usize) -> Self {
        Self {
            model,
            costs,
            psi,
            node_cap,
            nodes: 0,
            memo: HashMap::new(),
        }
    }

    fn value(&mut self, belief: &[T], horizon: usize) -> Result<T> {
        if horizon == 0 {
            return Ok(T::zero());
        }
        let key = (horizon, belief.iter().map(|v| v.as_f64().to_bits()).collect::<Vec<_>>());
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        self.nodes += 1;
        if self.nodes > self.node_cap {
            return Err(Error::TreeTooLarge(self.node_cap));
        }
        let q = self.q_values(belief, horizon)?;
        let v = q.into_iter().fold(T::infinity(), T::min);
        self.memo.insert(key, v);
        Ok(v)
    }

    fn q_values(&mut self, belief: &[T], horizon: usize) -> Result<Vec<T>> {
        let model = self.model;
        let psi = self.psi.evaluate_raw(belief, model.pair_base())?;
        let gamma = model.discount();
        let mut joint = vec![T::zero(); model.n_states()];
        let mut q = Vec::with_capacity(model.n_controls());
        for u in 0..model.n_controls() {
            let mut future = T::zero();
            if horizon > 1 {
                for y in 0..model.n_obs() {
                    let p = model.joint_update(belief, u, y, &mut joint);
                    if !(p > T::underflow()) {
                        continue;
                    }
                    let post: Vec<T> = joint.iter().map(|&v| v / p).collect();
                    future = future + p * self.value(&post, horizon - 1)?;
                }
            }
            q.push(self.costs.expected(belief, u) + psi + gamma * future);
        }
        Ok(q)
    }
}
