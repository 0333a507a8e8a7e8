use crate::costs::{PwlcApprox, StageCosts};
use crate::model::BeliefDynamics;
use crate::scalar::Scalar;

use super::{AlphaPolicy, AlphaVector};

/// Scratch buffers for one-step lookahead at a belief.
pub(crate) struct Lookahead<T> {
    pred: Vec<T>,
    support: Vec<usize>,
    weights: Vec<T>,
    gathered: Vec<T>,
    best_val: Vec<T>,
    best_idx: Vec<usize>,
}

impl<T: Scalar> Lookahead<T> {
    pub(crate) fn new(n_states: usize, n_obs: usize) -> Self {
        Self {
            pred: vec![T::zero(); n_states],
            support: Vec::with_capacity(n_states),
            weights: Vec::with_capacity(n_states * n_obs),
            gathered: Vec::with_capacity(n_states),
            best_val: vec![T::zero(); n_obs],
            best_idx: vec![0; n_obs],
        }
    }

    /// `Σ_y min_α ⟨α, B_y ⊙ A_u b⟩`, the expected continuation value without
    /// discount. The per-observation minimizers are left in `best_idx`.
    pub(crate) fn continuation<M: BeliefDynamics<T>>(
        &mut self,
        model: &M,
        policy: &AlphaPolicy<T>,
        belief: &[T],
        u: usize,
    ) -> T {
        let ny = model.n_obs();
        self.pred.iter_mut().for_each(|v| *v = T::zero());
        model.predict(belief, u, &mut self.pred);
        self.support.clear();
        self.support.extend(
            self.pred
                .iter()
                .enumerate()
                .filter(|(_, p)| **p != T::zero())
                .map(|(s, _)| s),
        );
        let k = self.support.len();
        self.weights.clear();
        for y in 0..ny {
            for &s in &self.support {
                self.weights.push(self.pred[s] * model.obs(u, s, y));
            }
        }
        self.best_val.iter_mut().for_each(|v| *v = T::infinity());
        self.best_idx.iter_mut().for_each(|i| *i = 0);
        for (ai, alpha) in policy.alphas().iter().enumerate() {
            self.gathered.clear();
            self.gathered.extend(self.support.iter().map(|&s| alpha.values[s]));
            for y in 0..ny {
                let w = &self.weights[y * k..(y + 1) * k];
                let v = self.gathered.iter().zip(w).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                if v < self.best_val[y] {
                    self.best_val[y] = v;
                    self.best_idx[y] = ai;
                }
            }
        }
        self.best_val.iter().copied().sum()
    }
}

/// One-step lookahead values `Q(b, u) = c̄(b, u) + ψ + γ E[V(b') | b, u]`,
/// with `psi` the (control-independent) belief cost already evaluated at `b`.
pub fn q_values<T: Scalar, M: BeliefDynamics<T>>(
    model: &M,
    costs: &StageCosts<T>,
    psi: T,
    policy: &AlphaPolicy<T>,
    belief: &[T],
) -> Vec<T> {
    let mut la = Lookahead::new(model.n_states(), model.n_obs());
    let gamma = model.discount();
    (0..model.n_controls())
        .map(|u| costs.expected(belief, u) + psi + gamma * la.continuation(model, policy, belief, u))
        .collect()
}

/// Greedy control under one-step lookahead on `policy`; lowest index wins ties.
///
/// Values within a relative `1e-12` of the minimum count as ties, so controls
/// that are equal up to summation order resolve to the lowest index. The
/// belief-dependent cost does not depend on the control, so it shifts all
/// lookahead values equally and is left out of the comparison.
pub fn policy_action<T: Scalar, M: BeliefDynamics<T>>(
    policy: &AlphaPolicy<T>,
    model: &M,
    costs: &StageCosts<T>,
    belief: &[T],
) -> usize {
    let q = q_values(model, costs, T::zero(), policy, belief);
    let best = q[argmin(&q)];
    let tol = T::lit(1e-12) * best.abs().max(T::one());
    q.iter().position(|&v| v <= best + tol).unwrap_or(0)
}

pub(crate) fn argmin<T: Scalar>(values: &[T]) -> usize {
    let mut best = (0, T::infinity());
    for (i, &v) in values.iter().enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Point-based Bellman backup at `belief`.
///
/// The returned alpha satisfies `⟨α, belief⟩ = min_u Q(belief, u)`, where the
/// belief cost enters through the lowest tangent plane of `psi_hat` at
/// `belief`. Away from `belief` it is the cost of the same one-step plan and
/// therefore still an upper bound whenever `policy` is one.
pub fn backup<T: Scalar, M: BeliefDynamics<T>>(
    model: &M,
    costs: &StageCosts<T>,
    psi_hat: Option<&PwlcApprox<T>>,
    policy: &AlphaPolicy<T>,
    belief: &[T],
) -> AlphaVector<T> {
    let mut la = Lookahead::new(model.n_states(), model.n_obs());
    backup_with(&mut la, model, costs, psi_hat, policy, belief)
}

pub(crate) fn backup_with<T: Scalar, M: BeliefDynamics<T>>(
    la: &mut Lookahead<T>,
    model: &M,
    costs: &StageCosts<T>,
    psi_hat: Option<&PwlcApprox<T>>,
    policy: &AlphaPolicy<T>,
    belief: &[T],
) -> AlphaVector<T> {
    let gamma = model.discount();
    let plane = psi_hat.map(|p| p.min_plane(belief));
    let plane_value = plane.map_or(T::zero(), |(_, v)| v);

    let mut best_u = 0;
    let mut best_q = T::infinity();
    let mut choices = vec![0; model.n_obs()];
    for u in 0..model.n_controls() {
        let q = costs.expected(belief, u) + plane_value + gamma * la.continuation(model, policy, belief, u);
        if q < best_q {
            best_q = q;
            best_u = u;
            choices.copy_from_slice(&la.best_idx);
        }
    }

    let n = model.n_states();
    let mut values = costs.column(best_u);
    if let (Some(approx), Some((idx, _))) = (psi_hat, plane) {
        for (v, &g) in values.iter_mut().zip(&approx.planes()[idx]) {
            *v = *v + g;
        }
    }
    let mut projected = vec![T::zero(); n];
    let mut future = vec![T::zero(); n];
    for (y, &ai) in choices.iter().enumerate() {
        model.back_project(&policy.alphas()[ai].values, best_u, y, &mut projected);
        for (f, &p) in future.iter_mut().zip(&projected) {
            *f = *f + p;
        }
    }
    for (v, f) in values.iter_mut().zip(future) {
        *v = *v + gamma * f;
    }
    AlphaVector { values, action: best_u }
}
