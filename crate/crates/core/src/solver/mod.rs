//! Point-based value iteration over a lower envelope of alpha vectors, and an
//! exact finite-horizon oracle.
//!
//! Costs are minimized, so the value function is `min_α ⟨α, b⟩`. Every alpha
//! the solver produces is the cost of some conditional plan, which makes the
//! envelope an upper bound on the optimal cost at every belief.

mod backup;
mod exact;
mod pbvi;

pub use backup::{backup, policy_action, q_values};
pub use exact::{exact_q_values, solve_exact_finite_horizon, DEFAULT_NODE_CAP};
pub use pbvi::{
    solve_base, solve_base_with_stats, solve_point_based, solve_point_based_with_stats, PointBasedSolver, SolveParams,
    SolveStats,
};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVector<T> {
    pub values: Vec<T>,
    pub action: usize,
}

impl<T: Scalar> AlphaVector<T> {
    pub fn dot(&self, belief: &[T]) -> T {
        self.values
            .iter()
            .zip(belief)
            .filter(|(_, b)| **b != T::zero())
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }
}

/// Non-empty set of alpha vectors of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPolicy<T> {
    alphas: Vec<AlphaVector<T>>,
}

impl<T: Scalar> AlphaPolicy<T> {
    pub fn new(alphas: Vec<AlphaVector<T>>) -> Result<Self> {
        let Some(first) = alphas.first() else {
            return Err(Error::DimensionMismatch("policy needs at least one alpha".into()));
        };
        let n = first.values.len();
        if alphas.iter().any(|a| a.values.len() != n) {
            return Err(Error::DimensionMismatch("alpha vectors of unequal length".into()));
        }
        Ok(Self { alphas })
    }

    pub fn constant(n_states: usize, value: T, action: usize) -> Self {
        Self {
            alphas: vec![AlphaVector {
                values: vec![value; n_states],
                action,
            }],
        }
    }

    pub fn alphas(&self) -> &[AlphaVector<T>] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.alphas[0].values.len()
    }

    /// Minimizing alpha at `belief` (lowest index on ties) and its value.
    pub fn best(&self, belief: &[T]) -> (usize, T) {
        let support: Vec<usize> = belief
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != T::zero())
            .map(|(s, _)| s)
            .collect();
        let mut best = (0, T::infinity());
        for (i, alpha) in self.alphas.iter().enumerate() {
            let v = support
                .iter()
                .fold(T::zero(), |acc, &s| acc + alpha.values[s] * belief[s]);
            if v < best.1 {
                best = (i, v);
            }
        }
        best
    }

    pub fn value(&self, belief: &[T]) -> T {
        self.best(belief).1
    }

    /// Action attached to the minimizing alpha.
    pub fn action(&self, belief: &[T]) -> usize {
        self.alphas[self.best(belief).0].action
    }

    /// Drops duplicates and alphas that are componentwise no better than another.
    pub fn prune_dominated(&mut self) {
        let n = self.alphas.len();
        let mut keep = vec![true; n];
        for i in 0..n {
            if !keep[i] {
                continue;
            }
            for j in 0..n {
                if i == j || !keep[j] {
                    continue;
                }
                let (a, b) = (&self.alphas[i].values, &self.alphas[j].values);
                // j dominates i when j ≤ i everywhere; equal vectors keep the lower index
                let dominated =
                    b.iter().zip(a).all(|(bj, ai)| bj <= ai) && (j < i || b.iter().zip(a).any(|(bj, ai)| bj < ai));
                if dominated {
                    keep[i] = false;
                    break;
                }
            }
        }
        let mut idx = 0;
        self.alphas.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
    }
}
