//! Stage costs: expected state costs, initial-state costs, belief-dependent
//! costs and tangent-plane (PWLC) upper approximations of concave ones.

use crate::augment::{initial_entropy, marginal_initial, AugmentedBelief, AugmentedModel, PairIndex};
use crate::error::{Error, Result};
use crate::model::{Belief, BeliefDynamics};
use crate::scalar::Scalar;

/// Marginal components below this are clamped before taking logs.
pub const TANGENT_CLAMP: f64 = 1e-12;

/// `κ(x, u)`, stored `[x][u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateControlCost<T> {
    n_states: usize,
    n_controls: usize,
    table: Vec<T>,
}

impl<T: Scalar> StateControlCost<T> {
    pub fn new(n_states: usize, n_controls: usize, table: Vec<T>) -> Result<Self> {
        check_table(&table, n_states * n_controls)?;
        Ok(Self {
            n_states,
            n_controls,
            table,
        })
    }

    pub fn from_fn(n_states: usize, n_controls: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let table = (0..n_states)
            .flat_map(|x| (0..n_controls).map(move |u| (x, u)))
            .map(|(x, u)| f(x, u))
            .collect();
        Self {
            n_states,
            n_controls,
            table,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_controls(&self) -> usize {
        self.n_controls
    }

    pub fn get(&self, x: usize, u: usize) -> T {
        self.table[x * self.n_controls + u]
    }

    pub fn stage(&self) -> StageCosts<T> {
        StageCosts {
            n_states: self.n_states,
            n_controls: self.n_controls,
            table: self.table.clone(),
        }
    }
}

/// `c(x0, x, u)`, stored `[x0][x][u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialStateCost<T> {
    n_base: usize,
    n_controls: usize,
    table: Vec<T>,
}

impl<T: Scalar> InitialStateCost<T> {
    pub fn new(n_base: usize, n_controls: usize, table: Vec<T>) -> Result<Self> {
        check_table(&table, n_base * n_base * n_controls)?;
        Ok(Self {
            n_base,
            n_controls,
            table,
        })
    }

    pub fn from_fn(n_base: usize, n_controls: usize, f: impl Fn(usize, usize, usize) -> T) -> Self {
        let mut table = Vec::with_capacity(n_base * n_base * n_controls);
        for x0 in 0..n_base {
            for x in 0..n_base {
                for u in 0..n_controls {
                    table.push(f(x0, x, u));
                }
            }
        }
        Self {
            n_base,
            n_controls,
            table,
        }
    }

    pub fn n_base(&self) -> usize {
        self.n_base
    }
    pub fn n_controls(&self) -> usize {
        self.n_controls
    }

    pub fn get(&self, x0: usize, x: usize, u: usize) -> T {
        self.table[(x0 * self.n_base + x) * self.n_controls + u]
    }

    /// `c(s, u)` over augmented states.
    pub fn augmented(&self) -> StageCosts<T> {
        let idx = PairIndex::new(self.n_base);
        let table = (0..idx.n_aug())
            .flat_map(|s| (0..self.n_controls).map(move |u| (s, u)))
            .map(|(s, u)| {
                let (x0, x) = idx.split(s);
                self.get(x0, x, u)
            })
            .collect();
        StageCosts {
            n_states: idx.n_aug(),
            n_controls: self.n_controls,
            table,
        }
    }
}

fn check_table<T: Scalar>(table: &[T], len: usize) -> Result<()> {
    if table.len() != len {
        return Err(Error::DimensionMismatch(format!(
            "cost table has {} entries, expected {len}",
            table.len()
        )));
    }
    if table.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse("cost table has non-finite entries".into()));
    }
    Ok(())
}

/// Linear stage cost over whichever states the belief lives on, `[s][u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCosts<T> {
    n_states: usize,
    n_controls: usize,
    table: Vec<T>,
}

impl<T: Scalar> StageCosts<T> {
    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_controls(&self) -> usize {
        self.n_controls
    }

    #[inline]
    pub fn get(&self, s: usize, u: usize) -> T {
        self.table[s * self.n_controls + u]
    }

    pub fn column(&self, u: usize) -> Vec<T> {
        (0..self.n_states).map(|s| self.get(s, u)).collect()
    }

    pub fn expected(&self, belief: &[T], u: usize) -> T {
        belief
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != T::zero())
            .fold(T::zero(), |acc, (s, &p)| acc + p * self.get(s, u))
    }

    pub fn max_abs(&self) -> T {
        self.table.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> T {
        self.table.iter().copied().fold(T::neg_infinity(), T::max)
    }
}

/// Belief-dependent cost `ψ(ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum BeliefCost<T> {
    None,
    /// `weight · H(X_0 | ·)` in nats.
    InitialEntropy {
        weight: T,
    },
    TangentSet(PwlcApprox<T>),
}

impl<T: Scalar> BeliefCost<T> {
    pub fn is_none(&self) -> bool {
        matches!(self, BeliefCost::None)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            BeliefCost::None => "none",
            BeliefCost::InitialEntropy { .. } => "initial_entropy",
            BeliefCost::TangentSet(_) => "tangent_set",
        }
    }

    /// Exact value on a raw belief; `pair_base` is required for entropy.
    pub fn evaluate_raw(&self, belief: &[T], pair_base: Option<usize>) -> Result<T> {
        match self {
            BeliefCost::None => Ok(T::zero()),
            BeliefCost::InitialEntropy { weight } => {
                let n = pair_base.ok_or_else(|| {
                    Error::UnsupportedBeliefCost("initial-state entropy on a non-augmented belief".into())
                })?;
                let xi = AugmentedBelief::from_vec_unchecked(belief.to_vec(), PairIndex::new(n));
                Ok(*weight * initial_entropy(&xi))
            }
            BeliefCost::TangentSet(approx) => Ok(approx.evaluate(belief)),
        }
    }

    pub fn evaluate(&self, xi: &AugmentedBelief<T>) -> T {
        self.evaluate_raw(xi.probs(), Some(xi.n_base()))
            .expect("augmented belief carries its pair index")
    }
}

/// `ψ̂(ξ) = min_g ⟨g, ξ⟩` over tangent planes of a concave `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlcApprox<T> {
    planes: Vec<Vec<T>>,
    base_points: Vec<AugmentedBelief<T>>,
}

impl<T: Scalar> PwlcApprox<T> {
    pub fn from_planes(planes: Vec<Vec<T>>, base_points: Vec<AugmentedBelief<T>>) -> Result<Self> {
        let Some(first) = planes.first() else {
            return Err(Error::EmptyBasePoints);
        };
        if planes.iter().any(|p| p.len() != first.len()) {
            return Err(Error::DimensionMismatch("planes of unequal length".into()));
        }
        Ok(Self { planes, base_points })
    }

    pub fn planes(&self) -> &[Vec<T>] {
        &self.planes
    }

    pub fn base_points(&self) -> &[AugmentedBelief<T>] {
        &self.base_points
    }

    /// Lowest plane at `belief` (first index on ties) and its value.
    pub fn min_plane(&self, belief: &[T]) -> (usize, T) {
        let mut best = (0, T::infinity());
        for (i, g) in self.planes.iter().enumerate() {
            let v = sparse_dot(g, belief);
            if v < best.1 {
                best = (i, v);
            }
        }
        best
    }

    pub fn evaluate(&self, belief: &[T]) -> T {
        self.min_plane(belief).1
    }

    /// Largest value any plane can take on the simplex lower-bounded by the envelope.
    pub fn upper_bound(&self) -> T {
        self.planes
            .iter()
            .map(|g| g.iter().copied().fold(T::neg_infinity(), T::max))
            .fold(T::infinity(), T::min)
    }

    pub fn push(&mut self, plane: Vec<T>, base: AugmentedBelief<T>) {
        self.planes.push(plane);
        self.base_points.push(base);
    }
}

fn sparse_dot<T: Scalar>(g: &[T], belief: &[T]) -> T {
    g.iter()
        .zip(belief)
        .filter(|(_, b)| **b != T::zero())
        .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

/// `C(π, u) = Σ_x π(x) κ(x, u)`.
pub fn expected_state_cost<T: Scalar>(kappa: &StateControlCost<T>, belief: &Belief<T>, u: usize) -> T {
    belief
        .probs()
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (x, &p)| acc + p * kappa.get(x, u))
}

/// `C̄(ξ, u) = Σ_s ξ(s) c(s, u)`.
pub fn expected_aug_cost<T: Scalar>(c: &InitialStateCost<T>, xi: &AugmentedBelief<T>, u: usize) -> T {
    let idx = xi.index();
    xi.probs().iter().enumerate().fold(T::zero(), |acc, (s, &p)| {
        let (x0, x) = idx.split(s);
        acc + p * c.get(x0, x, u)
    })
}

/// `ρ̄(ξ, u) = ψ(ξ, u) + Σ_s ξ(s) c(s, u)`.
pub fn rho_bar<T: Scalar>(c: &InitialStateCost<T>, psi: &BeliefCost<T>, xi: &AugmentedBelief<T>, u: usize) -> T {
    psi.evaluate(xi) + expected_aug_cost(c, xi, u)
}

/// Tangent plane of the initial-state entropy at `xi_base`:
/// `g(s) = −ln m(x0(s))`, with `m` the clamped initial marginal.
pub fn entropy_tangent<T: Scalar>(xi_base: &AugmentedBelief<T>) -> Vec<T> {
    let clamp = T::lit(TANGENT_CLAMP);
    let neg_log: Vec<T> = marginal_initial(xi_base)
        .into_iter()
        .map(|m| -m.max(clamp).ln())
        .collect();
    let idx = xi_base.index();
    (0..idx.n_aug()).map(|s| neg_log[idx.initial_of(s)]).collect()
}

pub fn build_pwlc<T: Scalar>(psi: &BeliefCost<T>, base_points: &[AugmentedBelief<T>]) -> Result<PwlcApprox<T>> {
    let BeliefCost::InitialEntropy { weight } = psi else {
        return Err(Error::UnsupportedBeliefCost(format!(
            "tangent construction for {}",
            psi.tag()
        )));
    };
    if base_points.is_empty() {
        return Err(Error::EmptyBasePoints);
    }
    let planes = base_points
        .iter()
        .map(|b| entropy_tangent(b).into_iter().map(|g| g * *weight).collect())
        .collect();
    PwlcApprox::from_planes(planes, base_points.to_vec())
}

/// Uniform belief, `ξ_0`, and every belief reachable from `ξ_0` in at most two
/// smoother steps, deduplicated on the initial-state marginal (the only part
/// of the belief the entropy tangent depends on).
pub fn default_base_points<T: Scalar>(aug: &AugmentedModel<T>) -> Vec<AugmentedBelief<T>> {
    let n = aug.index().n_base();
    let xi0 = aug.aug_initial();
    let mut points = vec![AugmentedBelief::uniform(n), xi0.clone()];
    let mut marginals: Vec<Vec<T>> = points.iter().map(marginal_initial).collect();
    let mut frontier = vec![xi0];
    for _ in 0..2 {
        let mut next = Vec::new();
        for xi in &frontier {
            for u in 0..aug.n_controls() {
                for y in 0..aug.n_obs() {
                    let Ok(post) = aug.bayes_update(xi.probs(), u, y) else {
                        continue;
                    };
                    let post = AugmentedBelief::from_vec_unchecked(post, aug.index());
                    let m = marginal_initial(&post);
                    let fresh = marginals.iter().all(|other| {
                        other
                            .iter()
                            .zip(&m)
                            .map(|(a, b)| (*a - *b).abs())
                            .fold(T::zero(), |acc, d| acc + d)
                            > T::lit(1e-9)
                    });
                    if fresh {
                        marginals.push(m);
                        points.push(post.clone());
                    }
                    next.push(post);
                }
            }
        }
        frontier = next;
    }
    points
}
