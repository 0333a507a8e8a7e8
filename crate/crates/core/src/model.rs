//! Tabular POMDP model and the standard Bayesian filter.
//!
//! Transitions are stored row-stochastic as `[control][from][to]`. The
//! destination-major layout `A^{x, x̄}(u)` (destination first) is accepted by
//! [`TabularModel::from_destination_major`] and transposed once at load.
//! Observations are stored as `[control][state][observation]`, where the
//! control is the one applied on the step that led into `state`.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel<T> {
    n_states: usize,
    n_controls: usize,
    n_obs: usize,
    transition: Vec<T>,
    observation: Vec<T>,
    initial_belief: Vec<T>,
    discount: T,
}

/// One violated stochasticity or range constraint. Indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TransitionRowSum {
        u: usize,
        from: usize,
        sum: f64,
    },
    TransitionEntry {
        u: usize,
        from: usize,
        to: usize,
        value: f64,
    },
    ObservationRowSum {
        u: usize,
        x: usize,
        sum: f64,
    },
    ObservationEntry {
        u: usize,
        x: usize,
        y: usize,
        value: f64,
    },
    InitialSum {
        sum: f64,
    },
    InitialEntry {
        x: usize,
        value: f64,
    },
    Discount {
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TransitionRowSum { u, from, sum } => {
                write!(f, "transition row (u={u}, from={from}) sums to {sum}")
            }
            Violation::TransitionEntry { u, from, to, value } => {
                write!(f, "transition (u={u}, from={from}, to={to}) = {value}")
            }
            Violation::ObservationRowSum { u, x, sum } => {
                write!(f, "observation row (u={u}, x={x}) sums to {sum}")
            }
            Violation::ObservationEntry { u, x, y, value } => {
                write!(f, "observation (u={u}, x={x}, y={y}) = {value}")
            }
            Violation::InitialSum { sum } => write!(f, "initial belief sums to {sum}"),
            Violation::InitialEntry { x, value } => write!(f, "initial belief (x={x}) = {value}"),
            Violation::Discount { value } => write!(f, "discount {value} outside (0, 1)"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "pass");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

impl<T: Scalar> TabularModel<T> {
    /// Builds and validates a model from flat tables (`[u][from][to]`, `[u][x][y]`).
    pub fn new(
        n_states: usize,
        n_controls: usize,
        n_obs: usize,
        transition: Vec<T>,
        observation: Vec<T>,
        initial_belief: Vec<T>,
        discount: T,
    ) -> Result<Self> {
        let model = Self::from_parts_unchecked(
            n_states,
            n_controls,
            n_obs,
            transition,
            observation,
            initial_belief,
            discount,
        )?;
        let report = validate_model(&model);
        if report.passed() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(report))
        }
    }

    /// Only checks table shapes; run [`validate_model`] before trusting the result.
    pub fn from_parts_unchecked(
        n_states: usize,
        n_controls: usize,
        n_obs: usize,
        transition: Vec<T>,
        observation: Vec<T>,
        initial_belief: Vec<T>,
        discount: T,
    ) -> Result<Self> {
        if n_states == 0 || n_controls == 0 || n_obs == 0 {
            return Err(Error::DimensionMismatch("model sizes must be positive".into()));
        }
        check_len("transition", transition.len(), n_controls * n_states * n_states)?;
        check_len("observation", observation.len(), n_controls * n_states * n_obs)?;
        check_len("initial_belief", initial_belief.len(), n_states)?;
        Ok(Self {
            n_states,
            n_controls,
            n_obs,
            transition,
            observation,
            initial_belief,
            discount,
        })
    }

    /// Builds from nested tables indexed `[u][from][to]` and `[u][x][y]`.
    pub fn from_nested(
        transition: &[Vec<Vec<T>>],
        observation: &[Vec<Vec<T>>],
        initial_belief: Vec<T>,
        discount: T,
    ) -> Result<Self> {
        let n_controls = transition.len();
        let n_states = initial_belief.len();
        let n_obs = observation.first().and_then(|t| t.first()).map_or(0, |row| row.len());
        let flat_t = flatten3(transition, n_controls, n_states, n_states, "transition")?;
        let flat_o = flatten3(observation, n_controls, n_states, n_obs, "observation")?;
        Self::new(n_states, n_controls, n_obs, flat_t, flat_o, initial_belief, discount)
    }

    /// Accepts transitions in destination-major order `[u][to][from]`.
    pub fn from_destination_major(
        transition: &[Vec<Vec<T>>],
        observation: &[Vec<Vec<T>>],
        initial_belief: Vec<T>,
        discount: T,
    ) -> Result<Self> {
        let transposed: Vec<Vec<Vec<T>>> = transition
            .iter()
            .map(|by_to| {
                let n = by_to.len();
                (0..n).map(|from| by_to.iter().map(|row| row[from]).collect()).collect()
            })
            .collect();
        Self::from_nested(&transposed, observation, initial_belief, discount)
    }

    /// Transitions in destination-major order `[u][to][from]`.
    pub fn to_destination_major(&self) -> Vec<Vec<Vec<T>>> {
        (0..self.n_controls)
            .map(|u| {
                (0..self.n_states)
                    .map(|to| (0..self.n_states).map(|from| self.transition(u, from, to)).collect())
                    .collect()
            })
            .collect()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_controls(&self) -> usize {
        self.n_controls
    }
    pub fn n_obs(&self) -> usize {
        self.n_obs
    }
    pub fn discount(&self) -> T {
        self.discount
    }
    pub fn initial_belief(&self) -> &[T] {
        &self.initial_belief
    }
    pub fn transition_table(&self) -> &[T] {
        &self.transition
    }
    pub fn observation_table(&self) -> &[T] {
        &self.observation
    }

    /// `p(x_{k+1} = to | x_k = from, u_k = u)`.
    #[inline]
    pub fn transition(&self, u: usize, from: usize, to: usize) -> T {
        self.transition[(u * self.n_states + from) * self.n_states + to]
    }

    #[inline]
    pub fn transition_row(&self, u: usize, from: usize) -> &[T] {
        let start = (u * self.n_states + from) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    /// `p(y_k = y | x_k = x, u_{k-1} = u)`.
    #[inline]
    pub fn observation(&self, u: usize, x: usize, y: usize) -> T {
        self.observation[(u * self.n_states + x) * self.n_obs + y]
    }

    #[inline]
    pub fn observation_row(&self, u: usize, x: usize) -> &[T] {
        let start = (u * self.n_states + x) * self.n_obs;
        &self.observation[start..start + self.n_obs]
    }

    pub fn with_discount(mut self, discount: T) -> Self {
        self.discount = discount;
        self
    }

    pub fn with_initial_belief(mut self, initial_belief: Vec<T>) -> Result<Self> {
        check_len("initial_belief", initial_belief.len(), self.n_states)?;
        self.initial_belief = initial_belief;
        Ok(self)
    }

    /// Predicted belief `Σ_x̄ A(x̄ → x, u) π(x̄)`.
    pub fn predict(&self, belief: &[T], u: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_states];
        BeliefDynamics::predict(self, belief, u, &mut out);
        out
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} has {got} entries, expected {want}"
        )))
    }
}

fn flatten3<T: Copy>(table: &[Vec<Vec<T>>], d0: usize, d1: usize, d2: usize, what: &str) -> Result<Vec<T>> {
    let mut flat = Vec::with_capacity(d0 * d1 * d2);
    check_len(what, table.len(), d0)?;
    for plane in table {
        check_len(what, plane.len(), d1)?;
        for row in plane {
            check_len(what, row.len(), d2)?;
            flat.extend_from_slice(row);
        }
    }
    Ok(flat)
}

pub fn validate_model<T: Scalar>(model: &TabularModel<T>) -> ValidationReport {
    let tol = T::stochastic_tol();
    let mut violations = Vec::new();
    let n = model.n_states;
    for u in 0..model.n_controls {
        for from in 0..n {
            let row = model.transition_row(u, from);
            for (to, &p) in row.iter().enumerate() {
                if !(p >= T::zero()) || !p.is_finite() {
                    violations.push(Violation::TransitionEntry {
                        u,
                        from,
                        to,
                        value: p.as_f64(),
                    });
                }
            }
            let sum: T = row.iter().copied().sum();
            if !((sum - T::one()).abs() <= tol) {
                violations.push(Violation::TransitionRowSum {
                    u,
                    from,
                    sum: sum.as_f64(),
                });
            }
        }
        for x in 0..n {
            let row = model.observation_row(u, x);
            for (y, &p) in row.iter().enumerate() {
                if !(p >= T::zero()) || !p.is_finite() {
                    violations.push(Violation::ObservationEntry {
                        u,
                        x,
                        y,
                        value: p.as_f64(),
                    });
                }
            }
            let sum: T = row.iter().copied().sum();
            if !((sum - T::one()).abs() <= tol) {
                violations.push(Violation::ObservationRowSum {
                    u,
                    x,
                    sum: sum.as_f64(),
                });
            }
        }
    }
    for (x, &p) in model.initial_belief.iter().enumerate() {
        if !(p >= T::zero()) || !p.is_finite() {
            violations.push(Violation::InitialEntry { x, value: p.as_f64() });
        }
    }
    let sum: T = model.initial_belief.iter().copied().sum();
    if !((sum - T::one()).abs() <= tol) {
        violations.push(Violation::InitialSum { sum: sum.as_f64() });
    }
    if !(model.discount > T::zero() && model.discount < T::one()) {
        violations.push(Violation::Discount {
            value: model.discount.as_f64(),
        });
    }
    ValidationReport { violations }
}

/// Probability vector over base states.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief<T>(Vec<T>);

impl<T: Scalar> Belief<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        check_simplex(&probs)?;
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![T::one() / T::from_usize(n).unwrap(); n])
    }

    pub fn indicator(n: usize, x: usize) -> Self {
        let mut probs = vec![T::zero(); n];
        probs[x] = T::one();
        Self(probs)
    }

    pub fn initial(model: &TabularModel<T>) -> Self {
        Self(model.initial_belief.clone())
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<T>) -> Self {
        Self(probs)
    }

    pub fn probs(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub(crate) fn check_simplex<T: Scalar>(probs: &[T]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidBelief("empty probability vector".into()));
    }
    if let Some(p) = probs.iter().find(|p| !(**p >= T::zero()) || !p.is_finite()) {
        return Err(Error::InvalidBelief(format!("entry {p} is not a probability")));
    }
    let sum: T = probs.iter().copied().sum();
    if (sum - T::one()).abs() > T::stochastic_tol() {
        return Err(Error::InvalidBelief(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Discrete controlled hidden Markov dynamics over which beliefs are propagated.
///
/// Implemented by the base model (belief over `X_k`) and by the augmented model
/// (belief over `(X_0, X_k)`); the solver and the exact oracle only use this
/// surface.
pub trait BeliefDynamics<T: Scalar>: Sync {
    fn n_states(&self) -> usize;
    fn n_controls(&self) -> usize;
    fn n_obs(&self) -> usize;
    fn discount(&self) -> T;
    fn initial(&self) -> Vec<T>;

    /// Adds `Σ_s̄ A(s̄ → s, u) b(s̄)` into `out`, which the caller zeroes.
    fn predict(&self, belief: &[T], u: usize, out: &mut [T]);

    /// `p(y | s, u)` for the state reached under `u`.
    fn obs(&self, u: usize, state: usize, y: usize) -> T;

    /// Writes `out(s̄) = Σ_s A(s̄ → s, u) p(y | s, u) alpha(s)`.
    fn back_project(&self, alpha: &[T], u: usize, y: usize, out: &mut [T]);

    /// Base state count when the states are `(X_0, X_k)` pairs.
    fn pair_base(&self) -> Option<usize> {
        None
    }

    /// Unnormalized posterior written into `out`; returns `p(y | b, u)`.
    fn joint_update(&self, belief: &[T], u: usize, y: usize, out: &mut [T]) -> T {
        out.iter_mut().for_each(|v| *v = T::zero());
        self.predict(belief, u, out);
        let mut norm = T::zero();
        for (s, v) in out.iter_mut().enumerate() {
            if *v != T::zero() {
                *v = *v * self.obs(u, s, y);
                norm = norm + *v;
            }
        }
        norm
    }

    /// Normalized Bayes update; errors when the normalizer is not above the underflow threshold.
    fn bayes_update(&self, belief: &[T], u: usize, y: usize) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.n_states()];
        let norm = self.joint_update(belief, u, y, &mut out);
        if !(norm > T::underflow()) {
            return Err(Error::ImpossibleObservation { u, y });
        }
        out.iter_mut().for_each(|v| *v = *v / norm);
        Ok(out)
    }

    /// `p(y | b, u)` for every observation.
    fn obs_distribution(&self, belief: &[T], u: usize) -> Vec<T> {
        let mut pred = vec![T::zero(); self.n_states()];
        self.predict(belief, u, &mut pred);
        let mut dist = vec![T::zero(); self.n_obs()];
        for (s, &p) in pred.iter().enumerate() {
            if p != T::zero() {
                for (y, d) in dist.iter_mut().enumerate() {
                    *d = *d + p * self.obs(u, s, y);
                }
            }
        }
        dist
    }
}

impl<T: Scalar> BeliefDynamics<T> for TabularModel<T> {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_controls(&self) -> usize {
        self.n_controls
    }
    fn n_obs(&self) -> usize {
        self.n_obs
    }
    fn discount(&self) -> T {
        self.discount
    }
    fn initial(&self) -> Vec<T> {
        self.initial_belief.clone()
    }

    fn predict(&self, belief: &[T], u: usize, out: &mut [T]) {
        for (from, &p) in belief.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.transition_row(u, from)) {
                *o = *o + a * p;
            }
        }
    }

    #[inline]
    fn obs(&self, u: usize, state: usize, y: usize) -> T {
        self.observation(u, state, y)
    }

    fn back_project(&self, alpha: &[T], u: usize, y: usize, out: &mut [T]) {
        let weighted: Vec<T> = (0..self.n_states)
            .map(|x| self.observation(u, x, y) * alpha[x])
            .collect();
        for (from, o) in out.iter_mut().enumerate() {
            *o = crate::scalar::dot(self.transition_row(u, from), &weighted);
        }
    }
}

/// `p(y | π, u) = Σ_{x̄, x} B^x(y, u) A^{x, x̄}(u) π(x̄)`.
pub fn obs_likelihood<T: Scalar>(model: &TabularModel<T>, belief: &Belief<T>, u: usize, y: usize) -> T {
    let pred = model.predict(belief.probs(), u);
    pred.iter()
        .enumerate()
        .fold(T::zero(), |acc, (x, &p)| acc + p * model.observation(u, x, y))
}

/// One step of the recursive Bayesian filter `π' = Π(π, u, y)`.
pub fn filter_update<T: Scalar>(model: &TabularModel<T>, belief: &Belief<T>, u: usize, y: usize) -> Result<Belief<T>> {
    model.bayes_update(belief.probs(), u, y).map(Belief::from_vec_unchecked)
}
