//! Augmented state `S_k = (X_0, X_k)` and the recursive fixed-point smoother.
//!
//! The pair `(x0, xk)` is stored at zero-based index `x0 + n·xk`. The
//! augmented transition matrix is block diagonal in `x0` with every block equal
//! to the base transition matrix, and the augmented sensor ignores `x0`, so
//! neither is ever materialized: [`AugmentedModel`] reads the base tables
//! directly. [`AugmentedModel::to_dense_model`] builds the dense equivalent for
//! differential tests.

use crate::error::{Error, Result};
use crate::model::{check_simplex, BeliefDynamics, TabularModel};
use crate::scalar::Scalar;

/// Bijection between base-state pairs and augmented states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairIndex {
    n_base: usize,
}

impl PairIndex {
    pub fn new(n_base: usize) -> Self {
        assert!(n_base > 0, "pair index needs at least one base state");
        Self { n_base }
    }

    pub fn n_base(&self) -> usize {
        self.n_base
    }

    pub fn n_aug(&self) -> usize {
        self.n_base * self.n_base
    }

    #[inline]
    pub fn pair(&self, x0: usize, xk: usize) -> usize {
        x0 + self.n_base * xk
    }

    #[inline]
    pub fn split(&self, s: usize) -> (usize, usize) {
        (s % self.n_base, s / self.n_base)
    }

    #[inline]
    pub fn initial_of(&self, s: usize) -> usize {
        s % self.n_base
    }

    #[inline]
    pub fn current_of(&self, s: usize) -> usize {
        s / self.n_base
    }
}

/// One-based `L(x0, xk) = x0 + n·(xk − 1)`.
pub fn lin_index(x0: usize, xk: usize, n_base: usize) -> Result<usize> {
    for v in [x0, xk] {
        if v == 0 || v > n_base {
            return Err(Error::OutOfRange { value: v, max: n_base });
        }
    }
    Ok(x0 + n_base * (xk - 1))
}

/// One-based inverse of [`lin_index`].
pub fn inv_index(s: usize, n_base: usize) -> Result<(usize, usize)> {
    let max = n_base * n_base;
    if s == 0 || s > max {
        return Err(Error::OutOfRange { value: s, max });
    }
    let x0 = s - n_base * ((s - 1) / n_base);
    let xk = (s - x0) / n_base + 1;
    Ok((x0, xk))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedModel<T> {
    base: TabularModel<T>,
    index: PairIndex,
}

/// Probability vector over augmented states, the joint posterior of `(X_0, X_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedBelief<T> {
    probs: Vec<T>,
    index: PairIndex,
}

pub fn augment<T: Scalar>(model: &TabularModel<T>) -> AugmentedModel<T> {
    AugmentedModel {
        base: model.clone(),
        index: PairIndex::new(model.n_states()),
    }
}

impl<T: Scalar> AugmentedModel<T> {
    pub fn base(&self) -> &TabularModel<T> {
        &self.base
    }

    pub fn index(&self) -> PairIndex {
        self.index
    }

    pub fn n_aug_states(&self) -> usize {
        self.index.n_aug()
    }

    /// `ξ_0`: `π_0(x)` on the diagonal `L(x, x)`, zero elsewhere.
    pub fn aug_initial(&self) -> AugmentedBelief<T> {
        let mut probs = vec![T::zero(); self.index.n_aug()];
        for (x, &p) in self.base.initial_belief().iter().enumerate() {
            probs[self.index.pair(x, x)] = p;
        }
        AugmentedBelief {
            probs,
            index: self.index,
        }
    }

    /// `Ā(s̄ → s, u)`; zero across initial-state blocks.
    pub fn aug_transition(&self, u: usize, from: usize, to: usize) -> T {
        let (a, xbar) = self.index.split(from);
        let (b, x) = self.index.split(to);
        if a == b {
            self.base.transition(u, xbar, x)
        } else {
            T::zero()
        }
    }

    /// `B̄^s(y, u) = B^{xk(s)}(y, u)`.
    pub fn aug_observation(&self, u: usize, s: usize, y: usize) -> T {
        self.base.observation(u, self.index.current_of(s), y)
    }

    /// Dense `N_s`-state model with the same augmented probabilities.
    pub fn to_dense_model(&self) -> TabularModel<T> {
        let ns = self.index.n_aug();
        let nu = self.base.n_controls();
        let ny = self.base.n_obs();
        let mut transition = Vec::with_capacity(nu * ns * ns);
        let mut observation = Vec::with_capacity(nu * ns * ny);
        for u in 0..nu {
            for from in 0..ns {
                transition.extend((0..ns).map(|to| self.aug_transition(u, from, to)));
            }
        }
        for u in 0..nu {
            for s in 0..ns {
                observation.extend((0..ny).map(|y| self.aug_observation(u, s, y)));
            }
        }
        TabularModel::from_parts_unchecked(
            ns,
            nu,
            ny,
            transition,
            observation,
            self.aug_initial().probs,
            self.base.discount(),
        )
        .expect("dense augmented tables have consistent shapes")
    }
}

impl<T: Scalar> BeliefDynamics<T> for AugmentedModel<T> {
    fn n_states(&self) -> usize {
        self.index.n_aug()
    }
    fn n_controls(&self) -> usize {
        self.base.n_controls()
    }
    fn n_obs(&self) -> usize {
        self.base.n_obs()
    }
    fn discount(&self) -> T {
        self.base.discount()
    }
    fn initial(&self) -> Vec<T> {
        self.aug_initial().probs
    }

    fn predict(&self, belief: &[T], u: usize, out: &mut [T]) {
        let n = self.index.n_base();
        for (s, &p) in belief.iter().enumerate() {
            if p == T::zero() {
                continue;
            }
            let (x0, xbar) = self.index.split(s);
            let row = self.base.transition_row(u, xbar);
            for (x, &a) in row.iter().enumerate() {
                if a != T::zero() {
                    let o = &mut out[x0 + n * x];
                    *o = *o + a * p;
                }
            }
        }
    }

    #[inline]
    fn obs(&self, u: usize, state: usize, y: usize) -> T {
        self.base.observation(u, self.index.current_of(state), y)
    }

    fn back_project(&self, alpha: &[T], u: usize, y: usize, out: &mut [T]) {
        let n = self.index.n_base();
        let sensor: Vec<T> = (0..n).map(|x| self.base.observation(u, x, y)).collect();
        let mut weighted = vec![T::zero(); n];
        for x0 in 0..n {
            for x in 0..n {
                weighted[x] = sensor[x] * alpha[x0 + n * x];
            }
            for xbar in 0..n {
                out[x0 + n * xbar] = crate::scalar::dot(self.base.transition_row(u, xbar), &weighted);
            }
        }
    }

    fn pair_base(&self) -> Option<usize> {
        Some(self.index.n_base())
    }
}

impl<T: Scalar> AugmentedBelief<T> {
    pub fn new(probs: Vec<T>, n_base: usize) -> Result<Self> {
        let index = PairIndex::new(n_base);
        if probs.len() != index.n_aug() {
            return Err(Error::DimensionMismatch(format!(
                "augmented belief has {} entries, expected {}",
                probs.len(),
                index.n_aug()
            )));
        }
        check_simplex(&probs)?;
        Ok(Self { probs, index })
    }

    pub fn uniform(n_base: usize) -> Self {
        let index = PairIndex::new(n_base);
        let n = index.n_aug();
        Self {
            probs: vec![T::one() / T::from_usize(n).unwrap(); n],
            index,
        }
    }

    pub fn indicator(n_base: usize, x0: usize, xk: usize) -> Self {
        let index = PairIndex::new(n_base);
        let mut probs = vec![T::zero(); index.n_aug()];
        probs[index.pair(x0, xk)] = T::one();
        Self { probs, index }
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<T>, index: PairIndex) -> Self {
        Self { probs, index }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn into_inner(self) -> Vec<T> {
        self.probs
    }

    pub fn index(&self) -> PairIndex {
        self.index
    }

    pub fn n_base(&self) -> usize {
        self.index.n_base()
    }

    pub fn get(&self, x0: usize, xk: usize) -> T {
        self.probs[self.index.pair(x0, xk)]
    }
}

fn check_dims<T: Scalar>(aug: &AugmentedModel<T>, xi: &AugmentedBelief<T>) -> Result<()> {
    if xi.index != aug.index {
        return Err(Error::DimensionMismatch(format!(
            "belief over {} base states, model over {}",
            xi.n_base(),
            aug.index.n_base()
        )));
    }
    Ok(())
}

/// One step of the fixed-point smoother `ξ' = Ξ(ξ, u, y)`.
///
/// Work is `O(nnz(ξ)·N_x + N_x²)`: only the diagonal blocks of the augmented
/// transition are visited.
pub fn smoother_update<T: Scalar>(
    aug: &AugmentedModel<T>,
    xi: &AugmentedBelief<T>,
    u: usize,
    y: usize,
) -> Result<AugmentedBelief<T>> {
    check_dims(aug, xi)?;
    let probs = aug.bayes_update(&xi.probs, u, y)?;
    Ok(AugmentedBelief::from_vec_unchecked(probs, aug.index))
}

/// `p(y | ξ, u)`, the smoother's normalizer.
pub fn aug_obs_likelihood<T: Scalar>(aug: &AugmentedModel<T>, xi: &AugmentedBelief<T>, u: usize, y: usize) -> T {
    let mut scratch = vec![T::zero(); aug.n_aug_states()];
    aug.joint_update(&xi.probs, u, y, &mut scratch)
}

/// `p(x0 | ·) = Σ_xk ξ(x0, xk)`.
pub fn marginal_initial<T: Scalar>(xi: &AugmentedBelief<T>) -> Vec<T> {
    let n = xi.n_base();
    let mut m = vec![T::zero(); n];
    for (s, &p) in xi.probs.iter().enumerate() {
        let x0 = xi.index.initial_of(s);
        m[x0] = m[x0] + p;
    }
    m
}

/// `p(xk | ·) = Σ_x0 ξ(x0, xk)`.
pub fn marginal_current<T: Scalar>(xi: &AugmentedBelief<T>) -> Vec<T> {
    let n = xi.n_base();
    xi.probs.chunks(n).map(|block| block.iter().copied().sum()).collect()
}

/// Shannon entropy in nats, with `0·ln 0 = 0`.
pub fn entropy<T: Scalar>(pmf: &[T]) -> T {
    pmf.iter()
        .filter(|&&p| p > T::zero())
        .fold(T::zero(), |acc, &p| acc - p * p.ln())
}

/// Entropy (nats) of the initial-state marginal of `ξ`.
pub fn initial_entropy<T: Scalar>(xi: &AugmentedBelief<T>) -> T {
    entropy(&marginal_initial(xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{filter_update, obs_likelihood, Belief};

    fn two_state() -> TabularModel<f64> {
        TabularModel::from_nested(
            &[vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            &[vec![vec![0.8, 0.2], vec![0.4, 0.6]]],
            vec![0.5, 0.5],
            0.95,
        )
        .unwrap()
    }

    #[test]
    fn lin_index_examples() {
        assert_eq!(lin_index(1, 1, 16).unwrap(), 1);
        assert_eq!(lin_index(3, 2, 16).unwrap(), 19);
        assert_eq!(lin_index(16, 16, 16).unwrap(), 256);
        assert!(matches!(lin_index(0, 1, 16), Err(Error::OutOfRange { .. })));
        assert!(matches!(lin_index(1, 17, 16), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn inv_index_examples() {
        assert_eq!(inv_index(19, 16).unwrap(), (3, 2));
        assert_eq!(inv_index(1, 16).unwrap(), (1, 1));
        assert!(inv_index(257, 16).is_err());
        assert!(inv_index(0, 16).is_err());
        for s in 1..=256 {
            let (a, b) = inv_index(s, 16).unwrap();
            assert_eq!(lin_index(a, b, 16).unwrap(), s);
        }
    }

    #[test]
    fn zero_based_pairs_agree_with_one_based() {
        let idx = PairIndex::new(5);
        for a in 0..5 {
            for b in 0..5 {
                assert_eq!(idx.pair(a, b) + 1, lin_index(a + 1, b + 1, 5).unwrap());
                assert_eq!(idx.split(idx.pair(a, b)), (a, b));
            }
        }
    }

    #[test]
    fn initial_augmented_belief() {
        let aug = augment(&two_state());
        assert_eq!(aug.aug_initial().probs(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn block_structure() {
        let m = TabularModel::from_nested(
            &[vec![vec![0.6, 0.4], vec![0.3, 0.7]]],
            &[vec![vec![1.0], vec![1.0]]],
            vec![0.5, 0.5],
            0.9,
        )
        .unwrap();
        let aug = augment(&m);
        let idx = aug.index();
        for x in 0..2 {
            for xbar in 0..2 {
                assert_eq!(aug.aug_transition(0, idx.pair(1, xbar), idx.pair(0, x)), 0.0);
            }
        }
        // A^{x=1, x̄=2} = 0.3 reappears in the x0 = 2 block
        assert_eq!(aug.aug_transition(0, idx.pair(1, 1), idx.pair(1, 0)), 0.3);
    }

    #[test]
    fn smoother_two_state_example() {
        let aug = augment(&two_state());
        let xi1 = smoother_update(&aug, &aug.aug_initial(), 0, 0).unwrap();
        let want = [2.0 / 3.0, 0.0, 0.0, 1.0 / 3.0];
        for (a, b) in xi1.probs().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let m0 = marginal_initial(&xi1);
        assert!((m0[0] - 2.0 / 3.0).abs() < 1e-15);
        let mk = marginal_current(&xi1);
        let pi1 = filter_update(&two_state(), &Belief::uniform(2), 0, 0).unwrap();
        assert!((mk[0] - pi1.probs()[0]).abs() < 1e-15);
    }

    #[test]
    fn uninformative_sensor_keeps_initial_marginal() {
        let m = TabularModel::from_nested(
            &[vec![vec![0.1, 0.9, 0.0], vec![0.0, 0.5, 0.5], vec![0.3, 0.3, 0.4]]],
            &[vec![vec![0.5, 0.5]; 3]],
            vec![0.2f64, 0.3, 0.5],
            0.9,
        )
        .unwrap();
        let aug = augment(&m);
        let xi = smoother_update(&aug, &aug.aug_initial(), 0, 1).unwrap();
        for (a, b) in marginal_initial(&xi).iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn aug_likelihood_matches_base() {
        let m = TabularModel::from_nested(
            &[vec![vec![0.1, 0.9], vec![0.4, 0.6]]],
            &[vec![vec![0.7, 0.2, 0.1], vec![0.25, 0.25, 0.5]]],
            vec![0.3, 0.7],
            0.9,
        )
        .unwrap();
        let aug = augment(&m);
        let xi = aug.aug_initial();
        let pi = Belief::new(marginal_current(&xi)).unwrap();
        let total: f64 = (0..3).map(|y| aug_obs_likelihood(&aug, &xi, 0, y)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for y in 0..3 {
            assert!((aug_obs_likelihood(&aug, &xi, 0, y) - obs_likelihood(&m, &pi, 0, y)).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_sensor_on_point_mass() {
        let m = TabularModel::from_nested(
            &[vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            &[vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            vec![0.5, 0.5],
            0.9,
        )
        .unwrap();
        let aug = augment(&m);
        let xi = AugmentedBelief::indicator(2, 0, 1);
        assert_eq!(aug_obs_likelihood(&aug, &xi, 0, 1), 1.0);
        assert_eq!(aug_obs_likelihood(&aug, &xi, 0, 0), 0.0);
        assert!(matches!(
            smoother_update(&aug, &xi, 0, 0),
            Err(Error::ImpossibleObservation { .. })
        ));
    }

    #[test]
    fn marginal_examples() {
        let u: AugmentedBelief<f64> = AugmentedBelief::uniform(4);
        for p in marginal_initial(&u) {
            assert!((p - 0.25).abs() < 1e-15);
        }
        let ind: AugmentedBelief<f64> = AugmentedBelief::indicator(3, 0, 2);
        assert_eq!(marginal_current(&ind), vec![0.0, 0.0, 1.0]);
        assert_eq!(marginal_initial(&ind), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn entropy_examples() {
        let u: AugmentedBelief<f64> = AugmentedBelief::uniform(16);
        assert!((initial_entropy(&u) - 16f64.ln()).abs() < 1e-12);
        assert_eq!(initial_entropy(&AugmentedBelief::<f64>::indicator(16, 3, 7)), 0.0);
        // log2-based evaluation converted to nats as a second implementation
        let m = [2.0 / 3.0, 1.0 / 3.0];
        let bits: f64 = m.iter().map(|p: &f64| -p * p.log2()).sum();
        let xi = AugmentedBelief::new(vec![2.0 / 3.0, 0.0, 0.0, 1.0 / 3.0], 2).unwrap();
        assert!((initial_entropy(&xi) - bits * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((initial_entropy(&xi) - 0.636_514_168_294_813).abs() < 1e-12);
    }

    #[test]
    fn dense_path_matches_specialization() {
        let m = TabularModel::from_nested(
            &[
                vec![vec![0.1, 0.9, 0.0], vec![0.0, 0.5, 0.5], vec![0.3, 0.3, 0.4]],
                vec![vec![1.0, 0.0, 0.0], vec![0.2, 0.2, 0.6], vec![0.0, 0.0, 1.0]],
            ],
            &[
                vec![vec![0.9, 0.1], vec![0.3, 0.7], vec![0.5, 0.5]],
                vec![vec![0.6, 0.4], vec![0.1, 0.9], vec![0.8, 0.2]],
            ],
            vec![0.2f64, 0.3, 0.5],
            0.9,
        )
        .unwrap();
        let aug = augment(&m);
        let dense = aug.to_dense_model();
        assert!(crate::model::validate_model(&dense).passed());
        let mut xi = aug.aug_initial();
        let mut b = Belief::new(xi.probs().to_vec()).unwrap();
        for (u, y) in [(0, 1), (1, 0), (1, 1), (0, 0)] {
            xi = smoother_update(&aug, &xi, u, y).unwrap();
            b = filter_update(&dense, &b, u, y).unwrap();
            for (a, c) in xi.probs().iter().zip(b.probs()) {
                assert!((a - c).abs() < 1e-14);
            }
        }
    }
}
