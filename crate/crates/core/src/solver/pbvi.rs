use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentedModel;
use crate::costs::{
    build_pwlc, default_base_points, BeliefCost, InitialStateCost, PwlcApprox, StageCosts, StateControlCost,
};
use crate::error::{Error, Result};
use crate::model::{BeliefDynamics, TabularModel};
use crate::scalar::Scalar;

use super::backup::{argmin, backup_with, Lookahead};
use super::{AlphaPolicy, AlphaVector};

/// Candidate beliefs closer than this (L1) to a tracked point are dropped.
const DEDUP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    /// Wall-clock cap in seconds. Runs that hit it are not reproducible.
    pub time_budget: f64,
    pub max_belief_points: usize,
    /// Stop sweeping once no tracked point improves by more than this.
    pub epsilon: f64,
    pub rng_seed: u64,
    /// Depth of exploration trajectories from the initial belief.
    pub horizon_bound: usize,
    pub max_rounds: usize,
    pub trajectories_per_round: usize,
    pub sweeps_per_round: usize,
    pub max_sweeps: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            time_budget: 300.0,
            max_belief_points: 300,
            epsilon: 1e-3,
            rng_seed: 0,
            horizon_bound: 12,
            max_rounds: 12,
            trajectories_per_round: 24,
            sweeps_per_round: 20,
            max_sweeps: 400,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_budget > 0.0) {
            return Err(Error::Parse(format!(
                "time budget {} must be positive",
                self.time_budget
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parse(format!("epsilon {} must be positive", self.epsilon)));
        }
        if self.max_belief_points == 0 {
            return Err(Error::Parse("max_belief_points must be positive".into()));
        }
        Ok(())
    }
}

/// How a solve ended. A run that `timed_out` depends on machine speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub sweeps: usize,
    pub belief_points: usize,
    pub converged: bool,
    pub timed_out: bool,
}

struct Point<T> {
    dense: Vec<T>,
    support: Vec<usize>,
}

impl<T: Scalar> Point<T> {
    fn new(dense: Vec<T>) -> Self {
        let support = dense
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != T::zero())
            .map(|(s, _)| s)
            .collect();
        Self { dense, support }
    }

    fn dot(&self, alpha: &[T]) -> T {
        self.support
            .iter()
            .fold(T::zero(), |acc, &s| acc + alpha[s] * self.dense[s])
    }
}

fn l1<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y).abs())
}

fn sample_index<T: Scalar>(weights: &[T], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().map(|w| w.as_f64()).sum();
    let mut target = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.iter().enumerate() {
        let w = w.as_f64();
        if w <= 0.0 {
            continue;
        }
        last = i;
        if target < w {
            return i;
        }
        target -= w;
    }
    last
}

/// Anytime point-based solver.
///
/// Each round grows the belief set from the initial belief with seeded
/// exploration (random action with sampled observation, greedy action with the
/// most likely observation, greedy action with sampled observation), keeping
/// new points in farthest-first L1 order up to the cap, then runs randomized
/// backup sweeps in which every tracked point's value is non-increasing.
pub struct PointBasedSolver<'a, T: Scalar, M> {
    model: &'a M,
    costs: &'a StageCosts<T>,
    psi_hat: Option<PwlcApprox<T>>,
    params: SolveParams,
    points: Vec<Point<T>>,
    values: Vec<T>,
    policy: AlphaPolicy<T>,
    rng: ChaCha8Rng,
    lookahead: Lookahead<T>,
    deadline: Instant,
    sweeps: usize,
}

impl<'a, T: Scalar, M: BeliefDynamics<T>> PointBasedSolver<'a, T, M> {
    pub fn new(
        model: &'a M,
        costs: &'a StageCosts<T>,
        psi_hat: Option<PwlcApprox<T>>,
        params: SolveParams,
    ) -> Result<Self> {
        params.validate()?;
        if costs.n_states() != model.n_states() || costs.n_controls() != model.n_controls() {
            return Err(Error::DimensionMismatch(format!(
                "costs over {}x{} but model has {} states and {} controls",
                costs.n_states(),
                costs.n_controls(),
                model.n_states(),
                model.n_controls()
            )));
        }
        if let Some(p) = &psi_hat {
            if p.planes()[0].len() != model.n_states() {
                return Err(Error::DimensionMismatch("tangent planes do not match the model".into()));
            }
        }
        let gamma = model.discount();
        let stage_max = costs.max() + psi_hat.as_ref().map_or(T::zero(), |p| p.upper_bound());
        let pessimistic = stage_max / (T::one() - gamma);
        let policy = AlphaPolicy::constant(model.n_states(), pessimistic, 0);
        let initial = Point::new(model.initial());
        let values = vec![initial.dot(&policy.alphas()[0].values)];
        let budget = Duration::from_secs_f64(params.time_budget.min(1e9));
        Ok(Self {
            model,
            costs,
            psi_hat,
            rng: ChaCha8Rng::seed_from_u64(params.rng_seed),
            lookahead: Lookahead::new(model.n_states(), model.n_obs()),
            deadline: Instant::now() + budget,
            params,
            points: vec![initial],
            values,
            policy,
            sweeps: 0,
        })
    }

    pub fn policy(&self) -> &AlphaPolicy<T> {
        &self.policy
    }

    pub fn points(&self) -> impl Iterator<Item = &[T]> {
        self.points.iter().map(|p| p.dense.as_slice())
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Current envelope value at each tracked point.
    pub fn point_values(&self) -> &[T] {
        &self.values
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    fn out_of_time(&self) -> bool {
        Instant::now() >= self.deadline
    }

    fn greedy(&self, belief: &[T]) -> usize {
        let mut la = Lookahead::new(self.model.n_states(), self.model.n_obs());
        let gamma = self.model.discount();
        let q: Vec<T> = (0..self.model.n_controls())
            .map(|u| self.costs.expected(belief, u) + gamma * la.continuation(self.model, &self.policy, belief, u))
            .collect();
        argmin(&q)
    }

    /// Grows the belief set; returns the number of points added.
    pub fn expand(&mut self) -> usize {
        let model = self.model;
        let mut candidates: Vec<Vec<T>> = Vec::new();
        for t in 0..self.params.trajectories_per_round {
            let mode = t % 3;
            let mut belief = model.initial();
            for _ in 0..self.params.horizon_bound {
                if self.out_of_time() {
                    break;
                }
                let u = if mode == 0 {
                    self.rng.gen_range(0..model.n_controls())
                } else {
                    self.greedy(&belief)
                };
                let dist = model.obs_distribution(&belief, u);
                let y = if mode == 1 {
                    let mut best = (0, T::neg_infinity());
                    for (y, &p) in dist.iter().enumerate() {
                        if p > best.1 {
                            best = (y, p);
                        }
                    }
                    best.0
                } else {
                    sample_index(&dist, &mut self.rng)
                };
                let Ok(next) = model.bayes_update(&belief, u, y) else {
                    break;
                };
                candidates.push(next.clone());
                belief = next;
            }
        }
        self.merge(candidates)
    }

    fn merge(&mut self, candidates: Vec<Vec<T>>) -> usize {
        let mut room = self.params.max_belief_points.saturating_sub(self.points.len());
        let mut dist: Vec<T> = candidates
            .iter()
            .map(|c| self.points.iter().map(|p| l1(c, &p.dense)).fold(T::infinity(), T::min))
            .collect();
        let mut taken = vec![false; candidates.len()];
        let tol = T::lit(DEDUP_TOL);
        let mut added = 0;
        while room > 0 {
            let mut pick = None;
            let mut far = tol;
            for (i, &d) in dist.iter().enumerate() {
                if !taken[i] && d > far {
                    far = d;
                    pick = Some(i);
                }
            }
            let Some(i) = pick else { break };
            taken[i] = true;
            for (j, c) in candidates.iter().enumerate() {
                if !taken[j] {
                    dist[j] = dist[j].min(l1(c, &candidates[i]));
                }
            }
            let point = Point::new(candidates[i].clone());
            self.values.push(self.policy.value(&point.dense));
            self.points.push(point);
            room -= 1;
            added += 1;
        }
        added
    }

    /// One randomized backup sweep. Returns the largest value decrease over
    /// tracked points, or `None` when the deadline interrupted the sweep (the
    /// partial sweep is discarded).
    pub fn sweep(&mut self) -> Option<T> {
        let n_points = self.points.len();
        let old = self.values.clone();
        let mut new_values = vec![T::infinity(); n_points];
        let mut alphas: Vec<AlphaVector<T>> = Vec::new();
        let mut pending: Vec<usize> = (0..n_points).collect();
        while !pending.is_empty() {
            if self.out_of_time() {
                return None;
            }
            let pick = pending[self.rng.gen_range(0..pending.len())];
            let candidate = backup_with(
                &mut self.lookahead,
                self.model,
                self.costs,
                self.psi_hat.as_ref(),
                &self.policy,
                &self.points[pick].dense,
            );
            let alpha = if self.points[pick].dot(&candidate.values) <= old[pick] {
                candidate
            } else {
                let (idx, _) = self.policy.best(&self.points[pick].dense);
                self.policy.alphas()[idx].clone()
            };
            for (v, p) in new_values.iter_mut().zip(&self.points) {
                let nv = p.dot(&alpha.values);
                if nv < *v {
                    *v = nv;
                }
            }
            alphas.push(alpha);
            pending.retain(|&i| new_values[i] > old[i]);
        }
        let improvement = old.iter().zip(&new_values).fold(T::zero(), |m, (&o, &n)| m.max(o - n));
        self.policy = AlphaPolicy::new(alphas).expect("sweep produces at least one alpha");
        self.values = new_values;
        self.sweeps += 1;
        Some(improvement)
    }

    /// Runs expansion rounds and sweeps until convergence, caps or deadline.
    pub fn run(self) -> Result<AlphaPolicy<T>> {
        self.run_with_stats().map(|(policy, _)| policy)
    }

    pub fn run_with_stats(mut self) -> Result<(AlphaPolicy<T>, SolveStats)> {
        let eps = T::lit(self.params.epsilon);
        let mut completed = 0usize;
        let mut converged = false;
        let mut timed_out = false;
        'rounds: for _ in 0..self.params.max_rounds {
            let added = self.expand();
            converged = false;
            for _ in 0..self.params.sweeps_per_round {
                if self.sweeps >= self.params.max_sweeps {
                    break 'rounds;
                }
                match self.sweep() {
                    None => {
                        timed_out = true;
                        break 'rounds;
                    }
                    Some(improvement) => {
                        completed += 1;
                        if improvement < eps {
                            converged = true;
                            break;
                        }
                    }
                }
            }
            if added == 0 && converged {
                break;
            }
            if self.out_of_time() {
                timed_out = true;
                break;
            }
        }
        while !converged && !timed_out && self.sweeps < self.params.max_sweeps {
            match self.sweep() {
                None => timed_out = true,
                Some(improvement) => {
                    completed += 1;
                    converged = improvement < eps;
                }
            }
        }
        if completed == 0 {
            return Err(Error::BudgetTooSmall(self.params.time_budget));
        }
        let stats = SolveStats {
            sweeps: self.sweeps,
            belief_points: self.points.len(),
            converged,
            timed_out,
        };
        let mut policy = self.policy;
        policy.prune_dominated();
        Ok((policy, stats))
    }
}

fn pwlc_for<T: Scalar>(aug: &AugmentedModel<T>, psi: &BeliefCost<T>) -> Result<Option<PwlcApprox<T>>> {
    match psi {
        BeliefCost::None => Ok(None),
        BeliefCost::InitialEntropy { .. } => Ok(Some(build_pwlc(psi, &default_base_points(aug))?)),
        BeliefCost::TangentSet(approx) => Ok(Some(approx.clone())),
    }
}

/// Solves the augmented belief MDP with initial-state cost `c` and belief cost `psi`.
pub fn solve_point_based<T: Scalar>(
    aug: &AugmentedModel<T>,
    c: &InitialStateCost<T>,
    psi: &BeliefCost<T>,
    params: &SolveParams,
) -> Result<AlphaPolicy<T>> {
    solve_point_based_with_stats(aug, c, psi, params).map(|(policy, _)| policy)
}

pub fn solve_point_based_with_stats<T: Scalar>(
    aug: &AugmentedModel<T>,
    c: &InitialStateCost<T>,
    psi: &BeliefCost<T>,
    params: &SolveParams,
) -> Result<(AlphaPolicy<T>, SolveStats)> {
    let costs = c.augmented();
    let psi_hat = pwlc_for(aug, psi)?;
    PointBasedSolver::new(aug, &costs, psi_hat, params.clone())?.run_with_stats()
}

/// Solves the ordinary POMDP over base states with current-state cost `kappa`.
pub fn solve_base<T: Scalar>(
    model: &TabularModel<T>,
    kappa: &StateControlCost<T>,
    params: &SolveParams,
) -> Result<AlphaPolicy<T>> {
    solve_base_with_stats(model, kappa, params).map(|(policy, _)| policy)
}

pub fn solve_base_with_stats<T: Scalar>(
    model: &TabularModel<T>,
    kappa: &StateControlCost<T>,
    params: &SolveParams,
) -> Result<(AlphaPolicy<T>, SolveStats)> {
    let costs = kappa.stage();
    PointBasedSolver::new(model, &costs, None, params.clone())?.run_with_stats()
}
