//! Initial-state cost POMDPs.
//!
//! A discrete POMDP is augmented with the pair `(initial state, current state)`
//! so that stage costs may depend on the unknown initial state and on the
//! posterior uncertainty about it. The augmented belief evolves through a
//! recursive fixed-point smoother, which turns the problem into an ordinary
//! (possibly belief-dependent cost) POMDP solved here with point-based value
//! iteration over alpha vectors.
//!
//! All numerical code is generic over a [`Scalar`] (`f32` or `f64`); the
//! aliases at the bottom of this file name the concrete `f64` types used by
//! the file formats, the simulator and the command line.
//!
//! Indexing is zero-based throughout, with the exception of [`lin_index`] and
//! [`inv_index`], which keep the one-based convention of the pair encoding.

// `!(p >= 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod costs;
pub mod error;
pub mod gridworld;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod scalar;
pub mod sim;
pub mod solver;

pub use augment::{
    aug_obs_likelihood, augment, entropy, initial_entropy, inv_index, lin_index, marginal_current, marginal_initial,
    smoother_update, AugmentedBelief, AugmentedModel, PairIndex,
};
pub use costs::{
    build_pwlc, default_base_points, entropy_tangent, expected_aug_cost, expected_state_cost, rho_bar, BeliefCost,
    InitialStateCost, PwlcApprox, StageCosts, StateControlCost,
};
pub use error::{Error, Result};
pub use model::{
    filter_update, obs_likelihood, validate_model, Belief, BeliefDynamics, TabularModel, ValidationReport, Violation,
};
pub use scalar::Scalar;
pub use solver::{
    backup, policy_action, solve_exact_finite_horizon, solve_point_based, AlphaPolicy, AlphaVector, PointBasedSolver,
    SolveParams,
};

pub type Model = TabularModel<f64>;
pub type ModelF32 = TabularModel<f32>;
pub type BaseBelief = Belief<f64>;
pub type AugModel = AugmentedModel<f64>;
pub type AugModelF32 = AugmentedModel<f32>;
pub type AugBelief = AugmentedBelief<f64>;
pub type AugBeliefF32 = AugmentedBelief<f32>;
pub type Policy = AlphaPolicy<f64>;
pub type PolicyF32 = AlphaPolicy<f32>;
pub type Alpha = AlphaVector<f64>;
pub type IscCost = InitialStateCost<f64>;
pub type Kappa = StateControlCost<f64>;
pub type Psi = BeliefCost<f64>;
pub type Pwlc = PwlcApprox<f64>;
