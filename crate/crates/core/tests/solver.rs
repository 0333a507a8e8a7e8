mod common;

use common::*;
use isc_pomdp::io::{BeliefSpace, PolicyFile, PsiSpec};
use isc_pomdp::solver::{exact_q_values, q_values, solve_base, DEFAULT_NODE_CAP};
use isc_pomdp::{
    augment, backup, policy_action, solve_exact_finite_horizon, solve_point_based, AlphaPolicy, AlphaVector,
    BeliefCost, Error, InitialStateCost, PointBasedSolver, SolveParams, StateControlCost, TabularModel,
};
use proptest::prelude::*;
use rand::Rng;

fn quick_params(seed: u64) -> SolveParams {
    SolveParams {
        time_budget: 120.0,
        max_belief_points: 60,
        rng_seed: seed,
        max_rounds: 8,
        trajectories_per_round: 12,
        sweeps_per_round: 30,
        max_sweeps: 300,
        epsilon: 1e-7,
        ..SolveParams::default()
    }
}

fn envelope_is_concave(policy: &AlphaPolicy<f64>, r: &mut rand_chacha::ChaCha8Rng, trials: usize) -> bool {
    let n = policy.n_states();
    (0..trials).all(|_| {
        let a = random_belief(r, n);
        let b = random_belief(r, n);
        let l: f64 = r.gen();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| l * x + (1.0 - l) * y).collect();
        policy.value(&mix) >= l * policy.value(&a) + (1.0 - l) * policy.value(&b) - 1e-12
    })
}

/// Optimal 3-stage cost by enumerating every deterministic plan
/// `(u0, u1(y1), u2(y1, y2))` and every state/observation path.
fn plan_enumeration_h3(model: &TabularModel<f64>, c: &InitialStateCost<f64>) -> f64 {
    let (n, nu, ny) = (model.n_states(), model.n_controls(), model.n_obs());
    let g = model.discount();
    let plans = nu * nu.pow(ny as u32) * nu.pow((ny * ny) as u32);
    let mut best = f64::INFINITY;
    for code in 0..plans {
        let mut k = code;
        let u0 = k % nu;
        k /= nu;
        let u1: Vec<usize> = (0..ny)
            .map(|_| {
                let u = k % nu;
                k /= nu;
                u
            })
            .collect();
        let u2: Vec<usize> = (0..ny * ny)
            .map(|_| {
                let u = k % nu;
                k /= nu;
                u
            })
            .collect();
        let mut total = 0.0;
        for x0 in 0..n {
            let p0 = model.initial_belief()[x0];
            total += p0 * c.get(x0, x0, u0);
            for x1 in 0..n {
                for y1 in 0..ny {
                    let p1 = p0 * model.transition(u0, x0, x1) * model.observation(u0, x1, y1);
                    if p1 == 0.0 {
                        continue;
                    }
                    let a1 = u1[y1];
                    total += g * p1 * c.get(x0, x1, a1);
                    for x2 in 0..n {
                        for y2 in 0..ny {
                            let p2 = p1 * model.transition(a1, x1, x2) * model.observation(a1, x2, y2);
                            total += g * g * p2 * c.get(x0, x2, u2[y1 * ny + y2]);
                        }
                    }
                }
            }
        }
        best = best.min(total);
    }
    best
}

#[test]
fn constant_cost_gives_geometric_value() {
    let mut r = rng(1);
    let model = random_model(&mut r, 3, 2, 2, false).with_discount(0.95);
    let c = InitialStateCost::from_fn(3, 2, |_, _, _| 1.0);
    let aug = augment(&model);
    let policy = solve_point_based(&aug, &c, &BeliefCost::None, &quick_params(0)).unwrap();
    for _ in 0..50 {
        let b = random_belief(&mut r, 9);
        assert!((policy.value(&b) - 20.0).abs() < 1e-6);
    }
    assert_eq!(
        policy_action(&policy, &aug, &c.augmented(), aug.aug_initial().probs()),
        0
    );
}

#[test]
fn zero_cost_backup_is_zero() {
    let mut r = rng(2);
    let model = random_model(&mut r, 3, 2, 2, false);
    let aug = augment(&model);
    let costs = InitialStateCost::from_fn(3, 2, |_, _, _| 0.0).augmented();
    let policy = AlphaPolicy::constant(9, 0.0, 0);
    let alpha = backup(&aug, &costs, None, &policy, aug.aug_initial().probs());
    assert!(alpha.values.iter().all(|&v| v == 0.0));
}

#[test]
fn single_state_backup_is_a_fixed_point() {
    let model = TabularModel::<f64>::from_nested(&[vec![vec![1.0]]], &[vec![vec![1.0]]], vec![1.0], 0.95).unwrap();
    let costs = StateControlCost::from_fn(1, 1, |_, _| 1.0).stage();
    let policy = AlphaPolicy::constant(1, 20.0, 0);
    let alpha = backup(&model, &costs, None, &policy, &[1.0]);
    assert!((alpha.values[0] - 20.0).abs() < 1e-12);
}

#[test]
fn toy_value_is_zero_and_stay_is_chosen() {
    let (model, c) = toy();
    let aug = augment(&model);
    let xi0 = aug.aug_initial();
    // value iteration contracts by γ per sweep from the pessimistic 20
    let params = SolveParams {
        sweeps_per_round: 100,
        max_sweeps: 800,
        epsilon: 1e-9,
        ..quick_params(3)
    };
    let policy = solve_point_based(&aug, &c, &BeliefCost::None, &params).unwrap();
    assert!(policy.value(xi0.probs()).abs() < 1e-6);
    let exact = solve_exact_finite_horizon(
        &aug,
        &c.augmented(),
        &BeliefCost::None,
        xi0.probs(),
        20,
        DEFAULT_NODE_CAP,
    )
    .unwrap();
    assert!(exact.abs() < 1e-12);
    assert_eq!(policy_action(&policy, &aug, &c.augmented(), xi0.probs()), 0);
    let q = exact_q_values(
        &aug,
        &c.augmented(),
        &BeliefCost::None,
        xi0.probs(),
        20,
        DEFAULT_NODE_CAP,
    )
    .unwrap();
    assert!(q[0] < q[1]);
}

#[test]
fn exact_horizon_three_matches_plan_enumeration() {
    let (model, c) = toy();
    let aug = augment(&model);
    let xi0 = aug.aug_initial();
    let exact = solve_exact_finite_horizon(
        &aug,
        &c.augmented(),
        &BeliefCost::None,
        xi0.probs(),
        3,
        DEFAULT_NODE_CAP,
    )
    .unwrap();
    assert!((exact - plan_enumeration_h3(&model, &c)).abs() < 1e-12);

    let mut r = rng(4);
    for _ in 0..20 {
        let sparse = r.gen_bool(0.5);
        let model = random_model(&mut r, 2, 2, 2, sparse);
        let table: Vec<f64> = (0..8).map(|_| r.gen_range(0.0..1.0)).collect();
        let c = InitialStateCost::new(2, 2, table).unwrap();
        let aug = augment(&model);
        let exact = solve_exact_finite_horizon(
            &aug,
            &c.augmented(),
            &BeliefCost::None,
            aug.aug_initial().probs(),
            3,
            DEFAULT_NODE_CAP,
        )
        .unwrap();
        assert!((exact - plan_enumeration_h3(&model, &c)).abs() < 1e-12);
    }
}

#[test]
fn exact_oracle_small_cases() {
    let (model, c) = toy();
    let aug = augment(&model);
    let xi = aug.aug_initial();
    let costs = c.augmented();
    assert_eq!(
        solve_exact_finite_horizon(&aug, &costs, &BeliefCost::None, xi.probs(), 0, DEFAULT_NODE_CAP).unwrap(),
        0.0
    );
    let psi = BeliefCost::InitialEntropy { weight: 1.0 };
    let one = solve_exact_finite_horizon(&aug, &costs, &psi, xi.probs(), 1, DEFAULT_NODE_CAP).unwrap();
    assert!((one - 2f64.ln()).abs() < 1e-12);
    assert!(matches!(
        solve_exact_finite_horizon(&aug, &costs, &psi, xi.probs(), 10, 3),
        Err(Error::TreeTooLarge(3))
    ));
}

#[test]
fn grid_2x2_agrees_with_exact_oracle() {
    let exp = grid_2x2();
    let aug = augment(&exp.model);
    let costs = exp.isc_cost.augmented();
    let xi0 = aug.aug_initial();
    let exact = solve_exact_finite_horizon(&aug, &costs, &BeliefCost::None, xi0.probs(), 20, DEFAULT_NODE_CAP).unwrap();
    let policy = solve_point_based(&aug, &exp.isc_cost, &BeliefCost::None, &quick_params(5)).unwrap();
    let bound = 0.95f64.powi(20) * costs.max_abs() / 0.05 + 0.05;
    assert!((policy.value(xi0.probs()) - exact).abs() <= bound);
}

#[test]
fn budget_too_small() {
    let (model, c) = toy();
    let aug = augment(&model);
    let params = SolveParams {
        time_budget: 1e-12,
        ..quick_params(0)
    };
    assert!(matches!(
        solve_point_based(&aug, &c, &BeliefCost::None, &params),
        Err(Error::BudgetTooSmall(_))
    ));
}

#[test]
fn identical_actions_tie_to_lowest_index() {
    let mut r = rng(6);
    let row = random_pmf(&mut r, 2, false);
    let t = vec![row.clone(), row];
    let o = vec![vec![0.3, 0.7], vec![0.6, 0.4]];
    let model = TabularModel::from_nested(
        &[t.clone(), t.clone(), t],
        &[o.clone(), o.clone(), o],
        vec![0.5, 0.5],
        0.9,
    )
    .unwrap();
    let kappa = StateControlCost::from_fn(2, 3, |x, _| x as f64);
    let policy = solve_base(&model, &kappa, &quick_params(1)).unwrap();
    assert_eq!(policy_action(&policy, &model, &kappa.stage(), &[0.4, 0.6]), 0);
}

#[test]
fn solver_is_deterministic() {
    let exp = grid_2x2();
    let aug = augment(&exp.model);
    let a = solve_point_based(&aug, &exp.isc_cost, &BeliefCost::None, &quick_params(9)).unwrap();
    let b = solve_point_based(&aug, &exp.isc_cost, &BeliefCost::None, &quick_params(9)).unwrap();
    assert_eq!(a, b);
    let file = |policy| PolicyFile {
        belief_space: BeliefSpace::Augmented,
        n_controls: 5,
        discount: 0.95,
        params: quick_params(9),
        psi: PsiSpec::none(),
        policy,
    };
    assert_eq!(file(a).to_text().unwrap(), file(b).to_text().unwrap());
}

#[test]
fn saved_policy_values_are_bit_identical() {
    let mut r = rng(10);
    let model = random_model(&mut r, 3, 2, 3, false);
    let aug = augment(&model);
    let c = InitialStateCost::from_fn(3, 2, |x0, x, u| ((x0 + 2 * x + u) % 3) as f64);
    let policy = solve_point_based(&aug, &c, &BeliefCost::InitialEntropy { weight: 0.5 }, &quick_params(2)).unwrap();
    let file = PolicyFile {
        belief_space: BeliefSpace::Augmented,
        n_controls: 2,
        discount: model.discount(),
        params: quick_params(2),
        psi: PsiSpec::entropy(0.5),
        policy,
    };
    let back = PolicyFile::parse(&file.to_text().unwrap()).unwrap();
    for _ in 0..200 {
        let b = random_belief(&mut r, 9);
        assert_eq!(file.policy.value(&b).to_bits(), back.policy.value(&b).to_bits());
    }
}

#[test]
fn sweeps_never_raise_tracked_values() {
    let mut r = rng(12);
    let model = random_model(&mut r, 3, 3, 3, true).with_discount(0.9);
    let aug = augment(&model);
    let c = InitialStateCost::from_fn(3, 3, |x0, x, u| if x == x0 { 0.1 * u as f64 } else { 1.0 });
    let costs = c.augmented();
    let mut solver = PointBasedSolver::new(&aug, &costs, None, quick_params(4)).unwrap();
    for _ in 0..4 {
        solver.expand();
        let mut prev = solver.point_values().to_vec();
        for _ in 0..10 {
            solver.sweep().unwrap();
            let now = solver.point_values();
            assert!(now.iter().zip(&prev).all(|(n, p)| *n <= p + 1e-9));
            prev = now.to_vec();
        }
    }
    assert!(envelope_is_concave(solver.policy(), &mut r, 1000));
}

#[test]
fn pruning_keeps_the_envelope() {
    let mut r = rng(14);
    let n = 6;
    for _ in 0..20 {
        let mut alphas: Vec<AlphaVector<f64>> = (0..12)
            .map(|i| AlphaVector {
                values: (0..n).map(|_| r.gen_range(0.0..10.0)).collect(),
                action: i % 3,
            })
            .collect();
        // dominated and duplicate entries
        let base = alphas[0].clone();
        alphas.push(AlphaVector {
            values: base.values.iter().map(|v| v + 1.0).collect(),
            action: 2,
        });
        alphas.push(base);
        let full = AlphaPolicy::new(alphas).unwrap();
        let mut pruned = full.clone();
        pruned.prune_dominated();
        assert!(pruned.len() <= full.len() - 2);
        for _ in 0..1000 {
            let b = random_belief(&mut r, n);
            assert!((pruned.value(&b) - full.value(&b)).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backup_matches_lookahead_and_bounds_elsewhere(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = random_small_model(&mut r, 3, 3, 3);
        let n = model.n_states();
        let aug = augment(&model);
        let c_table: Vec<f64> = (0..n * n * model.n_controls()).map(|_| r.gen_range(0.0..2.0)).collect();
        let costs = InitialStateCost::new(n, model.n_controls(), c_table).unwrap().augmented();
        let alphas: Vec<AlphaVector<f64>> = (0..5)
            .map(|i| AlphaVector {
                values: (0..n * n).map(|_| r.gen_range(0.0..30.0)).collect(),
                action: i % model.n_controls(),
            })
            .collect();
        let policy = AlphaPolicy::new(alphas).unwrap();
        let at = random_belief(&mut r, n * n);
        let alpha = backup(&aug, &costs, None, &policy, &at);
        let q = q_values(&aug, &costs, 0.0, &policy, &at);
        let best = q.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!((alpha.dot(&at) - best).abs() <= 1e-9);
        for _ in 0..20 {
            let other = random_belief(&mut r, n * n);
            let q = q_values(&aug, &costs, 0.0, &policy, &other);
            let best = q.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(alpha.dot(&other) >= best - 1e-9);
        }
    }

    #[test]
    fn random_instances_agree_with_exact_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let nu = r.gen_range(1..=2);
        let ny = r.gen_range(1..=2);
        let sparse = r.gen_bool(0.5);
        let model = random_model(&mut r, 2, nu, ny, sparse).with_discount(0.8);
        let c_table: Vec<f64> = (0..4 * nu).map(|_| r.gen_range(0.0..1.0)).collect();
        let c = InitialStateCost::new(2, nu, c_table).unwrap();
        let aug = augment(&model);
        let xi0 = aug.aug_initial();
        let horizon = 10;
        let exact = solve_exact_finite_horizon(&aug, &c.augmented(), &BeliefCost::None, xi0.probs(), horizon, DEFAULT_NODE_CAP).unwrap();
        let policy = solve_point_based(&aug, &c, &BeliefCost::None, &quick_params(seed)).unwrap();
        let bound = 0.8f64.powi(horizon as i32) * c.augmented().max_abs() / 0.2 + 0.05;
        prop_assert!((policy.value(xi0.probs()) - exact).abs() <= bound);
        prop_assert!(envelope_is_concave(&policy, &mut r, 200));
    }
}
