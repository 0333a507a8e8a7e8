#![allow(dead_code)]

use isc_pomdp::gridworld::{GridExperiment, GridSpec};
use isc_pomdp::{InitialStateCost, TabularModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random pmf; with `sparse`, roughly a third of the entries are zero.
pub fn random_pmf(rng: &mut ChaCha8Rng, n: usize, sparse: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            if sparse && rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(0.01..1.0)
            }
        })
        .collect();
    if v.iter().all(|&p| p == 0.0) {
        v[rng.gen_range(0..n)] = 1.0;
    }
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= total);
    v
}

pub fn random_model(rng: &mut ChaCha8Rng, nx: usize, nu: usize, ny: usize, sparse: bool) -> TabularModel<f64> {
    let transition: Vec<Vec<Vec<f64>>> = (0..nu)
        .map(|_| (0..nx).map(|_| random_pmf(rng, nx, sparse)).collect())
        .collect();
    let observation: Vec<Vec<Vec<f64>>> = (0..nu)
        .map(|_| (0..nx).map(|_| random_pmf(rng, ny, sparse)).collect())
        .collect();
    let initial = random_pmf(rng, nx, false);
    let discount = rng.gen_range(0.5..0.95);
    TabularModel::from_nested(&transition, &observation, initial, discount).unwrap()
}

/// Random model with sizes drawn up to the given caps.
pub fn random_small_model(rng: &mut ChaCha8Rng, max_x: usize, max_u: usize, max_y: usize) -> TabularModel<f64> {
    let nx = rng.gen_range(1..=max_x);
    let nu = rng.gen_range(1..=max_u);
    let ny = rng.gen_range(1..=max_y);
    let sparse = rng.gen_bool(0.5);
    random_model(rng, nx, nu, ny, sparse)
}

pub fn sample(rng: &mut ChaCha8Rng, pmf: &[f64]) -> usize {
    let mut t = rng.gen::<f64>();
    let mut last = 0;
    for (i, &p) in pmf.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last = i;
        if t < p {
            return i;
        }
        t -= p;
    }
    last
}

/// Controls and observations of a trajectory drawn from the model.
pub fn random_trajectory(rng: &mut ChaCha8Rng, model: &TabularModel<f64>, len: usize) -> Vec<(usize, usize)> {
    let mut x = sample(rng, model.initial_belief());
    (0..len)
        .map(|_| {
            let u = rng.gen_range(0..model.n_controls());
            x = sample(rng, model.transition_row(u, x));
            let y = sample(rng, model.observation_row(u, x));
            (u, y)
        })
        .collect()
}

/// `p(x0, xk | y^k, u^{k-1})` by summing over every state path, indexed `x0 + n·xk`.
pub fn brute_force_joint(model: &TabularModel<f64>, steps: &[(usize, usize)]) -> Vec<f64> {
    let n = model.n_states();
    let mut joint = vec![0.0; n * n];
    let k = steps.len();
    let paths = n.pow(k as u32 + 1);
    for code in 0..paths {
        let mut path = Vec::with_capacity(k + 1);
        let mut c = code;
        for _ in 0..=k {
            path.push(c % n);
            c /= n;
        }
        let mut w = model.initial_belief()[path[0]];
        for (j, &(u, y)) in steps.iter().enumerate() {
            if w == 0.0 {
                break;
            }
            w *= model.transition(u, path[j], path[j + 1]) * model.observation(u, path[j + 1], y);
        }
        joint[path[0] + n * path[k]] += w;
    }
    let total: f64 = joint.iter().sum();
    joint.iter_mut().for_each(|p| *p /= total);
    joint
}

/// Two states, controls stay (0) and swap (1), a noiseless position sensor,
/// uniform prior and `c(x0, x, u) = 1(x ≠ x0)`.
pub fn toy() -> (TabularModel<f64>, InitialStateCost<f64>) {
    let stay = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let swap = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let sensor = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let model = TabularModel::from_nested(&[stay, swap], &[sensor.clone(), sensor], vec![0.5, 0.5], 0.95).unwrap();
    let c = InitialStateCost::from_fn(2, 2, |x0, x, _| if x == x0 { 0.0 } else { 1.0 });
    (model, c)
}

/// 2×2 grid with noiseless wall sensing and slip 0.2.
pub fn grid_2x2() -> GridExperiment {
    GridExperiment::build(GridSpec::open(2, 2, 0.2, 1.0, 0.0).unwrap()).unwrap()
}

/// Random point of the simplex, occasionally with zeros.
pub fn random_belief(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let sparse = rng.gen_bool(0.3);
    random_pmf(rng, n, sparse)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
