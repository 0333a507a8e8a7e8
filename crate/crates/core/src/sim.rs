//! Monte Carlo evaluation of belief policies and the comparison metrics.
//!
//! Every run is scored under the initial-state cost regardless of which cost
//! generated the policy. Both arms also carry a shadow augmented belief, used
//! only for the initial-state entropy and posterior-at-true-`x0` metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{augment, initial_entropy, marginal_initial, smoother_update, AugmentedBelief, AugmentedModel};
use crate::costs::{InitialStateCost, StageCosts};
use crate::error::{Error, Result};
use crate::gridworld::GridExperiment;
use crate::model::{filter_update, Belief, TabularModel};
use crate::solver::{policy_action, AlphaPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    /// Tracks the augmented belief with the smoother.
    Augmented,
    /// Tracks the current-state belief with the filter.
    Base,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Augmented => "augmented",
            Arm::Base => "base",
        }
    }
}

impl std::str::FromStr for Arm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "augmented" => Ok(Arm::Augmented),
            "base" => Ok(Arm::Base),
            other => Err(Error::Parse(format!("unknown arm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub run_id: u64,
    pub true_x0: usize,
    /// `x_0 .. x_T`
    pub states: Vec<usize>,
    /// `u_0 .. u_{T-1}`
    pub controls: Vec<usize>,
    /// `y_1 .. y_T`
    pub observations: Vec<usize>,
    pub step_costs: Vec<f64>,
    pub discounted_cost: f64,
    /// Belief tracked by the arm at `T` (augmented or base).
    pub final_tracked: Vec<f64>,
    /// Shadow augmented belief `ξ_T`.
    pub final_xi: Vec<f64>,
    /// `H(X_0 | y^k, u^{k-1})` for `k = 0..=T`.
    pub entropy_curve: Vec<f64>,
    /// `p(x_0 = true x0 | y^k, u^{k-1})` for `k = 0..=T`.
    pub prob_curve: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    pub fn final_state(&self) -> usize {
        *self.states.last().expect("record holds x_0")
    }

    pub fn final_entropy(&self) -> f64 {
        *self.entropy_curve.last().expect("record holds k = 0")
    }

    pub fn final_prob(&self) -> f64 {
        *self.prob_curve.last().expect("record holds k = 0")
    }
}

/// `Σ_k γ^k c_k`.
pub fn discounted_sum(step_costs: &[f64], discount: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for c in step_costs {
        total += weight * c;
        weight *= discount;
    }
    total
}

/// Terminal occupancy of the goal assigned to the true initial state.
pub fn goal_reached(record: &TrajectoryRecord, goal_map: &[usize]) -> bool {
    record.final_state() == goal_map[record.true_x0]
}

/// Per-run generator: the master seed with the run index as ChaCha stream, so
/// runs with equal index share their random stream across arms.
pub fn run_rng(master_seed: u64, run_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_id);
    rng
}

fn sample(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let mut target = rng.gen::<f64>();
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
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

enum Tracked {
    Augmented(AugmentedBelief<f64>),
    Base(Belief<f64>),
}

/// Everything needed to roll out one arm.
pub struct Simulator<'a> {
    model: &'a TabularModel<f64>,
    aug: AugmentedModel<f64>,
    isc_cost: &'a InitialStateCost<f64>,
    policy: &'a AlphaPolicy<f64>,
    policy_costs: StageCosts<f64>,
    arm: Arm,
    discount: f64,
}

impl<'a> Simulator<'a> {
    /// `policy_costs` are the stage costs the policy was solved for; they
    /// enter the one-step lookahead that picks each control.
    pub fn new(
        model: &'a TabularModel<f64>,
        isc_cost: &'a InitialStateCost<f64>,
        policy: &'a AlphaPolicy<f64>,
        policy_costs: StageCosts<f64>,
        arm: Arm,
        discount: f64,
    ) -> Result<Self> {
        let n = model.n_states();
        let want = match arm {
            Arm::Augmented => n * n,
            Arm::Base => n,
        };
        if policy.n_states() != want || policy_costs.n_states() != want {
            return Err(Error::DimensionMismatch(format!(
                "{} arm needs a policy over {want} states, got {}",
                arm.as_str(),
                policy.n_states()
            )));
        }
        if isc_cost.n_base() != n || isc_cost.n_controls() != model.n_controls() {
            return Err(Error::DimensionMismatch(
                "initial-state cost does not match the model".into(),
            ));
        }
        Ok(Self {
            model,
            aug: augment(model),
            isc_cost,
            policy,
            policy_costs,
            arm,
            discount,
        })
    }

    pub fn for_experiment(experiment: &'a GridExperiment, policy: &'a AlphaPolicy<f64>, arm: Arm) -> Result<Self> {
        let costs = match arm {
            Arm::Augmented => experiment.isc_cost.augmented(),
            Arm::Base => experiment.baseline_cost.stage(),
        };
        Self::new(
            &experiment.model,
            &experiment.isc_cost,
            policy,
            costs,
            arm,
            experiment.model.discount(),
        )
    }

    pub fn arm(&self) -> Arm {
        self.arm
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn run(&self, run_id: u64, horizon: usize, rng: &mut ChaCha8Rng) -> Result<TrajectoryRecord> {
        let model = self.model;
        let x0 = sample(model.initial_belief(), rng);
        let mut x = x0;
        let mut shadow = self.aug.aug_initial();
        let mut tracked = match self.arm {
            Arm::Augmented => Tracked::Augmented(self.aug.aug_initial()),
            Arm::Base => Tracked::Base(Belief::initial(model)),
        };
        let mut states = vec![x0];
        let mut controls = Vec::with_capacity(horizon);
        let mut observations = Vec::with_capacity(horizon);
        let mut step_costs = Vec::with_capacity(horizon);
        let mut entropy_curve = vec![initial_entropy(&shadow)];
        let mut prob_curve = vec![marginal_initial(&shadow)[x0]];
        for _ in 0..horizon {
            let u = match &tracked {
                Tracked::Augmented(xi) => policy_action(self.policy, &self.aug, &self.policy_costs, xi.probs()),
                Tracked::Base(pi) => policy_action(self.policy, model, &self.policy_costs, pi.probs()),
            };
            step_costs.push(self.isc_cost.get(x0, x, u));
            x = sample(model.transition_row(u, x), rng);
            let y = sample(model.observation_row(u, x), rng);
            tracked = match tracked {
                Tracked::Augmented(xi) => Tracked::Augmented(smoother_update(&self.aug, &xi, u, y)?),
                Tracked::Base(pi) => Tracked::Base(filter_update(model, &pi, u, y)?),
            };
            shadow = smoother_update(&self.aug, &shadow, u, y)?;
            states.push(x);
            controls.push(u);
            observations.push(y);
            entropy_curve.push(initial_entropy(&shadow));
            prob_curve.push(marginal_initial(&shadow)[x0]);
        }
        let final_tracked = match tracked {
            Tracked::Augmented(xi) => xi.into_inner(),
            Tracked::Base(pi) => pi.into_inner(),
        };
        Ok(TrajectoryRecord {
            run_id,
            true_x0: x0,
            discounted_cost: discounted_sum(&step_costs, self.discount),
            states,
            controls,
            observations,
            step_costs,
            final_tracked,
            final_xi: shadow.into_inner(),
            entropy_curve,
            prob_curve,
        })
    }
}

pub fn simulate_run(
    experiment: &GridExperiment,
    policy: &AlphaPolicy<f64>,
    arm: Arm,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TrajectoryRecord> {
    Simulator::for_experiment(experiment, policy, arm)?.run(0, horizon, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub horizon: usize,
    pub num_runs: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.num_runs == 0 {
            return Err(Error::Parse("horizon and number of runs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Runs `num_runs` independent rollouts in parallel, returned in run order.
pub fn monte_carlo_records(sim: &Simulator<'_>, config: &RunConfig) -> Result<Vec<TrajectoryRecord>> {
    config.validate()?;
    (0..config.num_runs as u64)
        .into_par_iter()
        .map(|run| {
            let mut rng = run_rng(config.seed, run);
            sim.run(run, config.horizon, &mut rng)
        })
        .collect()
}

pub fn monte_carlo(
    sim: &Simulator<'_>,
    config: &RunConfig,
    goal_map: &[usize],
) -> Result<(Vec<TrajectoryRecord>, MetricsSummary)> {
    let records = monte_carlo_records(sim, config)?;
    let rows: Vec<RunRow> = records.iter().map(|r| RunRow::from_record(r, goal_map)).collect();
    let summary = MetricsSummary::from_rows(&rows)?;
    Ok((records, summary))
}

/// Per-run line of the runs file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub run_id: u64,
    pub true_x0: usize,
    pub discounted_cost: f64,
    pub goal: bool,
    pub entropy_curve: Vec<f64>,
    pub prob_curve: Vec<f64>,
}

impl RunRow {
    pub fn from_record(record: &TrajectoryRecord, goal_map: &[usize]) -> Self {
        Self {
            run_id: record.run_id,
            true_x0: record.true_x0,
            discounted_cost: record.discounted_cost,
            goal: goal_reached(record, goal_map),
            entropy_curve: record.entropy_curve.clone(),
            prob_curve: record.prob_curve.clone(),
        }
    }

    pub fn final_entropy(&self) -> f64 {
        *self.entropy_curve.last().unwrap()
    }

    pub fn final_prob(&self) -> f64 {
        *self.prob_curve.last().unwrap()
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let stderr = if n > 1.0 {
            let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub num_runs: usize,
    pub horizon: usize,
    pub avg_discounted_cost: Estimate,
    pub goals_reached: usize,
    pub avg_final_initial_entropy: Estimate,
    pub avg_final_prob_at_true_x0: Estimate,
    /// Mean initial-state entropy for `k = 0..=T`.
    pub entropy_curve: Vec<Estimate>,
    /// Mean posterior probability at the true initial state for `k = 0..=T`.
    pub prob_curve: Vec<Estimate>,
}

impl MetricsSummary {
    pub fn from_rows(rows: &[RunRow]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::Parse("no runs to summarize".into()));
        };
        let points = first.entropy_curve.len();
        if rows
            .iter()
            .any(|r| r.entropy_curve.len() != points || r.prob_curve.len() != points)
        {
            return Err(Error::ConfigMismatch("runs with different horizons".into()));
        }
        let curve = |pick: fn(&RunRow) -> &Vec<f64>| -> Vec<Estimate> {
            (0..points)
                .map(|k| Estimate::of(rows.iter().map(move |r| pick(r)[k])))
                .collect()
        };
        Ok(Self {
            num_runs: rows.len(),
            horizon: points - 1,
            avg_discounted_cost: Estimate::of(rows.iter().map(|r| r.discounted_cost)),
            goals_reached: rows.iter().filter(|r| r.goal).count(),
            avg_final_initial_entropy: Estimate::of(rows.iter().map(RunRow::final_entropy)),
            avg_final_prob_at_true_x0: Estimate::of(rows.iter().map(RunRow::final_prob)),
            entropy_curve: curve(|r| &r.entropy_curve),
            prob_curve: curve(|r| &r.prob_curve),
        })
    }
}

/// Published reference values (initial-state cost arm, baseline arm).
pub const REFERENCE_ROWS: [(&str, f64, f64); 4] = [
    ("discounted_cost", 6.26, 7.91),
    ("goals_reached", 8031.0, 4116.0),
    ("final_initial_state_entropy", 1.54, 1.72),
    ("final_initial_state_prob", 0.296, 0.245),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub criterion: &'static str,
    pub isc: f64,
    pub base: f64,
    pub isc_stderr: f64,
    pub base_stderr: f64,
    pub reference_isc: f64,
    pub reference_base: f64,
}

impl ComparisonRow {
    pub fn delta(&self) -> f64 {
        self.isc - self.base
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub isc_summary: MetricsSummary,
    pub base_summary: MetricsSummary,
}

/// Pairs the two arms' summaries criterion by criterion.
pub fn report(isc: &MetricsSummary, base: &MetricsSummary) -> Result<Comparison> {
    if isc.horizon != base.horizon {
        return Err(Error::ConfigMismatch(format!(
            "horizons differ: {} vs {}",
            isc.horizon, base.horizon
        )));
    }
    let pairs = [
        (isc.avg_discounted_cost, base.avg_discounted_cost),
        (
            Estimate {
                mean: isc.goals_reached as f64,
                stderr: 0.0,
            },
            Estimate {
                mean: base.goals_reached as f64,
                stderr: 0.0,
            },
        ),
        (isc.avg_final_initial_entropy, base.avg_final_initial_entropy),
        (isc.avg_final_prob_at_true_x0, base.avg_final_prob_at_true_x0),
    ];
    let rows = REFERENCE_ROWS
        .iter()
        .zip(pairs)
        .map(|(&(criterion, ref_isc, ref_base), (a, b))| ComparisonRow {
            criterion,
            isc: a.mean,
            base: b.mean,
            isc_stderr: a.stderr,
            base_stderr: b.stderr,
            reference_isc: ref_isc,
            reference_base: ref_base,
        })
        .collect();
    Ok(Comparison {
        rows,
        isc_summary: isc.clone(),
        base_summary: base.clone(),
    })
}
