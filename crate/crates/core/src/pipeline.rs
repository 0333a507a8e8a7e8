//! File-to-file steps of the experiment: build a grid, solve, simulate,
//! report. The command line is a thin wrapper around these.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::augment::augment;
use crate::error::{Error, Result};
use crate::gridworld::{GridExperiment, GridSpec};
use crate::io::{self, BeliefSpace, CostFile, PolicyFile, PsiSpec, RunMeta};
use crate::sim::{self, Arm, Comparison, MetricsSummary, RunConfig, RunRow, Simulator, TrajectoryRecord};
use crate::solver::{solve_base_with_stats, solve_point_based_with_stats, SolveParams, SolveStats};

/// `dir/stem<suffix>` for `dir/stem.ext`.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

#[derive(Debug, Clone)]
pub struct GridFiles {
    pub model: PathBuf,
    pub isc_cost: PathBuf,
    pub kappa: PathBuf,
}

/// Writes the model to `out` and both cost files next to it.
pub fn build_grid(spec: GridSpec, out: &Path) -> Result<(GridExperiment, GridFiles)> {
    let exp = GridExperiment::build(spec)?;
    let files = GridFiles {
        model: out.to_path_buf(),
        isc_cost: with_suffix(out, ".isc.json"),
        kappa: with_suffix(out, ".kappa.json"),
    };
    io::save_model(&files.model, &exp.model)?;
    let goals = Some(exp.goal_map.clone());
    io::write_json(
        &files.isc_cost,
        &CostFile::initial_state(&exp.isc_cost, PsiSpec::none(), goals.clone()),
    )?;
    io::write_json(&files.kappa, &CostFile::state_control(&exp.baseline_cost, goals))?;
    Ok((exp, files))
}

#[derive(Debug, Clone)]
pub enum CostSource {
    /// Initial-state cost; solves over augmented beliefs.
    InitialState(PathBuf),
    /// State-control cost; solves over base beliefs.
    StateControl(PathBuf),
}

#[derive(Debug, Clone)]
pub struct SolveJob {
    pub model: PathBuf,
    pub costs: CostSource,
    /// Overrides the belief cost stored in an initial-state cost file.
    pub psi: Option<PsiSpec>,
    pub discount: Option<f64>,
    pub params: SolveParams,
    pub out: PathBuf,
}

pub fn solve(job: &SolveJob) -> Result<(PolicyFile, SolveStats)> {
    let mut model = io::load_model(&job.model)?;
    if let Some(g) = job.discount {
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::Parse(format!("discount {g} not in (0, 1)")));
        }
        model = model.with_discount(g);
    }
    let (space, psi, (policy, stats)) = match &job.costs {
        CostSource::InitialState(path) => {
            let (c, file_psi) = io::load_costs(path)?.into_initial_state()?;
            let psi = job.psi.unwrap_or(file_psi);
            let aug = augment(&model);
            let solved = solve_point_based_with_stats(&aug, &c, &psi.to_belief_cost(), &job.params)?;
            (BeliefSpace::Augmented, psi, solved)
        }
        CostSource::StateControl(path) => {
            if job.psi.is_some_and(|p| p != PsiSpec::none()) {
                return Err(Error::UnsupportedBeliefCost(
                    "belief costs need an initial-state cost (augmented beliefs)".into(),
                ));
            }
            let kappa = io::load_costs(path)?.into_state_control()?;
            (
                BeliefSpace::Base,
                PsiSpec::none(),
                solve_base_with_stats(&model, &kappa, &job.params)?,
            )
        }
    };
    let file = PolicyFile {
        belief_space: space,
        n_controls: model.n_controls(),
        discount: model.discount(),
        params: job.params.clone(),
        psi,
        policy,
    };
    io::save_policy(&job.out, &file)?;
    Ok((file, stats))
}

#[derive(Debug, Clone)]
pub struct SimulateJob {
    pub model: PathBuf,
    pub policy: PathBuf,
    /// Scoring cost; must carry a goal map.
    pub isc_cost: PathBuf,
    /// Required for the base arm: the cost its policy was solved for.
    pub kappa: Option<PathBuf>,
    pub arm: Arm,
    pub config: RunConfig,
    pub out: PathBuf,
    pub records: Option<PathBuf>,
}

pub fn simulate(job: &SimulateJob) -> Result<(MetricsSummary, Vec<TrajectoryRecord>)> {
    let policy_file = io::load_policy(&job.policy)?;
    if policy_file.belief_space.arm() != job.arm {
        return Err(Error::ConfigMismatch(format!(
            "policy is over {} beliefs but arm is {}",
            policy_file.belief_space.as_str(),
            job.arm.as_str()
        )));
    }
    let model = io::load_model(&job.model)?.with_discount(policy_file.discount);
    let isc_file = io::load_costs(&job.isc_cost)?;
    let goal_map = isc_file
        .goal_map()
        .map(<[usize]>::to_vec)
        .ok_or_else(|| Error::Parse("initial-state cost file has no goal_map".into()))?;
    if goal_map.len() != model.n_states() || goal_map.iter().any(|&g| g >= model.n_states()) {
        return Err(Error::DimensionMismatch("goal_map does not match the model".into()));
    }
    let (isc_cost, _) = isc_file.into_initial_state()?;
    let (policy_costs, cost_path) = match job.arm {
        Arm::Augmented => (isc_cost.augmented(), job.isc_cost.clone()),
        Arm::Base => {
            let path = job
                .kappa
                .clone()
                .ok_or_else(|| Error::Parse("the base arm needs a state-control cost".into()))?;
            (io::load_costs(&path)?.into_state_control()?.stage(), path)
        }
    };
    let simulator = Simulator::new(
        &model,
        &isc_cost,
        &policy_file.policy,
        policy_costs,
        job.arm,
        policy_file.discount,
    )?;
    let (records, summary) = sim::monte_carlo(&simulator, &job.config, &goal_map)?;
    let rows: Vec<RunRow> = records.iter().map(|r| RunRow::from_record(r, &goal_map)).collect();
    let meta = RunMeta {
        arm: job.arm,
        horizon: job.config.horizon,
        num_runs: job.config.num_runs,
        seed: job.config.seed,
        discount: policy_file.discount,
        model_sha256: io::file_sha256(&job.model)?,
        policy_sha256: io::file_sha256(&job.policy)?,
        cost_sha256: io::file_sha256(&cost_path)?,
    };
    io::write_runs(&job.out, &rows, &meta)?;
    if let Some(path) = &job.records {
        io::write_records(path, &records)?;
    }
    Ok((summary, records))
}

#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub table: PathBuf,
    pub curves: PathBuf,
}

/// Compares two runs files; writes the table to `out` and the per-step
/// curves to `<stem>.curves.csv`.
pub fn report(isc_runs: &Path, base_runs: &Path, out: &Path) -> Result<(Comparison, ReportFiles)> {
    let (isc_rows, isc_meta) = io::read_runs(isc_runs)?;
    let (base_rows, base_meta) = io::read_runs(base_runs)?;
    if isc_meta.arm != Arm::Augmented || base_meta.arm != Arm::Base {
        return Err(Error::ConfigMismatch("expected an augmented run and a base run".into()));
    }
    if isc_meta.model_sha256 != base_meta.model_sha256 {
        return Err(Error::ConfigMismatch(
            "the arms were simulated on different models".into(),
        ));
    }
    if isc_meta.num_runs != base_meta.num_runs || isc_meta.seed != base_meta.seed {
        return Err(Error::ConfigMismatch(
            "runs are not paired: run count or seed differs".into(),
        ));
    }
    let cmp = sim::report(
        &MetricsSummary::from_rows(&isc_rows)?,
        &MetricsSummary::from_rows(&base_rows)?,
    )?;
    let files = ReportFiles {
        table: out.to_path_buf(),
        curves: with_suffix(out, ".curves.csv"),
    };
    fs::write(&files.table, comparison_table(&cmp, &isc_meta, &base_meta))?;
    fs::write(&files.curves, curves_table(&cmp))?;
    Ok((cmp, files))
}

pub fn comparison_table(cmp: &Comparison, isc: &RunMeta, base: &RunMeta) -> String {
    let mut out = String::new();
    for (name, m) in [("isc", isc), ("base", base)] {
        let _ = writeln!(
            out,
            "# {name}: runs={} horizon={} seed={} discount={} model_sha256={} policy_sha256={} cost_sha256={}",
            m.num_runs, m.horizon, m.seed, m.discount, m.model_sha256, m.policy_sha256, m.cost_sha256
        );
    }
    out.push_str("criterion,isc,base,delta,isc_stderr,base_stderr,reference_isc,reference_base\n");
    for r in &cmp.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.criterion,
            r.isc,
            r.base,
            r.delta(),
            r.isc_stderr,
            r.base_stderr,
            r.reference_isc,
            r.reference_base
        );
    }
    out
}

pub fn curves_table(cmp: &Comparison) -> String {
    let mut out = String::from(
        "k,isc_entropy,isc_entropy_stderr,base_entropy,base_entropy_stderr,\
         isc_prob,isc_prob_stderr,base_prob,base_prob_stderr\n",
    );
    let (isc, base) = (&cmp.isc_summary, &cmp.base_summary);
    for k in 0..=isc.horizon {
        let (ih, bh) = (isc.entropy_curve[k], base.entropy_curve[k]);
        let (ip, bp) = (isc.prob_curve[k], base.prob_curve[k]);
        let _ = writeln!(
            out,
            "{k},{},{},{},{},{},{},{},{}",
            ih.mean, ih.stderr, bh.mean, bh.stderr, ip.mean, ip.stderr, bp.mean, bp.stderr
        );
    }
    out
}
