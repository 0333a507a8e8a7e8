use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use isc_pomdp::gridworld::{GridSpec, FIG1_APPROX};
use isc_pomdp::io::{self, PsiSpec};
use isc_pomdp::pipeline::{self, CostSource, SimulateJob, SolveJob};
use isc_pomdp::sim::{Arm, MetricsSummary, RunConfig};
use isc_pomdp::solver::SolveParams;
use isc_pomdp::Error;

/// Initial-state cost POMDP toolkit.
#[derive(Parser)]
#[command(name = "isc-pomdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a grid model plus its cost files.
    BuildGrid(BuildGrid),
    /// Solve for an alpha-vector policy.
    Solve(Solve),
    /// Roll out a policy and write one line per run.
    Simulate(Simulate),
    /// Compare the runs files of the two arms.
    Report(Report),
}

#[derive(Args)]
struct BuildGrid {
    /// Grid config JSON.
    #[arg(long, conflicts_with = "layout")]
    config: Option<PathBuf>,
    /// Built-in layout (fig1-approx).
    #[arg(long)]
    layout: Option<String>,
    /// Model JSON; `<stem>.isc.json` and `<stem>.kappa.json` are written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Solve {
    #[arg(long)]
    model: PathBuf,
    /// Initial-state cost file; solves over augmented beliefs.
    #[arg(long, conflicts_with = "kappa", required_unless_present = "kappa")]
    isc_cost: Option<PathBuf>,
    /// State-control cost file; solves over base beliefs.
    #[arg(long)]
    kappa: Option<PathBuf>,
    /// Belief cost: `none` or `entropy:<weight>`. Defaults to the cost file's.
    #[arg(long)]
    psi: Option<String>,
    /// Overrides the model's discount factor.
    #[arg(long)]
    discount: Option<f64>,
    #[arg(long, default_value_t = 300.0)]
    time_budget: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_points: Option<usize>,
    /// JSON file with the full solver parameters; flags above override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Simulate {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    /// Initial-state cost used for scoring (must carry a goal map).
    #[arg(long)]
    isc_cost: PathBuf,
    /// State-control cost the base policy was solved for.
    #[arg(long)]
    kappa: Option<PathBuf>,
    /// augmented or base; must match the policy file.
    #[arg(long)]
    arm: Arm,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Runs CSV; metadata goes to `<out>.meta.json`.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON-lines file with full trajectories.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args)]
struct Report {
    #[arg(long)]
    isc: PathBuf,
    #[arg(long)]
    base: PathBuf,
    /// Comparison table CSV; curves go to `<stem>.curves.csv`.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::BuildGrid(a) => build_grid(a),
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BudgetTooSmall(_) | Error::TreeTooLarge(_) => 3,
        _ => 2,
    }
}

fn build_grid(a: BuildGrid) -> Result<(), Error> {
    let spec = match (&a.config, a.layout.as_deref()) {
        (Some(path), _) => io::load_grid(path)?,
        (None, Some(FIG1_APPROX)) | (None, None) => GridSpec::fig1_approx(),
        (None, Some(other)) => return Err(Error::InvalidSpec(format!("unknown layout {other:?}"))),
    };
    let (exp, files) = pipeline::build_grid(spec, &a.out)?;
    println!(
        "{} states, {} controls, {} observations -> {}, {}, {}",
        exp.model.n_states(),
        exp.model.n_controls(),
        exp.model.n_obs(),
        files.model.display(),
        files.isc_cost.display(),
        files.kappa.display()
    );
    Ok(())
}

fn solve(a: Solve) -> Result<(), Error> {
    let mut params: SolveParams = match &a.params {
        Some(p) => io::read_json(p)?,
        None => SolveParams::default(),
    };
    params.time_budget = a.time_budget;
    params.rng_seed = a.seed;
    if let Some(n) = a.max_points {
        params.max_belief_points = n;
    }
    let costs = match (a.isc_cost, a.kappa) {
        (Some(path), _) => CostSource::InitialState(path),
        (None, Some(path)) => CostSource::StateControl(path),
        (None, None) => unreachable!("clap requires one cost file"),
    };
    let job = SolveJob {
        model: a.model,
        costs,
        psi: a.psi.as_deref().map(PsiSpec::parse).transpose()?,
        discount: a.discount,
        params,
        out: a.out,
    };
    let started = Instant::now();
    let (file, stats) = pipeline::solve(&job)?;
    println!(
        "{} policy: {} alpha vectors, {} belief points, {} sweeps, {:.1} s -> {}",
        file.belief_space.as_str(),
        file.policy.len(),
        stats.belief_points,
        stats.sweeps,
        started.elapsed().as_secs_f64(),
        job.out.display()
    );
    if stats.timed_out {
        eprintln!("warning: time budget reached; the policy depends on machine speed");
    }
    Ok(())
}

fn simulate(a: Simulate) -> Result<(), Error> {
    let job = SimulateJob {
        model: a.model,
        policy: a.policy,
        isc_cost: a.isc_cost,
        kappa: a.kappa,
        arm: a.arm,
        config: RunConfig {
            horizon: a.horizon,
            num_runs: a.runs,
            seed: a.seed,
        },
        out: a.out,
        records: a.records,
    };
    let (summary, _) = pipeline::simulate(&job)?;
    print_summary(job.arm, &summary);
    Ok(())
}

fn print_summary(arm: Arm, s: &MetricsSummary) {
    println!(
        "{}: cost {:.4} ± {:.4}, goals {}/{}, H(x0) {:.4}, p(true x0) {:.4}",
        arm.as_str(),
        s.avg_discounted_cost.mean,
        s.avg_discounted_cost.stderr,
        s.goals_reached,
        s.num_runs,
        s.avg_final_initial_entropy.mean,
        s.avg_final_prob_at_true_x0.mean
    );
}

fn report(a: Report) -> Result<(), Error> {
    let (cmp, files) = pipeline::report(&a.isc, &a.base, &a.out)?;
    println!("{:<28} {:>12} {:>12} {:>12}", "criterion", "isc", "base", "delta");
    for r in &cmp.rows {
        println!(
            "{:<28} {:>12.4} {:>12.4} {:>12.4}",
            r.criterion,
            r.isc,
            r.base,
            r.delta()
        );
    }
    println!("-> {}, {}", files.table.display(), files.curves.display());
    Ok(())
}
