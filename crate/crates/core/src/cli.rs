//! Command-line front end: `run`, `plan`, `eval` and `bench`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::estimation::BonusEnhancedModel;
use crate::harness::{
    run_experiment_stream, solve_true_benchmark, write_reports, ExperimentConfig, HarnessError,
    PlannerKind, CSV_NAME,
};
use crate::oracles::{enumerate_policies, CmdpInstance, OracleError};
use crate::planners::{
    convex_conplanner, lagr_conplanner, value_iteration, ConvexBudget, LagrConfig, PlannerSolution,
};

#[derive(Debug, Parser)]
#[command(name = "conrl", version, about = "Constrained episodic RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the online learner and write episodes.csv and manifest.txt.
    Run(ExperimentArgs),
    /// Plan on the true environment and print the planned values.
    Plan(ExperimentArgs),
    /// Recompute regret summaries from a run directory.
    Eval {
        /// Directory holding episodes.csv.
        dir: PathBuf,
    },
    /// Oracle constants and multi-run sweeps.
    Bench {
        #[command(subcommand)]
        what: BenchCommand,
    },
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Print exact constants of an instance description file.
    Oracle { file: PathBuf },
    /// Run independent RNG streams of one config concurrently.
    Runs {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Number of runs (RNG streams 0..runs).
        #[arg(long, default_value_t = 4)]
        runs: u64,
        /// Worker threads.
        #[arg(long, default_value_t = 4)]
        threads: usize,
    },
}

/// Every flag mirrors a config-file key; flags override the file.
#[derive(Debug, Args, Default)]
struct ExperimentArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// mars | box | random
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    map: Option<String>,
    /// lp | lagrangian | convex | knapsack
    #[arg(long)]
    planner: Option<String>,
    #[arg(long)]
    episodes: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long = "lagr-iters")]
    lagr_iters: Option<String>,
    /// Comma-separated budgets (totals in knapsack mode).
    #[arg(long)]
    budget: Option<String>,
    /// auto | a value in [0, 1]
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    slip: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    /// linear | cap=T
    #[arg(long = "convex-spec")]
    convex_spec: Option<String>,
    #[arg(long = "fw-iters")]
    fw_iters: Option<String>,
    #[arg(long = "bound-constant")]
    bound_constant: Option<String>,
    /// theorem | empirical
    #[arg(long = "aggreg-mode")]
    aggreg_mode: Option<String>,
    #[arg(long = "random-states")]
    random_states: Option<String>,
    #[arg(long = "random-actions")]
    random_actions: Option<String>,
    #[arg(long = "random-resources")]
    random_resources: Option<String>,
    #[arg(long = "random-sparsity")]
    random_sparsity: Option<String>,
    #[arg(long = "env-seed")]
    env_seed: Option<String>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                path: path.display().to_string(),
                source,
            })?;
            cfg.apply_text(&text)?;
        }
        let flags = [
            ("env", &self.env),
            ("map", &self.map),
            ("planner", &self.planner),
            ("episodes", &self.episodes),
            ("delta", &self.delta),
            ("seed", &self.seed),
            ("eta", &self.eta),
            ("lagr_iters", &self.lagr_iters),
            ("budget", &self.budget),
            ("epsilon", &self.epsilon),
            ("out", &self.out),
            ("slip", &self.slip),
            ("horizon", &self.horizon),
            ("convex_spec", &self.convex_spec),
            ("fw_iters", &self.fw_iters),
            ("bound_constant", &self.bound_constant),
            ("aggreg_mode", &self.aggreg_mode),
            ("random_states", &self.random_states),
            ("random_actions", &self.random_actions),
            ("random_resources", &self.random_resources),
            ("random_sparsity", &self.random_sparsity),
            ("env_seed", &self.env_seed),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn oracle_error(e: OracleError) -> HarnessError {
    match e {
        OracleError::Io { path, source } => HarnessError::Io { path, source },
        other => HarnessError::Config(other.to_string()),
    }
}

fn run(args: &ExperimentArgs) -> Result<(), HarnessError> {
    let cfg = args.resolve()?;
    let out = run_experiment_stream(&cfg, 0)?;
    let paths = write_reports(&out.logs, &out.report, &out.manifest, &cfg.out)?;
    println!("episodes = {}", out.logs.len());
    println!("benchmark_reward = {}", out.report.benchmark_reward);
    println!("final_rew_reg = {}", out.report.final_rew_reg());
    println!("final_cons_reg = {}", out.report.final_cons_reg());
    if let Some(k) = &out.report.knapsack {
        println!("epsilon = {}", k.epsilon);
        println!("budget_violated = {}", k.violated);
    }
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn plan(args: &ExperimentArgs) -> Result<(), HarnessError> {
    let cfg = args.resolve()?;
    let truth = cfg.build_truth()?;
    let model = BonusEnhancedModel::from_cmdp(&truth);
    let (s0, horizon) = (truth.initial_state(), truth.horizon());
    let sol: PlannerSolution = match cfg.planner {
        PlannerKind::Lp => solve_true_benchmark(&truth)?,
        PlannerKind::Knapsack => {
            let k = cfg.episodes as f64;
            let xi: Vec<f64> = if cfg.budget.is_empty() {
                truth.budgets().to_vec()
            } else {
                cfg.budget.iter().map(|b| b / k).collect()
            };
            solve_true_benchmark(&truth.with_budgets(xi)?)?
        }
        PlannerKind::Lagrangian => {
            let lagr = LagrConfig::new(cfg.eta, cfg.lagr_iters)?;
            lagr_conplanner(&model, truth.budgets(), s0, horizon, &lagr)?
        }
        PlannerKind::Convex => {
            let budget = ConvexBudget {
                fw_iterations: cfg.fw_iters,
                ..Default::default()
            };
            convex_conplanner(
                &model,
                &cfg.convex_spec.spec(truth.budgets()),
                s0,
                horizon,
                &budget,
            )?
        }
    };
    let (values, _) = value_iteration(truth.transitions(), truth.rewards(), horizon)?;
    println!("states = {}", truth.num_states());
    println!("actions = {}", truth.num_actions());
    println!("horizon = {horizon}");
    println!("status = {}", sol.status.as_str());
    println!("planned_reward = {}", sol.predicted_reward);
    for (i, c) in sol.predicted_consumption.iter().enumerate() {
        println!("planned_consumption_{i} = {c}");
    }
    println!("unconstrained_reward = {}", values.v(s0, 1));
    Ok(())
}

fn eval(dir: &Path) -> Result<(), HarnessError> {
    let path = dir.join(CSV_NAME);
    let io = |source: std::io::Error| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::Reader::from_path(&path).map_err(|e| io(e.into()))?;
    let headers = reader.headers().map_err(|e| io(e.into()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let rew = column("rew_reg")
        .ok_or_else(|| HarnessError::Config("episodes.csv lacks rew_reg".into()))?;
    let cons = column("cons_reg")
        .ok_or_else(|| HarnessError::Config("episodes.csv lacks cons_reg".into()))?;
    let status = column("planner_status")
        .ok_or_else(|| HarnessError::Config("episodes.csv lacks planner_status".into()))?;
    let mut rows = 0usize;
    let mut last = (f64::NAN, f64::NAN);
    let mut statuses: std::collections::BTreeMap<String, usize> = Default::default();
    for record in reader.records() {
        let record = record.map_err(|e| io(e.into()))?;
        let num = |i: usize| -> Result<f64, HarnessError> {
            record[i].parse().map_err(|_| {
                HarnessError::Config(format!("bad number {:?} in {}", &record[i], path.display()))
            })
        };
        last = (num(rew)?, num(cons)?);
        *statuses.entry(record[status].to_string()).or_default() += 1;
        rows += 1;
    }
    println!("episodes = {rows}");
    println!("final_rew_reg = {}", last.0);
    println!("final_cons_reg = {}", last.1);
    for (name, count) in statuses {
        println!("status_{name} = {count}");
    }
    Ok(())
}

fn bench_oracle(file: &Path) -> Result<(), HarnessError> {
    let inst = CmdpInstance::load(file).map_err(oracle_error)?;
    let cmdp = inst.to_cmdp().map_err(oracle_error)?;
    let lp = inst.lp_optimum().map_err(oracle_error)?;
    println!("lp_status = {:?}", lp.status);
    if let Some(q) = &lp.objective {
        println!("lp_optimum = {q}");
        println!(
            "lp_optimum_f64 = {}",
            lp.objective_f64().unwrap_or(f64::NAN)
        );
    }
    let policies = enumerate_policies(&cmdp, cmdp.horizon()).map_err(oracle_error)?;
    let best = policies
        .iter()
        .map(|e| e.reward)
        .fold(f64::NEG_INFINITY, f64::max);
    let best_feasible = policies
        .iter()
        .filter(|e| {
            e.consumption
                .iter()
                .zip(cmdp.budgets())
                .all(|(c, b)| c <= b)
        })
        .map(|e| e.reward)
        .fold(f64::NEG_INFINITY, f64::max);
    println!("deterministic_policies = {}", policies.len());
    println!("best_deterministic_reward = {best}");
    println!("best_feasible_deterministic_reward = {best_feasible}");
    Ok(())
}

fn bench_runs(args: &ExperimentArgs, runs: u64, threads: usize) -> Result<(), HarnessError> {
    let cfg = args.resolve()?;
    if runs == 0 || threads == 0 {
        return Err(HarnessError::Config(
            "runs and threads must be positive".into(),
        ));
    }
    let next = std::sync::atomic::AtomicU64::new(0);
    let mut results: Vec<(u64, Result<(f64, f64), HarnessError>)> = std::thread::scope(|scope| {
        let workers: Vec<_> = (0..threads.min(runs as usize))
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let idx = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if idx >= runs {
                            return done;
                        }
                        let result = run_experiment_stream(&cfg, idx)
                            .map(|out| (out.report.final_rew_reg(), out.report.final_cons_reg()));
                        done.push((idx, result));
                    }
                })
            })
            .collect();
        workers
            .into_iter()
            .flat_map(|w| w.join().expect("worker panicked"))
            .collect()
    });
    results.sort_by_key(|(idx, _)| *idx);
    let (mut sum_rew, mut sum_cons) = (0.0, 0.0);
    println!("run,final_rew_reg,final_cons_reg");
    for (idx, result) in results {
        let (rew, cons) = result?;
        sum_rew += rew;
        sum_cons += cons;
        println!("{idx},{rew},{cons}");
    }
    println!("mean_final_rew_reg = {}", sum_rew / runs as f64);
    println!("mean_final_cons_reg = {}", sum_cons / runs as f64);
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Plan(args) => plan(args),
        Command::Eval { dir } => eval(dir),
        Command::Bench {
            what: BenchCommand::Oracle { file },
        } => bench_oracle(file),
        Command::Bench {
            what:
                BenchCommand::Runs {
                    experiment,
                    runs,
                    threads,
                },
        } => bench_runs(experiment, *runs, *threads),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
