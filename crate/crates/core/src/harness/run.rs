//! The online loop: estimate, plan, execute one episode, repeat.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cmdp::occupancy::policy_total;
use crate::cmdp::{Cmdp, Policy};
use crate::environments::sample_step;
use crate::estimation::{
    bonus_enhanced_model, compute_bonus, empirical_model, BonusConfig, BonusEnhancedModel,
    BonusTable, Counts, EmpiricalModel,
};
use crate::planners::{
    agg_reg_bound, basic_conplanner, convex_conplanner, knapsack_conplanner, lagr_conplanner,
    null_policy, ConvexBudget, ConvexSpec, EpsilonMode, KnapsackConfig, LagrConfig, PlannedPolicy,
    PlannerError, PlannerSolution,
};

use super::config::{AggRegMode, ExperimentConfig, PlannerKind};
use super::HarnessError;

/// One executed episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    /// 1-based episode index.
    pub episode: u64,
    /// Exact expected reward of the executed policy on the true cMDP.
    pub exp_reward: f64,
    pub exp_consumption: Vec<f64>,
    /// Reward summed along the sampled trajectory.
    pub realized_reward: f64,
    pub realized_consumption: Vec<f64>,
    /// Planner status, or `uniform-fallback` / `null-guard` when the loop
    /// overrode the planner.
    pub planner_status: String,
    pub wall_time_ms: f64,
}

/// Regret of the concave-convex objective after each episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexRegret {
    /// `f` at the benchmark's expected reward.
    pub benchmark_f: f64,
    /// `benchmark_f - f(mean expected reward)`.
    pub rew_reg: Vec<f64>,
    /// `g(mean expected consumption)`.
    pub cons_reg: Vec<f64>,
}

/// Hard-budget bookkeeping of a knapsack run.
#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackSummary {
    /// Total budgets `B_i` over all episodes.
    pub budgets: Vec<f64>,
    pub aggreg: Option<f64>,
    pub epsilon: f64,
    /// Whether any realized cumulative consumption exceeded its budget.
    pub violated: bool,
    /// First episode played by the budget guard, if any.
    pub guard_from: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    /// Optimal expected reward of the true cMDP (the benchmark `V*`).
    pub benchmark_reward: f64,
    pub benchmark_consumption: Vec<f64>,
    /// Per-episode budgets the regret is measured against.
    pub xi: Vec<f64>,
    /// `V* - mean expected reward` after each episode.
    pub rew_reg: Vec<f64>,
    /// `max_i (mean expected consumption_i - xi_i)` after each episode (0 when `d = 0`).
    pub cons_reg: Vec<f64>,
    /// `V* - mean realized reward` after each episode.
    pub realized_rew_reg: Vec<f64>,
    /// Realized cumulative consumption after each episode.
    pub cum_consumption: Vec<Vec<f64>>,
    pub convex: Option<ConvexRegret>,
    pub knapsack: Option<KnapsackSummary>,
}

impl RegretReport {
    pub fn final_rew_reg(&self) -> f64 {
        self.rew_reg.last().copied().unwrap_or(0.0)
    }

    pub fn final_cons_reg(&self) -> f64 {
        self.cons_reg.last().copied().unwrap_or(0.0)
    }

    pub fn num_resources(&self) -> usize {
        self.xi.len()
    }
}

/// What the learner knows when planning episode `k`.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeView<'a> {
    pub k: u64,
    pub counts: &'a Counts,
    pub empirical: &'a EmpiricalModel,
    pub bonus: &'a BonusTable,
    pub model: &'a BonusEnhancedModel,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub logs: Vec<EpisodeLog>,
    pub report: RegretReport,
    /// `key = value` manifest; derived quantities follow as `#` lines.
    pub manifest: String,
}

fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

fn config_error(e: PlannerError) -> HarnessError {
    match e {
        PlannerError::Infeasible => {
            HarnessError::Config("the true cMDP admits no feasible policy".into())
        }
        other => HarnessError::Planner(other),
    }
}

/// The LP optimum of the true cMDP under its own budgets.
pub fn solve_true_benchmark(truth: &Cmdp) -> Result<PlannerSolution, HarnessError> {
    let model = BonusEnhancedModel::from_cmdp(truth);
    basic_conplanner(
        &model,
        truth.budgets(),
        truth.initial_state(),
        truth.horizon(),
    )
    .map_err(config_error)
}

/// The concave-convex optimum of the true cMDP.
pub fn solve_true_convex_benchmark(
    truth: &Cmdp,
    spec: &ConvexSpec,
    budget: &ConvexBudget,
) -> Result<PlannerSolution, HarnessError> {
    let model = BonusEnhancedModel::from_cmdp(truth);
    convex_conplanner(&model, spec, truth.initial_state(), truth.horizon(), budget)
        .map_err(config_error)
}

/// Shared episode loop. `plan(k, model, cum)` sees the optimistic model
/// built from episodes before `k` and the realized cumulative consumption.
fn episode_loop(
    truth: &Cmdp,
    cfg: &ExperimentConfig,
    run_index: u64,
    observer: &mut dyn FnMut(&EpisodeView<'_>),
    mut plan: impl FnMut(
        u64,
        &BonusEnhancedModel,
        &[f64],
    ) -> Result<(PlannedPolicy, String), HarnessError>,
) -> Result<(Vec<EpisodeLog>, Vec<Vec<f64>>), HarnessError> {
    let (ns, na, nd, horizon) = (
        truth.num_states(),
        truth.num_actions(),
        truth.num_resources(),
        truth.horizon(),
    );
    let s0 = truth.initial_state();
    let bonus_cfg = BonusConfig::new(cfg.delta, ns, na, horizon, nd)?;
    let mut rng = run_rng(cfg.seed, run_index);
    let mut counts = Counts::new(ns, na, nd);
    let mut cum = vec![0.0; nd];
    let mut logs = Vec::with_capacity(cfg.episodes as usize);
    let mut cum_history = Vec::with_capacity(cfg.episodes as usize);
    for k in 1..=cfg.episodes {
        let started = Instant::now();
        let bonus = compute_bonus(&counts, k, &bonus_cfg)?;
        let empirical = empirical_model(&counts);
        let model = bonus_enhanced_model(&empirical, &bonus)?;
        observer(&EpisodeView {
            k,
            counts: &counts,
            empirical: &empirical,
            bonus: &bonus,
            model: &model,
        });
        let (planned, status) = plan(k, &model, &cum)?;
        let policy = planned.pick(rng.gen());

        let exp_reward = policy_total(truth.transitions(), truth.rewards(), policy, s0, horizon)?;
        let exp_consumption = truth
            .consumption()
            .iter()
            .map(|c| policy_total(truth.transitions(), c, policy, s0, horizon))
            .collect::<Result<Vec<_>, _>>()?;

        let mut s = s0;
        let mut realized_reward = 0.0;
        let mut realized_consumption = vec![0.0; nd];
        for h in 1..=horizon {
            let a = policy.sample_action(h, s, rng.gen());
            let step = sample_step(truth, s, a, &mut rng)?;
            counts.record_step(s, a, step.reward, &step.consumption, step.next_state)?;
            realized_reward += step.reward;
            for (acc, c) in realized_consumption.iter_mut().zip(&step.consumption) {
                *acc += c;
            }
            s = step.next_state;
        }
        counts.finish_episode();
        for (acc, c) in cum.iter_mut().zip(&realized_consumption) {
            *acc += c;
        }
        cum_history.push(cum.clone());
        logs.push(EpisodeLog {
            episode: k,
            exp_reward,
            exp_consumption,
            realized_reward,
            realized_consumption,
            planner_status: status,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok((logs, cum_history))
}

fn regret_report(
    logs: &[EpisodeLog],
    cum_consumption: Vec<Vec<f64>>,
    benchmark: &PlannerSolution,
    xi: &[f64],
) -> RegretReport {
    let mut rew_reg = Vec::with_capacity(logs.len());
    let mut cons_reg = Vec::with_capacity(logs.len());
    let mut realized_rew_reg = Vec::with_capacity(logs.len());
    let (mut sum_r, mut sum_real) = (0.0, 0.0);
    let mut sum_c = vec![0.0; xi.len()];
    for (idx, log) in logs.iter().enumerate() {
        let n = (idx + 1) as f64;
        sum_r += log.exp_reward;
        sum_real += log.realized_reward;
        for (acc, c) in sum_c.iter_mut().zip(&log.exp_consumption) {
            *acc += c;
        }
        rew_reg.push(benchmark.predicted_reward - sum_r / n);
        realized_rew_reg.push(benchmark.predicted_reward - sum_real / n);
        let excess = sum_c
            .iter()
            .zip(xi)
            .map(|(c, x)| c / n - x)
            .fold(f64::NEG_INFINITY, f64::max);
        cons_reg.push(if xi.is_empty() { 0.0 } else { excess });
    }
    RegretReport {
        benchmark_reward: benchmark.predicted_reward,
        benchmark_consumption: benchmark.predicted_consumption.clone(),
        xi: xi.to_vec(),
        rew_reg,
        cons_reg,
        realized_rew_reg,
        cum_consumption,
        convex: None,
        knapsack: None,
    }
}

fn convex_regret(
    logs: &[EpisodeLog],
    spec: &ConvexSpec,
    benchmark: &PlannerSolution,
) -> ConvexRegret {
    let benchmark_f = (spec.f)(benchmark.predicted_reward);
    let mut rew_reg = Vec::with_capacity(logs.len());
    let mut cons_reg = Vec::with_capacity(logs.len());
    let mut sum_r = 0.0;
    let mut sum_c = vec![0.0; benchmark.predicted_consumption.len()];
    for (idx, log) in logs.iter().enumerate() {
        let n = (idx + 1) as f64;
        sum_r += log.exp_reward;
        for (acc, c) in sum_c.iter_mut().zip(&log.exp_consumption) {
            *acc += c;
        }
        rew_reg.push(benchmark_f - (spec.f)(sum_r / n));
        let mean: Vec<f64> = sum_c.iter().map(|c| c / n).collect();
        cons_reg.push((spec.g)(&mean));
    }
    ConvexRegret {
        benchmark_f,
        rew_reg,
        cons_reg,
    }
}

fn soft_run(
    truth: &Cmdp,
    cfg: &ExperimentConfig,
    planner: PlannerKind,
    run_index: u64,
    observer: &mut dyn FnMut(&EpisodeView<'_>),
) -> Result<(Vec<EpisodeLog>, RegretReport), HarnessError> {
    let (s0, horizon) = (truth.initial_state(), truth.horizon());
    let xi = truth.budgets().to_vec();
    let lagr = LagrConfig::new(cfg.eta, cfg.lagr_iters)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let convex_budget = ConvexBudget {
        fw_iterations: cfg.fw_iters,
        ..Default::default()
    };
    let spec = cfg.convex_spec.spec(&xi);
    let benchmark = match planner {
        PlannerKind::Convex => solve_true_convex_benchmark(truth, &spec, &convex_budget)?,
        _ => solve_true_benchmark(truth)?,
    };
    let uniform = Policy::uniform(horizon, truth.num_states(), truth.num_actions());
    let (logs, cum) = episode_loop(truth, cfg, run_index, observer, |_, model, _| {
        let solved = match planner {
            PlannerKind::Lp | PlannerKind::Knapsack => basic_conplanner(model, &xi, s0, horizon),
            PlannerKind::Lagrangian => lagr_conplanner(model, &xi, s0, horizon, &lagr),
            PlannerKind::Convex => convex_conplanner(model, &spec, s0, horizon, &convex_budget),
        };
        match solved {
            Ok(sol) => Ok((sol.policy, sol.status.as_str().to_string())),
            Err(PlannerError::Infeasible) => Ok((
                PlannedPolicy::Markov(uniform.clone()),
                "uniform-fallback".into(),
            )),
            Err(e) => Err(e.into()),
        }
    })?;
    let mut report = regret_report(&logs, cum, &benchmark, &xi);
    if planner == PlannerKind::Convex {
        report.convex = Some(convex_regret(&logs, &spec, &benchmark));
    }
    Ok((logs, report))
}

/// Runs the soft-constraint loop for `cfg.episodes` episodes against the
/// budgets stored in `truth`. `run_index` selects an independent RNG stream
/// for the same seed.
pub fn run_conrl(
    truth: &Cmdp,
    cfg: &ExperimentConfig,
    run_index: u64,
) -> Result<(Vec<EpisodeLog>, RegretReport), HarnessError> {
    run_conrl_observed(truth, cfg, run_index, |_| {})
}

/// [`run_conrl`] calling `observer` with the learner's state before each
/// episode is planned.
pub fn run_conrl_observed(
    truth: &Cmdp,
    cfg: &ExperimentConfig,
    run_index: u64,
    mut observer: impl FnMut(&EpisodeView<'_>),
) -> Result<(Vec<EpisodeLog>, RegretReport), HarnessError> {
    if cfg.planner == PlannerKind::Knapsack {
        return Err(HarnessError::Config(
            "knapsack runs go through run_knapsack".into(),
        ));
    }
    soft_run(truth, cfg, cfg.planner, run_index, &mut observer)
}

/// Hard-budget run. `truth` must carry the null action as its last action
/// with a zero-signal absorbing sink.
pub fn run_knapsack(
    truth: &Cmdp,
    cfg: &ExperimentConfig,
    run_index: u64,
) -> Result<(Vec<EpisodeLog>, RegretReport), HarnessError> {
    let (ns, na, nd, horizon) = (
        truth.num_states(),
        truth.num_actions(),
        truth.num_resources(),
        truth.horizon(),
    );
    let s0 = truth.initial_state();
    let k_total = cfg.episodes;
    let budgets = if cfg.budget.is_empty() {
        truth.budgets().iter().map(|x| x * k_total as f64).collect()
    } else {
        cfg.budget.clone()
    };
    if budgets.len() != nd {
        return Err(HarnessError::Config(format!(
            "{} total budgets given for {nd} resources",
            budgets.len()
        )));
    }
    let per_episode: Vec<f64> = budgets.iter().map(|b| b / k_total as f64).collect();
    let scaled_truth = truth.with_budgets(per_episode.clone())?;

    let mut knap_cfg = KnapsackConfig::new(budgets.clone(), k_total, cfg.epsilon)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    knap_cfg.bound_constant = cfg.bound_constant;
    let aggreg = match (cfg.epsilon, cfg.aggreg_mode) {
        (EpsilonMode::Fixed(_), _) => None,
        (EpsilonMode::Auto, AggRegMode::Theorem) => Some(agg_reg_bound(
            k_total,
            ns,
            na,
            horizon,
            nd,
            cfg.delta,
            cfg.bound_constant,
        )),
        (EpsilonMode::Auto, AggRegMode::Empirical) => {
            let (_, soft) = soft_run(&scaled_truth, cfg, PlannerKind::Lp, run_index, &mut |_| {})?;
            Some(k_total as f64 * soft.final_rew_reg().max(soft.final_cons_reg()).max(0.0))
        }
    };
    let epsilon = knap_cfg
        .resolve_epsilon(aggreg.unwrap_or(0.0))
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let benchmark = solve_true_benchmark(&scaled_truth)?;

    let null_action = na - 1;
    let null = null_policy(horizon, ns, na, null_action);
    let mut guard_from = None;
    let (logs, cum) = episode_loop(truth, cfg, run_index, &mut |_| {}, |k, model, cum| {
        let exhausted = guard_from.is_some()
            || cum
                .iter()
                .zip(&budgets)
                .any(|(c, b)| c + horizon as f64 > *b);
        if exhausted {
            guard_from.get_or_insert(k);
            return Ok((PlannedPolicy::Markov(null.clone()), "null-guard".into()));
        }
        let sol = knapsack_conplanner(model, &knap_cfg, epsilon, null_action, s0, horizon)?;
        Ok((sol.policy, sol.status.as_str().to_string()))
    })?;
    let violated = cum
        .last()
        .is_some_and(|last| last.iter().zip(&budgets).any(|(c, b)| c > b));
    let mut report = regret_report(&logs, cum, &benchmark, &per_episode);
    report.knapsack = Some(KnapsackSummary {
        budgets,
        aggreg,
        epsilon,
        violated,
        guard_from,
    });
    Ok((logs, report))
}

/// Builds the true cMDP from `cfg`, runs it on RNG stream 0 and assembles
/// the manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    run_experiment_stream(cfg, 0)
}

/// [`run_experiment`] on RNG stream `run_index` of `cfg.seed`.
pub fn run_experiment_stream(
    cfg: &ExperimentConfig,
    run_index: u64,
) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let truth = cfg.build_truth()?;
    let (logs, report) = match cfg.planner {
        PlannerKind::Knapsack => run_knapsack(&truth, cfg, run_index)?,
        _ => run_conrl(&truth, cfg, run_index)?,
    };
    let mut manifest = cfg.to_text();
    let _ = writeln!(manifest, "# run_index = {run_index}");
    let _ = writeln!(manifest, "# states = {}", truth.num_states());
    let _ = writeln!(manifest, "# actions = {}", truth.num_actions());
    let _ = writeln!(manifest, "# resources = {}", truth.num_resources());
    let xi: Vec<String> = report.xi.iter().map(|x| x.to_string()).collect();
    let _ = writeln!(manifest, "# xi = {}", xi.join(","));
    let _ = writeln!(manifest, "# benchmark_reward = {}", report.benchmark_reward);
    if let Some(k) = &report.knapsack {
        let _ = writeln!(
            manifest,
            "# aggreg = {}",
            k.aggreg.map_or("none".to_string(), |a| a.to_string())
        );
        let _ = writeln!(manifest, "# epsilon_resolved = {}", k.epsilon);
        let _ = writeln!(manifest, "# budget_violated = {}", k.violated);
    }
    let _ = writeln!(manifest, "# final_rew_reg = {}", report.final_rew_reg());
    let _ = writeln!(manifest, "# final_cons_reg = {}", report.final_cons_reg());
    Ok(RunOutput {
        config: cfg.clone(),
        logs,
        report,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::{ObjectiveTable, TransitionTable};
    use crate::harness::EnvKind;

    fn small_random(planner: PlannerKind, episodes: u64) -> ExperimentConfig {
        ExperimentConfig {
            env: EnvKind::Random,
            horizon: 3,
            planner,
            episodes,
            random_states: 3,
            random_actions: 2,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn one_row_per_episode() {
        let out = run_experiment(&small_random(PlannerKind::Lp, 3)).unwrap();
        assert_eq!(out.logs.len(), 3);
        assert_eq!(out.report.rew_reg.len(), 3);
        assert_eq!(
            out.logs.iter().map(|l| l.episode).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn single_action_has_no_reward_regret() {
        let p = TransitionTable::new(2, 1, vec![0.3, 0.7, 0.6, 0.4]).unwrap();
        let r = ObjectiveTable::new(2, 1, vec![0.2, 0.9]).unwrap();
        let c = ObjectiveTable::new(2, 1, vec![0.5, 0.1]).unwrap();
        let truth = Cmdp::new(4, 0, p, r, vec![c], vec![4.0]).unwrap();
        let cfg = ExperimentConfig {
            episodes: 5,
            ..Default::default()
        };
        let (_, report) = run_conrl(&truth, &cfg, 0).unwrap();
        assert!(report.rew_reg.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn same_seed_same_run() {
        for planner in [PlannerKind::Lp, PlannerKind::Lagrangian] {
            let a = run_experiment(&small_random(planner, 6)).unwrap();
            let b = run_experiment(&small_random(planner, 6)).unwrap();
            assert_eq!(a.report, b.report);
            assert_eq!(a.manifest, b.manifest);
        }
    }

    #[test]
    fn zero_budget_knapsack_stays_null() {
        let cfg = ExperimentConfig {
            budget: vec![0.0],
            epsilon: EpsilonMode::Fixed(0.0),
            ..small_random(PlannerKind::Knapsack, 4)
        };
        let out = run_experiment(&cfg).unwrap();
        assert!(out.logs.iter().all(|l| l.planner_status == "null-guard"));
        assert!(out
            .logs
            .iter()
            .all(|l| l.realized_consumption[0] == 0.0 && l.realized_reward == 0.0));
        let summary = out.report.knapsack.unwrap();
        assert!(!summary.violated);
        assert_eq!(summary.guard_from, Some(1));
    }

    #[test]
    fn theorem_epsilon_usually_rejected() {
        let cfg = ExperimentConfig {
            budget: vec![5.0],
            ..small_random(PlannerKind::Knapsack, 4)
        };
        let err = run_experiment(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn empirical_epsilon_is_recorded() {
        let cfg = ExperimentConfig {
            budget: vec![40.0],
            aggreg_mode: AggRegMode::Empirical,
            ..small_random(PlannerKind::Knapsack, 20)
        };
        match run_experiment(&cfg) {
            Ok(out) => {
                let k = out.report.knapsack.unwrap();
                let aggreg = k.aggreg.unwrap();
                assert!((k.epsilon - aggreg / 40.0).abs() < 1e-12);
                assert!(out.manifest.contains("# epsilon_resolved"));
            }
            Err(e) => assert_eq!(e.exit_code(), 2, "{e}"),
        }
    }
}
