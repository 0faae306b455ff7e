//! Experiment configuration and its `key = value` text form.
//!
//! The manifest written next to each run uses the same format, so a
//! manifest can be fed back as a config file to repeat the run.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::cmdp::Cmdp;
use crate::environments::{
    build_box, build_mars_rover, build_random_cmdp, EnvConfig, GridMap, MapKind,
};
use crate::environments::{DEFAULT_BOX_MAP, DEFAULT_MARS_MAP};
use crate::planners::{ConvexSpec, EpsilonMode, LagrConfig};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Mars,
    Box,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlannerKind {
    Lp,
    Lagrangian,
    Convex,
    Knapsack,
}

/// Source of the aggregate regret that sets epsilon in knapsack `auto` mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggRegMode {
    /// The closed-form bound with constant `bound_constant`.
    Theorem,
    /// `K * max(RewReg(K), ConsReg(K), 0)` of a soft-constraint LP run with
    /// the same seed.
    Empirical,
}

/// Built-in concave-convex objectives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvexPreset {
    /// `f(t) = t`, `g(v) = max_i (v_i - xi_i)`.
    Linear,
    /// `f(t) = min(t, cap)` with the same `g`.
    Cap(f64),
}

impl ConvexPreset {
    pub fn spec(&self, xi: &[f64]) -> ConvexSpec {
        match *self {
            ConvexPreset::Linear => ConvexSpec::linear(xi.to_vec()),
            ConvexPreset::Cap(t) => ConvexSpec::capped(t, xi.to_vec()),
        }
    }
}

macro_rules! keyword_enum {
    ($ty:ty, $what:literal, { $($text:literal => $value:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = HarnessError;
            fn from_str(s: &str) -> Result<Self, HarnessError> {
                match s.trim() {
                    $($text => Ok($value),)+
                    other => Err(HarnessError::Config(format!(concat!("unknown ", $what, " {:?}"), other))),
                }
            }
        }
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                $(if *self == $value { return $text; })+
                unreachable!()
            }
        }
    };
}

keyword_enum!(EnvKind, "environment", { "mars" => EnvKind::Mars, "box" => EnvKind::Box, "random" => EnvKind::Random });
keyword_enum!(PlannerKind, "planner", {
    "lp" => PlannerKind::Lp,
    "lagrangian" => PlannerKind::Lagrangian,
    "convex" => PlannerKind::Convex,
    "knapsack" => PlannerKind::Knapsack,
});
keyword_enum!(AggRegMode, "aggregate-regret mode", { "theorem" => AggRegMode::Theorem, "empirical" => AggRegMode::Empirical });

impl FromStr for ConvexPreset {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        let s = s.trim();
        if s == "linear" {
            return Ok(ConvexPreset::Linear);
        }
        if let Some(t) = s.strip_prefix("cap=") {
            return Ok(ConvexPreset::Cap(parse_num(t, "convex_spec cap")?));
        }
        Err(HarnessError::Config(format!(
            "unknown convex spec {s:?} (expected `linear` or `cap=T`)"
        )))
    }
}

impl std::fmt::Display for ConvexPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConvexPreset::Linear => write!(f, "linear"),
            ConvexPreset::Cap(t) => write!(f, "cap={t}"),
        }
    }
}

fn parse_num<T: FromStr>(text: &str, key: &str) -> Result<T, HarnessError>
where
    T::Err: std::fmt::Display,
{
    text.trim()
        .parse()
        .map_err(|e| HarnessError::Config(format!("{key}: cannot parse {text:?}: {e}")))
}

pub(crate) fn parse_epsilon(text: &str) -> Result<EpsilonMode, HarnessError> {
    match text.trim() {
        "auto" => Ok(EpsilonMode::Auto),
        x => Ok(EpsilonMode::Fixed(parse_num(x, "epsilon")?)),
    }
}

pub(crate) fn parse_budget(text: &str) -> Result<Vec<f64>, HarnessError> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(|x| parse_num(x, "budget")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    /// Map file; the shipped default map when absent.
    pub map: Option<PathBuf>,
    pub slip: f64,
    pub horizon: usize,
    /// Per-episode budgets in soft-constraint modes, total budgets `B` in
    /// knapsack mode. Empty means the environment default (`K * xi` for
    /// knapsack).
    pub budget: Vec<f64>,
    pub planner: PlannerKind,
    pub episodes: u64,
    pub delta: f64,
    pub seed: u64,
    pub eta: f64,
    pub lagr_iters: usize,
    pub convex_spec: ConvexPreset,
    pub fw_iters: usize,
    pub epsilon: EpsilonMode,
    pub bound_constant: f64,
    pub aggreg_mode: AggRegMode,
    pub random_states: usize,
    pub random_actions: usize,
    pub random_resources: usize,
    pub random_sparsity: usize,
    /// Seed of the random-environment generator (independent of `seed`).
    pub env_seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let lagr = LagrConfig::default();
        Self {
            env: EnvKind::Mars,
            map: None,
            slip: 0.1,
            horizon: 30,
            budget: Vec::new(),
            planner: PlannerKind::Lp,
            episodes: 100,
            delta: 0.1,
            seed: 0,
            eta: lagr.eta,
            lagr_iters: lagr.iterations,
            convex_spec: ConvexPreset::Linear,
            fw_iters: 200,
            epsilon: EpsilonMode::Auto,
            bound_constant: 1.0,
            aggreg_mode: AggRegMode::Theorem,
            random_states: 5,
            random_actions: 3,
            random_resources: 1,
            random_sparsity: 3,
            env_seed: 0,
            out: PathBuf::from("runs/latest"),
        }
    }
}

/// Every recognised key, in manifest order.
pub const CONFIG_KEYS: &[&str] = &[
    "env",
    "map",
    "slip",
    "horizon",
    "budget",
    "planner",
    "episodes",
    "delta",
    "seed",
    "eta",
    "lagr_iters",
    "convex_spec",
    "fw_iters",
    "epsilon",
    "bound_constant",
    "aggreg_mode",
    "random_states",
    "random_actions",
    "random_resources",
    "random_sparsity",
    "env_seed",
    "out",
];

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let v = value.trim();
        match key.trim() {
            "env" => self.env = v.parse()?,
            "map" => {
                self.map = if v.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(v))
                }
            }
            "slip" => self.slip = parse_num(v, key)?,
            "horizon" => self.horizon = parse_num(v, key)?,
            "budget" => self.budget = parse_budget(v)?,
            "planner" => self.planner = v.parse()?,
            "episodes" => self.episodes = parse_num(v, key)?,
            "delta" => self.delta = parse_num(v, key)?,
            "seed" => self.seed = parse_num(v, key)?,
            "eta" => self.eta = parse_num(v, key)?,
            "lagr_iters" => self.lagr_iters = parse_num(v, key)?,
            "convex_spec" => self.convex_spec = v.parse()?,
            "fw_iters" => self.fw_iters = parse_num(v, key)?,
            "epsilon" => self.epsilon = parse_epsilon(v)?,
            "bound_constant" => self.bound_constant = parse_num(v, key)?,
            "aggreg_mode" => self.aggreg_mode = v.parse()?,
            "random_states" => self.random_states = parse_num(v, key)?,
            "random_actions" => self.random_actions = parse_num(v, key)?,
            "random_resources" => self.random_resources = parse_num(v, key)?,
            "random_sparsity" => self.random_sparsity = parse_num(v, key)?,
            "env_seed" => self.env_seed = parse_num(v, key)?,
            "out" => self.out = PathBuf::from(v),
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown config key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Applies a config file's lines on top of `self`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("config line {}: expected `key = value`", idx + 1))
            })?;
            self.set(key, value)
                .map_err(|e| HarnessError::Config(format!("config line {}: {e}", idx + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "env" => self.env.as_str().to_string(),
            "map" => self
                .map
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            "slip" => self.slip.to_string(),
            "horizon" => self.horizon.to_string(),
            "budget" => self
                .budget
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join(","),
            "planner" => self.planner.as_str().to_string(),
            "episodes" => self.episodes.to_string(),
            "delta" => self.delta.to_string(),
            "seed" => self.seed.to_string(),
            "eta" => self.eta.to_string(),
            "lagr_iters" => self.lagr_iters.to_string(),
            "convex_spec" => self.convex_spec.to_string(),
            "fw_iters" => self.fw_iters.to_string(),
            "epsilon" => match self.epsilon {
                EpsilonMode::Auto => "auto".to_string(),
                EpsilonMode::Fixed(e) => e.to_string(),
            },
            "bound_constant" => self.bound_constant.to_string(),
            "aggreg_mode" => self.aggreg_mode.as_str().to_string(),
            "random_states" => self.random_states.to_string(),
            "random_actions" => self.random_actions.to_string(),
            "random_resources" => self.random_resources.to_string(),
            "random_sparsity" => self.random_sparsity.to_string(),
            "env_seed" => self.env_seed.to_string(),
            "out" => self.out.display().to_string(),
            _ => unreachable!("key list and accessor disagree"),
        }
    }

    /// All settings as `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{key} = {}", self.value_of(key));
        }
        out
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.slip) {
            return bad(format!("slip must lie in [0, 1], got {}", self.slip));
        }
        if self.budget.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
            return bad("budgets must be finite and nonnegative".into());
        }
        if self.planner == PlannerKind::Lagrangian {
            LagrConfig::new(self.eta, self.lagr_iters)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if self.fw_iters == 0 {
            return bad("fw_iters must be positive".into());
        }
        if let EpsilonMode::Fixed(e) = self.epsilon {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("epsilon must lie in [0, 1], got {e}"));
            }
        }
        if !(self.bound_constant > 0.0) {
            return bad("bound_constant must be positive".into());
        }
        if self.env == EnvKind::Random
            && (self.random_states == 0 || self.random_actions == 0 || self.random_sparsity == 0)
        {
            return bad("random environment sizes must be positive".into());
        }
        Ok(())
    }

    /// The true cMDP of the run; knapsack runs get the null action. Budgets
    /// from `budget` replace the environment's in soft-constraint modes.
    pub fn build_truth(&self) -> Result<Cmdp, HarnessError> {
        let knapsack = self.planner == PlannerKind::Knapsack;
        let env_cfg = EnvConfig {
            slip: self.slip,
            horizon: self.horizon,
            include_null_action: knapsack,
            ..Default::default()
        };
        let mut cmdp = match self.env {
            EnvKind::Mars | EnvKind::Box => {
                let kind = if self.env == EnvKind::Mars {
                    MapKind::MarsRover
                } else {
                    MapKind::Box
                };
                let map = match &self.map {
                    Some(path) => GridMap::load(path, kind)?,
                    None => GridMap::parse(
                        if kind == MapKind::MarsRover {
                            DEFAULT_MARS_MAP
                        } else {
                            DEFAULT_BOX_MAP
                        },
                        kind,
                    )?,
                };
                if kind == MapKind::MarsRover {
                    build_mars_rover(&map, &env_cfg)?
                } else {
                    build_box(&map, &env_cfg)?
                }
            }
            EnvKind::Random => {
                let base = build_random_cmdp(
                    self.env_seed,
                    self.random_states,
                    self.random_actions,
                    self.horizon,
                    self.random_resources,
                    self.random_sparsity.min(self.random_states),
                )?;
                if knapsack {
                    base.with_null_action()?
                } else {
                    base
                }
            }
        };
        if !knapsack && !self.budget.is_empty() {
            if self.budget.len() != cmdp.num_resources() {
                return Err(HarnessError::Config(format!(
                    "{} budgets given for {} resources",
                    self.budget.len(),
                    cmdp.num_resources()
                )));
            }
            cmdp = cmdp.with_budgets(self.budget.clone())?;
        }
        Ok(cmdp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("env = random\nplanner = knapsack\nbudget = 1.5, 2\nepsilon = 0.25\nconvex_spec = cap=1.2\n# note\n")
            .unwrap();
        assert_eq!(cfg.budget, vec![1.5, 2.0]);
        assert_eq!(cfg.epsilon, EpsilonMode::Fixed(0.25));
        let back = ExperimentConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_settings() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("colour", "red").is_err());
        assert!(cfg.set("planner", "magic").is_err());
        assert!(cfg.apply_text("episodes 3").is_err());
        assert!(ExperimentConfig::from_text("delta = 1.0").is_err());
        assert!(ExperimentConfig::from_text("episodes = 0").is_err());
    }

    #[test]
    fn default_truths_build() {
        let cfg = ExperimentConfig::default();
        let mars = cfg.build_truth().unwrap();
        assert_eq!(mars.budgets(), &[0.2]);
        let knap = ExperimentConfig {
            planner: PlannerKind::Knapsack,
            ..cfg.clone()
        }
        .build_truth()
        .unwrap();
        assert_eq!(knap.num_actions(), 5);
        let random = ExperimentConfig {
            env: EnvKind::Random,
            budget: vec![0.7],
            ..cfg
        }
        .build_truth()
        .unwrap();
        assert_eq!(random.budgets(), &[0.7]);
    }
}
