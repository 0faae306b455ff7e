//! Concave-reward / convex-consumption planner.
//!
//! Over occupancy measures `rho` of the model kernel it solves
//!
//! ```text
//! maximize  F(rho) = max { f(t) : t in [sum rho (r_hat - b), sum rho (r_hat + b)] }
//! s.t.      G(rho) = min { g(v) : v_i in [sum rho (c_hat_i - b), sum rho (c_hat_i + b)] } <= 0
//! ```
//!
//! `F` is concave and `G` convex in `rho`, so for a multiplier `lambda >= 0`
//! the Lagrangian `F - lambda G` is concave. The inner problem is solved by
//! Frank-Wolfe with value iteration as the linear oracle (gradients are
//! stage independent, so the oracle is a plain reward maximisation). The
//! outer loop brackets the smallest feasible `lambda` by doubling, then
//! bisects, and finishes with a line search on the segment between the
//! bracketing feasible and infeasible iterates.

use std::fmt;
use std::sync::Arc;

use crate::cmdp::{occupancy_from_policy, policy_from_occupancy, ObjectiveTable, OccupancyMeasure};
use crate::estimation::BonusEnhancedModel;

use super::value_iteration::value_iteration;
use super::{PlannedPolicy, PlannerError, PlannerSolution, PlannerStatus};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

const GOLDEN_TOL: f64 = 1e-10;
const FEASIBILITY_TOL: f64 = 1e-10;
const LAMBDA_CAP: f64 = 1e9;

/// Objective `f` (concave, on total reward) and constraint `g` (convex, on
/// the total consumption vector), both `L`-Lipschitz.
#[derive(Clone)]
pub struct ConvexSpec {
    pub f: ScalarFn,
    pub g: VectorFn,
    /// Analytic gradient of `g`; central differences are used otherwise.
    pub g_gradient: Option<GradientFn>,
    pub lipschitz: f64,
}

impl fmt::Debug for ConvexSpec {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        out.debug_struct("ConvexSpec")
            .field("g_gradient", &self.g_gradient.is_some())
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl ConvexSpec {
    pub fn new(f: ScalarFn, g: VectorFn, lipschitz: f64) -> Result<Self, PlannerError> {
        if !(lipschitz > 0.0) || !lipschitz.is_finite() {
            return Err(PlannerError::Config(format!(
                "Lipschitz constant must be positive, got {lipschitz}"
            )));
        }
        Ok(Self {
            f,
            g,
            g_gradient: None,
            lipschitz,
        })
    }

    pub fn with_gradient(mut self, gradient: GradientFn) -> Self {
        self.g_gradient = Some(gradient);
        self
    }

    /// `f(t) = t`, `g(v) = max_i (v_i - xi_i)`: the linear budget problem.
    pub fn linear(xi: Vec<f64>) -> Self {
        Self::capped(f64::INFINITY, xi)
    }

    /// `f(t) = min(t, cap)` with the linear budget constraint.
    pub fn capped(cap: f64, xi: Vec<f64>) -> Self {
        let xi_grad = xi.clone();
        Self {
            f: Arc::new(move |t| t.min(cap)),
            g: Arc::new(move |v| max_excess(v, &xi)),
            g_gradient: Some(Arc::new(move |v| {
                let mut grad = vec![0.0; v.len()];
                if let Some(i) = argmax_excess(v, &xi_grad) {
                    grad[i] = 1.0;
                }
                grad
            })),
            lipschitz: 1.0,
        }
    }
}

fn max_excess(v: &[f64], xi: &[f64]) -> f64 {
    argmax_excess(v, xi).map_or(-1.0, |i| v[i] - xi[i])
}

fn argmax_excess(v: &[f64], xi: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (x, b)) in v.iter().zip(xi).enumerate() {
        if best.map_or(true, |(_, e)| x - b > e) {
            best = Some((i, x - b));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexBudget {
    pub fw_iterations: usize,
    pub bisection_steps: usize,
}

impl Default for ConvexBudget {
    fn default() -> Self {
        Self {
            fw_iterations: 200,
            bisection_steps: 40,
        }
    }
}

/// Maximiser of a unimodal `f` on `[a, b]` by golden-section search down to
/// an interval of width `tol`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    if b - a <= tol {
        let x = b;
        return (x, f(x));
    }
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    // endpoints matter for monotone f, so compare them too
    let candidates = [(a, f(a)), (b, f(b)), (x1, f1), (x2, f2)];
    candidates.into_iter().fold(
        (a, f64::NEG_INFINITY),
        |best, c| if c.1 > best.1 { c } else { best },
    )
}

struct Problem<'a> {
    model: &'a BonusEnhancedModel,
    spec: &'a ConvexSpec,
    r_hat: ObjectiveTable,
    c_hat: Vec<ObjectiveTable>,
    bonus: &'a ObjectiveTable,
    s0: usize,
    horizon: usize,
}

/// Values of `F` and `G` at an occupancy, with their inner maximiser and
/// minimiser.
struct Evaluation {
    f_value: f64,
    t_star: f64,
    g_value: f64,
    v_star: Vec<f64>,
}

impl Problem<'_> {
    fn pair_mass(&self, rho: &OccupancyMeasure) -> Vec<f64> {
        let pairs = self.r_hat.as_slice().len();
        let mut mass = vec![0.0; pairs];
        for stage in rho.as_slice().chunks(pairs) {
            for (m, x) in mass.iter_mut().zip(stage) {
                *m += x;
            }
        }
        mass
    }

    fn dot(mass: &[f64], table: &ObjectiveTable) -> f64 {
        mass.iter().zip(table.as_slice()).map(|(m, x)| m * x).sum()
    }

    fn evaluate(&self, rho: &OccupancyMeasure) -> Evaluation {
        let mass = self.pair_mass(rho);
        let center = Self::dot(&mass, &self.r_hat);
        let spread = Self::dot(&mass, self.bonus);
        let (t_star, f_value) = golden_max(
            |t| (self.spec.f)(t),
            center - spread,
            center + spread,
            GOLDEN_TOL,
        );
        let lo: Vec<f64> = self
            .c_hat
            .iter()
            .map(|c| Self::dot(&mass, c) - spread)
            .collect();
        let hi: Vec<f64> = self
            .c_hat
            .iter()
            .map(|c| Self::dot(&mass, c) + spread)
            .collect();
        let (v_star, g_value) = self.box_min(&lo, &hi);
        Evaluation {
            f_value,
            t_star,
            g_value,
            v_star,
        }
    }

    fn g_gradient(&self, v: &[f64]) -> Vec<f64> {
        if let Some(grad) = &self.spec.g_gradient {
            return grad(v);
        }
        let mut probe = v.to_vec();
        (0..v.len())
            .map(|i| {
                let step = 1e-6 * v[i].abs().max(1.0);
                probe[i] = v[i] + step;
                let up = (self.spec.g)(&probe);
                probe[i] = v[i] - step;
                let down = (self.spec.g)(&probe);
                probe[i] = v[i];
                (up - down) / (2.0 * step)
            })
            .collect()
    }

    /// `min g` over the box `[lo, hi]` by projected gradient with
    /// backtracking, started from the lower corner.
    fn box_min(&self, lo: &[f64], hi: &[f64]) -> (Vec<f64>, f64) {
        let g = &self.spec.g;
        let mut v = lo.to_vec();
        let mut value = g(&v);
        if lo.iter().zip(hi).all(|(a, b)| b - a <= 0.0) {
            return (v, value);
        }
        let width = lo.iter().zip(hi).fold(0.0f64, |acc, (a, b)| acc.max(b - a));
        let mut step = width;
        for _ in 0..200 {
            let grad = self.g_gradient(&v);
            let mut improved = false;
            while step > 1e-14 * width.max(1.0) {
                let trial: Vec<f64> = v
                    .iter()
                    .zip(&grad)
                    .zip(lo.iter().zip(hi))
                    .map(|((x, gr), (a, b))| (x - step * gr).clamp(*a, *b))
                    .collect();
                let tv = g(&trial);
                if tv < value - 1e-15 * value.abs().max(1.0) {
                    v = trial;
                    value = tv;
                    improved = true;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        (v, value)
    }

    fn derivative(&self, t: f64) -> f64 {
        let step = 1e-6 * t.abs().max(1.0);
        ((self.spec.f)(t + step) - (self.spec.f)(t - step)) / (2.0 * step)
    }

    /// Stage-independent gradient of `F - lambda G` with respect to `rho`.
    fn gradient(&self, eval: &Evaluation, lambda: f64) -> ObjectiveTable {
        let df = self.derivative(eval.t_star);
        let mut grad = self
            .r_hat
            .add_scaled(&self.r_hat, df - 1.0)
            .add_scaled(self.bonus, df.abs());
        if lambda > 0.0 && !self.c_hat.is_empty() {
            let dg = self.g_gradient(&eval.v_star);
            for (c, gi) in self.c_hat.iter().zip(dg) {
                grad = grad
                    .add_scaled(c, -lambda * gi)
                    .add_scaled(self.bonus, lambda * gi.abs());
            }
        }
        grad
    }

    fn vertex(&self, reward: &ObjectiveTable) -> Result<OccupancyMeasure, PlannerError> {
        let (_, policy) = value_iteration(&self.model.p, reward, self.horizon)?;
        Ok(occupancy_from_policy(
            &self.model.p,
            &policy,
            self.s0,
            self.horizon,
        )?)
    }
}

fn blend(
    a: &OccupancyMeasure,
    b: &OccupancyMeasure,
    theta: f64,
) -> Result<OccupancyMeasure, PlannerError> {
    Ok(OccupancyMeasure::mix(&[(1.0 - theta, a), (theta, b)])?)
}

struct Incumbent {
    best: Option<(f64, OccupancyMeasure)>,
}

impl Incumbent {
    fn offer(&mut self, eval: &Evaluation, rho: &OccupancyMeasure) {
        if eval.g_value <= FEASIBILITY_TOL
            && self.best.as_ref().map_or(true, |(f, _)| eval.f_value > *f)
        {
            self.best = Some((eval.f_value, rho.clone()));
        }
    }
}

fn frank_wolfe(
    prob: &Problem<'_>,
    lambda: f64,
    iterations: usize,
    incumbent: &mut Incumbent,
) -> Result<(OccupancyMeasure, Evaluation), PlannerError> {
    let mut rho = prob.vertex(&prob.model.r_plus)?;
    let mut eval = prob.evaluate(&rho);
    incumbent.offer(&eval, &rho);
    for t in 0..iterations {
        let grad = prob.gradient(&eval, lambda);
        let target = prob.vertex(&grad)?;
        let mass_now = prob.pair_mass(&rho);
        let mass_target = prob.pair_mass(&target);
        let gap: f64 = mass_target
            .iter()
            .zip(&mass_now)
            .zip(grad.as_slice())
            .map(|((x, y), g)| (x - y) * g)
            .sum();
        if gap <= 1e-12 * (1.0 + eval.f_value.abs()) {
            break;
        }
        let gamma = 2.0 / (t as f64 + 2.0);
        rho = blend(&rho, &target, gamma)?;
        eval = prob.evaluate(&rho);
        incumbent.offer(&eval, &rho);
    }
    Ok((rho, eval))
}

/// Solves the concave-convex program on the bonus-enhanced model.
pub fn convex_conplanner(
    model: &BonusEnhancedModel,
    spec: &ConvexSpec,
    s0: usize,
    horizon: usize,
    budget: &ConvexBudget,
) -> Result<PlannerSolution, PlannerError> {
    if budget.fw_iterations == 0 {
        return Err(PlannerError::Config(
            "Frank-Wolfe needs at least one iteration".into(),
        ));
    }
    if s0 >= model.num_states() {
        return Err(PlannerError::Config(format!(
            "initial state {s0} out of range"
        )));
    }
    let prob = Problem {
        model,
        spec,
        r_hat: model.r_hat(),
        c_hat: (0..model.num_resources()).map(|i| model.c_hat(i)).collect(),
        bonus: model.bonus.table(),
        s0,
        horizon,
    };
    let mut incumbent = Incumbent { best: None };
    let (rho0, eval0) = frank_wolfe(&prob, 0.0, budget.fw_iterations, &mut incumbent)?;

    if eval0.g_value > FEASIBILITY_TOL {
        let (mut lo, mut rho_lo) = (0.0, rho0);
        let mut hi = 1.0;
        let mut rho_hi = None;
        while hi <= LAMBDA_CAP {
            let (rho, eval) = frank_wolfe(&prob, hi, budget.fw_iterations, &mut incumbent)?;
            if eval.g_value <= FEASIBILITY_TOL {
                rho_hi = Some(rho);
                break;
            }
            lo = hi;
            rho_lo = rho;
            hi *= 2.0;
        }
        if let Some(mut rho_hi) = rho_hi {
            for _ in 0..budget.bisection_steps {
                let mid = 0.5 * (lo + hi);
                let (rho, eval) = frank_wolfe(&prob, mid, budget.fw_iterations, &mut incumbent)?;
                if eval.g_value <= FEASIBILITY_TOL {
                    hi = mid;
                    rho_hi = rho;
                } else {
                    lo = mid;
                    rho_lo = rho;
                }
            }
            polish(&prob, &rho_hi, &rho_lo, &mut incumbent)?;
        }
    }

    let (_, rho) = incumbent.best.ok_or(PlannerError::Infeasible)?;
    let policy = policy_from_occupancy(&rho)?;
    let occupancy = occupancy_from_policy(&model.p, &policy, s0, horizon)?;
    PlannerSolution::from_occupancy(
        model,
        PlannedPolicy::Markov(policy),
        occupancy,
        PlannerStatus::Approximate,
    )
}

/// Line search on `(1 - theta) feasible + theta infeasible`: `G` is convex
/// along the segment, so the feasible part is `[0, theta_max]`, on which the
/// concave `F` is maximised by golden section.
fn polish(
    prob: &Problem<'_>,
    feasible: &OccupancyMeasure,
    infeasible: &OccupancyMeasure,
    incumbent: &mut Incumbent,
) -> Result<(), PlannerError> {
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if prob.evaluate(&blend(feasible, infeasible, mid)?).g_value <= 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let theta_max = a;
    let objective = |theta: f64| {
        blend(feasible, infeasible, theta)
            .map(|r| prob.evaluate(&r).f_value)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let (theta, _) = golden_max(objective, 0.0, theta_max, GOLDEN_TOL);
    let rho = blend(feasible, infeasible, theta)?;
    let eval = prob.evaluate(&rho);
    incumbent.offer(&eval, &rho);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::TransitionTable;
    use crate::planners::basic_conplanner;

    fn model() -> BonusEnhancedModel {
        let p = TransitionTable::new(2, 2, vec![0.5, 0.5, 0.2, 0.8, 0.9, 0.1, 0.3, 0.7]).unwrap();
        let r = ObjectiveTable::new(2, 2, vec![0.1, 0.9, 0.2, 0.8]).unwrap();
        let c = ObjectiveTable::new(2, 2, vec![0.0, 1.0, 0.1, 0.9]).unwrap();
        BonusEnhancedModel::exact(p, r, vec![c])
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, fx) = golden_max(|t| -(t - 0.3) * (t - 0.3), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(fx.abs() < 1e-15);
        let (x, _) = golden_max(|t| t, 0.0, 1.0, 1e-10);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn linear_spec_recovers_lp() {
        let m = model();
        let lp = basic_conplanner(&m, &[0.8], 0, 3).unwrap();
        let cv = convex_conplanner(
            &m,
            &ConvexSpec::linear(vec![0.8]),
            0,
            3,
            &ConvexBudget::default(),
        )
        .unwrap();
        assert!(
            (lp.predicted_reward - cv.predicted_reward).abs() < 1e-6,
            "{} vs {}",
            lp.predicted_reward,
            cv.predicted_reward
        );
        assert!(cv.predicted_consumption[0] <= 0.8 + 1e-8);
    }

    #[test]
    fn cap_is_attained_without_constraints() {
        let p = model().p;
        let m = BonusEnhancedModel::exact(p, model().r_plus, vec![]);
        let sol = convex_conplanner(
            &m,
            &ConvexSpec::capped(1.0, vec![]),
            0,
            3,
            &ConvexBudget::default(),
        )
        .unwrap();
        assert!(sol.predicted_reward >= 1.0 - 1e-9);
    }

    #[test]
    fn numerical_gradient_path() {
        let m = model();
        let mut spec = ConvexSpec::linear(vec![0.8]);
        spec.g_gradient = None;
        let lp = basic_conplanner(&m, &[0.8], 0, 3).unwrap();
        let cv = convex_conplanner(&m, &spec, 0, 3, &ConvexBudget::default()).unwrap();
        assert!((lp.predicted_reward - cv.predicted_reward).abs() < 1e-6);
    }

    #[test]
    fn impossible_constraint_is_infeasible() {
        let m = model();
        let spec = ConvexSpec::linear(vec![-1.0]);
        assert!(matches!(
            convex_conplanner(&m, &spec, 0, 3, &ConvexBudget::default()),
            Err(PlannerError::Infeasible)
        ));
    }
}
