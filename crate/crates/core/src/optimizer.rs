//! Welfare maximisation over savings (and abatement, in fully optimal mode).
//!
//! The box-constrained solver is a projected limited-memory BFGS: search
//! directions are built on the free variables only, and every trial point is
//! projected back into the box before the Armijo test.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exogenous::ExogenousPaths;
use crate::model::StateVector;
use crate::params::ModelParams;
use crate::scenario::{ControlSchedule, ScheduleKind};
use crate::simulation::{AbatementMode, Economy, Perturbation, PopulationModel, Trajectory};

/// Objective to be minimised.
pub trait Objective {
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// A bound-constrained minimiser.
pub trait BoxSolver {
    fn minimize(&self, objective: &dyn Objective, x0: &[f64], bounds: &Bounds) -> Result<(Vec<f64>, SolverReport)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn is_fixed(&self, i: usize) -> bool {
        self.lower[i] == self.upper[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Tolerance on the infinity norm of the projected gradient.
    pub gtol: f64,
    /// Relative objective-decrease tolerance.
    pub ftol: f64,
    pub max_iterations: usize,
    pub max_evaluations: usize,
    pub memory: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-6,
            ftol: 1e-10,
            max_iterations: 5000,
            max_evaluations: 50_000,
            memory: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub evaluations: usize,
    pub objective: f64,
    pub projected_gradient_norm: f64,
    pub termination: String,
    /// Objective after every accepted iterate.
    pub history: Vec<f64>,
}

/// Projected L-BFGS.
#[derive(Debug, Clone, Default)]
pub struct ProjectedLbfgs {
    pub options: SolverOptions,
}

fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: &Bounds) -> f64 {
    x.iter()
        .zip(g)
        .enumerate()
        .map(|(i, (xi, gi))| ((xi - gi).clamp(bounds.lower[i], bounds.upper[i]) - xi).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl BoxSolver for ProjectedLbfgs {
    fn minimize(&self, objective: &dyn Objective, x0: &[f64], bounds: &Bounds) -> Result<(Vec<f64>, SolverReport)> {
        let opts = &self.options;
        let n = x0.len();
        let mut x = x0.to_vec();
        bounds.project(&mut x);
        let (mut f, mut g) = objective.value_and_gradient(&x)?;
        let mut evals = 1;
        let mut history = vec![f];
        let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
        let mut iterations = 0;

        let report = |iterations, evals, f, pg, why: &str, history: Vec<f64>| SolverReport {
            iterations,
            evaluations: evals,
            objective: f,
            projected_gradient_norm: pg,
            termination: why.to_string(),
            history,
        };

        loop {
            let pg = projected_gradient_norm(&x, &g, bounds);
            if pg <= opts.gtol {
                return Ok((x, report(iterations, evals, f, pg, "gtol", history)));
            }
            if iterations >= opts.max_iterations || evals >= opts.max_evaluations {
                return Err(Error::Solver {
                    reason: "iteration or evaluation budget exhausted".into(),
                    iterations,
                    gradient_norm: pg,
                });
            }
            iterations += 1;

            let eps = 1e-12;
            let free: Vec<bool> = (0..n)
                .map(|i| {
                    !(bounds.is_fixed(i)
                        || (x[i] <= bounds.lower[i] + eps && g[i] > 0.0)
                        || (x[i] >= bounds.upper[i] - eps && g[i] < 0.0))
                })
                .collect();

            // Two-loop recursion on the free subspace.
            let mut q: Vec<f64> = g.iter().zip(&free).map(|(gi, &fr)| if fr { *gi } else { 0.0 }).collect();
            let mut alphas = Vec::with_capacity(memory.len());
            for (s, y, rho) in memory.iter().rev() {
                let a = rho * (0..n).filter(|&i| free[i]).map(|i| s[i] * q[i]).sum::<f64>();
                for i in 0..n {
                    if free[i] {
                        q[i] -= a * y[i];
                    }
                }
                alphas.push(a);
            }
            if let Some((s, y, _)) = memory.back() {
                let sy: f64 = (0..n).filter(|&i| free[i]).map(|i| s[i] * y[i]).sum();
                let yy: f64 = (0..n).filter(|&i| free[i]).map(|i| y[i] * y[i]).sum();
                if sy > 0.0 && yy > 0.0 {
                    q.iter_mut().for_each(|v| *v *= sy / yy);
                }
            }
            for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
                let b = rho * (0..n).filter(|&i| free[i]).map(|i| y[i] * q[i]).sum::<f64>();
                for i in 0..n {
                    if free[i] {
                        q[i] += s[i] * (a - b);
                    }
                }
            }
            let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
            let mut slope = dot(&g, &d);
            if memory.is_empty() || !(slope < 0.0) {
                memory.clear();
                d = g.iter().zip(&free).map(|(gi, &fr)| if fr { -gi } else { 0.0 }).collect();
                let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if dmax > 0.0 {
                    let scale = (0.1 / dmax).min(1.0);
                    d.iter_mut().for_each(|v| *v *= scale);
                }
                slope = dot(&g, &d);
            }

            // Backtracking Armijo search along the projected path.
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
                bounds.project(&mut trial);
                let dx: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                let decrease = dot(&g, &dx);
                evals += 1;
                if let Ok(ft) = objective.value(&trial) {
                    if ft <= f + 1e-4 * decrease.min(0.0) && ft.is_finite() {
                        accepted = Some((trial, ft));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((x_new, f_new)) = accepted else {
                if !memory.is_empty() {
                    memory.clear();
                    continue;
                }
                if pg <= opts.gtol.sqrt() {
                    return Ok((x, report(iterations, evals, f, pg, "line search stalled near optimum", history)));
                }
                return Err(Error::Solver {
                    reason: format!("line-search collapse (slope {slope:.3e})"),
                    iterations,
                    gradient_norm: pg,
                });
            };
            let (f_new, g_new) = objective.value_and_gradient(&x_new).map(|(fv, gv)| (fv.min(f_new), gv))?;
            evals += 1;
            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
                memory.push_back((s, y, 1.0 / sy));
                if memory.len() > opts.memory {
                    memory.pop_front();
                }
            }
            let rel = (f - f_new) / f.abs().max(f_new.abs()).max(1.0);
            x = x_new;
            f = f_new;
            g = g_new;
            history.push(f);
            if rel <= opts.ftol {
                let pg = projected_gradient_norm(&x, &g, bounds);
                if pg <= opts.gtol.sqrt() {
                    return Ok((x, report(iterations, evals, f, pg, "ftol", history)));
                }
            }
        }
    }
}

/// Full optimisation problem on the model grid.
#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub params: ModelParams,
    pub exog: ExogenousPaths,
    pub schedule: ControlSchedule,
    pub initial_state: StateVector,
    pub population: PopulationModel,
    pub options: SolverOptions,
    /// Pin savings over the final `params.savings_tail_periods` periods.
    pub fix_savings_tail: bool,
    pub savings_bounds: (f64, f64),
    /// Warm start for savings.
    pub initial_savings: Option<Vec<f64>>,
}

impl OptimizationProblem {
    pub fn new(params: ModelParams, exog: ExogenousPaths, schedule: ControlSchedule) -> Result<Self> {
        exog.validate(&params)?;
        let mut initial_state = params.initial_state();
        initial_state.l = exog.population[0];
        Ok(Self {
            params,
            exog,
            schedule,
            initial_state,
            population: PopulationModel::Exogenous,
            options: SolverOptions::default(),
            fix_savings_tail: true,
            savings_bounds: (0.0, 1.0),
            initial_savings: None,
        })
    }

    pub fn mode(&self) -> AbatementMode {
        match self.schedule.kind {
            ScheduleKind::NetZero(_) => AbatementMode::Total,
            _ => AbatementMode::Industrial,
        }
    }

    pub fn economy(&self) -> Economy<'_> {
        let mut eco = Economy::new(&self.params, &self.exog, self.mode());
        eco.initial = self.initial_state;
        eco.population = self.population.clone();
        eco
    }

    fn savings_bounds_vec(&self) -> Bounds {
        let n = self.params.n_points();
        let tail = self.params.savings_tail_start();
        let (lo, hi) = self.savings_bounds;
        let mut lower = vec![lo; n];
        let mut upper = vec![hi; n];
        if self.fix_savings_tail {
            for t in tail..n {
                lower[t] = self.params.savings_tail_rate;
                upper[t] = self.params.savings_tail_rate;
            }
        }
        Bounds { lower, upper }
    }

    fn initial_savings_guess(&self) -> Vec<f64> {
        let n = self.params.n_points();
        let mut s = self.initial_savings.clone().unwrap_or_else(|| vec![0.25; n]);
        s.resize(n, 0.25);
        s
    }

    fn schedule_controls(&self) -> Result<Vec<f64>> {
        let n = self.params.n_points();
        if self.schedule.values.len() != n {
            return Err(Error::Config(format!(
                "schedule {} has {} values for {n} periods",
                self.schedule.kind,
                self.schedule.values.len()
            )));
        }
        let max = self.params.scenario_mu_max;
        Ok(self.schedule.values.iter().map(|v| v.clamp(0.0, max)).collect())
    }
}

/// A solved trajectory with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub schedule: ScheduleKind,
    pub mode: AbatementMode,
    pub trajectory: Trajectory,
    pub diagnostics: SolverReport,
    /// USD per tCO2 per period, filled in by the SCC step.
    #[serde(default)]
    pub scc: Vec<f64>,
}

impl ScenarioRun {
    pub fn welfare(&self) -> f64 {
        self.trajectory.welfare
    }
}

struct SavingsObjective<'a> {
    eco: Economy<'a>,
    abatement: Vec<f64>,
    scale: f64,
}

impl Objective for SavingsObjective<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(-self.eco.welfare(x, &self.abatement)? / self.scale)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (traj, gs, _) = self.eco.welfare_gradient(x, &self.abatement, &Perturbation::default())?;
        Ok((-traj.welfare / self.scale, gs.iter().map(|g| -g / self.scale).collect()))
    }
}

struct JointObjective<'a> {
    eco: Economy<'a>,
    n: usize,
    scale: f64,
}

impl Objective for JointObjective<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        let (s, m) = x.split_at(self.n);
        Ok(-self.eco.welfare(s, m)? / self.scale)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (s, m) = x.split_at(self.n);
        let (traj, gs, gm) = self.eco.welfare_gradient(s, m, &Perturbation::default())?;
        let grad = gs.iter().chain(&gm).map(|g| -g / self.scale).collect();
        Ok((-traj.welfare / self.scale, grad))
    }
}

/// Maximises welfare over savings with the abatement schedule held fixed.
pub fn optimize_consumption(problem: &OptimizationProblem) -> Result<ScenarioRun> {
    if problem.schedule.kind == ScheduleKind::FullyOptimal {
        return Err(Error::Config("optimize_consumption needs a fixed schedule".into()));
    }
    let abatement = problem.schedule_controls()?;
    let eco = problem.economy();
    let bounds = problem.savings_bounds_vec();
    let mut x0 = problem.initial_savings_guess();
    bounds.project(&mut x0);
    let scale = eco.welfare(&x0, &abatement)?.abs().max(1e-12);
    let objective = SavingsObjective {
        eco: eco.clone(),
        abatement: abatement.clone(),
        scale,
    };
    let solver = ProjectedLbfgs {
        options: problem.options,
    };
    let (s, report) = solver.minimize(&objective, &x0, &bounds)?;
    let trajectory = eco.simulate(&s, &abatement, &Perturbation::default())?;
    Ok(ScenarioRun {
        schedule: problem.schedule.kind,
        mode: problem.mode(),
        trajectory,
        diagnostics: report,
        scc: Vec::new(),
    })
}

/// Maximises welfare jointly over savings and industrial abatement.
pub fn optimize_full(problem: &OptimizationProblem) -> Result<ScenarioRun> {
    if problem.schedule.kind != ScheduleKind::FullyOptimal {
        return Err(Error::Config("optimize_full needs the fully optimal schedule".into()));
    }
    let p = &problem.params;
    let n = p.n_points();
    let eco = problem.economy();
    let sb = problem.savings_bounds_vec();
    let mut lower = sb.lower.clone();
    let mut upper = sb.upper.clone();
    for t in 0..n {
        if t == 0 {
            lower.push(p.mu_initial);
            upper.push(p.mu_initial);
        } else {
            lower.push(0.0);
            upper.push(p.mu_upper_optimal(t));
        }
    }
    let bounds = Bounds { lower, upper };
    let mut x0 = problem.initial_savings_guess();
    x0.extend((0..n).map(|t| p.mu_initial + 0.01 * t as f64));
    bounds.project(&mut x0);
    let scale = {
        let (s, m) = x0.split_at(n);
        eco.welfare(s, m)?.abs().max(1e-12)
    };
    let objective = JointObjective {
        eco: eco.clone(),
        n,
        scale,
    };
    let solver = ProjectedLbfgs {
        options: problem.options,
    };
    let (x, report) = solver.minimize(&objective, &x0, &bounds)?;
    let (s, m) = x.split_at(n);
    let trajectory = eco.simulate(s, m, &Perturbation::default())?;
    Ok(ScenarioRun {
        schedule: ScheduleKind::FullyOptimal,
        mode: AbatementMode::Industrial,
        trajectory,
        diagnostics: report,
        scc: Vec::new(),
    })
}

/// Dispatches on the schedule kind.
pub fn optimize(problem: &OptimizationProblem) -> Result<ScenarioRun> {
    match problem.schedule.kind {
        ScheduleKind::FullyOptimal => optimize_full(problem),
        _ => optimize_consumption(problem),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Quadratic {
        center: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn value(&self, x: &[f64]) -> Result<f64> {
            Ok(x.iter().zip(&self.center).enumerate().map(|(i, (a, c))| (i + 1) as f64 * (a - c).powi(2)).sum())
        }
        fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            let g = x.iter().zip(&self.center).enumerate().map(|(i, (a, c))| 2.0 * (i + 1) as f64 * (a - c)).collect();
            Ok((self.value(x)?, g))
        }
    }

    #[test]
    fn solver_respects_bounds_on_quadratic() {
        let obj = Quadratic {
            center: vec![0.5, 2.0, -1.0, 0.3],
        };
        let bounds = Bounds {
            lower: vec![0.0; 4],
            upper: vec![1.0; 4],
        };
        let (x, report) = ProjectedLbfgs::default().minimize(&obj, &[0.9, 0.1, 0.5, 0.5], &bounds).unwrap();
        assert_relative_eq!(x[0], 0.5, epsilon = 1e-6);
        assert_eq!(x[1], 1.0);
        assert_eq!(x[2], 0.0);
        assert_relative_eq!(x[3], 0.3, epsilon = 1e-6);
        assert!(report.history.windows(2).all(|w| w[1] <= w[0]));
    }

    /// Two periods, no depreciation, no climate: utility of C0 plus
    /// utility of everything left in period 1.
    fn two_period_problem() -> OptimizationProblem {
        let mut p = ModelParams::dice2016();
        p.n_periods = 1;
        p.savings_tail_periods = 0;
        p.rho = 0.9;
        p.delta_k = 0.0;
        p.pi2 = 0.0;
        p.gamma = 0.3;
        let x = ExogenousPaths {
            years: vec![2015, 2020],
            population: vec![1.0, 1.0],
            tfp: vec![1.0, 1.0],
            sigma: vec![0.0, 0.0],
            e_land: vec![0.0, 0.0],
            f_ex: vec![0.0, 0.0],
            theta1: vec![0.0, 0.0],
        };
        let schedule = ControlSchedule {
            kind: ScheduleKind::ZeroIndustrial(2020),
            years: vec![2015, 2020],
            values: vec![0.0, 0.0],
        };
        let mut prob = OptimizationProblem::new(p, x, schedule).unwrap();
        prob.initial_state.k = 1.0;
        prob.initial_state.l = 1.0;
        prob
    }

    #[test]
    fn terminal_period_saves_nothing() {
        let prob = two_period_problem();
        let run = optimize_consumption(&prob).unwrap();
        assert!(run.trajectory.savings[1] < 1e-6);
    }

    #[test]
    fn two_period_matches_first_order_condition() {
        let prob = two_period_problem();
        let run = optimize_consumption(&prob).unwrap();
        let s0 = run.trajectory.savings[0];
        // Oracle: bisection on the first-order condition
        // C0^-a = rho * C1^-a * 5 * gamma * K1^(gamma-1) with C1 = K1^gamma,
        // K1 = 1 + 5 s0 and C0 = 1 - s0 (Y0 = 1).
        let a = 1.45;
        let foc = |s: f64| {
            let k1: f64 = 1.0 + 5.0 * s;
            let c0: f64 = 1.0 - s;
            let c1 = k1.powf(0.3);
            -c0.powf(-a) + 0.9 * c1.powf(-a) * 5.0 * 0.3 * k1.powf(-0.7)
        };
        let (mut lo, mut hi) = (0.0, 0.99);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if foc(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(s0, 0.5 * (lo + hi), epsilon = 1e-5);
    }

    #[test]
    fn optimize_consumption_rejects_optimal_schedule() {
        let p = ModelParams::dice2016();
        let x = ExogenousPaths::dice2016(&p);
        let prob = OptimizationProblem::new(p, x, ControlSchedule::fully_optimal()).unwrap();
        assert!(matches!(optimize_consumption(&prob), Err(Error::Config(_))));
    }
}
