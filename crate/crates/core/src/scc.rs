//! Social cost of carbon along a solved trajectory.
//!
//! Both methods hold the run's controls fixed. The pulse method adds an
//! emission pulse in one period and converts the welfare loss into
//! period-`t` consumption units using the run's own marginal utility; the
//! ratio method divides central-difference welfare derivatives with respect
//! to emissions and consumption.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{OptimizationProblem, ScenarioRun};
use crate::simulation::Perturbation;

/// Trillions of USD per GtCO2 expressed in USD per tCO2.
const USD_PER_TCO2: f64 = 1000.0;

/// Default emission pulse, GtCO2/yr over one period.
pub const DEFAULT_PULSE: f64 = 1.0;
/// Maximum relative SCC change allowed when the pulse is halved.
pub const HALVING_TOLERANCE: f64 = 0.01;
const MAX_HALVINGS: usize = 10;

/// Absolute step on emissions for the ratio method, GtCO2/yr.
pub const RATIO_EMISSION_STEP: f64 = 1e-3;
/// Relative step on consumption for the ratio method.
pub const RATIO_CONSUMPTION_STEP: f64 = 1e-4;

fn check_period(run: &ScenarioRun, t: usize) -> Result<()> {
    let n = run.trajectory.years.len();
    if t >= n {
        return Err(Error::Range(format!("SCC period {t} outside a {n}-period run")));
    }
    Ok(())
}

fn perturbed_welfare(run: &ScenarioRun, problem: &OptimizationProblem, perturb: &Perturbation) -> Result<f64> {
    let tr = &run.trajectory;
    Ok(problem
        .economy()
        .simulate(&tr.savings, &tr.abatement_control, perturb)?
        .welfare)
}

fn unit_vector(n: usize, t: usize, size: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[t] = size;
    v
}

/// SCC in USD per tCO2 from a one-period emission pulse of `pulse_size`
/// GtCO2/yr injected at period `t`.
pub fn scc_pulse(run: &ScenarioRun, problem: &OptimizationProblem, t: usize, pulse_size: f64) -> Result<f64> {
    check_period(run, t)?;
    if !(pulse_size > 0.0) {
        return Err(Error::Config(format!("pulse size must be positive, got {pulse_size}")));
    }
    let tr = &run.trajectory;
    let n = tr.years.len();
    let base = perturbed_welfare(run, problem, &Perturbation::default())?;
    let pulsed = perturbed_welfare(
        run,
        problem,
        &Perturbation {
            emissions: unit_vector(n, t, pulse_size),
            consumption: Vec::new(),
        },
    )
    .map_err(|e| {
        Error::Numeric(format!(
            "emission pulse of {pulse_size} GtCO2 in {} destabilised the run ({e}); use a smaller pulse",
            tr.years[t]
        ))
    })?;
    let marginal_utility = problem.params.rho.powi(t as i32) * tr.per_capita_consumption(t).powf(-problem.params.alpha);
    Ok(-USD_PER_TCO2 * (pulsed - base) / (marginal_utility * pulse_size))
}

/// SCC from `-1000 (dW/dE_t) / (dW/dC_t)` with both derivatives taken by
/// central differences.
pub fn scc_welfare_ratio(run: &ScenarioRun, problem: &OptimizationProblem, t: usize) -> Result<f64> {
    check_period(run, t)?;
    let tr = &run.trajectory;
    let n = tr.years.len();
    let w = |emissions: f64, consumption: f64| {
        perturbed_welfare(
            run,
            problem,
            &Perturbation {
                emissions: unit_vector(n, t, emissions),
                consumption: unit_vector(n, t, consumption),
            },
        )
    };
    let he = RATIO_EMISSION_STEP;
    let hc = RATIO_CONSUMPTION_STEP * tr.consumption[t];
    let dw_de = (w(he, 0.0)? - w(-he, 0.0)?) / (2.0 * he);
    let dw_dc = (w(0.0, hc)? - w(0.0, -hc)?) / (2.0 * hc);
    if !(dw_dc > 0.0) {
        return Err(Error::Numeric(format!("non-positive marginal welfare of consumption in {}", tr.years[t])));
    }
    Ok(-USD_PER_TCO2 * dw_de / dw_dc)
}

/// SCC at every period with the automatic pulse-halving check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SccPath {
    pub years: Vec<i32>,
    /// USD per tCO2.
    pub values: Vec<f64>,
    /// Pulse finally used per period, GtCO2/yr.
    pub pulse: Vec<f64>,
    /// Relative change between the accepted pulse and its half.
    pub halving_change: Vec<f64>,
}

impl SccPath {
    pub fn max_halving_change(&self) -> f64 {
        self.halving_change.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn at_year(&self, year: i32) -> Option<f64> {
        self.years.iter().position(|&y| y == year).map(|i| self.values[i])
    }
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-9 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Pulse SCC at `t`, halving the pulse until the value is stable to
/// [`HALVING_TOLERANCE`]. Returns (scc, pulse, relative change).
pub fn scc_converged(run: &ScenarioRun, problem: &OptimizationProblem, t: usize, pulse: f64) -> Result<(f64, f64, f64)> {
    let mut size = pulse;
    let mut last_err = None;
    for _ in 0..MAX_HALVINGS {
        let full = scc_pulse(run, problem, t, size);
        let half = scc_pulse(run, problem, t, 0.5 * size);
        match (full, half) {
            (Ok(a), Ok(b)) => {
                let change = relative_change(a, b);
                if change <= HALVING_TOLERANCE {
                    return Ok((b, 0.5 * size, change));
                }
                last_err = Some(Error::Numeric(format!(
                    "SCC in {} moved {:.3}% when halving the pulse",
                    run.trajectory.years[t],
                    100.0 * change
                )));
            }
            (Err(e), _) | (_, Err(e)) => last_err = Some(e),
        }
        size *= 0.5;
    }
    Err(last_err.unwrap_or_else(|| Error::Numeric("SCC pulse did not converge".into())))
}

/// Pulse SCC along the whole run, periods evaluated in parallel.
pub fn scc_path(run: &ScenarioRun, problem: &OptimizationProblem, pulse: f64) -> Result<SccPath> {
    let n = run.trajectory.years.len();
    let results: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|t| scc_converged(run, problem, t, pulse))
        .collect::<Result<_>>()?;
    Ok(SccPath {
        years: run.trajectory.years.clone(),
        values: results.iter().map(|r| r.0).collect(),
        pulse: results.iter().map(|r| r.1).collect(),
        halving_change: results.iter().map(|r| r.2).collect(),
    })
}
