//! State-transition equations of the DICE-2016 climate-economy model on the
//! 5-year grid.
//!
//! Every function here is pure. Units are fixed per argument: capital and
//! output in trillions of 2010 USD (per year for flows), population in
//! billions, carbon stocks in GtC, emissions in GtCO2 per year, temperatures
//! in degrees C above 1900.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mortality::ExcessMortalityFn;
use crate::params::ModelParams;

/// Model state at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub k: f64,
    pub m_at: f64,
    pub m_up: f64,
    pub m_lo: f64,
    pub t_at: f64,
    pub t_lo: f64,
    pub l: f64,
}

impl StateVector {
    pub fn carbon(&self) -> [f64; 3] {
        [self.m_at, self.m_up, self.m_lo]
    }

    pub fn temperature(&self) -> [f64; 2] {
        [self.t_at, self.t_lo]
    }

    pub fn check(&self) -> Result<()> {
        let positive = [self.k, self.m_at, self.m_up, self.m_lo, self.l];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::domain(format!("non-positive stock in state {self:?}")));
        }
        if !self.t_at.is_finite() || !self.t_lo.is_finite() {
            return Err(Error::domain("non-finite temperature"));
        }
        Ok(())
    }
}

/// Savings rate and industrial abatement rate for one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    pub s: f64,
    pub mu: f64,
}

impl ControlVector {
    pub fn check(&self, mu_max: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&self.s) {
            return Err(Error::domain(format!("savings rate {} outside [0, 1]", self.s)));
        }
        if !(0.0..=mu_max).contains(&self.mu) {
            return Err(Error::domain(format!(
                "abatement rate {} outside [0, {mu_max}]",
                self.mu
            )));
        }
        Ok(())
    }
}

/// Cobb-Douglas gross output `A K^gamma L^(1-gamma)`.
pub fn gross_output(tfp: f64, capital: f64, population: f64, gamma: f64) -> Result<f64> {
    if !(tfp > 0.0 && capital > 0.0 && population > 0.0) {
        return Err(Error::domain(format!(
            "gross output needs positive inputs (A={tfp}, K={capital}, L={population})"
        )));
    }
    Ok(tfp * capital.powf(gamma) * population.powf(1.0 - gamma))
}

/// Output fraction left after abatement cost and climate damage.
pub fn damage_abatement_factor(mu: f64, t_at: f64, theta1: f64, theta2: f64, pi2: f64) -> Result<f64> {
    if mu < 0.0 || theta1 < 0.0 {
        return Err(Error::domain(format!(
            "abatement rate and cost coefficient must be non-negative (mu={mu}, theta1={theta1})"
        )));
    }
    Ok(1.0 - theta1 * mu.powf(theta2) - pi2 * t_at * t_at)
}

pub fn industrial_emissions(mu: f64, sigma: f64, gross_output: f64) -> f64 {
    (1.0 - mu) * sigma * gross_output
}

/// `eta * log2(M_AT / m_star) + F_EX`.
pub fn radiative_forcing(m_at: f64, f_ex: f64, eta: f64, m_star: f64) -> Result<f64> {
    if !(m_at > 0.0) {
        return Err(Error::domain(format!("atmospheric carbon must be positive, got {m_at}")));
    }
    Ok(eta * (m_at / m_star).log2() + f_ex)
}

/// Carbon stocks after one period with `emissions` GtCO2/yr injected into
/// the atmosphere. CO2 mass is converted to carbon mass by `beta_co2`.
pub fn step_carbon(m: [f64; 3], emissions: f64, params: &ModelParams) -> [f64; 3] {
    let phi = params.phi_m();
    let mut next = [0.0; 3];
    for (row, out) in next.iter_mut().enumerate() {
        *out = phi[row][0] * m[0] + phi[row][1] * m[1] + phi[row][2] * m[2];
    }
    next[0] += params.delta_years * emissions / params.beta_co2;
    next
}

/// Temperatures after one period given next-period forcing.
pub fn step_temperature(t: [f64; 2], forcing_next: f64, params: &ModelParams) -> [f64; 2] {
    let phi = params.phi_t();
    [
        phi[0][0] * t[0] + phi[0][1] * t[1] + params.xi1 * forcing_next,
        phi[1][0] * t[0] + phi[1][1] * t[1],
    ]
}

pub fn step_capital(capital: f64, net_output: f64, consumption: f64, params: &ModelParams) -> Result<f64> {
    if consumption > net_output || consumption < 0.0 {
        return Err(Error::domain(format!(
            "consumption {consumption} outside [0, net output {net_output}]"
        )));
    }
    Ok(capital * params.capital_retention() + params.delta_years * (net_output - consumption))
}

/// Population with temperature-driven excess deaths.
///
/// `growth_factor` is the calibrated `1 + b - d`; `deaths` are the baseline
/// deaths over the period in billions.
pub fn step_population(
    population: f64,
    growth_factor: f64,
    deaths: f64,
    t_at: f64,
    excess: &ExcessMortalityFn,
) -> Result<f64> {
    if !(population > 0.0) || deaths < 0.0 {
        return Err(Error::domain("population must be positive and deaths non-negative"));
    }
    let next = population * growth_factor - deaths * excess.eval_clamped(t_at);
    if !(next > 0.0) {
        return Err(Error::domain(format!("degenerate population {next}")));
    }
    Ok(next)
}

/// Per-period utility `L (C/L)^(1-alpha) / (1-alpha)`.
pub fn utility(consumption: f64, population: f64, alpha: f64) -> Result<f64> {
    if !(consumption > 0.0 && population > 0.0) {
        return Err(Error::domain(format!(
            "utility needs positive consumption and population (C={consumption}, L={population})"
        )));
    }
    Ok(population * (consumption / population).powf(1.0 - alpha) / (1.0 - alpha))
}
