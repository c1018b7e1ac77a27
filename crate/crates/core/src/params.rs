//! Model parameters and the flat key/value parameter file.
//!
//! The bundled file `data/dice2016.toml` carries the DICE-2016R constants.
//! Logic never hard-codes any of these numbers; everything flows from a
//! [`ModelParams`] value loaded here.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bundled DICE-2016R parameter file.
pub const DICE2016_PARAMS: &str = include_str!("../data/dice2016.toml");

/// All constants of the climate-economy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub version: String,

    /// Elasticity of marginal utility (risk aversion).
    pub alpha: f64,
    /// Utility discount factor per 5-year period.
    pub rho: f64,
    /// Annual pure rate of time preference; informational, `rho` is used.
    pub pure_time_preference: f64,

    pub gamma: f64,
    /// Annual capital depreciation rate.
    pub delta_k: f64,
    pub theta2: f64,
    pub pi2: f64,
    /// Backstop price in 2010 USD per tCO2, 2015 value.
    pub backstop_price: f64,
    /// Backstop price decline per period.
    pub backstop_decline: f64,

    pub beta_co2: f64,
    pub m_at_preindustrial: f64,
    pub phi_m_11: f64,
    pub phi_m_12: f64,
    pub phi_m_13: f64,
    pub phi_m_21: f64,
    pub phi_m_22: f64,
    pub phi_m_23: f64,
    pub phi_m_31: f64,
    pub phi_m_32: f64,
    pub phi_m_33: f64,

    /// Forcing per CO2 doubling, W/m^2.
    pub eta: f64,
    pub xi1: f64,
    pub phi_t_11: f64,
    pub phi_t_12: f64,
    pub phi_t_21: f64,
    pub phi_t_22: f64,

    pub start_year: i32,
    pub delta_years: f64,
    pub n_periods: usize,

    /// Abatement rate fixed in the first period of the fully optimal run.
    pub mu_initial: f64,
    pub mu_max_early: f64,
    pub mu_max_late: f64,
    /// First grid year where `mu_max_late` applies.
    pub mu_late_from_year: i32,
    /// Upper bound on schedule controls in scenario runs.
    pub scenario_mu_max: f64,
    /// Cap on the industrial rate implied by a net-zero control.
    pub implied_mu_cap: f64,

    pub savings_tail_periods: usize,
    pub savings_tail_rate: f64,

    pub k0: f64,
    pub m_at0: f64,
    pub m_up0: f64,
    pub m_lo0: f64,
    pub t_at0: f64,
    pub t_lo0: f64,

    /// Billions.
    pub pop0: f64,
    pub pop_asymptote: f64,
    pub pop_adjust: f64,
    pub tfp0: f64,
    pub tfp_growth0: f64,
    pub tfp_growth_decline: f64,
    pub sigma_growth0: f64,
    pub sigma_growth_decline: f64,
    pub e_ind0: f64,
    pub q0: f64,
    pub e_land0: f64,
    pub e_land_decline: f64,
    pub f_ex0: f64,
    pub f_ex1: f64,
    pub f_ex_ramp_periods: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::dice2016()
    }
}

impl ModelParams {
    /// The bundled DICE-2016R parameterisation.
    pub fn dice2016() -> Self {
        Self::from_toml_str(DICE2016_PARAMS).expect("bundled parameter file is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let params: ModelParams =
            toml::from_str(text).map_err(|e| Error::Parse(format!("parameter file: {e}")))?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("ModelParams serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("invalid parameters: {msg}")));
        if !(self.alpha > 0.0) || (self.alpha - 1.0).abs() < 1e-12 {
            return bad("alpha must be positive and different from 1");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if (self.delta_years - 5.0).abs() > 0.0 {
            return bad("delta_years must be 5");
        }
        if self.n_periods == 0 {
            return bad("n_periods must be positive");
        }
        if self.savings_tail_periods > self.n_periods {
            return bad("savings_tail_periods exceeds the horizon");
        }
        let phi = self.phi_m();
        for col in 0..3 {
            let sum: f64 = (0..3).map(|row| phi[row][col]).sum();
            if (sum - 1.0).abs() > 1e-12 {
                return bad("carbon transfer matrix columns must sum to 1");
            }
        }
        if phi.iter().flatten().any(|&v| v < 0.0) || self.phi_t().iter().flatten().any(|&v| v < 0.0)
        {
            return bad("transfer matrices must be non-negative");
        }
        if self.backstop_price < 0.0 || self.theta2 <= 0.0 {
            return bad("abatement cost parameters must be non-negative");
        }
        Ok(())
    }

    /// Carbon transfer matrix, rows are destination boxes (AT, UP, LO).
    pub fn phi_m(&self) -> [[f64; 3]; 3] {
        [
            [self.phi_m_11, self.phi_m_12, self.phi_m_13],
            [self.phi_m_21, self.phi_m_22, self.phi_m_23],
            [self.phi_m_31, self.phi_m_32, self.phi_m_33],
        ]
    }

    pub fn phi_t(&self) -> [[f64; 2]; 2] {
        [
            [self.phi_t_11, self.phi_t_12],
            [self.phi_t_21, self.phi_t_22],
        ]
    }

    pub fn n_points(&self) -> usize {
        self.n_periods + 1
    }

    pub fn year(&self, period: usize) -> i32 {
        self.start_year + (period as i32) * self.delta_years as i32
    }

    /// Period index of a grid year, if it lies on the grid.
    pub fn period_of_year(&self, year: i32) -> Option<usize> {
        let step = self.delta_years as i32;
        let offset = year - self.start_year;
        if offset < 0 || offset % step != 0 {
            return None;
        }
        let period = (offset / step) as usize;
        (period <= self.n_periods).then_some(period)
    }

    pub fn years(&self) -> Vec<i32> {
        (0..self.n_points()).map(|t| self.year(t)).collect()
    }

    /// Capital retained over one period, `(1 - delta_k)^delta`.
    pub fn capital_retention(&self) -> f64 {
        (1.0 - self.delta_k).powf(self.delta_years)
    }

    /// Upper bound on the abatement rate in fully optimal mode.
    pub fn mu_upper_optimal(&self, period: usize) -> f64 {
        if self.year(period) < self.mu_late_from_year {
            self.mu_max_early
        } else {
            self.mu_max_late
        }
    }

    /// First period whose savings rate is pinned to `savings_tail_rate`.
    pub fn savings_tail_start(&self) -> usize {
        self.n_points() - self.savings_tail_periods
    }

    pub fn initial_state(&self) -> crate::model::StateVector {
        crate::model::StateVector {
            k: self.k0,
            m_at: self.m_at0,
            m_up: self.m_up0,
            m_lo: self.m_lo0,
            t_at: self.t_at0,
            t_lo: self.t_lo0,
            l: self.pop0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_loads_and_validates() {
        let p = ModelParams::dice2016();
        assert_eq!(p.n_periods, 100);
        assert_eq!(p.alpha, 1.45);
        assert_eq!(p.pi2, 0.00236);
        assert_eq!(p.m_at_preindustrial, 588.0);
        assert_eq!(p.year(20), 2115);
        assert_eq!(p.period_of_year(2100), Some(17));
        assert_eq!(p.period_of_year(2101), None);
    }

    #[test]
    fn rho_matches_time_preference() {
        let p = ModelParams::dice2016();
        let expected = (1.0 + p.pure_time_preference).powf(-p.delta_years);
        assert!((p.rho - expected).abs() < 1e-15);
    }

    #[test]
    fn round_trips_through_text() {
        let p = ModelParams::dice2016();
        let again = ModelParams::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn rejects_non_conserving_carbon_matrix() {
        let mut p = ModelParams::dice2016();
        p.phi_m_11 = 0.9;
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{DICE2016_PARAMS}\nbogus = 1.0\n");
        assert!(ModelParams::from_toml_str(&text).is_err());
    }

    #[test]
    fn optimal_mu_cap_switches_in_2160() {
        let p = ModelParams::dice2016();
        assert_eq!(p.mu_upper_optimal(p.period_of_year(2155).unwrap()), 1.0);
        assert_eq!(p.mu_upper_optimal(p.period_of_year(2160).unwrap()), 1.2);
    }
}
