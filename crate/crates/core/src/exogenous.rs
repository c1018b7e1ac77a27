//! Time-indexed exogenous inputs of the model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Exogenous paths on the 5-year grid, one entry per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousPaths {
    pub years: Vec<i32>,
    /// Population, billions.
    pub population: Vec<f64>,
    pub tfp: Vec<f64>,
    /// Carbon intensity, GtCO2 per trillion USD.
    pub sigma: Vec<f64>,
    /// Land-use emissions, GtCO2/yr.
    pub e_land: Vec<f64>,
    /// Non-CO2 forcing, W/m^2.
    pub f_ex: Vec<f64>,
    /// Abatement cost coefficient.
    pub theta1: Vec<f64>,
}

impl ExogenousPaths {
    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let n = params.n_points();
        let lens = [
            self.years.len(),
            self.population.len(),
            self.tfp.len(),
            self.sigma.len(),
            self.e_land.len(),
            self.f_ex.len(),
            self.theta1.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Config(format!("exogenous paths must have {n} points, got {lens:?}")));
        }
        if self.years != params.years() {
            return Err(Error::Config("exogenous grid does not match the model grid".into()));
        }
        let all = [&self.population, &self.tfp, &self.sigma, &self.e_land, &self.f_ex, &self.theta1];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Numeric("non-finite exogenous value".into()));
        }
        if self.population.iter().any(|&l| l <= 0.0) || self.tfp.iter().any(|&a| a <= 0.0) {
            return Err(Error::domain("population and TFP must be positive"));
        }
        if self.sigma.iter().any(|&s| s < 0.0) || self.theta1.iter().any(|&t| t < 0.0) {
            return Err(Error::domain("carbon intensity and abatement cost must be non-negative"));
        }
        Ok(())
    }

    /// DICE-2016 exogenous paths generated from the parameter constants.
    pub fn dice2016(params: &ModelParams) -> Self {
        let n = params.n_points();
        let dt = params.delta_years;
        let mut population = Vec::with_capacity(n);
        let mut tfp = Vec::with_capacity(n);
        let mut sigma = Vec::with_capacity(n);
        let mut l = params.pop0;
        let mut a = params.tfp0;
        let mut sig = params.e_ind0 / (params.q0 * (1.0 - params.mu_initial));
        let mut gsig = params.sigma_growth0;
        for t in 0..n {
            population.push(l);
            tfp.push(a);
            sigma.push(sig);
            l *= (params.pop_asymptote / l).powf(params.pop_adjust);
            let ga = params.tfp_growth0 * (-params.tfp_growth_decline * dt * t as f64).exp();
            a /= 1.0 - ga;
            sig *= (gsig * dt).exp();
            gsig *= (1.0 + params.sigma_growth_decline).powf(dt);
        }
        let e_land = (0..n)
            .map(|t| params.e_land0 * (1.0 - params.e_land_decline).powi(t as i32))
            .collect();
        let f_ex = dice2016_forcing(params);
        let theta1 = abatement_cost_path(params, &sigma);
        Self {
            years: params.years(),
            population,
            tfp,
            sigma,
            e_land,
            f_ex,
            theta1,
        }
    }
}

/// Non-CO2 forcing ramp of DICE-2016.
pub fn dice2016_forcing(params: &ModelParams) -> Vec<f64> {
    let ramp = params.f_ex_ramp_periods as f64;
    (0..params.n_points())
        .map(|t| {
            if t < params.f_ex_ramp_periods {
                params.f_ex0 + (params.f_ex1 - params.f_ex0) * t as f64 / ramp
            } else {
                params.f_ex1
            }
        })
        .collect()
}

/// `theta1_t = p_back(t) * sigma_t / (theta2 * 1000)` with a declining
/// backstop price.
pub fn abatement_cost_path(params: &ModelParams, sigma: &[f64]) -> Vec<f64> {
    sigma
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let backstop = params.backstop_price * (1.0 - params.backstop_decline).powi(t as i32);
            backstop * s / params.theta2 / 1000.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dice_paths_start_at_initial_values() {
        let p = ModelParams::dice2016();
        let x = ExogenousPaths::dice2016(&p);
        x.validate(&p).unwrap();
        assert_eq!(x.population[0], 7.403);
        assert_eq!(x.tfp[0], 5.115);
        assert_relative_eq!(x.sigma[0], 35.85 / (105.5 * 0.97), max_relative = 1e-14);
        assert_eq!(x.e_land[0], 2.6);
        assert_eq!(x.f_ex[0], 0.5);
        assert_eq!(x.f_ex[17], 1.0);
        assert_relative_eq!(x.f_ex[1], 0.5 + 0.5 / 17.0, max_relative = 1e-14);
    }

    #[test]
    fn dice_paths_second_period() {
        let p = ModelParams::dice2016();
        let x = ExogenousPaths::dice2016(&p);
        assert_relative_eq!(x.population[1], 7.403 * (11.5f64 / 7.403).powf(0.134), max_relative = 1e-14);
        assert_relative_eq!(x.tfp[1], 5.115 / (1.0 - 0.076), max_relative = 1e-14);
        assert_relative_eq!(x.sigma[1], x.sigma[0] * (-0.0152f64 * 5.0).exp(), max_relative = 1e-14);
        assert_relative_eq!(x.theta1[0], 550.0 * x.sigma[0] / 2.6 / 1000.0, max_relative = 1e-14);
        // Population approaches the asymptote.
        assert!(x.population[100] < 11.5 && x.population[100] > 11.4);
    }
}
