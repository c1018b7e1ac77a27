//! Forward simulation of a full trajectory and its adjoint gradient.
//!
//! The forward pass applies the transition equations of [`crate::model`]
//! period by period. The reverse pass propagates welfare sensitivities
//! backwards through the same equations, giving the exact gradient of
//! welfare with respect to every savings and abatement control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exogenous::ExogenousPaths;
use crate::model::StateVector;
use crate::mortality::ExcessMortalityFn;
use crate::params::ModelParams;

/// How the abatement schedule enters the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbatementMode {
    /// Controls are the industrial abatement rate `mu`.
    Industrial,
    /// Controls are the total-emission rate `mu_tilde`; `mu` is implied
    /// through `mu = mu_tilde (1 + E_land / (sigma Y))`.
    Total,
}

/// Population treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PopulationModel {
    Exogenous,
    /// `L_{t+1} = L_t g_t - N_t delta(T_AT,t)`.
    Endogenous {
        growth: Vec<f64>,
        deaths: Vec<f64>,
        excess: ExcessMortalityFn,
    },
}

/// Optional additive perturbations used for marginal analysis.
#[derive(Debug, Clone, Default)]
pub struct Perturbation {
    /// Extra emissions per period, GtCO2/yr.
    pub emissions: Vec<f64>,
    /// Extra consumption per period that does not reduce investment,
    /// trillions USD/yr.
    pub consumption: Vec<f64>,
}

impl Perturbation {
    fn emissions_at(&self, t: usize) -> f64 {
        self.emissions.get(t).copied().unwrap_or(0.0)
    }

    fn consumption_at(&self, t: usize) -> f64 {
        self.consumption.get(t).copied().unwrap_or(0.0)
    }
}

/// A fully simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub years: Vec<i32>,
    pub states: Vec<StateVector>,
    pub savings: Vec<f64>,
    /// Control as supplied (mu or mu_tilde depending on the mode).
    pub abatement_control: Vec<f64>,
    /// Effective industrial abatement rate.
    pub mu: Vec<f64>,
    pub gross_output: Vec<f64>,
    pub net_output: Vec<f64>,
    pub consumption: Vec<f64>,
    pub e_ind: Vec<f64>,
    pub e_land: Vec<f64>,
    pub e_total: Vec<f64>,
    pub forcing: Vec<f64>,
    pub damages: Vec<f64>,
    pub abatement_cost: Vec<f64>,
    pub utility: Vec<f64>,
    pub welfare: f64,
    /// Periods where the implied `mu` hit its cap or floor.
    pub mu_clamped: Vec<usize>,
}

impl Trajectory {
    pub fn per_capita_consumption(&self, t: usize) -> f64 {
        self.consumption[t] / self.states[t].l
    }
}

/// Everything needed to simulate trajectories for given controls.
#[derive(Debug, Clone)]
pub struct Economy<'a> {
    pub params: &'a ModelParams,
    pub exog: &'a ExogenousPaths,
    pub initial: StateVector,
    pub mode: AbatementMode,
    pub population: PopulationModel,
}

struct PeriodTape {
    y: f64,
    mu: f64,
    dmu_dy: f64,
    dmu_dctrl: f64,
    omega: f64,
    q: f64,
    c: f64,
}

impl<'a> Economy<'a> {
    pub fn new(params: &'a ModelParams, exog: &'a ExogenousPaths, mode: AbatementMode) -> Self {
        let mut initial = params.initial_state();
        if let Some(&l0) = exog.population.first() {
            initial.l = l0;
        }
        Self {
            params,
            exog,
            initial,
            mode,
            population: PopulationModel::Exogenous,
        }
    }

    pub fn n_points(&self) -> usize {
        self.params.n_points()
    }

    fn implied_mu(&self, t: usize, control: f64, y: f64) -> Result<(f64, f64, f64, bool)> {
        match self.mode {
            AbatementMode::Industrial => Ok((control, 0.0, 1.0, false)),
            AbatementMode::Total => {
                let sigma_y = self.exog.sigma[t] * y;
                if !(sigma_y > 0.0) {
                    if control == 0.0 {
                        return Ok((0.0, 0.0, 0.0, false));
                    }
                    return Err(Error::domain(format!(
                        "degenerate economy: sigma*Y = {sigma_y} in {}",
                        self.exog.years[t]
                    )));
                }
                let factor = 1.0 + self.exog.e_land[t] / sigma_y;
                let raw = control * factor;
                let cap = self.params.implied_mu_cap;
                if raw > cap {
                    Ok((cap, 0.0, 0.0, true))
                } else if raw < 0.0 {
                    Ok((0.0, 0.0, 0.0, true))
                } else {
                    let dmu_dy = -control * self.exog.e_land[t] / (self.exog.sigma[t] * y * y);
                    Ok((raw, dmu_dy, factor, false))
                }
            }
        }
    }

    /// Forward simulation.
    pub fn simulate(&self, savings: &[f64], abatement: &[f64], perturb: &Perturbation) -> Result<Trajectory> {
        self.run(savings, abatement, perturb).map(|(traj, _)| traj)
    }

    fn run(&self, savings: &[f64], abatement: &[f64], perturb: &Perturbation) -> Result<(Trajectory, Vec<PeriodTape>)> {
        let p = self.params;
        let x = self.exog;
        let n = self.n_points();
        if savings.len() != n || abatement.len() != n {
            return Err(Error::Config(format!(
                "controls must have {n} periods (savings {}, abatement {})",
                savings.len(),
                abatement.len()
            )));
        }
        let phi_m = p.phi_m();
        let phi_t = p.phi_t();
        let retention = p.capital_retention();
        let dt = p.delta_years;

        let mut traj = Trajectory {
            years: x.years.clone(),
            states: Vec::with_capacity(n),
            savings: savings.to_vec(),
            abatement_control: abatement.to_vec(),
            mu: Vec::with_capacity(n),
            gross_output: Vec::with_capacity(n),
            net_output: Vec::with_capacity(n),
            consumption: Vec::with_capacity(n),
            e_ind: Vec::with_capacity(n),
            e_land: Vec::with_capacity(n),
            e_total: Vec::with_capacity(n),
            forcing: Vec::with_capacity(n),
            damages: Vec::with_capacity(n),
            abatement_cost: Vec::with_capacity(n),
            utility: Vec::with_capacity(n),
            welfare: 0.0,
            mu_clamped: Vec::new(),
        };
        let mut tape = Vec::with_capacity(n);
        let mut state = self.initial;
        let mut discount = 1.0;

        for t in 0..n {
            if let PopulationModel::Exogenous = self.population {
                state.l = x.population[t];
            }
            if !(state.k > 0.0 && state.l > 0.0 && state.m_at > 0.0) {
                return Err(Error::domain(format!("non-positive stock in {}: {state:?}", x.years[t])));
            }
            let y = x.tfp[t] * state.k.powf(p.gamma) * state.l.powf(1.0 - p.gamma);
            let (mu, dmu_dy, dmu_dctrl, clamped) = self.implied_mu(t, abatement[t], y)?;
            if clamped {
                traj.mu_clamped.push(t);
            }
            if mu < 0.0 {
                return Err(Error::domain(format!("negative abatement rate in {}", x.years[t])));
            }
            let abate_frac = x.theta1[t] * mu.powf(p.theta2);
            let damage_frac = p.pi2 * state.t_at * state.t_at;
            let omega = 1.0 - abate_frac - damage_frac;
            let q = omega * y;
            let c = (1.0 - savings[t]) * q;
            let c_eff = c + perturb.consumption_at(t);
            if !(c_eff > 0.0) || !(q > 0.0) {
                return Err(Error::domain(format!(
                    "non-positive consumption {c_eff} in {}",
                    x.years[t]
                )));
            }
            let e_ind = (1.0 - mu) * x.sigma[t] * y;
            let e_total = e_ind + x.e_land[t] + perturb.emissions_at(t);
            let forcing = p.eta * (state.m_at / p.m_at_preindustrial).log2() + x.f_ex[t];
            let u = state.l * (c_eff / state.l).powf(1.0 - p.alpha) / (1.0 - p.alpha);

            traj.states.push(state);
            traj.mu.push(mu);
            traj.gross_output.push(y);
            traj.net_output.push(q);
            traj.consumption.push(c);
            traj.e_ind.push(e_ind);
            traj.e_land.push(x.e_land[t]);
            traj.e_total.push(e_total);
            traj.forcing.push(forcing);
            traj.damages.push(damage_frac * y);
            traj.abatement_cost.push(abate_frac * y);
            traj.utility.push(u);
            traj.welfare += discount * u;
            tape.push(PeriodTape {
                y,
                mu,
                dmu_dy,
                dmu_dctrl,
                omega,
                q,
                c: c_eff,
            });
            discount *= p.rho;

            if t + 1 == n {
                break;
            }
            let m = [state.m_at, state.m_up, state.m_lo];
            let mut next_m = [0.0; 3];
            for (row, out) in next_m.iter_mut().enumerate() {
                *out = phi_m[row][0] * m[0] + phi_m[row][1] * m[1] + phi_m[row][2] * m[2];
            }
            next_m[0] += dt * e_total / p.beta_co2;
            if !(next_m[0] > 0.0) {
                return Err(Error::domain(format!("atmospheric carbon collapsed after {}", x.years[t])));
            }
            let forcing_next = p.eta * (next_m[0] / p.m_at_preindustrial).log2() + x.f_ex[t + 1];
            let next_t_at = phi_t[0][0] * state.t_at + phi_t[0][1] * state.t_lo + p.xi1 * forcing_next;
            let next_t_lo = phi_t[1][0] * state.t_at + phi_t[1][1] * state.t_lo;
            let next_k = state.k * retention + dt * savings[t] * q;
            let next_l = match &self.population {
                PopulationModel::Exogenous => x.population[t + 1],
                PopulationModel::Endogenous { growth, deaths, excess } => {
                    let l = state.l * growth[t] - deaths[t] * excess.eval_clamped(state.t_at);
                    if !(l > 0.0) {
                        return Err(Error::domain(format!("degenerate population after {}", x.years[t])));
                    }
                    l
                }
            };
            state = StateVector {
                k: next_k,
                m_at: next_m[0],
                m_up: next_m[1],
                m_lo: next_m[2],
                t_at: next_t_at,
                t_lo: next_t_lo,
                l: next_l,
            };
        }
        Ok((traj, tape))
    }

    /// Welfare and its exact gradient with respect to savings and abatement
    /// controls.
    pub fn welfare_gradient(
        &self,
        savings: &[f64],
        abatement: &[f64],
        perturb: &Perturbation,
    ) -> Result<(Trajectory, Vec<f64>, Vec<f64>)> {
        let (traj, tape) = self.run(savings, abatement, perturb)?;
        let p = self.params;
        let x = self.exog;
        let n = self.n_points();
        let phi_m = p.phi_m();
        let phi_t = p.phi_t();
        let retention = p.capital_retention();
        let dt = p.delta_years;
        let ln2 = std::f64::consts::LN_2;

        let mut grad_s = vec![0.0; n];
        let mut grad_a = vec![0.0; n];
        // Adjoints of the state at t+1.
        let mut lk = 0.0;
        let mut lm = [0.0; 3];
        let mut lt = [0.0; 2];
        let mut ll = 0.0;
        let mut discount = p.rho.powi(n as i32 - 1);

        for t in (0..n).rev() {
            let st = &traj.states[t];
            let tp = &tape[t];
            let c_over_l = tp.c / st.l;
            let du_dc = c_over_l.powf(-p.alpha);
            let du_dl = p.alpha / (1.0 - p.alpha) * c_over_l.powf(1.0 - p.alpha);
            let w_c = discount * du_dc;

            // Next-state carbon enters next temperature through forcing.
            let (g_mat_next, g_e) = if t + 1 < n {
                let m_next = traj.states[t + 1].m_at;
                let g = lm[0] + lt[0] * p.xi1 * p.eta / (m_next * ln2);
                (g, g * dt / p.beta_co2)
            } else {
                (0.0, 0.0)
            };
            let s = savings[t];
            let g_q = w_c * (1.0 - s) + lk * dt * s;
            grad_s[t] = -w_c * tp.q + lk * dt * tp.q;

            let domega_dmu = if tp.mu > 0.0 {
                -x.theta1[t] * p.theta2 * tp.mu.powf(p.theta2 - 1.0)
            } else {
                0.0
            };
            let g_mu = g_q * tp.y * domega_dmu - g_e * x.sigma[t] * tp.y;
            let g_y = g_q * tp.omega + g_e * (1.0 - tp.mu) * x.sigma[t] + g_mu * tp.dmu_dy;
            grad_a[t] = g_mu * tp.dmu_dctrl;
            let g_tat_local = g_q * tp.y * (-2.0 * p.pi2 * st.t_at);

            let new_lk = lk * retention + g_y * p.gamma * tp.y / st.k;
            let g_m_next = [g_mat_next, lm[1], lm[2]];
            let mut new_lm = [0.0; 3];
            for (col, out) in new_lm.iter_mut().enumerate() {
                *out = (0..3).map(|row| phi_m[row][col] * g_m_next[row]).sum();
            }
            let mut new_lt = [
                phi_t[0][0] * lt[0] + phi_t[1][0] * lt[1] + g_tat_local,
                phi_t[0][1] * lt[0] + phi_t[1][1] * lt[1],
            ];
            let new_ll = match &self.population {
                PopulationModel::Exogenous => 0.0,
                PopulationModel::Endogenous { growth, deaths, excess } => {
                    let mut v = g_y * (1.0 - p.gamma) * tp.y / st.l + discount * du_dl;
                    if t + 1 < n {
                        v += ll * growth[t];
                        new_lt[0] -= ll * deaths[t] * excess.derivative(st.t_at);
                    }
                    v
                }
            };
            lk = new_lk;
            lm = new_lm;
            lt = new_lt;
            ll = new_ll;
            discount /= p.rho;
        }
        Ok((traj, grad_s, grad_a))
    }

    /// Welfare only.
    pub fn welfare(&self, savings: &[f64], abatement: &[f64]) -> Result<f64> {
        Ok(self.simulate(savings, abatement, &Perturbation::default())?.welfare)
    }
}

/// `sum_t rho^t U(C_t, L_t)` over a stored trajectory.
pub fn welfare(traj: &Trajectory, params: &ModelParams) -> Result<f64> {
    let mut w = 0.0;
    let mut discount = 1.0;
    for (c, st) in traj.consumption.iter().zip(&traj.states) {
        w += discount * crate::model::utility(*c, st.l, params.alpha)?;
        discount *= params.rho;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup() -> (ModelParams, ExogenousPaths) {
        let p = ModelParams::dice2016();
        let x = ExogenousPaths::dice2016(&p);
        (p, x)
    }

    #[test]
    fn first_period_matches_reference_inputs() {
        let (p, x) = setup();
        let eco = Economy::new(&p, &x, AbatementMode::Industrial);
        let n = p.n_points();
        let traj = eco.simulate(&vec![0.25; n], &vec![0.03; n], &Perturbation::default()).unwrap();
        assert_relative_eq!(traj.gross_output[0], 105.177422, max_relative = 1e-6);
        // Industrial emissions in 2015 reproduce e0 up to the gap between
        // the modelled and reported 2015 output.
        assert_relative_eq!(traj.e_ind[0], 35.85 * traj.gross_output[0] / 105.5, max_relative = 1e-12);
        assert_eq!(traj.states[0].m_at, 851.0);
    }

    #[test]
    fn carbon_mass_is_conserved_without_emissions() {
        let (p, mut x) = setup();
        x.sigma.iter_mut().for_each(|s| *s = 0.0);
        x.e_land.iter_mut().for_each(|e| *e = 0.0);
        let eco = Economy::new(&p, &x, AbatementMode::Industrial);
        let n = p.n_points();
        let traj = eco.simulate(&vec![0.25; n], &vec![0.0; n], &Perturbation::default()).unwrap();
        let total0: f64 = traj.states[0].carbon().iter().sum();
        for st in &traj.states {
            let total: f64 = st.carbon().iter().sum();
            assert!(((total - total0) / total0).abs() < 1e-12);
        }
    }

    #[test]
    fn welfare_helper_agrees_with_simulation() {
        let (p, x) = setup();
        let eco = Economy::new(&p, &x, AbatementMode::Industrial);
        let n = p.n_points();
        let traj = eco.simulate(&vec![0.22; n], &vec![0.1; n], &Perturbation::default()).unwrap();
        assert_relative_eq!(welfare(&traj, &p).unwrap(), traj.welfare, max_relative = 1e-12);
    }

    fn fd_check(eco: &Economy, s: &[f64], a: &[f64], indices: &[usize]) {
        let (_, gs, ga) = eco.welfare_gradient(s, a, &Perturbation::default()).unwrap();
        for &i in indices {
            for (which, grad) in [(0, &gs), (1, &ga)] {
                let h = 1e-3 * if which == 0 { s[i].max(0.1) } else { a[i].max(0.1) };
                let eval = |delta: f64| {
                    let mut s2 = s.to_vec();
                    let mut a2 = a.to_vec();
                    if which == 0 {
                        s2[i] += delta;
                    } else {
                        a2[i] += delta;
                    }
                    eco.welfare(&s2, &a2).unwrap()
                };
                let fd = (8.0 * (eval(h) - eval(-h)) - (eval(2.0 * h) - eval(-2.0 * h))) / (12.0 * h);
                // Tail controls carry tiny discounted gradients, so the
                // floor is tied to the largest component.
                let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
                let scale = grad[i].abs().max(1e-5 * gmax);
                assert!(
                    (fd - grad[i]).abs() / scale < 1e-4,
                    "control {which} period {i}: adjoint {} vs fd {fd}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn adjoint_matches_finite_differences_industrial() {
        let (p, x) = setup();
        let eco = Economy::new(&p, &x, AbatementMode::Industrial);
        let n = p.n_points();
        let s: Vec<f64> = (0..n).map(|t| 0.2 + 0.05 * ((t as f64) * 0.3).sin()).collect();
        let a: Vec<f64> = (0..n).map(|t| (0.05 + 0.01 * t as f64).min(0.95)).collect();
        fd_check(&eco, &s, &a, &[0, 1, 5, 17, 40, 99, 100]);
    }

    #[test]
    fn adjoint_matches_finite_differences_total_mode() {
        let (p, x) = setup();
        let eco = Economy::new(&p, &x, AbatementMode::Total);
        let n = p.n_points();
        let s = vec![0.24; n];
        let a: Vec<f64> = (0..n).map(|t| (t as f64 / 7.0).min(0.9)).collect();
        fd_check(&eco, &s, &a, &[1, 3, 6, 12, 30]);
    }

    #[test]
    fn adjoint_matches_finite_differences_endogenous_population() {
        let (p, x) = setup();
        let mut eco = Economy::new(&p, &x, AbatementMode::Industrial);
        let n = p.n_points();
        let growth: Vec<f64> = (0..n)
            .map(|t| x.population[(t + 1).min(n - 1)] / x.population[t])
            .collect();
        let deaths: Vec<f64> = x.population.iter().map(|l| l * 0.04).collect();
        eco.population = PopulationModel::Endogenous {
            growth,
            deaths,
            excess: ExcessMortalityFn::default(),
        };
        let s = vec![0.24; n];
        let a: Vec<f64> = (0..n).map(|t| (0.03 + 0.02 * t as f64).min(1.0)).collect();
        fd_check(&eco, &s, &a, &[0, 4, 10, 25]);
    }
}
