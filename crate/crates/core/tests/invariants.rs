//! Property tests over the model's building blocks.

use climate_stress::actuarial::integrate;
use climate_stress::calibration::{extrapolate_loglinear, resample_linear};
use climate_stress::mortality::{adjusted_q, annualize_temperature, GompertzLaw};
use climate_stress::model::{damage_abatement_factor, step_carbon, step_temperature};
use climate_stress::simulation::{AbatementMode, Economy, Perturbation};
use climate_stress::{ExogenousPaths, ModelParams};
use proptest::prelude::*;

fn params() -> ModelParams {
    ModelParams::dice2016()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn carbon_step_conserves_mass(
        m in prop::array::uniform3(100.0f64..5000.0),
        e in -20.0f64..150.0,
    ) {
        let p = params();
        let next = step_carbon(m, e, &p);
        let added = p.delta_years * e / p.beta_co2;
        let before: f64 = m.iter().sum::<f64>() + added;
        let after: f64 = next.iter().sum();
        prop_assert!((after - before).abs() <= 1e-12 * after.abs().max(1.0));
    }

    #[test]
    fn temperature_step_is_a_contraction_toward_equilibrium(t_at in 0.0f64..8.0, t_lo in 0.0f64..4.0, f in 0.0f64..10.0) {
        let p = params();
        // Fixed point of the two-box map under constant forcing.
        let phi = p.phi_t();
        let (a11, a12, a21, a22) = (1.0 - phi[0][0], -phi[0][1], -phi[1][0], 1.0 - phi[1][1]);
        let det = a11 * a22 - a12 * a21;
        let eq = [p.xi1 * f * a22 / det, -p.xi1 * f * a21 / det];
        let [a, b] = step_temperature([t_at, t_lo], f, &p);
        prop_assert!((a - eq[0]).abs() + (b - eq[1]).abs() <= (t_at - eq[0]).abs() + (t_lo - eq[1]).abs() + 1e-12);
    }

    #[test]
    fn output_factor_falls_with_control_and_warming(mu in 0.0f64..1.2, dmu in 0.0f64..0.2, t in 0.0f64..6.0, dt in 0.0f64..1.0) {
        let p = params();
        let theta1 = 0.05;
        let base = damage_abatement_factor(mu, t, theta1, p.theta2, p.pi2).unwrap();
        prop_assert!(base > 0.0 && base <= 1.0);
        prop_assert!(damage_abatement_factor(mu + dmu, t, theta1, p.theta2, p.pi2).unwrap() <= base);
        prop_assert!(damage_abatement_factor(mu, t + dt, theta1, p.theta2, p.pi2).unwrap() <= base);
    }

    #[test]
    fn adjusted_death_probability_is_monotone(q in 0.0f64..0.99, d1 in 0.0f64..2.0, d2 in 0.0f64..2.0) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = adjusted_q(q, lo).unwrap();
        let b = adjusted_q(q, hi).unwrap();
        prop_assert!(q <= a && a <= b && b <= 1.0);
    }

    #[test]
    fn gompertz_cumulative_hazard_is_additive(a in 0.0f64..60.0, b in 0.0f64..60.0) {
        let law = GompertzLaw::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let whole = law.cumulative_hazard(0.0, hi);
        let split = law.cumulative_hazard(0.0, lo) + law.cumulative_hazard(lo, hi);
        prop_assert!((whole - split).abs() <= 1e-12 * whole.max(1e-12));
        let numeric = integrate(&|t| law.hazard(t), lo, hi, 1e-10).unwrap();
        prop_assert!((numeric - law.cumulative_hazard(lo, hi)).abs() <= 1e-8 * numeric.max(1e-12));
    }

    #[test]
    fn annual_path_interpolates_grid(values in prop::collection::vec(0.0f64..5.0, 3..12)) {
        let years: Vec<i32> = (0..values.len() as i32).map(|i| 2015 + 5 * i).collect();
        let path = annualize_temperature(&years, &values).unwrap();
        for (y, v) in years.iter().zip(&values) {
            prop_assert_eq!(path.at(*y).unwrap(), *v);
        }
        for w in 0..values.len() - 1 {
            let mid = path.at(years[w] + 2).unwrap();
            prop_assert!(mid >= values[w].min(values[w + 1]) - 1e-12);
            prop_assert!(mid <= values[w].max(values[w + 1]) + 1e-12);
        }
    }

    #[test]
    fn resampling_reproduces_reported_points(values in prop::collection::vec(-5.0f64..50.0, 2..10)) {
        let points: Vec<(i32, f64)> = values.iter().enumerate().map(|(i, v)| (2010 + 10 * i as i32, *v)).collect();
        let grid: Vec<i32> = points.iter().map(|p| p.0).collect();
        prop_assert_eq!(resample_linear(&points, &grid).unwrap(), values);
    }

    #[test]
    fn loglinear_extension_continues_exponential_series(level in 0.1f64..100.0, g in -0.03f64..0.05) {
        let years: Vec<i32> = (2015..=2100).step_by(5).collect();
        let values: Vec<f64> = years.iter().map(|y| level * (g * f64::from(y - 2015)).exp()).collect();
        let (ext_years, ext) = extrapolate_loglinear(&years, &values, 2300, 50).unwrap();
        for (y, v) in ext_years.iter().zip(&ext) {
            let expected = level * (g * f64::from(y - 2015)).exp();
            prop_assert!((v - expected).abs() <= 1e-9 * expected);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feasible_controls_give_finite_trajectories(
        s in 0.1f64..0.4,
        ramp in 0.0f64..0.05,
        bump in 0.0f64..0.05,
        t in 0usize..50,
    ) {
        let p = params();
        let exog = ExogenousPaths::dice2016(&p);
        let economy = Economy::new(&p, &exog, AbatementMode::Industrial);
        let n = p.n_points();
        let savings = vec![s; n];
        let abatement: Vec<f64> = (0..n).map(|i| (0.03 + ramp * i as f64).min(1.0)).collect();
        let tr = economy.simulate(&savings, &abatement, &Perturbation::default()).unwrap();
        prop_assert!(tr.welfare.is_finite());
        prop_assert!(tr.states.iter().all(|x| x.k > 0.0 && x.m_at > 0.0 && x.t_at.is_finite()));

        // More saving in one period leaves more capital next period.
        let mut more = savings.clone();
        more[t] += bump;
        let tr2 = economy.simulate(&more, &abatement, &Perturbation::default()).unwrap();
        prop_assert!(tr2.states[t + 1].k >= tr.states[t + 1].k);
    }
}
