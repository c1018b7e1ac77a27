//! Ingestion, calibration and matrix runs on a synthetic SSP export.

mod common;

use climate_stress::calibration::{
    calibrate, dice_reference_capital, parse_ssp_export, CalibrationOptions, GdpVariable, SspStore, MARKERS,
};
use climate_stress::engine::{run_matrix, run_scenario, MatrixConfig, RunConfig, SSPS};
use climate_stress::error::Error;
use climate_stress::scenario::ScheduleKind;
use climate_stress::ModelParams;

fn store() -> SspStore {
    let csv = common::export(&common::MODELS, None);
    SspStore::from_scenarios(parse_ssp_export(csv.as_bytes(), GdpVariable::Ppp).unwrap())
}

#[test]
fn synthetic_export_ingests_every_pair() {
    let s = store();
    assert_eq!(s.scenarios.len(), 30);
    for (ssp, model) in MARKERS {
        let d = s.marker(ssp).unwrap();
        assert_eq!(d.model, model);
        assert!(d.marker);
        assert_eq!(d.years.first(), Some(&2015));
        assert_eq!(d.years.last(), Some(&2100));
        // Units: millions to billions, Mt to Gt.
        assert!((d.population[0] - 7.4).abs() < 1e-9);
        assert!((d.e_land[0] - 2.6).abs() < 1e-9);
    }
    assert_eq!(s.scenarios.iter().filter(|d| d.marker).count(), 5);
}

#[test]
fn missing_variable_is_named() {
    let csv = common::export(&["GCAM4"], Some(("GCAM4", "Emissions|CO2|Land Use")));
    let err = parse_ssp_export(csv.as_bytes(), GdpVariable::Ppp).unwrap_err();
    assert!(matches!(err, Error::Ingest(_)), "{err:?}");
    assert!(err.to_string().contains("Emissions|CO2|Land Use"), "{err}");
}

#[test]
fn synthetic_calibration_matches_gdp() {
    let params = ModelParams::dice2016();
    let k0 = dice_reference_capital(&params).unwrap();
    let s = store();
    let c = calibrate(s.marker("SSP2").unwrap(), &params, &k0, &CalibrationOptions::default()).unwrap();
    assert!(c.residual <= 1e-3, "residual {}", c.residual);
    assert!(c.iterations <= 20);
    assert_eq!(c.paths.len(), params.n_points());
    assert!(c.paths.tfp.iter().all(|a| a.is_finite() && *a > 0.0));
    assert!(c.paths.sigma.iter().all(|x| x.is_finite() && *x >= 0.0));
}

#[test]
fn synthetic_matrix_orders_schedules() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("store.json");
    store().save(&store_path).unwrap();
    let m = MatrixConfig {
        store: Some(store_path.clone()),
        params: None,
        ssps: SSPS.iter().map(|s| s.to_string()).collect(),
        iams: vec!["marker".into()],
        schedules: vec![ScheduleKind::NetZero(2050), ScheduleKind::NetZero(2100)],
        original_dice: true,
        scc: true,
        seed: 0,
    };
    let summary = run_matrix(&m.expand().unwrap(), 4, Some(dir.path())).unwrap();
    assert_eq!(summary.cells.len(), 11);
    assert_eq!(summary.failures(), 0, "{:?}", summary.cells.iter().filter(|c| !c.ok).collect::<Vec<_>>());
    for ssp in SSPS {
        let early = summary.get(Some(ssp), None, ScheduleKind::NetZero(2050)).unwrap();
        let late = summary.get(Some(ssp), None, ScheduleKind::NetZero(2100)).unwrap();
        assert!(early.t_at_2100.unwrap() < late.t_at_2100.unwrap(), "{ssp}");
        assert!(early.excess_mortality_2100.unwrap() < late.excess_mortality_2100.unwrap());
        assert!(early.scc_2025.unwrap() > 0.0);
    }
    assert!(dir.path().join("marker_table.csv").is_file());

    // A second pass reuses every artifact.
    let again = run_matrix(&m.expand().unwrap(), 2, Some(dir.path())).unwrap();
    assert!(again.cells.iter().all(|c| c.cached));
    assert_eq!(
        again.cells.iter().map(|c| c.t_at_2100).collect::<Vec<_>>(),
        summary.cells.iter().map(|c| c.t_at_2100).collect::<Vec<_>>()
    );

    // A single run through the same path agrees with its matrix cell.
    let single = run_scenario(&RunConfig::ssp("SSP3", None, ScheduleKind::NetZero(2050), store_path)).unwrap();
    let cell = summary.get(Some("SSP3"), None, ScheduleKind::NetZero(2050)).unwrap();
    assert_eq!(single.temperature_at(2100), cell.t_at_2100);
}

#[test]
fn unknown_pair_fails_the_cell_only() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("store.json");
    let csv = common::export(&["IMAGE"], None);
    SspStore::from_scenarios(parse_ssp_export(csv.as_bytes(), GdpVariable::Ppp).unwrap())
        .save(&store_path)
        .unwrap();
    let m = MatrixConfig {
        store: Some(store_path),
        params: None,
        ssps: vec!["SSP1".into(), "SSP2".into()],
        iams: vec!["marker".into()],
        schedules: vec![ScheduleKind::NetZero(2050)],
        original_dice: false,
        scc: false,
        seed: 0,
    };
    let summary = run_matrix(&m.expand().unwrap(), 2, None).unwrap();
    assert_eq!(summary.failures(), 1);
    assert!(summary.get(Some("SSP1"), None, ScheduleKind::NetZero(2050)).unwrap().ok);
}

#[test]
fn matrix_is_order_independent() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("store.json");
    store().save(&store_path).unwrap();
    let m = MatrixConfig {
        store: Some(store_path),
        params: None,
        ssps: vec!["SSP2".into(), "SSP4".into()],
        iams: vec!["marker".into(), "GCAM".into()],
        schedules: vec![ScheduleKind::NetZero(2050), ScheduleKind::ZeroIndustrial(2100)],
        original_dice: true,
        scc: true,
        seed: 0,
    };
    let configs = m.expand().unwrap();
    let mut reversed = configs.clone();
    reversed.reverse();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let sa = run_matrix(&configs, 3, Some(&a)).unwrap();
    let sb = run_matrix(&reversed, 1, Some(&b)).unwrap();
    assert_eq!(sa, sb);
    for c in &sa.cells {
        let read = |root: &std::path::Path| std::fs::read(root.join(&c.cell).join("trajectories.csv")).unwrap();
        assert_eq!(read(&a), read(&b), "{}", c.cell);
    }
}

#[test]
fn negative_land_emissions_favour_zero_industrial_schedule() {
    // Land-use emissions turn negative around 2029 and level off near -1.5 Gt.
    let csv = common::export(&["IMAGE"], None).replace("Emissions|CO2|Land Use", "LAND");
    let mut out = String::new();
    for line in csv.lines() {
        if let Some(rest) = line.strip_prefix("IMAGE,SSP1-Baseline,World,LAND,Mt CO2/yr,") {
            let n = rest.split(',').count();
            let values: Vec<String> = (0..n).map(|i| format!("{:.3}", 3000.0 * (-0.05 * (5.0 * i as f64 - 10.0)).exp() - 1500.0)).collect();
            out += &format!("IMAGE,SSP1-Baseline,World,Emissions|CO2|Land Use,Mt CO2/yr,{}\n", values.join(","));
        } else {
            out += &line.replace("LAND", "Emissions|CO2|Land Use");
            out.push('\n');
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("store.json");
    let store = SspStore::from_scenarios(parse_ssp_export(out.as_bytes(), GdpVariable::Ppp).unwrap());
    assert!(store.marker("SSP1").unwrap().e_land.last().unwrap() < &0.0);
    store.save(&store_path).unwrap();
    let t = |sched| {
        run_scenario(&RunConfig::ssp("SSP1", None, sched, store_path.clone()))
            .unwrap()
            .temperature_at(2100)
            .unwrap()
    };
    assert!(t(ScheduleKind::ZeroIndustrial(2050)) <= t(ScheduleKind::NetZero(2050)));
}
