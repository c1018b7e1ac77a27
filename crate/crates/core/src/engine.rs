//! Pipeline orchestration: exogenous paths, schedule, optimisation, SCC,
//! mortality, and on-disk artifacts for single runs and scenario matrices.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::actuarial::{
    human_capital_deviation, shift_cubic, stress_test, HumanCapitalOptions, HumanCapitalResult, IncomeProfile,
    PortfolioSet, StressResult,
};
use crate::calibration::{
    calibrate, dice_reference_capital, CalibratedPaths, CalibrationOptions, GdpVariable, SspStore, MARKERS,
};
use crate::error::{Error, Result};
use crate::exogenous::ExogenousPaths;
use crate::mortality::{annualize_between, fit_cubic_damage, gompertz_to_table, ExcessMortalityFn, GompertzLaw, MortalityTable};
use crate::optimizer::{optimize, OptimizationProblem, ScenarioRun};
use crate::params::ModelParams;
use crate::scc::{scc_path, SccPath, DEFAULT_PULSE};
use crate::scenario::{ControlSchedule, ScheduleKind};
use crate::simulation::PopulationModel;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Last year shown in summary tables.
pub const REPORT_YEAR: i32 = 2100;

/// Everything needed to reproduce one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Cell name; derived from the scenario when empty.
    #[serde(default)]
    pub name: String,
    /// SSP of the baseline; absent for the original DICE-2016 paths.
    #[serde(default)]
    pub ssp: Option<String>,
    /// IAM of the baseline; the SSP's marker model when absent.
    #[serde(default)]
    pub iam: Option<String>,
    pub schedule: ScheduleKind,
    #[serde(default)]
    pub params: Option<PathBuf>,
    /// Normalised SSP store written by `ingest`.
    #[serde(default)]
    pub store: Option<PathBuf>,
    /// Pre-computed calibration artifact; skips calibration when given.
    #[serde(default)]
    pub calibrated: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub population_extension: bool,
    /// Baseline deaths per person-year feeding the population extension.
    #[serde(default = "default_death_rate")]
    pub crude_death_rate: f64,
    #[serde(default = "default_true")]
    pub scc: bool,
    #[serde(default = "default_pulse")]
    pub scc_pulse: f64,
    #[serde(default = "default_tol")]
    pub calibration_tol: f64,
    #[serde(default = "default_max_iter")]
    pub calibration_max_iter: usize,
    #[serde(default)]
    pub gdp_variable: GdpVariable,
}

fn default_true() -> bool {
    true
}
fn default_pulse() -> f64 {
    DEFAULT_PULSE
}
fn default_tol() -> f64 {
    1e-3
}
fn default_max_iter() -> usize {
    50
}
fn default_death_rate() -> f64 {
    0.008
}

impl RunConfig {
    pub fn original_dice(schedule: ScheduleKind) -> Self {
        Self {
            name: String::new(),
            ssp: None,
            iam: None,
            schedule,
            params: None,
            store: None,
            calibrated: None,
            seed: 0,
            population_extension: false,
            crude_death_rate: default_death_rate(),
            scc: true,
            scc_pulse: DEFAULT_PULSE,
            calibration_tol: default_tol(),
            calibration_max_iter: default_max_iter(),
            gdp_variable: GdpVariable::Ppp,
        }
    }

    pub fn ssp(ssp: &str, iam: Option<&str>, schedule: ScheduleKind, store: PathBuf) -> Self {
        Self {
            ssp: Some(ssp.to_ascii_uppercase()),
            iam: iam.map(str::to_string),
            store: Some(store),
            ..Self::original_dice(schedule)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.ssp.is_some() && self.store.is_none() && self.calibrated.is_none() {
            return Err(Error::Config("an SSP run needs `store` or `calibrated`".into()));
        }
        if !(self.scc_pulse > 0.0) || !(self.calibration_tol > 0.0) {
            return Err(Error::Config("scc_pulse and calibration_tol must be positive".into()));
        }
        Ok(())
    }

    /// IAM name after applying the marker default.
    pub fn resolved_iam(&self) -> Option<String> {
        let ssp = self.ssp.as_ref()?;
        Some(match &self.iam {
            Some(m) => crate::calibration::canonical_model(m),
            None => MARKERS
                .iter()
                .find(|(s, _)| s.eq_ignore_ascii_case(ssp))
                .map(|(_, m)| m.to_string())
                .unwrap_or_default(),
        })
    }

    pub fn cell_name(&self) -> String {
        if !self.name.is_empty() {
            return self.name.clone();
        }
        let schedule = self.schedule.to_string().replace('@', "-");
        match (&self.ssp, self.resolved_iam()) {
            (Some(ssp), Some(iam)) => format!("{}_{}_{}", ssp.to_ascii_lowercase(), slug(&iam), schedule),
            _ => format!("original-dice_{schedule}"),
        }
    }
}

fn slug(s: &str) -> String {
    s.to_ascii_lowercase().replace(['/', ' '], "-")
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Shared, lazily built inputs reused across matrix cells.
#[derive(Default)]
pub struct Inputs {
    pub params: Option<ModelParams>,
    pub store: Option<SspStore>,
    pub reference_capital: Option<Vec<f64>>,
    pub calibrations: BTreeMap<(String, String), CalibratedPaths>,
}

fn load_params(config: &RunConfig) -> Result<ModelParams> {
    match &config.params {
        Some(p) => ModelParams::load(p),
        None => Ok(ModelParams::dice2016()),
    }
}

/// Exogenous paths for `config` plus, for SSP runs, their calibration.
pub fn exogenous_for(config: &RunConfig, params: &ModelParams, inputs: &Inputs) -> Result<(ExogenousPaths, Option<CalibratedPaths>)> {
    let Some(ssp) = &config.ssp else {
        return Ok((ExogenousPaths::dice2016(params), None));
    };
    let iam = config.resolved_iam().unwrap_or_default();
    if let Some(c) = inputs.calibrations.get(&(ssp.clone(), iam.clone())) {
        return Ok((c.paths.clone(), Some(c.clone())));
    }
    if let Some(path) = &config.calibrated {
        let c = CalibratedPaths::load(path)?;
        if !c.ssp.eq_ignore_ascii_case(ssp) || c.model != iam {
            return Err(Error::Config(format!(
                "calibration artifact is for {}/{}, run asks for {ssp}/{iam}",
                c.ssp, c.model
            )));
        }
        c.paths.validate(params)?;
        return Ok((c.paths.clone(), Some(c)));
    }
    let owned;
    let store = match &inputs.store {
        Some(s) => s,
        None => {
            owned = SspStore::load(config.store.as_ref().expect("validated"))?;
            &owned
        }
    };
    let data = store.get(ssp, &iam)?;
    let capital = match &inputs.reference_capital {
        Some(k) => k.clone(),
        None => dice_reference_capital(params)?,
    };
    let options = CalibrationOptions {
        tol: config.calibration_tol,
        max_iter: config.calibration_max_iter,
        ..Default::default()
    };
    let c = calibrate(data, params, &capital, &options)?;
    Ok((c.paths.clone(), Some(c)))
}

/// Provenance written next to every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub cell: String,
    pub code_version: String,
    pub content_hash: String,
    pub params_sha256: String,
    pub exogenous_sha256: String,
    pub data_sha256: Option<String>,
    pub calibration_iterations: Option<usize>,
    pub calibration_residual: Option<f64>,
    pub gdp_variable: Option<String>,
    pub config: RunConfig,
}

/// Solved scenario with its derived paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub run: ScenarioRun,
    pub scc: Option<SccPath>,
    /// Excess mortality per grid period.
    pub excess_mortality: Vec<f64>,
    pub metadata: RunMetadata,
}

impl RunOutput {
    pub fn period_of(&self, year: i32) -> Option<usize> {
        self.run.trajectory.years.iter().position(|&y| y == year)
    }

    pub fn temperature_at(&self, year: i32) -> Option<f64> {
        self.period_of(year).map(|t| self.run.trajectory.states[t].t_at)
    }

    pub fn scc_at(&self, year: i32) -> Option<f64> {
        self.scc.as_ref().and_then(|s| s.at_year(year))
    }

    pub fn excess_mortality_at(&self, year: i32) -> Option<f64> {
        self.period_of(year).map(|t| self.excess_mortality[t])
    }

    /// First grid year where the industrial abatement rate reaches 1.
    pub fn first_full_abatement_year(&self) -> Option<i32> {
        let tr = &self.run.trajectory;
        tr.mu.iter().position(|m| *m >= 1.0 - 1e-6).map(|t| tr.years[t])
    }
}

fn population_model(config: &RunConfig, params: &ModelParams, exog: &ExogenousPaths) -> PopulationModel {
    if !config.population_extension {
        return PopulationModel::Exogenous;
    }
    let n = exog.population.len();
    let growth = (0..n)
        .map(|t| if t + 1 < n { exog.population[t + 1] / exog.population[t] } else { 1.0 })
        .collect();
    let deaths = exog
        .population
        .iter()
        .map(|l| config.crude_death_rate * params.delta_years * l)
        .collect();
    PopulationModel::Endogenous {
        growth,
        deaths,
        excess: ExcessMortalityFn::default(),
    }
}

fn content_hash(params: &ModelParams, exog: &ExogenousPaths, config: &RunConfig) -> Result<String> {
    let mut h = Sha256::new();
    h.update(CODE_VERSION.as_bytes());
    h.update(params.to_toml_string().as_bytes());
    h.update(serde_json::to_vec(exog).map_err(|e| Error::Parse(e.to_string()))?);
    let mut c = config.clone();
    // Paths and names locate inputs; their content is already hashed.
    c.name.clear();
    c.params = None;
    c.store = None;
    c.calibrated = None;
    h.update(serde_json::to_vec(&c).map_err(|e| Error::Parse(e.to_string()))?);
    Ok(hex::encode(h.finalize()))
}

/// Runs one scenario without touching the filesystem beyond its inputs.
pub fn run_scenario_with(config: &RunConfig, inputs: &Inputs) -> Result<RunOutput> {
    config.validate()?;
    let cell = config.cell_name();
    let wrap = |e: Error| e.context(format!("scenario {cell}"));
    let params = match &inputs.params {
        Some(p) => p.clone(),
        None => load_params(config).map_err(wrap)?,
    };
    let (exog, calibration) = exogenous_for(config, &params, inputs).map_err(wrap)?;
    let schedule = ControlSchedule::from_kind(config.schedule, params.start_year, &params.years())
        .map_err(wrap)?
        .capped(params.scenario_mu_max);
    let population = population_model(config, &params, &exog);
    let mut problem = OptimizationProblem::new(params.clone(), exog.clone(), schedule).map_err(wrap)?;
    problem.population = population;
    let run = optimize(&problem).map_err(wrap)?;
    let scc = if config.scc {
        Some(scc_path(&run, &problem, config.scc_pulse).map_err(wrap)?)
    } else {
        None
    };
    let excess = ExcessMortalityFn::default();
    let excess_mortality = run.trajectory.states.iter().map(|s| excess.eval_clamped(s.t_at)).collect();
    let metadata = RunMetadata {
        cell: cell.clone(),
        code_version: CODE_VERSION.into(),
        content_hash: content_hash(&params, &exog, config)?,
        params_sha256: sha256_hex(params.to_toml_string().as_bytes()),
        exogenous_sha256: sha256_hex(&serde_json::to_vec(&exog).map_err(|e| Error::Parse(e.to_string()))?),
        data_sha256: calibration.as_ref().map(|c| c.source_sha256.clone()),
        calibration_iterations: calibration.as_ref().map(|c| c.iterations),
        calibration_residual: calibration.as_ref().map(|c| c.residual),
        gdp_variable: calibration.as_ref().map(|c| c.gdp_variable.name().to_string()),
        config: config.clone(),
    };
    let mut run = run;
    if let Some(s) = &scc {
        run.scc = s.values.clone();
    }
    Ok(RunOutput {
        run,
        scc,
        excess_mortality,
        metadata,
    })
}

pub fn run_scenario(config: &RunConfig) -> Result<RunOutput> {
    run_scenario_with(config, &Inputs::default())
}

/// Column schema of `trajectories.csv`.
pub const TRAJECTORY_COLUMNS: [&str; 23] = [
    "year",
    "capital",
    "m_at",
    "m_up",
    "m_lo",
    "t_at",
    "t_lo",
    "population",
    "savings",
    "control",
    "mu",
    "gross_output",
    "net_output",
    "consumption",
    "e_ind",
    "e_land",
    "e_total",
    "forcing",
    "damages",
    "abatement_cost",
    "utility",
    "scc_usd_per_tco2",
    "excess_mortality",
];

pub fn trajectories_csv(out: &RunOutput) -> Result<String> {
    let tr = &out.run.trajectory;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAJECTORY_COLUMNS).map_err(|e| Error::Parse(e.to_string()))?;
    for t in 0..tr.years.len() {
        let s = &tr.states[t];
        let scc = out.scc.as_ref().map_or(String::new(), |p| format!("{}", p.values[t]));
        let row = [
            tr.years[t].to_string(),
            s.k.to_string(),
            s.m_at.to_string(),
            s.m_up.to_string(),
            s.m_lo.to_string(),
            s.t_at.to_string(),
            s.t_lo.to_string(),
            s.l.to_string(),
            tr.savings[t].to_string(),
            tr.abatement_control[t].to_string(),
            tr.mu[t].to_string(),
            tr.gross_output[t].to_string(),
            tr.net_output[t].to_string(),
            tr.consumption[t].to_string(),
            tr.e_ind[t].to_string(),
            tr.e_land[t].to_string(),
            tr.e_total[t].to_string(),
            tr.forcing[t].to_string(),
            tr.damages[t].to_string(),
            tr.abatement_cost[t].to_string(),
            tr.utility[t].to_string(),
            scc,
            out.excess_mortality[t].to_string(),
        ];
        w.write_record(&row).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Writes `trajectories.csv`, `run.json`, `diagnostics.json` and
/// `metadata.json` into `dir`.
pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("trajectories.csv");
    std::fs::write(&csv_path, trajectories_csv(out)?).map_err(|e| Error::io(&csv_path, e))?;
    write_json(&dir.join("run.json"), out)?;
    write_json(&dir.join("diagnostics.json"), &out.run.diagnostics)?;
    write_json(&dir.join("metadata.json"), &out.metadata)
}

pub fn load_run(dir: &Path) -> Result<RunOutput> {
    read_json(&dir.join("run.json"))
}

/// Runs `config` into `out_root/<cell>`, reusing an existing artifact
/// whose content hash matches.
pub fn run_cached(config: &RunConfig, inputs: &Inputs, out_root: &Path) -> Result<(RunOutput, bool)> {
    let dir = out_root.join(config.cell_name());
    if let Ok(meta) = read_json::<RunMetadata>(&dir.join("metadata.json")) {
        let params = match &inputs.params {
            Some(p) => p.clone(),
            None => load_params(config)?,
        };
        if let Ok((exog, _)) = exogenous_for(config, &params, inputs) {
            if meta.content_hash == content_hash(&params, &exog, config)? {
                if let Ok(out) = load_run(&dir) {
                    log::info!("{}: cached", config.cell_name());
                    return Ok((out, true));
                }
            }
        }
    }
    let out = run_scenario_with(config, inputs)?;
    write_artifacts(&out, &dir)?;
    Ok((out, false))
}

/// One row of the matrix summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub ssp: Option<String>,
    pub iam: Option<String>,
    pub marker: bool,
    pub schedule: ScheduleKind,
    pub ok: bool,
    pub error: Option<String>,
    pub exit_code: Option<i32>,
    pub t_at_2100: Option<f64>,
    pub scc_2025: Option<f64>,
    pub scc_2100: Option<f64>,
    pub excess_mortality_2100: Option<f64>,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MatrixSummary {
    pub cells: Vec<CellSummary>,
}

impl MatrixSummary {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| !c.ok).count()
    }

    pub fn get(&self, ssp: Option<&str>, iam: Option<&str>, schedule: ScheduleKind) -> Option<&CellSummary> {
        self.cells.iter().find(|c| {
            c.schedule == schedule && c.ssp.as_deref() == ssp && (iam.is_none() || c.iam.as_deref() == iam)
        })
    }
}

/// Builds shared inputs for a batch of configurations: parameters, the
/// ingested store, the reference capital path and one calibration per
/// distinct (SSP, IAM) pair. Calibration failures are kept per pair.
fn prepare_inputs(configs: &[RunConfig]) -> Result<(Inputs, BTreeMap<(String, String), String>)> {
    let mut inputs = Inputs::default();
    let mut failed = BTreeMap::new();
    let Some(first) = configs.first() else {
        return Ok((inputs, failed));
    };
    let params = load_params(first)?;
    if configs.iter().any(|c| c.params != first.params) {
        return Err(Error::Config("all matrix cells must share one parameter file".into()));
    }
    if let Some(store) = configs.iter().find_map(|c| c.store.clone()) {
        inputs.store = Some(SspStore::load(&store)?);
    }
    let pairs: Vec<(String, String, &RunConfig)> = {
        let mut seen = BTreeMap::new();
        for c in configs {
            if let (Some(ssp), Some(iam)) = (&c.ssp, c.resolved_iam()) {
                if c.calibrated.is_none() {
                    seen.entry((ssp.clone(), iam)).or_insert(c);
                }
            }
        }
        seen.into_iter().map(|((s, m), c)| (s, m, c)).collect()
    };
    if !pairs.is_empty() {
        inputs.reference_capital = Some(dice_reference_capital(&params)?);
    }
    inputs.params = Some(params);
    let results: Vec<((String, String), Result<CalibratedPaths>)> = pairs
        .par_iter()
        .map(|(ssp, iam, cfg)| {
            let r = exogenous_for(cfg, inputs.params.as_ref().unwrap(), &inputs)
                .and_then(|(_, c)| c.ok_or_else(|| Error::State("calibration missing".into())));
            ((ssp.clone(), iam.clone()), r)
        })
        .collect();
    for (key, r) in results {
        match r {
            Ok(c) => {
                inputs.calibrations.insert(key, c);
            }
            Err(e) => {
                failed.insert(key, e.to_string());
            }
        }
    }
    Ok((inputs, failed))
}

/// Runs every configuration in a pool of `jobs` workers; failed cells are
/// recorded rather than aborting the batch. When `out_root` is given each
/// cell gets an artifact directory and the summary tables are written.
pub fn run_matrix(configs: &[RunConfig], jobs: usize, out_root: Option<&Path>) -> Result<MatrixSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        let (inputs, failed_pairs) = prepare_inputs(configs)?;
        let mut cells: Vec<CellSummary> = configs
            .par_iter()
            .map(|config| {
                let key = config.ssp.clone().zip(config.resolved_iam());
                let marker = key.as_ref().is_some_and(|(s, m)| crate::calibration::is_marker(s, m));
                let mut summary = CellSummary {
                    cell: config.cell_name(),
                    ssp: config.ssp.clone(),
                    iam: config.resolved_iam(),
                    marker,
                    schedule: config.schedule,
                    ok: false,
                    error: None,
                    exit_code: None,
                    t_at_2100: None,
                    scc_2025: None,
                    scc_2100: None,
                    excess_mortality_2100: None,
                    cached: false,
                };
                if let Some(reason) = key.as_ref().and_then(|k| failed_pairs.get(k)) {
                    summary.error = Some(reason.clone());
                    summary.exit_code = Some(3);
                    return summary;
                }
                let result = match out_root {
                    Some(root) => run_cached(config, &inputs, root),
                    None => run_scenario_with(config, &inputs).map(|o| (o, false)),
                };
                match result {
                    Ok((out, cached)) => {
                        summary.ok = true;
                        summary.cached = cached;
                        summary.t_at_2100 = out.temperature_at(REPORT_YEAR);
                        summary.scc_2025 = out.scc_at(2025);
                        summary.scc_2100 = out.scc_at(REPORT_YEAR);
                        summary.excess_mortality_2100 = out.excess_mortality_at(REPORT_YEAR);
                    }
                    Err(e) => {
                        log::warn!("{}: {e}", summary.cell);
                        summary.exit_code = Some(e.exit_code());
                        summary.error = Some(e.to_string());
                    }
                }
                summary
            })
            .collect();
        cells.sort_by(|a, b| a.cell.cmp(&b.cell));
        let summary = MatrixSummary { cells };
        if let Some(root) = out_root {
            write_summary(&summary, root)?;
        }
        Ok(summary)
    })
}

pub const STANDARD_SCHEDULES: [ScheduleKind; 4] = [
    ScheduleKind::NetZero(2050),
    ScheduleKind::NetZero(2100),
    ScheduleKind::ZeroIndustrial(2050),
    ScheduleKind::ZeroIndustrial(2100),
];
pub const SSPS: [&str; 5] = ["SSP1", "SSP2", "SSP3", "SSP4", "SSP5"];

fn fmt_cell(c: Option<&CellSummary>, digits: usize) -> String {
    match c {
        Some(c) if c.ok => c.t_at_2100.map_or("NA".into(), |t| format!("{t:.digits$}")),
        Some(_) => "ERR".into(),
        None => String::new(),
    }
}

/// Marker table: one row per schedule, one column per SSP.
pub fn marker_table_csv(summary: &MatrixSummary) -> String {
    let mut s = String::from("schedule,SSP1,SSP2,SSP3,SSP4,SSP5\n");
    for sched in STANDARD_SCHEDULES {
        let row: Vec<String> = SSPS
            .iter()
            .map(|ssp| fmt_cell(summary.cells.iter().find(|c| c.marker && c.schedule == sched && c.ssp.as_deref() == Some(*ssp)), 2))
            .collect();
        let _ = writeln!(s, "{sched},{}", row.join(","));
    }
    s
}

/// Non-marker table: one row per (IAM, schedule), one column per SSP.
pub fn iam_table_csv(summary: &MatrixSummary) -> String {
    let mut iams: Vec<String> = summary
        .cells
        .iter()
        .filter(|c| !c.marker)
        .filter_map(|c| c.iam.clone())
        .collect();
    iams.sort();
    iams.dedup();
    let mut s = String::from("iam,schedule,SSP1,SSP2,SSP3,SSP4,SSP5\n");
    for iam in &iams {
        for sched in STANDARD_SCHEDULES {
            let row: Vec<String> = SSPS
                .iter()
                .map(|ssp| {
                    fmt_cell(
                        summary.cells.iter().find(|c| {
                            !c.marker && c.schedule == sched && c.ssp.as_deref() == Some(*ssp) && c.iam.as_deref() == Some(iam)
                        }),
                        1,
                    )
                })
                .collect();
            let _ = writeln!(s, "{iam},{sched},{}", row.join(","));
        }
    }
    s
}

pub fn summary_csv(summary: &MatrixSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "cell",
        "ssp",
        "iam",
        "marker",
        "schedule",
        "status",
        "t_at_2100",
        "scc_2025",
        "scc_2100",
        "excess_mortality_2100",
        "error",
    ])
    .map_err(|e| Error::Parse(e.to_string()))?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for c in &summary.cells {
        w.write_record([
            c.cell.clone(),
            c.ssp.clone().unwrap_or_default(),
            c.iam.clone().unwrap_or_default(),
            c.marker.to_string(),
            c.schedule.to_string(),
            if c.ok { "ok".into() } else { "failed".into() },
            opt(c.t_at_2100),
            opt(c.scc_2025),
            opt(c.scc_2100),
            opt(c.excess_mortality_2100),
            c.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_summary(summary: &MatrixSummary, root: &Path) -> Result<()> {
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let files = [
        ("summary.csv", summary_csv(summary)?),
        ("marker_table.csv", marker_table_csv(summary)),
        ("iam_table.csv", iam_table_csv(summary)),
    ];
    for (name, text) in files {
        let p = root.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    write_json(&root.join("summary.json"), summary)
}

/// Matrix description as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    #[serde(default)]
    pub store: Option<PathBuf>,
    #[serde(default)]
    pub params: Option<PathBuf>,
    #[serde(default = "default_ssps")]
    pub ssps: Vec<String>,
    /// IAM names, or `"marker"` for each SSP's marker model.
    #[serde(default = "default_iams")]
    pub iams: Vec<String>,
    #[serde(default = "default_schedules")]
    pub schedules: Vec<ScheduleKind>,
    #[serde(default)]
    pub original_dice: bool,
    #[serde(default = "default_true")]
    pub scc: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_ssps() -> Vec<String> {
    SSPS.iter().map(|s| s.to_string()).collect()
}
fn default_iams() -> Vec<String> {
    vec!["marker".into()]
}
fn default_schedules() -> Vec<ScheduleKind> {
    STANDARD_SCHEDULES.to_vec()
}

impl MatrixConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("matrix config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// Expands into one configuration per cell.
    pub fn expand(&self) -> Result<Vec<RunConfig>> {
        let mut out = Vec::new();
        let needs_store = !self.ssps.is_empty() && !self.iams.is_empty();
        if needs_store && self.store.is_none() && !self.schedules.is_empty() {
            return Err(Error::Config("matrix with SSP cells needs `store`".into()));
        }
        for ssp in &self.ssps {
            for iam in &self.iams {
                for sched in &self.schedules {
                    let iam = if iam.eq_ignore_ascii_case("marker") { None } else { Some(iam.as_str()) };
                    let mut c = RunConfig::ssp(ssp, iam, *sched, self.store.clone().unwrap_or_default());
                    c.params = self.params.clone();
                    c.scc = self.scc;
                    c.seed = self.seed;
                    out.push(c);
                }
            }
        }
        if self.original_dice {
            let mut c = RunConfig::original_dice(ScheduleKind::FullyOptimal);
            c.params = self.params.clone();
            c.scc = self.scc;
            out.push(c);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Mortality-facing stages

/// Default baseline table: Gompertz law for ages 0..=120 over 2015..=2100.
pub fn default_table() -> Result<MortalityTable> {
    gompertz_to_table(&GompertzLaw::default(), 0, 120, 2015, REPORT_YEAR)
}

/// Stress tests of every portfolio against one run.
pub fn stress_run(
    out: &RunOutput,
    portfolios: &PortfolioSet,
    table: &MortalityTable,
    year: i32,
    n_sims: usize,
    seed: u64,
) -> Result<Vec<StressResult>> {
    let tr = &out.run.trajectory;
    let path = annualize_between(&tr.years, &tr.states.iter().map(|s| s.t_at).collect::<Vec<_>>(), tr.years[0], year, 0)?;
    let excess = ExcessMortalityFn::default();
    portfolios
        .portfolio
        .iter()
        .map(|p| stress_test(p, table, &path, &excess, year, n_sims, seed))
        .collect()
}

/// Stress rows, one per scenario and portfolio, with mean, q01 and q99 deviations.
pub fn stress_csv(rows: &[(String, StressResult)]) -> String {
    let mut s = String::from("scenario,portfolio,kind,year,temperature,mean_pct,q01_pct,q99_pct,mean_se_pct,analytic_mean_pct,n_sims,seed\n");
    for (scenario, r) in rows {
        let _ = writeln!(
            s,
            "{scenario},{},{:?},{},{:.4},{:.2},{:.2},{:.2},{:.4},{:.4},{},{}",
            r.portfolio,
            r.kind,
            r.year,
            r.temperature,
            r.rel_mean,
            r.rel_q01,
            r.rel_q99,
            r.rel_mean_se,
            r.analytic_rel_mean,
            r.n_sims,
            r.seed
        );
    }
    s
}

/// Human capital of a 25-year-old at the start of the run, with the cubic
/// fit of the run's annual excess-mortality path through `end_year`.
pub fn human_capital_run(out: &RunOutput, income: &IncomeProfile, options: &HumanCapitalOptions, end_year: i32) -> Result<HumanCapitalResult> {
    let tr = &out.run.trajectory;
    let start = tr.years[0];
    let temps: Vec<f64> = tr.states.iter().map(|s| s.t_at).collect();
    let path = annualize_between(&tr.years, &temps, start, end_year, 0)?;
    let excess = ExcessMortalityFn::default();
    let years: Vec<f64> = (start..=end_year).map(f64::from).collect();
    let deltas: Vec<f64> = path.values.iter().map(|t| excess.eval_clamped(*t)).collect();
    let fit = fit_cubic_damage(&years, &deltas)?;
    human_capital_deviation(income, &GompertzLaw::default(), &shift_cubic(&fit, f64::from(start)), options)
}
