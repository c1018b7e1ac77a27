//! SSP baseline ingestion and calibration of the exogenous paths.
//!
//! Exports follow the IIASA SSP database layout: `Model, Scenario, Region,
//! Variable, Unit` followed by one column per year. Only `World` baseline
//! rows are used. Series are resampled to the 5-year grid, GDP is moved to
//! 2010 prices, everything is extended past the last data year, and TFP is
//! found by fixed-point iteration so that the damage-free economy with
//! optimal savings reproduces the baseline GDP.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exogenous::{abatement_cost_path, dice2016_forcing, ExogenousPaths};
use crate::optimizer::{optimize_consumption, optimize_full, OptimizationProblem, SolverOptions};
use crate::params::ModelParams;
use crate::scenario::{ControlSchedule, ScheduleKind};

pub const VAR_POPULATION: &str = "Population";
pub const VAR_EMISSIONS_INDUSTRY: &str = "Emissions|CO2|Fossil Fuels and Industry";
pub const VAR_EMISSIONS_LAND: &str = "Emissions|CO2|Land Use";

/// Factor taking 2005 USD to 2010 USD.
pub const CPI_2005_TO_2010: f64 = 1.14;

/// First and last year of the calibration data grid.
pub const DATA_START: i32 = 2015;
pub const DATA_END: i32 = 2100;

/// The marker interpretation of each SSP.
pub const MARKERS: [(&str, &str); 5] = [
    ("SSP1", "IMAGE"),
    ("SSP2", "MESSAGE-GLOBIOM"),
    ("SSP3", "AIM/CGE"),
    ("SSP4", "GCAM"),
    ("SSP5", "REMIND-MAgPIE"),
];

/// Every IAM present in the SSP database.
pub const IAMS: [&str; 6] = ["IMAGE", "MESSAGE-GLOBIOM", "AIM/CGE", "GCAM", "REMIND-MAgPIE", "WITCH-GLOBIOM"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GdpVariable {
    #[default]
    Ppp,
    Mer,
}

impl GdpVariable {
    pub fn name(self) -> &'static str {
        match self {
            GdpVariable::Ppp => "GDP|PPP",
            GdpVariable::Mer => "GDP|MER",
        }
    }
}

impl std::str::FromStr for GdpVariable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PPP" | "GDP|PPP" => Ok(GdpVariable::Ppp),
            "MER" | "GDP|MER" => Ok(GdpVariable::Mer),
            _ => Err(Error::Config(format!("unknown GDP variable {s:?} (use PPP or MER)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriceBase {
    Usd2005,
    Usd2010,
}

impl fmt::Display for PriceBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriceBase::Usd2005 => "USD2005",
            PriceBase::Usd2010 => "USD2010",
        })
    }
}

/// Canonical spelling of an IAM name as it appears in the SSP database.
pub fn canonical_model(name: &str) -> String {
    let upper = name.trim().to_ascii_uppercase();
    match upper.as_str() {
        "GCAM4" | "GCAM" => "GCAM".into(),
        "REMIND-MAGPIE" | "REMIND" => "REMIND-MAgPIE".into(),
        "AIM/CGE" | "AIM-CGE" | "AIM" => "AIM/CGE".into(),
        "IMAGE" => "IMAGE".into(),
        "MESSAGE-GLOBIOM" | "MESSAGE" => "MESSAGE-GLOBIOM".into(),
        "WITCH-GLOBIOM" | "WITCH" => "WITCH-GLOBIOM".into(),
        _ => name.trim().to_string(),
    }
}

pub fn is_marker(ssp: &str, model: &str) -> bool {
    let model = canonical_model(model);
    MARKERS.iter().any(|(s, m)| *s == ssp && *m == model)
}

/// Baseline data of one (SSP, IAM) pair on the 5-year data grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SspScenarioData {
    pub model: String,
    pub ssp: String,
    pub marker: bool,
    pub years: Vec<i32>,
    /// Billions.
    pub population: Vec<f64>,
    /// Trillions USD per year in `price_base`.
    pub gdp: Vec<f64>,
    pub price_base: PriceBase,
    pub gdp_variable: GdpVariable,
    /// GtCO2/yr.
    pub e_ind: Vec<f64>,
    /// GtCO2/yr.
    pub e_land: Vec<f64>,
    /// SHA-256 of the export the data came from.
    pub source_sha256: String,
}

impl SspScenarioData {
    pub fn key(&self) -> (String, String) {
        (self.ssp.clone(), self.model.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.years.len();
        if [self.population.len(), self.gdp.len(), self.e_ind.len(), self.e_land.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::Ingest(format!("{}/{}: series lengths differ", self.ssp, self.model)));
        }
        if self.population.iter().chain(&self.gdp).any(|v| !(*v > 0.0)) {
            return Err(Error::Ingest(format!(
                "{}/{}: population and GDP must be positive",
                self.ssp, self.model
            )));
        }
        if self.e_ind.iter().chain(&self.e_land).any(|v| !v.is_finite()) {
            return Err(Error::Ingest(format!("{}/{}: non-finite emissions", self.ssp, self.model)));
        }
        Ok(())
    }
}

/// Multiplies GDP by [`CPI_2005_TO_2010`] and retags the price base.
pub fn convert_price_base(data: &mut SspScenarioData) -> Result<()> {
    if data.price_base == PriceBase::Usd2010 {
        return Err(Error::State(format!(
            "{}/{}: GDP already in 2010 prices",
            data.ssp, data.model
        )));
    }
    data.gdp.iter_mut().for_each(|g| *g *= CPI_2005_TO_2010);
    data.price_base = PriceBase::Usd2010;
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VarKind {
    Population,
    Gdp,
    Emissions,
}

/// Returns the factor to the canonical unit and, for GDP, the price base.
fn unit_factor(kind: VarKind, variable: &str, unit: &str) -> Result<(f64, Option<PriceBase>)> {
    let u: String = unit.to_ascii_lowercase().chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Unit {
        variable: variable.to_string(),
        unit: unit.to_string(),
    };
    match kind {
        VarKind::Population => match u.as_str() {
            "million" | "millions" => Ok((1e-3, None)),
            "billion" | "billions" => Ok((1.0, None)),
            _ => Err(bad()),
        },
        VarKind::Emissions => match u.as_str() {
            "mtco2/yr" | "mtco2" => Ok((1e-3, None)),
            "gtco2/yr" | "gtco2" => Ok((1.0, None)),
            _ => Err(bad()),
        },
        VarKind::Gdp => {
            let base = if u.contains("2005") {
                PriceBase::Usd2005
            } else if u.contains("2010") {
                PriceBase::Usd2010
            } else {
                return Err(bad());
            };
            let scale = if u.starts_with("billion") {
                1e-3
            } else if u.starts_with("trillion") {
                1.0
            } else {
                return Err(bad());
            };
            Ok((scale, Some(base)))
        }
    }
}

fn ssp_of_scenario(scenario: &str) -> Option<String> {
    let upper = scenario.trim().to_ascii_uppercase();
    let ssp = upper.get(0..4).filter(|s| s.starts_with("SSP") && s[3..].parse::<u8>().is_ok_and(|d| (1..=5).contains(&d)))?;
    let rest = &upper[4..];
    if rest.is_empty() || rest.contains("BASELINE") || rest.contains("REF") {
        Some(ssp.to_string())
    } else {
        None
    }
}

/// Linear interpolation of reported (year, value) points onto `grid`.
pub fn resample_linear(points: &[(i32, f64)], grid: &[i32]) -> Result<Vec<f64>> {
    let mut pts = points.to_vec();
    pts.sort_by_key(|p| p.0);
    grid.iter()
        .map(|&y| {
            let hi = pts.iter().position(|p| p.0 >= y);
            match hi {
                Some(i) if pts[i].0 == y => Ok(pts[i].1),
                Some(i) if i > 0 => {
                    let (y0, v0) = pts[i - 1];
                    let (y1, v1) = pts[i];
                    Ok(v0 + (v1 - v0) * f64::from(y - y0) / f64::from(y1 - y0))
                }
                _ => Err(Error::Ingest(format!("no data bracketing year {y}"))),
            }
        })
        .collect()
}

fn data_grid() -> Vec<i32> {
    (DATA_START..=DATA_END).step_by(5).collect()
}

#[derive(Default)]
struct RawPair {
    series: BTreeMap<&'static str, Vec<(i32, f64)>>,
    price_base: Option<PriceBase>,
}

/// Parses one SSP export. Pairs lacking a required variable are reported as
/// an ingestion error naming it; duplicated rows keep the last occurrence.
pub fn parse_ssp_export<R: Read>(reader: R, gdp_variable: GdpVariable) -> Result<Vec<SspScenarioData>> {
    let mut bytes = Vec::new();
    let mut reader = reader;
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Ingest(format!("cannot read export: {e}")))?;
    let hash = hex::encode(Sha256::digest(&bytes));
    let mut csv = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(bytes.as_slice());
    let headers = csv.headers().map_err(|e| Error::Ingest(format!("bad header: {e}")))?.clone();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Ingest("export is empty".into()));
    }
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Ingest(format!("missing column {name:?}")))
    };
    let (c_model, c_scen, c_region, c_var, c_unit) = (col("Model")?, col("Scenario")?, col("Region")?, col("Variable")?, col("Unit")?);
    let year_cols: Vec<(usize, i32)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.parse::<i32>().ok().map(|y| (i, y)))
        .collect();
    if year_cols.is_empty() {
        return Err(Error::Ingest("no year columns".into()));
    }
    let wanted: [(&'static str, VarKind); 4] = [
        (VAR_POPULATION, VarKind::Population),
        (gdp_variable.name(), VarKind::Gdp),
        (VAR_EMISSIONS_INDUSTRY, VarKind::Emissions),
        (VAR_EMISSIONS_LAND, VarKind::Emissions),
    ];

    let mut pairs: BTreeMap<(String, String), RawPair> = BTreeMap::new();
    for (line, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::Ingest(format!("row {}: {e}", line + 2)))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        if !field(c_region).eq_ignore_ascii_case("World") {
            continue;
        }
        let Some(ssp) = ssp_of_scenario(field(c_scen)) else {
            continue;
        };
        let variable = field(c_var);
        let Some(&(name, kind)) = wanted.iter().find(|(v, _)| v.eq_ignore_ascii_case(variable)) else {
            continue;
        };
        let (factor, base) = unit_factor(kind, variable, field(c_unit))?;
        let mut points = Vec::new();
        for &(i, year) in &year_cols {
            let cell = field(i);
            if cell.is_empty() || cell.eq_ignore_ascii_case("n/a") {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Ingest(format!("row {}: bad number {cell:?} for {year}", line + 2)))?;
            points.push((year, v * factor));
        }
        let model = canonical_model(field(c_model));
        let entry = pairs.entry((ssp.clone(), model.clone())).or_default();
        if entry.series.insert(name, points).is_some() {
            log::warn!("duplicate {name} row for {ssp}/{model}; keeping the last one");
        }
        if let Some(b) = base {
            entry.price_base = Some(b);
        }
    }
    if pairs.is_empty() {
        return Err(Error::Ingest("no World baseline rows found".into()));
    }

    let grid = data_grid();
    let mut out = Vec::new();
    for ((ssp, model), raw) in pairs {
        let series = |name: &str| -> Result<Vec<f64>> {
            let pts = raw
                .series
                .get(name)
                .ok_or_else(|| Error::Ingest(format!("{ssp}/{model}: missing variable {name:?}")))?;
            resample_linear(pts, &grid).map_err(|e| e.context(format!("{ssp}/{model} {name}")))
        };
        let data = SspScenarioData {
            marker: is_marker(&ssp, &model),
            years: grid.clone(),
            population: series(VAR_POPULATION)?,
            gdp: series(gdp_variable.name())?,
            price_base: raw.price_base.unwrap_or(PriceBase::Usd2005),
            gdp_variable,
            e_ind: series(VAR_EMISSIONS_INDUSTRY)?,
            e_land: series(VAR_EMISSIONS_LAND)?,
            source_sha256: hash.clone(),
            model,
            ssp,
        };
        data.validate()?;
        out.push(data);
    }
    Ok(out)
}

pub fn load_ssp_export(path: &Path, gdp_variable: GdpVariable) -> Result<Vec<SspScenarioData>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ssp_export(file, gdp_variable).map_err(|e| e.context(path.display().to_string()))
}

/// Normalised store produced by `ingest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SspStore {
    pub format: String,
    pub scenarios: Vec<SspScenarioData>,
}

pub const STORE_FORMAT: &str = "climate-stress/ssp-store/1";

impl SspStore {
    /// Merges parsed exports; later entries replace earlier ones with the
    /// same (SSP, IAM) key.
    pub fn from_scenarios(items: impl IntoIterator<Item = SspScenarioData>) -> Self {
        let mut map = BTreeMap::new();
        for d in items {
            if let Some(old) = map.insert(d.key(), d) {
                log::warn!("duplicate scenario {}/{}; keeping the last one", old.ssp, old.model);
            }
        }
        Self {
            format: STORE_FORMAT.into(),
            scenarios: map.into_values().collect(),
        }
    }

    pub fn get(&self, ssp: &str, model: &str) -> Result<&SspScenarioData> {
        let model = canonical_model(model);
        let ssp = ssp.to_ascii_uppercase();
        self.scenarios
            .iter()
            .find(|d| d.ssp == ssp && d.model == model)
            .ok_or_else(|| Error::Config(format!("no ingested data for {ssp}/{model}")))
    }

    pub fn marker(&self, ssp: &str) -> Result<&SspScenarioData> {
        let (_, model) = MARKERS
            .iter()
            .find(|(s, _)| s.eq_ignore_ascii_case(ssp))
            .ok_or_else(|| Error::Config(format!("unknown SSP {ssp:?}")))?;
        self.get(ssp, model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let store: Self = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if store.format != STORE_FORMAT {
            return Err(Error::Parse(format!("{}: unsupported store format {:?}", path.display(), store.format)));
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Extends a series past its last year along the log-linear trend fitted
/// over the trailing `window` years, anchored at the last value.
pub fn extrapolate_loglinear(years: &[i32], values: &[f64], horizon_end: i32, window: i32) -> Result<(Vec<i32>, Vec<f64>)> {
    let (slope, last_year, last) = trailing_fit(years, values, window, true)?;
    Ok(extend(years, values, horizon_end, |y| last * (slope * f64::from(y - last_year)).exp(), last_year))
}

/// Linear counterpart of [`extrapolate_loglinear`], optionally floored.
pub fn extrapolate_linear(
    years: &[i32],
    values: &[f64],
    horizon_end: i32,
    window: i32,
    floor: Option<f64>,
) -> Result<(Vec<i32>, Vec<f64>)> {
    let (slope, last_year, last) = trailing_fit(years, values, window, false)?;
    let f = |y: i32| {
        let v = last + slope * f64::from(y - last_year);
        floor.map_or(v, |fl| v.max(fl))
    };
    Ok(extend(years, values, horizon_end, f, last_year))
}

/// Log-linear when the trailing window is strictly positive, linear
/// otherwise.
pub fn extrapolate_series(
    years: &[i32],
    values: &[f64],
    horizon_end: i32,
    window: i32,
    floor: Option<f64>,
) -> Result<(Vec<i32>, Vec<f64>)> {
    match extrapolate_loglinear(years, values, horizon_end, window) {
        Ok(r) => Ok(r),
        Err(Error::Domain(_)) => extrapolate_linear(years, values, horizon_end, window, floor),
        Err(e) => Err(e),
    }
}

fn trailing_fit(years: &[i32], values: &[f64], window: i32, log: bool) -> Result<(f64, i32, f64)> {
    if years.len() != values.len() || years.is_empty() {
        return Err(Error::Config("extrapolation needs matching, non-empty years and values".into()));
    }
    let last_year = *years.last().unwrap();
    let last = *values.last().unwrap();
    let pts: Vec<(f64, f64)> = years
        .iter()
        .zip(values)
        .filter(|(y, _)| **y >= last_year - window)
        .map(|(y, v)| (f64::from(*y), *v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Config(format!("fitting window of {window} years holds fewer than two points")));
    }
    if log && pts.iter().any(|(_, v)| !(*v > 0.0)) {
        return Err(Error::domain("log-linear extrapolation needs positive values in the fitting window"));
    }
    let transformed: Vec<(f64, f64)> = pts.iter().map(|(x, v)| (*x, if log { v.ln() } else { *v })).collect();
    let n = transformed.len() as f64;
    let mx = transformed.iter().map(|p| p.0).sum::<f64>() / n;
    let my = transformed.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = transformed.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = transformed.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok((sxy / sxx, last_year, last))
}

fn extend(years: &[i32], values: &[f64], horizon_end: i32, f: impl Fn(i32) -> f64, last_year: i32) -> (Vec<i32>, Vec<f64>) {
    let step = if years.len() >= 2 { years[1] - years[0] } else { 5 };
    let mut ys = years.to_vec();
    let mut vs = values.to_vec();
    let mut y = last_year + step;
    while y <= horizon_end {
        ys.push(y);
        vs.push(f(y));
        y += step;
    }
    (ys, vs)
}

/// `sigma_t = E_ind,t / Y_t` on a common grid.
pub fn carbon_intensity(e_ind: &[f64], gdp: &[f64]) -> Result<Vec<f64>> {
    if e_ind.len() != gdp.len() {
        return Err(Error::Config(format!(
            "emission and GDP grids differ ({} vs {} points)",
            e_ind.len(),
            gdp.len()
        )));
    }
    e_ind
        .iter()
        .zip(gdp)
        .map(|(e, y)| {
            if *y > 0.0 {
                Ok(e / y)
            } else {
                Err(Error::domain(format!("GDP must be positive, got {y}")))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Trailing window for extrapolation, years.
    pub window: i32,
    /// Lower bound applied to linearly extended emission series.
    pub emission_floor: Option<f64>,
    pub solver: SolverOptions,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 50,
            window: 50,
            emission_floor: None,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfpCalibration {
    pub tfp: Vec<f64>,
    pub iterations: usize,
    /// Max relative GDP error through the last data year.
    pub residual: f64,
    pub residual_profile: Vec<f64>,
}

/// Capital path of the original DICE-2016 optimum, the starting iterate of
/// the TFP fixed point.
pub fn dice_reference_capital(params: &ModelParams) -> Result<Vec<f64>> {
    let exog = ExogenousPaths::dice2016(params);
    let problem = OptimizationProblem::new(params.clone(), exog, ControlSchedule::fully_optimal())?;
    let run = optimize_full(&problem)?;
    Ok(run.trajectory.states.iter().map(|s| s.k).collect())
}

/// Fixed-point TFP calibration.
///
/// `exog` supplies population and every other path; its `tfp` entries are
/// ignored. `gdp` is the target gross output on the model grid.
pub fn calibrate_tfp(
    exog: &ExogenousPaths,
    gdp: &[f64],
    params: &ModelParams,
    initial_capital: &[f64],
    options: &CalibrationOptions,
) -> Result<TfpCalibration> {
    let n = params.n_points();
    if gdp.len() != n || initial_capital.len() != n {
        return Err(Error::Config(format!("calibration needs {n}-point GDP and capital paths")));
    }
    if !(options.tol > 0.0) {
        return Err(Error::Config("calibration tolerance must be positive".into()));
    }
    let check_end = params.period_of_year(DATA_END).map_or(n, |t| t + 1);
    let mut damage_free = params.clone();
    damage_free.pi2 = 0.0;
    let zero = ControlSchedule {
        kind: ScheduleKind::ZeroIndustrial(DATA_END),
        years: exog.years.clone(),
        values: vec![0.0; n],
    };
    let tfp_for = |capital: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|t| gdp[t] / (capital[t].powf(params.gamma) * exog.population[t].powf(1.0 - params.gamma)))
            .collect()
    };

    let mut capital = initial_capital.to_vec();
    let mut savings: Option<Vec<f64>> = None;
    let mut profile = Vec::new();
    let mut residual = f64::INFINITY;
    for iteration in 1..=options.max_iter {
        let tfp = tfp_for(&capital);
        let mut paths = exog.clone();
        paths.tfp = tfp.clone();
        let mut problem = OptimizationProblem::new(damage_free.clone(), paths, zero.clone())?;
        problem.options = options.solver;
        problem.initial_savings = savings.clone();
        let run = optimize_consumption(&problem).map_err(|e| e.context(format!("calibration iteration {iteration}")))?;
        profile = (0..check_end)
            .map(|t| (run.trajectory.gross_output[t] - gdp[t]).abs() / gdp[t])
            .collect();
        residual = profile.iter().fold(0.0, |m, v| m.max(*v));
        log::debug!("calibration iteration {iteration}: residual {residual:.3e}");
        if residual <= options.tol {
            return Ok(TfpCalibration {
                tfp,
                iterations: iteration,
                residual,
                residual_profile: profile,
            });
        }
        capital = run.trajectory.states.iter().map(|s| s.k).collect();
        savings = Some(run.trajectory.savings);
    }
    Err(Error::Calibration {
        iterations: options.max_iter,
        residual,
        profile,
    })
}

/// Exogenous paths on the model grid built from baseline data, with TFP
/// left at zero for the caller to calibrate. Also returns the extended
/// GDP target.
pub fn extend_to_model_grid(data: &SspScenarioData, params: &ModelParams, options: &CalibrationOptions) -> Result<(ExogenousPaths, Vec<f64>)> {
    if data.price_base != PriceBase::Usd2010 {
        return Err(Error::State(format!("{}/{}: convert GDP to 2010 prices first", data.ssp, data.model)));
    }
    let years = params.years();
    let end = *years.last().unwrap();
    if data.years.first() != years.first() {
        return Err(Error::Config(format!(
            "data grid starts in {:?} but the model starts in {:?}",
            data.years.first(),
            years.first()
        )));
    }
    let extend = |v: &[f64], name: &str, positive: bool| -> Result<Vec<f64>> {
        let r = if positive {
            extrapolate_loglinear(&data.years, v, end, options.window)
        } else {
            extrapolate_series(&data.years, v, end, options.window, options.emission_floor)
        };
        let (ys, vs) = r.map_err(|e| e.context(format!("{}/{} {name}", data.ssp, data.model)))?;
        if ys != years {
            return Err(Error::Config("extended data grid does not match the model grid".into()));
        }
        Ok(vs)
    };
    let population = extend(&data.population, "population", true)?;
    let gdp = extend(&data.gdp, "GDP", true)?;
    let e_ind = extend(&data.e_ind, "industrial emissions", false)?;
    let e_land = extend(&data.e_land, "land-use emissions", false)?;
    let sigma = carbon_intensity(&e_ind, &gdp)?;
    let theta1 = abatement_cost_path(params, &sigma.iter().map(|s| s.max(0.0)).collect::<Vec<_>>());
    let paths = ExogenousPaths {
        years,
        population,
        tfp: vec![0.0; params.n_points()],
        sigma,
        e_land,
        f_ex: dice2016_forcing(params),
        theta1,
    };
    Ok((paths, gdp))
}

/// Calibrated exogenous paths with provenance, as persisted on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPaths {
    pub format: String,
    pub ssp: String,
    pub model: String,
    pub marker: bool,
    pub gdp_variable: GdpVariable,
    pub price_base: PriceBase,
    pub source_sha256: String,
    pub params_version: String,
    pub tol: f64,
    pub iterations: usize,
    pub residual: f64,
    pub window: i32,
    /// Baseline GDP on the model grid, trillions 2010 USD.
    pub gdp_target: Vec<f64>,
    pub paths: ExogenousPaths,
}

pub const CALIBRATED_FORMAT: &str = "climate-stress/calibrated-paths/1";

impl CalibratedPaths {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Self = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if c.format != CALIBRATED_FORMAT {
            return Err(Error::Parse(format!("{}: unsupported format {:?}", path.display(), c.format)));
        }
        Ok(c)
    }
}

/// Full calibration of one (SSP, IAM) pair. GDP in 2005 prices is
/// converted on a copy.
pub fn calibrate(
    data: &SspScenarioData,
    params: &ModelParams,
    initial_capital: &[f64],
    options: &CalibrationOptions,
) -> Result<CalibratedPaths> {
    let mut data = data.clone();
    if data.price_base == PriceBase::Usd2005 {
        convert_price_base(&mut data)?;
    }
    let (mut paths, gdp) = extend_to_model_grid(&data, params, options)?;
    let fit = calibrate_tfp(&paths, &gdp, params, initial_capital, options)
        .map_err(|e| e.context(format!("{}/{}", data.ssp, data.model)))?;
    paths.tfp = fit.tfp;
    paths.validate(params)?;
    Ok(CalibratedPaths {
        format: CALIBRATED_FORMAT.into(),
        ssp: data.ssp.clone(),
        model: data.model.clone(),
        marker: data.marker,
        gdp_variable: data.gdp_variable,
        price_base: data.price_base,
        source_sha256: data.source_sha256.clone(),
        params_version: params.version.clone(),
        tol: options.tol,
        iterations: fit.iterations,
        residual: fit.residual,
        window: options.window,
        gdp_target: gdp,
        paths,
    })
}
