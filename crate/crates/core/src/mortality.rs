//! Climate-adjusted mortality.
//!
//! Temperature paths on the 5-year grid are interpolated to calendar years
//! and mapped through an excess-mortality function onto baseline death
//! probabilities. Baseline tables are either derived from a Gompertz law or
//! supplied by the user as delimited text (age rows by year columns).

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Age-dependent excess mortality. Implementations return the fractional
/// increase in death rates at `age` for anomaly `t_at`.
pub trait ExcessMortality {
    fn delta(&self, age: u32, t_at: f64) -> Result<f64>;
}

/// Global excess-mortality function `delta(T) = a T^nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessMortalityFn {
    pub a: f64,
    pub nu: f64,
}

impl Default for ExcessMortalityFn {
    fn default() -> Self {
        Self {
            a: 0.0001811,
            nu: 3.745,
        }
    }
}

impl ExcessMortalityFn {
    pub fn eval(&self, t_at: f64) -> Result<f64> {
        if t_at < 0.0 || !t_at.is_finite() {
            return Err(Error::domain(format!(
                "excess mortality is defined for non-negative anomalies, got {t_at}"
            )));
        }
        Ok(self.eval_clamped(t_at))
    }

    /// Evaluates with negative anomalies treated as zero.
    pub fn eval_clamped(&self, t_at: f64) -> f64 {
        if t_at <= 0.0 {
            0.0
        } else {
            self.a * t_at.powf(self.nu)
        }
    }

    /// Derivative with respect to the anomaly (zero below zero).
    pub fn derivative(&self, t_at: f64) -> f64 {
        if t_at <= 0.0 {
            0.0
        } else {
            self.a * self.nu * t_at.powf(self.nu - 1.0)
        }
    }
}

impl ExcessMortality for ExcessMortalityFn {
    fn delta(&self, _age: u32, t_at: f64) -> Result<f64> {
        self.eval(t_at)
    }
}

/// No climate effect; used for base runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoExcessMortality;

impl ExcessMortality for NoExcessMortality {
    fn delta(&self, _age: u32, _t_at: f64) -> Result<f64> {
        Ok(0.0)
    }
}

/// Gompertz hazard `lambda(t) = exp((base_age + t - M) / b) / b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GompertzLaw {
    pub modal_age: f64,
    pub dispersion: f64,
    pub base_age: f64,
}

impl Default for GompertzLaw {
    fn default() -> Self {
        Self {
            modal_age: 88.23,
            dispersion: 9.38,
            base_age: 25.0,
        }
    }
}

impl GompertzLaw {
    /// Hazard `t` years after `base_age`.
    pub fn hazard(&self, t: f64) -> f64 {
        ((self.base_age + t - self.modal_age) / self.dispersion).exp() / self.dispersion
    }

    pub fn hazard_at_age(&self, age: f64) -> f64 {
        self.hazard(age - self.base_age)
    }

    /// Integrated hazard over `[t0, t1]` (years after `base_age`).
    pub fn cumulative_hazard(&self, t0: f64, t1: f64) -> f64 {
        let b = self.dispersion;
        let shift = self.base_age - self.modal_age;
        ((shift + t1) / b).exp() - ((shift + t0) / b).exp()
    }

    /// One-year death probability at integer age `x`.
    pub fn q(&self, age: u32) -> f64 {
        let x = age as f64 - self.base_age;
        -(-self.cumulative_hazard(x, x + 1.0)).exp_m1()
    }
}

/// Where a mortality table came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableSource {
    Gompertz,
    User(String),
}

/// Annual death probabilities by integer age and calendar year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MortalityTable {
    pub min_age: u32,
    pub max_age: u32,
    pub first_year: i32,
    pub last_year: i32,
    /// Row-major: `q[(age - min_age) * n_years + (year - first_year)]`.
    q: Vec<f64>,
    pub source: TableSource,
}

impl MortalityTable {
    pub fn new(
        min_age: u32,
        max_age: u32,
        first_year: i32,
        last_year: i32,
        q: Vec<f64>,
        source: TableSource,
    ) -> Result<Self> {
        if max_age < min_age || last_year < first_year {
            return Err(Error::Range("empty mortality table".into()));
        }
        let n = ((max_age - min_age + 1) as usize) * ((last_year - first_year + 1) as usize);
        if q.len() != n {
            return Err(Error::Parse(format!("mortality table needs {n} entries, got {}", q.len())));
        }
        if let Some(bad) = q.iter().find(|v| !(**v >= 0.0 && **v < 1.0)) {
            return Err(Error::domain(format!("death probability {bad} outside [0, 1)")));
        }
        Ok(Self {
            min_age,
            max_age,
            first_year,
            last_year,
            q,
            source,
        })
    }

    fn n_years(&self) -> usize {
        (self.last_year - self.first_year + 1) as usize
    }

    pub fn q(&self, age: u32, year: i32) -> Result<f64> {
        if age < self.min_age || age > self.max_age || year < self.first_year || year > self.last_year {
            return Err(Error::Range(format!(
                "table covers ages {}..={} and years {}..={}, asked for age {age} in {year}",
                self.min_age, self.max_age, self.first_year, self.last_year
            )));
        }
        let row = (age - self.min_age) as usize;
        let col = (year - self.first_year) as usize;
        Ok(self.q[row * self.n_years() + col])
    }

    /// Reads `age,<year>,<year>,...` delimited text.
    pub fn from_csv_reader<R: std::io::Read>(reader: R, label: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.get(0).map(str::to_ascii_lowercase).as_deref() != Some("age") {
            return Err(Error::Parse("mortality table must start with an `age` column".into()));
        }
        let years: Vec<i32> = headers
            .iter()
            .skip(1)
            .map(|h| h.parse().map_err(|_| Error::Parse(format!("bad year column {h:?}"))))
            .collect::<Result<_>>()?;
        if years.is_empty() || years.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::Parse("year columns must be consecutive".into()));
        }
        let mut rows: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let age: u32 = record[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad age {:?}", &record[0])))?;
            let values = record
                .iter()
                .skip(1)
                .map(|v| v.parse::<f64>().map_err(|_| Error::Parse(format!("bad probability {v:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if values.len() != years.len() {
                return Err(Error::Parse(format!("row for age {age} has {} values", values.len())));
            }
            rows.insert(age, values);
        }
        let (&min_age, _) = rows.first_key_value().ok_or_else(|| Error::Parse("no rows".into()))?;
        let (&max_age, _) = rows.last_key_value().unwrap();
        if rows.len() != (max_age - min_age + 1) as usize {
            return Err(Error::Parse("ages must be consecutive".into()));
        }
        let q = rows.into_values().flatten().collect();
        Self::new(min_age, max_age, years[0], *years.last().unwrap(), q, TableSource::User(label.into()))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["age".to_string()];
        header.extend((self.first_year..=self.last_year).map(|y| y.to_string()));
        w.write_record(&header).map_err(|e| Error::Parse(e.to_string()))?;
        for age in self.min_age..=self.max_age {
            let mut row = vec![age.to_string()];
            for year in self.first_year..=self.last_year {
                row.push(format!("{:e}", self.q(age, year)?));
            }
            w.write_record(&row).map_err(|e| Error::Parse(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Period table from a Gompertz law; `q` is the same in every year.
pub fn gompertz_to_table(law: &GompertzLaw, min_age: u32, max_age: u32, first_year: i32, last_year: i32) -> Result<MortalityTable> {
    let n_years = (last_year - first_year + 1).max(0) as usize;
    let q = (min_age..=max_age)
        .flat_map(|age| std::iter::repeat_n(law.q(age), n_years))
        .collect();
    MortalityTable::new(min_age, max_age, first_year, last_year, q, TableSource::Gompertz)
}

/// Annual temperature path interpolated from grid values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualPath {
    pub first_year: i32,
    pub values: Vec<f64>,
    /// Years outside the grid but within this many years of it clamp to the
    /// nearest grid value.
    pub clamp_window: i32,
}

impl AnnualPath {
    pub fn last_year(&self) -> i32 {
        self.first_year + self.values.len() as i32 - 1
    }

    pub fn at(&self, year: i32) -> Result<f64> {
        let last = self.last_year();
        if year < self.first_year - self.clamp_window || year > last + self.clamp_window {
            return Err(Error::Range(format!(
                "temperature requested for {year}, path covers {}..={last}",
                self.first_year
            )));
        }
        let idx = (year.clamp(self.first_year, last) - self.first_year) as usize;
        Ok(self.values[idx])
    }
}

/// Linear interpolation of a grid path to every calendar year between the
/// first and last grid year.
pub fn annualize_temperature(grid_years: &[i32], values: &[f64]) -> Result<AnnualPath> {
    if grid_years.len() != values.len() || grid_years.is_empty() {
        return Err(Error::Range("grid years and values must be non-empty and aligned".into()));
    }
    if grid_years.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Range("grid years must increase".into()));
    }
    let first = grid_years[0];
    let last = *grid_years.last().unwrap();
    let mut out = Vec::with_capacity((last - first + 1) as usize);
    let mut seg = 0;
    for year in first..=last {
        while seg + 1 < grid_years.len() && grid_years[seg + 1] < year {
            seg += 1;
        }
        if year == grid_years[seg] || seg + 1 == grid_years.len() {
            out.push(values[seg]);
            continue;
        }
        let (y0, y1) = (grid_years[seg], grid_years[seg + 1]);
        let w = (year - y0) as f64 / (y1 - y0) as f64;
        out.push(if year == y1 { values[seg + 1] } else { values[seg] + w * (values[seg + 1] - values[seg]) });
    }
    Ok(AnnualPath {
        first_year: first,
        values: out,
        clamp_window: 0,
    })
}

/// Same as [`annualize_temperature`], restricted to `[from, to]` with the
/// given clamp window for years beyond the grid.
pub fn annualize_between(grid_years: &[i32], values: &[f64], from: i32, to: i32, clamp_window: i32) -> Result<AnnualPath> {
    let mut full = annualize_temperature(grid_years, values)?;
    full.clamp_window = clamp_window;
    let vals = (from..=to).map(|y| full.at(y)).collect::<Result<Vec<_>>>()?;
    Ok(AnnualPath {
        first_year: from,
        values: vals,
        clamp_window,
    })
}

/// `min(q (1 + delta), 1)`.
pub fn adjusted_q(q: f64, delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::domain(format!("death probability {q} outside [0, 1)")));
    }
    Ok((q * (1.0 + delta)).min(1.0))
}

/// Climate-adjusted probability of surviving `k` years from age `x` in
/// year `tau`.
pub fn survival_probability<E: ExcessMortality + ?Sized>(
    age: u32,
    year: i32,
    k: u32,
    table: &MortalityTable,
    temperature: &AnnualPath,
    excess: &E,
) -> Result<f64> {
    let mut p = 1.0;
    for j in 0..k {
        let a = age + j;
        let y = year + j as i32;
        let q = table.q(a, y)?;
        let delta = excess.delta(a, temperature.at(y)?)?;
        p *= 1.0 - adjusted_q(q, delta)?;
    }
    Ok(p)
}

/// Least-squares cubic in `(year - origin)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicFit {
    pub origin: f64,
    /// `c0 + c1 u + c2 u^2 + c3 u^3` with `u = year - origin`.
    pub coefficients: [f64; 4],
    pub max_abs_residual: f64,
}

impl CubicFit {
    pub fn eval(&self, u: f64) -> f64 {
        let c = &self.coefficients;
        ((c[3] * u + c[2]) * u + c[1]) * u + c[0]
    }

    pub fn zero(origin: f64) -> Self {
        Self {
            origin,
            coefficients: [0.0; 4],
            max_abs_residual: 0.0,
        }
    }
}

/// Fits a cubic to `(year, value)` points.
pub fn fit_cubic_damage(years: &[f64], values: &[f64]) -> Result<CubicFit> {
    if years.len() != values.len() || years.len() < 4 {
        return Err(Error::Numeric("cubic fit needs at least 4 aligned points".into()));
    }
    let origin = years[0];
    let span = years.iter().map(|y| (y - origin).abs()).fold(0.0, f64::max);
    if span == 0.0 {
        return Err(Error::Numeric("degenerate design matrix for cubic fit".into()));
    }
    let n = years.len();
    let design = DMatrix::from_fn(n, 4, |i, j| ((years[i] - origin) / span).powi(j as i32));
    let rhs = DVector::from_column_slice(values);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-12) {
        return Err(Error::Numeric("degenerate design matrix for cubic fit".into()));
    }
    let scaled = svd
        .solve(&rhs, smax * 1e-14)
        .map_err(|e| Error::Numeric(format!("cubic fit: {e}")))?;
    let mut coefficients = [0.0; 4];
    for (j, c) in coefficients.iter_mut().enumerate() {
        *c = scaled[j] / span.powi(j as i32);
    }
    let mut fit = CubicFit {
        origin,
        coefficients,
        max_abs_residual: 0.0,
    };
    fit.max_abs_residual = years
        .iter()
        .zip(values)
        .map(|(y, v)| (fit.eval(y - origin) - v).abs())
        .fold(0.0, f64::max);
    Ok(fit)
}
