//! C ABI over the scenario engine.
//!
//! Runs are exposed through the opaque `CsRun` handle. Every fallible call
//! returns a `CsStatus`; on failure the message is available from
//! `cs_last_error_message` on the same thread until the next failing call.
//! Strings passed in must be NUL-terminated UTF-8. Handles are not
//! thread-safe to free concurrently but may be read from several threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use climate_stress::actuarial::{HumanCapitalOptions, IncomeProfile, PortfolioKind, PortfolioSet};
use climate_stress::engine::{self, RunConfig, RunOutput};
use climate_stress::error::Error;
use climate_stress::scenario::ScheduleKind;

/// Result of every fallible call. Positive values match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    Ingest = 2,
    Calibration = 3,
    Solver = 4,
    Numeric = 5,
    Usage = 64,
    /// A required pointer argument was null.
    NullArgument = -1,
    /// The requested year or index is not on the run's grid.
    NotFound = -2,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = -3,
    /// A Rust panic was caught at the boundary.
    Internal = -99,
}

/// Opaque solved run.
pub struct CsRun {
    inner: RunOutput,
}

/// Portfolio kind in `CsStressResult`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsPortfolioKind {
    Annuity = 0,
    Insurance = 1,
}

/// One portfolio's stress-test outcome. Deviations are in percent.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsStressResult {
    pub kind: CsPortfolioKind,
    pub year: i32,
    pub temperature: f64,
    pub rel_mean: f64,
    pub rel_q01: f64,
    pub rel_q99: f64,
    pub rel_mean_se: f64,
    pub analytic_rel_mean: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CsStatus {
    match e.exit_code() {
        2 => CsStatus::Ingest,
        3 => CsStatus::Calibration,
        4 => CsStatus::Solver,
        5 => CsStatus::Numeric,
        _ => CsStatus::Usage,
    }
}

/// Runs `f`, mapping errors and panics onto status codes.
fn guard(f: impl FnOnce() -> Result<(), CsStatus>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            CsStatus::Internal
        }
    }
}

fn fail(e: Error) -> CsStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> CsStatus {
    set_error(format!("{what} is null"));
    CsStatus::NullArgument
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, CsStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        CsStatus::Usage
    })
}

unsafe fn run_ref<'a>(run: *const CsRun) -> Result<&'a RunOutput, CsStatus> {
    run.as_ref().map(|r| &r.inner).ok_or_else(|| null("run"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), CsStatus> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn finish(config: &RunConfig, out: *mut *mut CsRun) -> Result<(), CsStatus> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    let run = engine::run_scenario(config).map_err(fail)?;
    unsafe { out.write(Box::into_raw(Box::new(CsRun { inner: run }))) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Solves the model on the DICE-2016 exogenous paths. `schedule` is
/// `"optimal"`, `"netzero@YEAR"` or `"zeroind@YEAR"`; null means optimal.
///
/// # Safety
/// `schedule` must be null or a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_run_original_dice(schedule: *const c_char, out: *mut *mut CsRun) -> CsStatus {
    guard(|| {
        let kind = if schedule.is_null() {
            ScheduleKind::FullyOptimal
        } else {
            str_arg(schedule, "schedule")?.parse().map_err(fail)?
        };
        finish(&RunConfig::original_dice(kind), out)
    })
}

/// Solves the scenario described by a TOML run configuration. Relative
/// paths inside it resolve against the process working directory.
///
/// # Safety
/// `config_toml` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_run_from_toml(config_toml: *const c_char, out: *mut *mut CsRun) -> CsStatus {
    guard(|| {
        let config = RunConfig::from_toml_str(str_arg(config_toml, "config")?).map_err(fail)?;
        config.validate().map_err(fail)?;
        finish(&config, out)
    })
}

/// Loads a run previously written with `cs_run_write_artifacts` or the CLI.
///
/// # Safety
/// `dir` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_run_load(dir: *const c_char, out: *mut *mut CsRun) -> CsStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        if out.is_null() {
            return Err(null("output handle"));
        }
        let run = engine::load_run(Path::new(dir)).map_err(fail)?;
        out.write(Box::into_raw(Box::new(CsRun { inner: run })));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `run` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cs_run_free(run: *mut CsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Writes trajectories.csv, run.json, diagnostics.json and metadata.json.
///
/// # Safety
/// `run` must be a live handle and `dir` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn cs_run_write_artifacts(run: *const CsRun, dir: *const c_char) -> CsStatus {
    guard(|| {
        let r = run_ref(run)?;
        engine::write_artifacts(r, Path::new(str_arg(dir, "dir")?)).map_err(fail)
    })
}

/// Number of grid periods in the run, 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_run_periods(run: *const CsRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.run.trajectory.years.len())
}

/// Copies the grid years into `years` (capacity `len`).
///
/// # Safety
/// `years` must hold `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn cs_run_years(run: *const CsRun, years: *mut i32, len: usize) -> CsStatus {
    guard(|| {
        let src = &run_ref(run)?.run.trajectory.years;
        if years.is_null() {
            return Err(null("years"));
        }
        if len < src.len() {
            set_error(format!("buffer holds {len} years, run has {}", src.len()));
            return Err(CsStatus::BufferTooSmall);
        }
        std::ptr::copy_nonoverlapping(src.as_ptr(), years, src.len());
        Ok(())
    })
}

fn lookup(v: Option<f64>, year: i32, what: &str) -> Result<f64, CsStatus> {
    v.ok_or_else(|| {
        set_error(format!("no {what} for {year}"));
        CsStatus::NotFound
    })
}

/// Atmospheric temperature anomaly at a grid year, degrees C.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_run_temperature(run: *const CsRun, year: i32, out: *mut f64) -> CsStatus {
    guard(|| write_out(out, lookup(run_ref(run)?.temperature_at(year), year, "temperature")?))
}

/// Social cost of carbon at a grid year, USD per tCO2.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_run_scc(run: *const CsRun, year: i32, out: *mut f64) -> CsStatus {
    guard(|| write_out(out, lookup(run_ref(run)?.scc_at(year), year, "SCC")?))
}

/// Climate-induced excess mortality at a grid year, as a fraction.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_run_excess_mortality(run: *const CsRun, year: i32, out: *mut f64) -> CsStatus {
    guard(|| write_out(out, lookup(run_ref(run)?.excess_mortality_at(year), year, "excess mortality")?))
}

/// First grid year in which the emission control reaches 1.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_run_first_full_abatement_year(run: *const CsRun, out: *mut i32) -> CsStatus {
    guard(|| {
        let r = run_ref(run)?;
        let y = r.first_full_abatement_year().ok_or_else(|| {
            set_error("control never reaches 1".into());
            CsStatus::NotFound
        })?;
        write_out(out, y)
    })
}

/// Stress-tests the default portfolios against the run. Writes up to
/// `capacity` results and the number produced into `written`.
///
/// # Safety
/// `results` must hold `capacity` writable elements; `written` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_stress_default_portfolios(
    run: *const CsRun,
    year: i32,
    n_sims: usize,
    seed: u64,
    results: *mut CsStressResult,
    capacity: usize,
    written: *mut usize,
) -> CsStatus {
    guard(|| {
        let r = run_ref(run)?;
        if results.is_null() || written.is_null() {
            return Err(null("results"));
        }
        let table = engine::default_table().map_err(fail)?;
        let stress = engine::stress_run(r, &PortfolioSet::defaults(), &table, year, n_sims, seed).map_err(fail)?;
        written.write(stress.len());
        if capacity < stress.len() {
            set_error(format!("buffer holds {capacity} results, {} produced", stress.len()));
            return Err(CsStatus::BufferTooSmall);
        }
        for (i, s) in stress.iter().enumerate() {
            results.add(i).write(CsStressResult {
                kind: match s.kind {
                    PortfolioKind::Annuity => CsPortfolioKind::Annuity,
                    PortfolioKind::Insurance => CsPortfolioKind::Insurance,
                },
                year: s.year,
                temperature: s.temperature,
                rel_mean: s.rel_mean,
                rel_q01: s.rel_q01,
                rel_q99: s.rel_q99,
                rel_mean_se: s.rel_mean_se,
                analytic_rel_mean: s.analytic_rel_mean,
            });
        }
        Ok(())
    })
}

/// Relative change of human capital, in percent, for the default income
/// profile at discount `rate` with mortality stressed through `end_year`.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_human_capital_relative(run: *const CsRun, rate: f64, end_year: i32, out: *mut f64) -> CsStatus {
    guard(|| {
        let r = run_ref(run)?;
        let options = HumanCapitalOptions {
            rate,
            ..Default::default()
        };
        let h = engine::human_capital_run(r, &IncomeProfile::default_profile(), &options, end_year).map_err(fail)?;
        write_out(out, h.relative)
    })
}
