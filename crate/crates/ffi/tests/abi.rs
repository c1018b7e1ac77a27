use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use climate_stress_ffi::*;

fn last_error() -> String {
    let p = cs_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn solve(schedule: Option<&str>) -> *mut CsRun {
    let s = schedule.map(|s| CString::new(s).unwrap());
    let mut run = ptr::null_mut();
    let status = unsafe { cs_run_original_dice(s.as_ref().map_or(ptr::null(), |s| s.as_ptr()), &mut run) };
    assert_eq!(status, CsStatus::Ok);
    assert!(!run.is_null());
    run
}

#[test]
fn optimal_run_through_the_abi() {
    let run = solve(None);
    unsafe {
        let n = cs_run_periods(run);
        assert_eq!(n, 101);
        let mut years = vec![0i32; n];
        assert_eq!(cs_run_years(run, years.as_mut_ptr(), n), CsStatus::Ok);
        assert_eq!((years[0], years[n - 1]), (2015, 2515));
        assert_eq!(cs_run_years(run, years.as_mut_ptr(), 3), CsStatus::BufferTooSmall);

        let mut year = 0;
        assert_eq!(cs_run_first_full_abatement_year(run, &mut year), CsStatus::Ok);
        assert_eq!(year, 2115);
        let (mut t, mut scc, mut m) = (0.0, 0.0, 0.0);
        assert_eq!(cs_run_temperature(run, 2100, &mut t), CsStatus::Ok);
        assert_eq!(cs_run_scc(run, 2025, &mut scc), CsStatus::Ok);
        assert_eq!(cs_run_excess_mortality(run, 2100, &mut m), CsStatus::Ok);
        assert!(t > 3.0 && t < 4.0);
        assert!((30.0..=50.0).contains(&scc));
        assert!(m > 0.0 && m < 0.05);
        assert_eq!(cs_run_temperature(run, 2017, &mut t), CsStatus::NotFound);
        assert!(last_error().contains("2017"));

        let mut h = 0.0;
        assert_eq!(cs_human_capital_relative(run, 0.032, 2100, &mut h), CsStatus::Ok);
        assert!(h < 0.0 && h > -0.05);
        cs_run_free(run);
    }
}

#[test]
fn stress_results_and_buffer_sizing() {
    let run = solve(Some("netzero@2100"));
    let mut out = [CsStressResult {
        kind: CsPortfolioKind::Annuity,
        year: 0,
        temperature: 0.0,
        rel_mean: 0.0,
        rel_q01: 0.0,
        rel_q99: 0.0,
        rel_mean_se: 0.0,
        analytic_rel_mean: 0.0,
    }; 2];
    let mut written = 0;
    unsafe {
        assert_eq!(cs_stress_default_portfolios(run, 2100, 5000, 9, out.as_mut_ptr(), 1, &mut written), CsStatus::BufferTooSmall);
        assert_eq!(written, 2);
        assert_eq!(cs_stress_default_portfolios(run, 2100, 5000, 9, out.as_mut_ptr(), 2, &mut written), CsStatus::Ok);
        cs_run_free(run);
    }
    assert_eq!(out[0].kind, CsPortfolioKind::Annuity);
    assert_eq!(out[1].kind, CsPortfolioKind::Insurance);
    assert!(out.iter().all(|r| r.year == 2100 && r.rel_mean > 0.0));
}

#[test]
fn errors_map_to_status_codes() {
    let mut run = ptr::null_mut();
    unsafe {
        let bad = CString::new("netzero@never").unwrap();
        assert_eq!(cs_run_original_dice(bad.as_ptr(), &mut run), CsStatus::Usage);
        assert!(run.is_null());
        assert_eq!(cs_run_original_dice(ptr::null(), ptr::null_mut()), CsStatus::NullArgument);
        let toml = CString::new("schedule = \"optimal\"\nunknown = 3").unwrap();
        assert_eq!(cs_run_from_toml(toml.as_ptr(), &mut run), CsStatus::Usage);
        let missing = CString::new("/nonexistent/run").unwrap();
        assert_eq!(cs_run_load(missing.as_ptr(), &mut run), CsStatus::Ingest);
        let mut t = 0.0;
        assert_eq!(cs_run_temperature(ptr::null(), 2100, &mut t), CsStatus::NullArgument);
        assert_eq!(cs_run_periods(ptr::null()), 0);
        cs_run_free(ptr::null_mut());
    }
}

#[test]
fn artifacts_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("run").to_str().unwrap()).unwrap();
    let toml = CString::new("schedule = \"zeroind@2050\"\nscc = false").unwrap();
    let mut run = ptr::null_mut();
    let mut loaded = ptr::null_mut();
    unsafe {
        assert_eq!(cs_run_from_toml(toml.as_ptr(), &mut run), CsStatus::Ok);
        assert_eq!(cs_run_write_artifacts(run, path.as_ptr()), CsStatus::Ok);
        assert_eq!(cs_run_load(path.as_ptr(), &mut loaded), CsStatus::Ok);
        let (mut a, mut b) = (0.0, 0.0);
        cs_run_temperature(run, 2100, &mut a);
        cs_run_temperature(loaded, 2100, &mut b);
        assert_eq!(a.to_bits(), b.to_bits());
        let mut scc = 0.0;
        assert_eq!(cs_run_scc(run, 2025, &mut scc), CsStatus::NotFound);
        cs_run_free(run);
        cs_run_free(loaded);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(cs_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// `cargo test` only builds the rlib, so the static library is built on
/// demand in a separate target directory when a prior `cargo build` has not
/// left one next to the test binary.
fn static_library(profile_dir: &Path) -> PathBuf {
    let existing = profile_dir.join("libclimate_stress_ffi.a");
    if existing.is_file() {
        return existing;
    }
    let profile = profile_dir.file_name().unwrap().to_str().unwrap().to_owned();
    let target_dir = profile_dir.parent().unwrap().join("ffi-smoke");
    let mut cmd = std::process::Command::new(env!("CARGO"));
    cmd.args(["build", "--quiet", "-p", "climate-stress-ffi", "--target-dir"])
        .arg(&target_dir);
    if profile == "release" {
        cmd.arg("--release");
    }
    let status = cmd.status().expect("cargo");
    assert!(status.success(), "building the static library failed");
    let lib = target_dir.join(&profile).join("libclimate_stress_ffi.a");
    assert!(lib.is_file(), "static library missing at {}", lib.display());
    lib
}

/// Compiles the C smoke program against the generated header and the
/// static library, then runs it.
#[test]
fn c_program_links_against_the_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = static_library(profile_dir);
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = std::process::Command::new(cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("2115 2 "), "{text}");
}
