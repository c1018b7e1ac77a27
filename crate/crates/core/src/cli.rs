//! Command-line front end.
//!
//! Exit codes: 0 ok, 2 ingest, 3 calibration, 4 solver, 5 numeric, 64 usage.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::actuarial::{HumanCapitalOptions, IncomeProfile, PortfolioSet};
use crate::calibration::{calibrate, dice_reference_capital, load_ssp_export, CalibrationOptions, GdpVariable, SspStore};
use crate::engine::{
    self, human_capital_run, load_run, run_matrix, stress_csv, stress_run, write_artifacts, MatrixConfig, RunConfig,
    RunOutput,
};
use crate::error::{Error, Result};
use crate::mortality::MortalityTable;
use crate::params::ModelParams;
use crate::scenario::ScheduleKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "climate-stress", version, about = "DICE-2016 SSP scenarios and excess-mortality stress tests")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Parameter file (defaults to the built-in DICE-2016 set).
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = default_jobs())]
    pub jobs: usize,
    /// Output mode.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse SSP export files into a normalised store.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value = "PPP")]
        gdp_variable: String,
    },
    /// Calibrate exogenous paths for one (SSP, IAM) pair.
    Calibrate {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        ssp: String,
        /// IAM; defaults to the SSP's marker model.
        #[arg(long)]
        iam: Option<String>,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
    },
    /// Run one scenario from a config file or `original-dice`.
    Run(RunArgs),
    /// Run a scenario matrix.
    Matrix {
        /// Matrix config file.
        config: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
        /// Comma-separated IAMs, or `marker`.
        #[arg(long)]
        iams: Option<String>,
        /// Comma-separated SSPs.
        #[arg(long)]
        ssps: Option<String>,
        /// Comma-separated schedules.
        #[arg(long)]
        schedules: Option<String>,
        #[arg(long)]
        original_dice: bool,
        #[arg(long)]
        no_scc: bool,
    },
    /// Stress-test portfolios against a run artifact.
    Stress {
        /// Run artifact directory.
        #[arg(long)]
        run: PathBuf,
        /// Portfolio config (defaults to the built-in books A and B).
        #[arg(long)]
        portfolio: Option<PathBuf>,
        /// Baseline mortality table (defaults to the Gompertz law).
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 2100)]
        year: i32,
        #[arg(long, default_value_t = 100_000)]
        n_sims: usize,
    },
    /// Human capital with and without climate-adjusted mortality.
    HumanCapital {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 0.032)]
        rate: f64,
        #[arg(long, default_value_t = 2100)]
        end_year: i32,
        /// TOML file with `knots = [[years, income], ...]`.
        #[arg(long)]
        income: Option<PathBuf>,
    },
    /// Summarise every run artifact below a directory.
    Report { dir: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Config file, or `original-dice`.
    pub scenario: String,
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub ssp: Option<String>,
    #[arg(long)]
    pub iam: Option<String>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long)]
    pub calibrated: Option<PathBuf>,
    #[arg(long)]
    pub no_scc: bool,
    #[arg(long)]
    pub population_extension: bool,
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match cli.global.format {
                OutputFormat::Json => {
                    println!("{}", json!({"status": "error", "exit_code": e.exit_code(), "error": e.to_string()}))
                }
                OutputFormat::Text => eprintln!("error: {e}"),
            }
            if let Error::Calibration { profile, .. } = e.root() {
                eprintln!("residual profile: {profile:?}");
            }
            e.exit_code()
        }
    }
}

fn emit<T: Serialize>(g: &GlobalArgs, value: &T, text: impl FnOnce() -> String) {
    match g.format {
        OutputFormat::Json => println!("{}", serde_json::to_string(value).unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}"))),
        OutputFormat::Text => print!("{}", text()),
    }
}

fn params_of(g: &GlobalArgs) -> Result<ModelParams> {
    match &g.params {
        Some(p) => ModelParams::load(p),
        None => Ok(ModelParams::dice2016()),
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Ingest { files, gdp_variable } => cmd_ingest(g, files, gdp_variable.parse()?),
        Command::Calibrate {
            store,
            ssp,
            iam,
            tol,
            max_iter,
        } => cmd_calibrate(g, store, ssp, iam.as_deref(), *tol, *max_iter),
        Command::Run(args) => cmd_run(g, args),
        Command::Matrix {
            config,
            store,
            iams,
            ssps,
            schedules,
            original_dice,
            no_scc,
        } => {
            let mut m = match config {
                Some(p) => MatrixConfig::load(p)?,
                None => MatrixConfig::from_toml_str("")?,
            };
            let split = |s: &str| s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect::<Vec<_>>();
            if let Some(s) = store {
                m.store = Some(s.clone());
            }
            if let Some(s) = iams {
                m.iams = split(s);
            }
            if let Some(s) = ssps {
                m.ssps = split(s);
            }
            if let Some(s) = schedules {
                m.schedules = split(s).iter().map(|x| x.parse()).collect::<Result<_>>()?;
            }
            m.original_dice |= *original_dice;
            m.scc &= !*no_scc;
            if g.params.is_some() {
                m.params = g.params.clone();
            }
            if let Some(seed) = g.seed {
                m.seed = seed;
            }
            cmd_matrix(g, &m)
        }
        Command::Stress {
            run,
            portfolio,
            table,
            year,
            n_sims,
        } => cmd_stress(g, run, portfolio.as_deref(), table.as_deref(), *year, *n_sims),
        Command::HumanCapital {
            run,
            rate,
            end_year,
            income,
        } => cmd_human_capital(g, run, *rate, *end_year, income.as_deref()),
        Command::Report { dir } => cmd_report(g, dir),
    }
}

fn cmd_ingest(g: &GlobalArgs, files: &[PathBuf], gdp: GdpVariable) -> Result<()> {
    let mut all = Vec::new();
    let mut errors = Vec::new();
    for f in files {
        match load_ssp_export(f, gdp) {
            Ok(items) => all.extend(items),
            Err(e) => {
                eprintln!("{}: {e}", f.display());
                errors.push(json!({"file": f.display().to_string(), "error": e.to_string()}));
            }
        }
    }
    if all.is_empty() {
        return Err(Error::Ingest(format!("no scenarios ingested from {} file(s)", files.len())));
    }
    let store = SspStore::from_scenarios(all);
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("ssp_store.json"));
    store.save(&out)?;
    let pairs: Vec<_> = store
        .scenarios
        .iter()
        .map(|d| json!({"ssp": d.ssp, "model": d.model, "marker": d.marker}))
        .collect();
    emit(g, &json!({"status": "ok", "store": out, "scenarios": pairs, "errors": errors}), || {
        let mut s = format!("ingested {} scenario(s) into {}\n", store.scenarios.len(), out.display());
        for d in &store.scenarios {
            s += &format!("  {} {}{}\n", d.ssp, d.model, if d.marker { " (marker)" } else { "" });
        }
        s
    });
    Ok(())
}

fn cmd_calibrate(g: &GlobalArgs, store: &Path, ssp: &str, iam: Option<&str>, tol: f64, max_iter: usize) -> Result<()> {
    let params = params_of(g)?;
    let store = SspStore::load(store)?;
    let data = match iam {
        Some(m) => store.get(ssp, m)?,
        None => store.marker(ssp)?,
    };
    let capital = dice_reference_capital(&params)?;
    let options = CalibrationOptions {
        tol,
        max_iter,
        ..Default::default()
    };
    let c = calibrate(data, &params, &capital, &options)?;
    let out = g
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("calibrated_{}_{}.json", c.ssp.to_ascii_lowercase(), c.model.replace('/', "-"))));
    c.save(&out)?;
    emit(
        g,
        &json!({"status": "ok", "artifact": out, "ssp": c.ssp, "model": c.model, "iterations": c.iterations, "residual": c.residual}),
        || {
            format!(
                "calibrated {}/{} in {} iteration(s), residual {:.3e}; wrote {}\n",
                c.ssp,
                c.model,
                c.iterations,
                c.residual,
                out.display()
            )
        },
    );
    Ok(())
}

/// Layers CLI flags over the scenario config.
pub fn build_run_config(g: &GlobalArgs, args: &RunArgs) -> Result<RunConfig> {
    let mut c = if args.scenario.eq_ignore_ascii_case("original-dice") {
        RunConfig::original_dice(ScheduleKind::FullyOptimal)
    } else {
        let path = Path::new(&args.scenario);
        if !path.is_file() {
            return Err(Error::Config(format!("scenario config {} not found", path.display())));
        }
        RunConfig::load(path)?
    };
    if let Some(s) = &args.schedule {
        c.schedule = s.parse()?;
    }
    if let Some(s) = &args.ssp {
        c.ssp = Some(s.to_ascii_uppercase());
    }
    if let Some(s) = &args.iam {
        c.iam = Some(s.clone());
    }
    if let Some(s) = &args.store {
        c.store = Some(s.clone());
    }
    if let Some(s) = &args.calibrated {
        c.calibrated = Some(s.clone());
    }
    if args.no_scc {
        c.scc = false;
    }
    if args.population_extension {
        c.population_extension = true;
    }
    if g.params.is_some() {
        c.params = g.params.clone();
    }
    if let Some(seed) = g.seed {
        c.seed = seed;
    }
    c.validate()?;
    Ok(c)
}

fn run_summary(out: &RunOutput) -> serde_json::Value {
    json!({
        "cell": out.metadata.cell,
        "welfare": out.run.welfare(),
        "t_at_2100": out.temperature_at(2100),
        "scc_2025": out.scc_at(2025),
        "scc_2100": out.scc_at(2100),
        "excess_mortality_2100": out.excess_mortality_at(2100),
        "first_full_abatement_year": out.first_full_abatement_year(),
        "iterations": out.run.diagnostics.iterations,
        "projected_gradient_norm": out.run.diagnostics.projected_gradient_norm,
    })
}

fn cmd_run(g: &GlobalArgs, args: &RunArgs) -> Result<()> {
    let config = build_run_config(g, args)?;
    let out = engine::run_scenario(&config)?;
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("runs")).join(config.cell_name());
    write_artifacts(&out, &dir)?;
    let reference_check = (config.ssp.is_none() && config.schedule == ScheduleKind::FullyOptimal && g.params.is_none())
        .then(|| out.first_full_abatement_year());
    if let Some(year) = reference_check {
        if year != Some(2115) {
            return Err(Error::Numeric(format!(
                "original DICE optimum first reaches full abatement in {year:?}, expected 2115"
            )));
        }
    }
    let mut summary = run_summary(&out);
    summary["status"] = json!("ok");
    summary["artifact"] = json!(dir);
    emit(g, &summary, || {
        let mut s = format!("{}: wrote {}\n", out.metadata.cell, dir.display());
        if let Some(t) = out.temperature_at(2100) {
            s += &format!("  T_AT(2100)          {t:.3} C\n");
        }
        if let Some(v) = out.scc_at(2025) {
            s += &format!("  SCC(2025)           {v:.2} USD/tCO2\n");
        }
        if let Some(v) = out.excess_mortality_at(2100) {
            s += &format!("  excess mortality    {:.3}% in 2100\n", 100.0 * v);
        }
        if reference_check.is_some() {
            s += "  reference check     mu first reaches 1 in 2115: ok\n";
        }
        s
    });
    Ok(())
}

fn cmd_matrix(g: &GlobalArgs, m: &MatrixConfig) -> Result<()> {
    let configs = m.expand()?;
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("matrix"));
    let summary = run_matrix(&configs, g.jobs, Some(&out))?;
    emit(g, &json!({"status": "ok", "out": out, "cells": summary.cells}), || {
        let mut s = format!(
            "{} cell(s), {} failed; tables in {}\n\n",
            summary.cells.len(),
            summary.failures(),
            out.display()
        );
        s += &engine::marker_table_csv(&summary);
        for c in summary.cells.iter().filter(|c| !c.ok) {
            s += &format!("failed {}: {}\n", c.cell, c.error.as_deref().unwrap_or(""));
        }
        s
    });
    Ok(())
}

fn cmd_stress(g: &GlobalArgs, run: &Path, portfolio: Option<&Path>, table: Option<&Path>, year: i32, n_sims: usize) -> Result<()> {
    let out = load_run(run)?;
    let portfolios = match portfolio {
        Some(p) => PortfolioSet::load(p)?,
        None => PortfolioSet::defaults(),
    };
    let table = match table {
        Some(t) => MortalityTable::load_csv(t)?,
        None => engine::default_table()?,
    };
    let seed = g.seed.unwrap_or(out.metadata.config.seed);
    let results = stress_run(&out, &portfolios, &table, year, n_sims, seed)?;
    let rows: Vec<(String, _)> = results.into_iter().map(|r| (out.metadata.cell.clone(), r)).collect();
    let dir = g.out.clone().unwrap_or_else(|| run.to_path_buf());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let csv_path = dir.join("stress.csv");
    std::fs::write(&csv_path, stress_csv(&rows)).map_err(|e| Error::io(&csv_path, e))?;
    let results: Vec<_> = rows.iter().map(|(_, r)| r.clone()).collect();
    let json_path = dir.join("stress.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&results).map_err(|e| Error::Parse(e.to_string()))?)
        .map_err(|e| Error::io(&json_path, e))?;
    emit(g, &json!({"status": "ok", "results": results}), || stress_csv(&rows));
    Ok(())
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct IncomeFile {
    knots: Vec<(f64, f64)>,
}

fn cmd_human_capital(g: &GlobalArgs, run: &Path, rate: f64, end_year: i32, income: Option<&Path>) -> Result<()> {
    let out = load_run(run)?;
    let income = match income {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let f: IncomeFile = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            IncomeProfile { knots: f.knots }
        }
        None => IncomeProfile::default_profile(),
    };
    let options = HumanCapitalOptions {
        rate,
        ..Default::default()
    };
    let r = human_capital_run(&out, &income, &options, end_year)?;
    let dir = g.out.clone().unwrap_or_else(|| run.to_path_buf());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join("human_capital.json");
    std::fs::write(&path, serde_json::to_string_pretty(&r).map_err(|e| Error::Parse(e.to_string()))?)
        .map_err(|e| Error::io(&path, e))?;
    emit(g, &json!({"status": "ok", "cell": out.metadata.cell, "human_capital": r}), || {
        format!(
            "{}: H base {:.0} USD, stressed {:.0} USD, deviation {:.4}%\n",
            out.metadata.cell, r.base, r.stressed, r.relative
        )
    });
    Ok(())
}

fn cmd_report(g: &GlobalArgs, dir: &Path) -> Result<()> {
    let mut runs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("run.json").is_file())
        .collect();
    runs.sort();
    let mut csv = String::from("cell,t_at_2100,scc_2025,scc_2100,excess_mortality_2100_pct,stress_mean_pct,human_capital_pct\n");
    let mut rows = Vec::new();
    for r in &runs {
        let out = load_run(r)?;
        let stress: Option<Vec<crate::actuarial::StressResult>> = std::fs::read_to_string(r.join("stress.json"))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok());
        let hc: Option<crate::actuarial::HumanCapitalResult> = std::fs::read_to_string(r.join("human_capital.json"))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok());
        let f = |v: Option<f64>, d: usize| v.map_or(String::new(), |x| format!("{x:.d$}"));
        let stress_means = stress
            .as_ref()
            .map(|s| s.iter().map(|x| format!("{}={:.2}", x.portfolio, x.rel_mean)).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        csv += &format!(
            "{},{},{},{},{},{},{}\n",
            out.metadata.cell,
            f(out.temperature_at(2100), 3),
            f(out.scc_at(2025), 2),
            f(out.scc_at(2100), 2),
            f(out.excess_mortality_at(2100).map(|v| 100.0 * v), 3),
            stress_means,
            f(hc.map(|h| h.relative), 4),
        );
        rows.push(json!({"summary": run_summary(&out), "stress": stress, "human_capital": hc}));
    }
    let target = g.out.clone().unwrap_or_else(|| dir.join("report.csv"));
    std::fs::write(&target, &csv).map_err(|e| Error::io(&target, e))?;
    emit(g, &json!({"status": "ok", "report": target, "runs": rows}), || csv.clone());
    Ok(())
}
