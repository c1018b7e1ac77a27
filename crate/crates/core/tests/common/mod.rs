//! Synthetic SSP exports in the IIASA CSV layout. The numbers are smooth
//! made-up paths for exercising the pipeline, not SSP data.

#![allow(dead_code)]

use std::fmt::Write;
use std::path::{Path, PathBuf};

pub const MODELS: [&str; 6] = ["IMAGE", "MESSAGE-GLOBIOM", "AIM/CGE", "GCAM4", "REMIND-MAGPIE", "WITCH-GLOBIOM"];

fn years() -> Vec<i32> {
    (2005..=2100).step_by(5).collect()
}

/// One (model, SSP) block. `ssp` is 1..=5; `skip` omits a variable.
fn block(out: &mut String, model: &str, ssp: u8, model_index: usize, skip: Option<&str>) {
    let g = 0.022 + 0.002 * f64::from(ssp) + 0.0005 * model_index as f64;
    let scenario = format!("SSP{ssp}-Baseline");
    let rows: [(&str, &str, Box<dyn Fn(f64) -> f64>); 4] = [
        ("Population", "million", Box::new(move |dt| 7400.0 + 3500.0 * (1.0 - (-dt / (40.0 + 4.0 * f64::from(ssp))).exp()))),
        ("GDP|PPP", "billion US$2005/yr", Box::new(move |dt| 92_500.0 * (g * dt - 0.00008 * dt * dt).exp())),
        (
            "Emissions|CO2|Fossil Fuels and Industry",
            "Mt CO2/yr",
            Box::new(move |dt| 35_800.0 * (1.0 + 0.004 * f64::from(ssp) * dt - 0.00004 * dt * dt)),
        ),
        ("Emissions|CO2|Land Use", "Mt CO2/yr", Box::new(move |dt| 2600.0 * (-0.02 * dt).exp())),
    ];
    for (var, unit, f) in rows {
        if skip == Some(var) {
            continue;
        }
        let values: Vec<String> = years().iter().map(|y| format!("{:.3}", f(f64::from(y - 2015)))).collect();
        let _ = writeln!(out, "{model},{scenario},World,{var},{unit},{}", values.join(","));
    }
}

/// Export covering `models` x SSP1..SSP5. A `(model, variable)` pair in
/// `skip` is left out.
pub fn export(models: &[&str], skip: Option<(&str, &str)>) -> String {
    let header: Vec<String> = years().iter().map(|y| y.to_string()).collect();
    let mut s = format!("Model,Scenario,Region,Variable,Unit,{}\n", header.join(","));
    for (i, m) in models.iter().enumerate() {
        for ssp in 1..=5 {
            block(&mut s, m, ssp, i, skip.filter(|(sm, _)| sm == m).map(|(_, v)| v));
        }
    }
    // Rows the parser must ignore.
    s += "IMAGE,SSP1-26,World,Population,million,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1\n";
    s += "IMAGE,SSP1-Baseline,R5.2ASIA,Population,million,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1\n";
    s
}

pub fn write_export(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}
