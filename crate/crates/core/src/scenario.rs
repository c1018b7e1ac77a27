//! Emission-control schedules.
//!
//! Net-zero schedules ramp the total-emission control `mu_tilde`, which is
//! mapped onto the industrial rate through the land-use share of emissions.
//! Zero-industrial schedules ramp `mu` directly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScheduleKind {
    NetZero(i32),
    ZeroIndustrial(i32),
    FullyOptimal,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::NetZero(y) => write!(f, "netzero@{y}"),
            ScheduleKind::ZeroIndustrial(y) => write!(f, "zeroind@{y}"),
            ScheduleKind::FullyOptimal => write!(f, "optimal"),
        }
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    /// Accepts `netzero@2050`, `zeroind@2100` (or `zero-industrial@...`)
    /// and `optimal`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "optimal" || s == "fully-optimal" {
            return Ok(ScheduleKind::FullyOptimal);
        }
        let (kind, year) = s
            .split_once('@')
            .ok_or_else(|| Error::Config(format!("schedule {s:?} must look like netzero@2050")))?;
        let year: i32 = year
            .parse()
            .map_err(|_| Error::Config(format!("bad target year in schedule {s:?}")))?;
        match kind {
            "netzero" | "net-zero" => Ok(ScheduleKind::NetZero(year)),
            "zeroind" | "zero-industrial" | "zeroindustrial" => Ok(ScheduleKind::ZeroIndustrial(year)),
            _ => Err(Error::Config(format!("unknown schedule kind {kind:?}"))),
        }
    }
}

impl TryFrom<String> for ScheduleKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ScheduleKind> for String {
    fn from(k: ScheduleKind) -> String {
        k.to_string()
    }
}

/// Control schedule on the model grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub kind: ScheduleKind,
    pub years: Vec<i32>,
    /// Control level per grid point; empty for `FullyOptimal`.
    pub values: Vec<f64>,
}

impl ControlSchedule {
    pub fn fully_optimal() -> Self {
        Self {
            kind: ScheduleKind::FullyOptimal,
            years: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_kind(kind: ScheduleKind, start_year: i32, grid: &[i32]) -> Result<Self> {
        match kind {
            ScheduleKind::FullyOptimal => Ok(Self::fully_optimal()),
            ScheduleKind::NetZero(target) | ScheduleKind::ZeroIndustrial(target) => {
                let values = ramp_values(start_year, target, grid)?;
                Ok(Self {
                    kind,
                    years: grid.to_vec(),
                    values,
                })
            }
        }
    }

    pub fn value_at(&self, year: i32) -> Option<f64> {
        self.years.iter().position(|&y| y == year).map(|i| self.values[i])
    }

    /// Applies an upper bound to every control level.
    pub fn capped(mut self, max: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v = v.min(max));
        self
    }
}

/// Linear ramp from 0 at `start_year` to 1 at `target_year`, sampled on the
/// grid; 0 before the start and 1 from the target on.
pub fn ramp_values(start_year: i32, target_year: i32, grid: &[i32]) -> Result<Vec<f64>> {
    if target_year <= start_year {
        return Err(Error::Config(format!(
            "ramp target {target_year} must come after start {start_year}"
        )));
    }
    let span = (target_year - start_year) as f64;
    Ok(grid
        .iter()
        .map(|&y| {
            if y <= start_year {
                0.0
            } else if y >= target_year {
                1.0
            } else {
                (y - start_year) as f64 / span
            }
        })
        .collect())
}

/// Convenience wrapper returning a [`ControlSchedule`] of the given kind.
pub fn ramp_schedule(kind: ScheduleKind, start_year: i32, grid: &[i32]) -> Result<ControlSchedule> {
    ControlSchedule::from_kind(kind, start_year, grid)
}

/// Industrial abatement rate implied by the total-emission control:
/// `mu = mu_tilde (1 + E_land / (sigma Y))`.
pub fn mu_from_mu_tilde(mu_tilde: f64, sigma: f64, gross_output: f64, e_land: f64) -> Result<f64> {
    let sigma_y = sigma * gross_output;
    if !(sigma_y > 0.0) {
        return Err(Error::domain(format!("degenerate economy: sigma*Y = {sigma_y}")));
    }
    Ok(mu_tilde * (1.0 + e_land / sigma_y))
}

/// Inverse of [`mu_from_mu_tilde`].
pub fn mu_tilde_from_mu(mu: f64, sigma: f64, gross_output: f64, e_land: f64) -> Result<f64> {
    let sigma_y = sigma * gross_output;
    let total = sigma_y + e_land;
    if !(sigma_y > 0.0) || total == 0.0 {
        return Err(Error::domain(format!("degenerate economy: sigma*Y = {sigma_y}, total {total}")));
    }
    Ok(mu * sigma_y / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid() -> Vec<i32> {
        (0..=20).map(|t| 2015 + 5 * t).collect()
    }

    #[test]
    fn ramp_cases() {
        let s = ramp_schedule(ScheduleKind::NetZero(2050), 2015, &grid()).unwrap();
        assert_eq!(s.value_at(2015), Some(0.0));
        assert_eq!(s.value_at(2050), Some(1.0));
        assert_eq!(s.value_at(2100), Some(1.0));
        assert_relative_eq!(s.value_at(2030).unwrap(), 15.0 / 35.0, max_relative = 1e-15);
        assert!(s.values.windows(2).all(|w| w[1] >= w[0]));
        assert!(ramp_values(2015, 2015, &grid()).is_err());
        assert!(ramp_values(2015, 2000, &grid()).is_err());
    }

    #[test]
    fn schedule_descriptor_parsing() {
        assert_eq!("netzero@2050".parse::<ScheduleKind>().unwrap(), ScheduleKind::NetZero(2050));
        assert_eq!("zeroind@2100".parse::<ScheduleKind>().unwrap(), ScheduleKind::ZeroIndustrial(2100));
        assert_eq!("optimal".parse::<ScheduleKind>().unwrap(), ScheduleKind::FullyOptimal);
        assert!("netzero".parse::<ScheduleKind>().is_err());
        assert!("carbon@2050".parse::<ScheduleKind>().is_err());
        for k in [ScheduleKind::NetZero(2050), ScheduleKind::ZeroIndustrial(2100), ScheduleKind::FullyOptimal] {
            assert_eq!(k.to_string().parse::<ScheduleKind>().unwrap(), k);
        }
    }

    #[test]
    fn mu_tilde_cases() {
        assert_eq!(mu_from_mu_tilde(0.4, 0.3, 100.0, 0.0).unwrap(), 0.4);
        let mu = mu_from_mu_tilde(0.5, 0.4, 100.0, 4.0).unwrap();
        assert_relative_eq!(mu, 0.55, max_relative = 1e-15);
        let total = (1.0 - mu) * 40.0 + 4.0;
        assert_relative_eq!(total, 22.0, max_relative = 1e-14);
        let mu = mu_from_mu_tilde(1.0, 0.3, 80.0, 3.3).unwrap();
        assert!(((1.0 - mu) * 0.3 * 80.0 + 3.3).abs() < 1e-12);
        assert!(mu_from_mu_tilde(0.5, 0.0, 100.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn total_emissions_follow_mu_tilde(
            mu_tilde in 0.0f64..1.0,
            sigma in 0.05f64..0.6,
            y in 10.0f64..500.0,
            e_land in -5.0f64..5.0,
        ) {
            let mu = mu_from_mu_tilde(mu_tilde, sigma, y, e_land).unwrap();
            let expected = (1.0 - mu_tilde) * (sigma * y + e_land);
            let got = (1.0 - mu) * sigma * y + e_land;
            prop_assert!((got - expected).abs() <= 1e-12 * (sigma * y + e_land.abs()));
            let back = mu_tilde_from_mu(mu, sigma, y, e_land).unwrap();
            prop_assert!((back - mu_tilde).abs() <= 1e-12);
        }

        #[test]
        fn ramps_are_monotone_and_pinned(target in 2020i32..2300) {
            let g: Vec<i32> = (0..=60).map(|t| 2015 + 5 * t).collect();
            let v = ramp_values(2015, target, &g).unwrap();
            prop_assert_eq!(v[0], 0.0);
            prop_assert!(v.windows(2).all(|w| w[1] >= w[0]));
            for (y, x) in g.iter().zip(&v) {
                if *y >= target { prop_assert_eq!(*x, 1.0); }
                prop_assert!((0.0..=1.0).contains(x));
            }
        }
    }
}
