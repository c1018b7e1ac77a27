//! One-year Monte Carlo stress tests of annuity and life-insurance books,
//! and human-capital valuation under climate-adjusted mortality.
//!
//! Base and stressed deaths share random numbers: stressed deaths are the
//! base deaths plus extra deaths among the survivors, drawn with the
//! conditional probability `(q_adj - q) / (1 - q)`. Each marginal is exact
//! and the coupling keeps the relative deviations low-noise.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mortality::{adjusted_q, AnnualPath, CubicFit, ExcessMortality, GompertzLaw, MortalityTable};

pub const DEFAULT_PORTFOLIOS: &str = include_str!("../data/portfolios.toml");

/// Simulations per independently seeded block.
const BLOCK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortfolioKind {
    Annuity,
    Insurance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cohort {
    pub age: u32,
    pub count: u64,
    /// USD per person.
    pub sum_insured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioSpec {
    pub name: String,
    pub kind: PortfolioKind,
    #[serde(default)]
    pub description: String,
    pub cohorts: Vec<Cohort>,
}

impl PortfolioSpec {
    pub fn policies(&self) -> u64 {
        self.cohorts.iter().map(|c| c.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cohorts.is_empty() {
            return Err(Error::Config(format!("portfolio {} has no cohorts", self.name)));
        }
        for c in &self.cohorts {
            if c.count < 1 || !(c.sum_insured > 0.0) {
                return Err(Error::Config(format!(
                    "portfolio {}: cohort at age {} needs count >= 1 and a positive sum",
                    self.name, c.age
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioSet {
    pub portfolio: Vec<PortfolioSpec>,
}

impl PortfolioSet {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let set: Self = toml::from_str(text).map_err(|e| Error::Config(format!("portfolio config: {e}")))?;
        set.portfolio.iter().try_for_each(PortfolioSpec::validate)?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// The built-in portfolios A (annuity) and B (insurance).
    pub fn defaults() -> Self {
        Self::from_toml_str(DEFAULT_PORTFOLIOS).expect("built-in portfolio file is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean: f64,
    pub q01: f64,
    pub q99: f64,
    pub std_dev: f64,
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn stats(sample: &[f64]) -> SampleStats {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    SampleStats {
        mean,
        q01: quantile(&sorted, 0.01),
        q99: quantile(&sorted, 0.99),
        std_dev: var.sqrt(),
    }
}

fn relative_pct(stressed: f64, base: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        100.0 * (stressed - base) / base
    }
}

/// Outcome of one stress test.
///
/// The aggregate is the sum of insured amounts over deaths in the year:
/// unpaid annuity amounts for portfolio kind `Annuity`, paid death benefits
/// for `Insurance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressResult {
    pub portfolio: String,
    pub kind: PortfolioKind,
    pub year: i32,
    pub temperature: f64,
    pub n_sims: usize,
    pub seed: u64,
    pub base: SampleStats,
    pub stressed: SampleStats,
    /// Percent deviations of each statistic from the base run.
    pub rel_mean: f64,
    pub rel_q01: f64,
    pub rel_q99: f64,
    /// Standard error of `rel_mean`, percent.
    pub rel_mean_se: f64,
    /// First-order expectation of `rel_mean`, percent.
    pub analytic_rel_mean: f64,
}

impl StressResult {
    pub fn rounded(x: f64) -> f64 {
        (x * 100.0).round() / 100.0
    }
}

struct CohortRates {
    count: u64,
    sum: f64,
    q: f64,
    extra: f64,
    q_adj: f64,
}

/// Stress test of `portfolio` in `year` under the given temperature path.
pub fn stress_test<E: ExcessMortality + Sync + ?Sized>(
    portfolio: &PortfolioSpec,
    table: &MortalityTable,
    temperature: &AnnualPath,
    excess: &E,
    year: i32,
    n_sims: usize,
    seed: u64,
) -> Result<StressResult> {
    portfolio.validate()?;
    if n_sims < 2 {
        return Err(Error::Config("stress tests need at least two simulations".into()));
    }
    if n_sims < 1000 {
        log::warn!("{n_sims} simulations give unstable percentiles; use at least 1000");
    }
    let t_at = temperature.at(year)?;
    let rates: Vec<CohortRates> = portfolio
        .cohorts
        .iter()
        .map(|c| {
            let q = table.q(c.age, year)?;
            let q_adj = adjusted_q(q, excess.delta(c.age, t_at)?)?;
            let extra = if q < 1.0 { ((q_adj - q) / (1.0 - q)).clamp(0.0, 1.0) } else { 0.0 };
            Ok(CohortRates {
                count: c.count,
                sum: c.sum_insured,
                q,
                extra,
                q_adj,
            })
        })
        .collect::<Result<_>>()?;
    let base_dists: Vec<Binomial> = rates
        .iter()
        .map(|r| Binomial::new(r.count, r.q).map_err(|e| Error::Numeric(format!("binomial setup: {e}"))))
        .collect::<Result<_>>()?;

    let blocks = n_sims.div_ceil(BLOCK);
    let pairs: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| -> Result<Vec<(f64, f64)>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let len = BLOCK.min(n_sims - b * BLOCK);
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let (mut base, mut stressed) = (0.0, 0.0);
                for (r, dist) in rates.iter().zip(&base_dists) {
                    let d = dist.sample(&mut rng);
                    let extra = if r.extra > 0.0 && d < r.count {
                        Binomial::new(r.count - d, r.extra)
                            .map_err(|e| Error::Numeric(format!("binomial setup: {e}")))?
                            .sample(&mut rng)
                    } else {
                        0
                    };
                    base += r.sum * d as f64;
                    stressed += r.sum * (d + extra) as f64;
                }
                out.push((base, stressed));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let base_sample: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let stressed_sample: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let base = stats(&base_sample);
    let stressed = stats(&stressed_sample);

    // Delta-method error of the ratio of means.
    let ratio = if base.mean > 0.0 { stressed.mean / base.mean } else { 1.0 };
    let resid: Vec<f64> = pairs.iter().map(|(b, s)| s - ratio * b).collect();
    let resid_sd = stats(&resid).std_dev;
    let rel_mean_se = if base.mean > 0.0 {
        100.0 * resid_sd / ((n_sims as f64).sqrt() * base.mean)
    } else {
        0.0
    };
    let exp_base: f64 = rates.iter().map(|r| r.sum * r.count as f64 * r.q).sum();
    let exp_stressed: f64 = rates.iter().map(|r| r.sum * r.count as f64 * r.q_adj).sum();

    Ok(StressResult {
        portfolio: portfolio.name.clone(),
        kind: portfolio.kind,
        year,
        temperature: t_at,
        n_sims,
        seed,
        rel_mean: relative_pct(stressed.mean, base.mean),
        rel_q01: relative_pct(stressed.q01, base.q01),
        rel_q99: relative_pct(stressed.q99, base.q99),
        rel_mean_se,
        analytic_rel_mean: relative_pct(exp_stressed, exp_base),
        base,
        stressed,
    })
}

fn require_kind(portfolio: &PortfolioSpec, kind: PortfolioKind) -> Result<()> {
    if portfolio.kind != kind {
        return Err(Error::Config(format!(
            "portfolio {} is {:?}, expected {kind:?}",
            portfolio.name, portfolio.kind
        )));
    }
    Ok(())
}

/// Unpaid annuity amounts over deaths in `year`.
pub fn simulate_annuity<E: ExcessMortality + Sync + ?Sized>(
    portfolio: &PortfolioSpec,
    table: &MortalityTable,
    temperature: &AnnualPath,
    excess: &E,
    year: i32,
    n_sims: usize,
    seed: u64,
) -> Result<StressResult> {
    require_kind(portfolio, PortfolioKind::Annuity)?;
    stress_test(portfolio, table, temperature, excess, year, n_sims, seed)
}

/// Death benefits paid in `year`.
pub fn simulate_insurance<E: ExcessMortality + Sync + ?Sized>(
    portfolio: &PortfolioSpec,
    table: &MortalityTable,
    temperature: &AnnualPath,
    excess: &E,
    year: i32,
    n_sims: usize,
    seed: u64,
) -> Result<StressResult> {
    require_kind(portfolio, PortfolioKind::Insurance)?;
    stress_test(portfolio, table, temperature, excess, year, n_sims, seed)
}

// ---------------------------------------------------------------------------
// Human capital

/// Piecewise-linear income by years since the valuation start, held flat
/// beyond the last knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncomeProfile {
    /// (years since start, USD per year), increasing in the first entry.
    pub knots: Vec<(f64, f64)>,
}

impl IncomeProfile {
    /// Hump-shaped career income for someone aged 25 at the start, retiring
    /// at 65.
    pub fn default_profile() -> Self {
        Self {
            knots: vec![
                (0.0, 35_000.0),
                (15.0, 62_000.0),
                (30.0, 70_000.0),
                (40.0, 65_000.0),
                (40.5, 0.0),
                (85.0, 0.0),
            ],
        }
    }

    pub fn constant(y: f64) -> Self {
        Self {
            knots: vec![(0.0, y)],
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let k = &self.knots;
        if k.is_empty() {
            return 0.0;
        }
        if s <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if s <= x1 {
                return y0 + (y1 - y0) * (s - x0) / (x1 - x0);
            }
        }
        k.last().unwrap().1
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("income knots must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Integrated climate-adjusted hazard `int_0^s lambda(u) (1 + f(u)) du`.
pub trait CumulativeHazard {
    fn cumulative(&self, s: f64, damage: &[f64; 4]) -> f64;
}

/// No mortality at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroHazard;

impl CumulativeHazard for ZeroHazard {
    fn cumulative(&self, _s: f64, _damage: &[f64; 4]) -> f64 {
        0.0
    }
}

impl CumulativeHazard for GompertzLaw {
    /// Closed form of `int e^{u/b} p(u) du = e^{u/b} sum_k (-1)^k b^{k+1} p^(k)(u)`.
    fn cumulative(&self, s: f64, damage: &[f64; 4]) -> f64 {
        let b = self.dispersion;
        let scale = ((self.base_age - self.modal_age) / b).exp() / b;
        let p = [1.0 + damage[0], damage[1], damage[2], damage[3]];
        // Derivatives of p at u, k = 0..3.
        let derivs = |u: f64| {
            [
                ((p[3] * u + p[2]) * u + p[1]) * u + p[0],
                (3.0 * p[3] * u + 2.0 * p[2]) * u + p[1],
                6.0 * p[3] * u + 2.0 * p[2],
                6.0 * p[3],
            ]
        };
        let (ds, d0) = (derivs(s), derivs(0.0));
        let growth = (s / b).exp();
        let mut total = 0.0;
        let mut bk = b;
        for k in 0..4 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * bk * (growth * ds[k] - d0[k]);
            bk *= b;
        }
        scale * total
    }
}

/// Re-expresses `f(year)` from a fit in `year - origin` as a cubic in
/// years since `start_year`.
pub fn shift_cubic(fit: &CubicFit, start_year: f64) -> [f64; 4] {
    let d = start_year - fit.origin;
    let c = fit.coefficients;
    [
        c[0] + c[1] * d + c[2] * d * d + c[3] * d * d * d,
        c[1] + 2.0 * c[2] * d + 3.0 * c[3] * d * d,
        c[2] + 3.0 * c[3] * d,
        c[3],
    ]
}

/// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod quadrature to relative tolerance `rtol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 4000;
    let mut parts = vec![(a, b, gk15(f, a, b))];
    loop {
        let total: f64 = parts.iter().map(|p| p.2 .0).sum();
        let err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if !total.is_finite() {
            return Err(Error::Numeric("non-finite integrand".into()));
        }
        if err <= rtol * total.abs() || err <= 1e-300 {
            return Ok(total);
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::Numeric(format!(
                "quadrature did not reach relative tolerance {rtol:.1e} (estimated error {err:.3e})"
            )));
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, gk15(f, lo, mid)));
        parts.push((mid, hi, gk15(f, mid, hi)));
    }
}

/// Human-capital valuation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanCapitalOptions {
    pub rate: f64,
    pub t_max: f64,
    pub rtol: f64,
}

impl Default for HumanCapitalOptions {
    fn default() -> Self {
        Self {
            rate: 0.032,
            t_max: 85.0,
            rtol: 1e-8,
        }
    }
}

/// `int_0^T y(s) exp(-r s - Lambda(s)) ds` where `damage` is the cubic
/// excess-mortality factor in years since the valuation start.
pub fn human_capital<H: CumulativeHazard + ?Sized>(
    income: &IncomeProfile,
    hazard: &H,
    damage: &[f64; 4],
    options: &HumanCapitalOptions,
) -> Result<f64> {
    income.validate()?;
    let integrand = |s: f64| {
        let y = income.eval(s);
        if y == 0.0 {
            0.0
        } else {
            y * (-options.rate * s - hazard.cumulative(s, damage)).exp()
        }
    };
    // Split at the income knots so kinks sit on interval boundaries.
    let mut cuts: Vec<f64> = std::iter::once(0.0)
        .chain(income.knots.iter().map(|k| k.0).filter(|x| *x > 0.0 && *x < options.t_max))
        .chain(std::iter::once(options.t_max))
        .collect();
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate(&integrand, w[0], w[1], options.rtol)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanCapitalResult {
    pub base: f64,
    pub stressed: f64,
    /// Percent.
    pub relative: f64,
}

/// Human capital with and without the climate factor.
pub fn human_capital_deviation<H: CumulativeHazard + ?Sized>(
    income: &IncomeProfile,
    hazard: &H,
    damage: &[f64; 4],
    options: &HumanCapitalOptions,
) -> Result<HumanCapitalResult> {
    let base = human_capital(income, hazard, &[0.0; 4], options)?;
    let stressed = human_capital(income, hazard, damage, options)?;
    Ok(HumanCapitalResult {
        base,
        stressed,
        relative: relative_pct(stressed, base),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::{gompertz_to_table, ExcessMortalityFn, NoExcessMortality, TableSource};
    use approx::assert_relative_eq;

    fn flat_table(q: f64) -> MortalityTable {
        let ages = 121;
        let years = 2100 - 2015 + 1;
        MortalityTable::new(0, 120, 2015, 2100, vec![q; ages * years], TableSource::User("flat".into())).unwrap()
    }

    fn flat_path(t: f64) -> AnnualPath {
        AnnualPath {
            first_year: 2015,
            values: vec![t; 86],
            clamp_window: 0,
        }
    }

    fn toy(kind: PortfolioKind) -> PortfolioSpec {
        PortfolioSpec {
            name: "toy".into(),
            kind,
            description: String::new(),
            cohorts: vec![Cohort {
                age: 50,
                count: 2,
                sum_insured: 1.0,
            }],
        }
    }

    #[test]
    fn default_portfolios_load() {
        let set = PortfolioSet::defaults();
        assert_eq!(set.portfolio.len(), 2);
        for p in &set.portfolio {
            assert_eq!(p.policies(), 10_000);
        }
        assert_eq!(set.portfolio[0].kind, PortfolioKind::Annuity);
        assert_eq!(set.portfolio[1].kind, PortfolioKind::Insurance);
        assert!(PortfolioSet::from_toml_str("[[portfolio]]\nname='x'\nkind='annuity'\ncohorts=[]").is_err());
    }

    #[test]
    fn zero_mortality_pays_nothing() {
        let r = simulate_annuity(&toy(PortfolioKind::Annuity), &flat_table(0.0), &flat_path(3.0), &ExcessMortalityFn::default(), 2100, 1000, 1)
            .unwrap();
        assert_eq!(r.base.mean, 0.0);
        assert_eq!(r.stressed.q99, 0.0);
    }

    #[test]
    fn binomial_toy_matches_exact_distribution() {
        let n = 200_000;
        let r = simulate_insurance(&toy(PortfolioKind::Insurance), &flat_table(0.5), &flat_path(0.0), &NoExcessMortality, 2050, n, 7)
            .unwrap();
        // Binomial(2, 0.5): mean 1, sd sqrt(0.5).
        let se = 0.5f64.sqrt() / (n as f64).sqrt();
        assert!((r.base.mean - 1.0).abs() < 4.0 * se, "mean {}", r.base.mean);
        assert_relative_eq!(r.base.std_dev, 0.5f64.sqrt(), max_relative = 0.01);
        assert_eq!(r.base.q01, 0.0);
        assert_eq!(r.base.q99, 2.0);
        assert_eq!(r.rel_mean, 0.0);
    }

    #[test]
    fn kind_is_checked() {
        let err = simulate_annuity(&toy(PortfolioKind::Insurance), &flat_table(0.1), &flat_path(1.0), &NoExcessMortality, 2050, 10, 1);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn stress_is_seeded_and_first_order() {
        let set = PortfolioSet::defaults();
        let table = gompertz_to_table(&GompertzLaw::default(), 0, 120, 2015, 2100).unwrap();
        let path = flat_path(2.5);
        let excess = ExcessMortalityFn::default();
        let a = stress_test(&set.portfolio[0], &table, &path, &excess, 2100, 20_000, 42).unwrap();
        let b = stress_test(&set.portfolio[0], &table, &path, &excess, 2100, 20_000, 42).unwrap();
        assert_eq!(a, b);
        let delta = excess.eval(2.5).unwrap();
        assert_relative_eq!(a.analytic_rel_mean, 100.0 * delta, max_relative = 1e-9);
        assert!((a.rel_mean - a.analytic_rel_mean).abs() <= 3.0 * a.rel_mean_se);
        assert!(a.base.q01 < a.base.mean && a.base.mean < a.base.q99);
    }

    #[test]
    fn quadrature_cases() {
        let v = integrate(&|x: f64| x.exp(), 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, max_relative = 1e-13);
        let v = integrate(&|x: f64| x.powi(5) - 2.0 * x, -1.0, 2.0, 1e-12).unwrap();
        assert_relative_eq!(v, (64.0 - 1.0) / 6.0 - 3.0, max_relative = 1e-13);
        let v = integrate(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn human_capital_closed_forms() {
        let opts = HumanCapitalOptions::default();
        assert_eq!(human_capital(&IncomeProfile::constant(0.0), &GompertzLaw::default(), &[0.0; 4], &opts).unwrap(), 0.0);
        let h = human_capital(&IncomeProfile::constant(1.0), &ZeroHazard, &[0.0; 4], &opts).unwrap();
        let r: f64 = 0.032;
        assert_relative_eq!(h, (1.0 - (-r * 85.0).exp()) / r, max_relative = 1e-10);
    }

    #[test]
    fn cumulative_hazard_matches_quadrature() {
        let law = GompertzLaw::default();
        let damage = [0.001, 2e-4, -1e-6, 3e-8];
        for s in [0.5, 10.0, 40.0, 85.0] {
            let oracle = integrate(
                &|u: f64| law.hazard(u) * (1.0 + ((damage[3] * u + damage[2]) * u + damage[1]) * u + damage[0]),
                0.0,
                s,
                1e-13,
            )
            .unwrap();
            assert_relative_eq!(law.cumulative(s, &damage), oracle, max_relative = 1e-11);
        }
        assert_relative_eq!(law.cumulative(30.0, &[0.0; 4]), law.cumulative_hazard(0.0, 30.0), max_relative = 1e-12);
    }

    #[test]
    fn shifted_cubic_agrees() {
        let fit = CubicFit {
            origin: 2015.0,
            coefficients: [0.001, 1e-4, 2e-6, -1e-8],
            max_abs_residual: 0.0,
        };
        let c = shift_cubic(&fit, 2030.0);
        for s in [0.0, 7.0, 50.0] {
            let direct = fit.eval(15.0 + s);
            let shifted = ((c[3] * s + c[2]) * s + c[1]) * s + c[0];
            assert_relative_eq!(direct, shifted, max_relative = 1e-12);
        }
    }

    #[test]
    fn human_capital_deviation_is_small_and_negative() {
        let damage = [0.002, 2e-4, 0.0, 0.0];
        let r = human_capital_deviation(&IncomeProfile::default_profile(), &GompertzLaw::default(), &damage, &HumanCapitalOptions::default())
            .unwrap();
        assert!(r.relative < 0.0 && r.relative > -0.05, "{}", r.relative);
        assert!(r.base > 1.0e6 && r.base < 2.0e6, "{}", r.base);
    }
}
