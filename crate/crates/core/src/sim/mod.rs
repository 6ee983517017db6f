//! Seeded, parallel Monte Carlo replication of the lognormal study grid.
//!
//! A scenario fixes the grid coordinates (number of queries, quota
//! fraction, treatment mean or covariate rate). For each scenario the
//! engine draws `n_bid_draws` bid worlds. Each world gets a Monte Carlo
//! `τ*` and `n_assignments_per_draw` simulated experiments per
//! randomization scheme, throttle mode and weighting convention. All random
//! streams are derived from the master seed and the task coordinates, so
//! output does not depend on the number of worker threads.

mod output;

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use output::{read_csv, render_report, write_csv, CSV_HEADER};

use crate::auction::{realize_payments_into, AuctionRules};
use crate::bids::{draw_potential_bids, BidCoupling, BidDistributionConfig};
use crate::error::{invalid_config, Error, Result};
use crate::estimation::{estimate_unchecked, mean_and_variance, true_effects, CounterfactualCoupling, WeightingConvention};
use crate::instance::ExperimentInstance;
use crate::randomization::{draw_assignment, RandomizationScheme};
use crate::rng::{derive_stream, tag};
use crate::throttle::{integral_quota, plan, QuotaConfig, QuotaMode, ThrottleKind};

pub const STUDY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentType {
    /// Treatment changes bids; throttling is blind to the arm.
    #[default]
    Bid,
    /// Treatment drops treated pairs with `x = 0`; bids are unchanged.
    Quota,
}

impl TreatmentType {
    fn throttle_kind(self) -> ThrottleKind {
        match self {
            Self::Bid => ThrottleKind::Standard,
            Self::Quota => ThrottleKind::QuotaTreatment,
        }
    }
}

impl std::fmt::Display for TreatmentType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Bid => "bid",
            Self::Quota => "quota",
        })
    }
}

/// Granularity of the quota-treatment covariate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateLevel {
    /// One draw per query, shared by all of its pairs.
    #[default]
    Query,
    /// One draw per pair.
    Pair,
}

fn default_schema_version() -> u32 {
    STUDY_SCHEMA_VERSION
}
fn default_n_queries() -> Vec<usize> {
    vec![90, 120, 150]
}
fn default_n_advertisers() -> usize {
    3
}
fn default_quota_fractions() -> Vec<f64> {
    vec![1.0 / 3.0, 2.0 / 3.0]
}
fn default_mu0() -> f64 {
    1.0
}
fn default_mu1() -> Vec<f64> {
    vec![1.05, 1.1, 2.0]
}
fn default_v() -> f64 {
    0.1
}
fn default_p_x() -> Vec<f64> {
    vec![0.1, 0.5, 0.9]
}
fn default_schemes() -> Vec<RandomizationScheme> {
    vec![RandomizationScheme::QueryBalanced, RandomizationScheme::PairBalanced]
}
fn default_modes() -> Vec<QuotaMode> {
    vec![QuotaMode::Joint]
}
fn default_conventions() -> Vec<WeightingConvention> {
    vec![WeightingConvention::HorvitzThompson]
}
fn default_outer() -> usize {
    200
}
fn default_inner() -> usize {
    100
}
fn default_n_mc() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub treatment_type: TreatmentType,
    #[serde(default = "default_n_queries")]
    pub n_queries: Vec<usize>,
    #[serde(default = "default_n_advertisers")]
    pub n_advertisers: usize,
    /// Quota as a fraction of each advertiser's eligible queries.
    #[serde(default = "default_quota_fractions")]
    pub quota_fractions: Vec<f64>,
    #[serde(default = "default_mu0")]
    pub mu0: f64,
    /// Treatment log-bid means; ignored by quota treatments.
    #[serde(default = "default_mu1")]
    pub mu1: Vec<f64>,
    /// Variance of the log bid.
    #[serde(default = "default_v")]
    pub v: f64,
    /// Covariate rates; used by quota treatments only.
    #[serde(default = "default_p_x")]
    pub p_x: Vec<f64>,
    #[serde(default)]
    pub covariate_level: CovariateLevel,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<RandomizationScheme>,
    #[serde(default = "default_modes")]
    pub throttle_modes: Vec<QuotaMode>,
    #[serde(default = "default_conventions")]
    pub conventions: Vec<WeightingConvention>,
    #[serde(default)]
    pub rules: AuctionRules,
    #[serde(default)]
    pub bid_coupling: BidCoupling,
    #[serde(default)]
    pub tau_star_coupling: CounterfactualCoupling,
    #[serde(default = "default_outer")]
    pub n_bid_draws: usize,
    #[serde(default = "default_inner")]
    pub n_assignments_per_draw: usize,
    #[serde(default = "default_n_mc")]
    pub n_mc_tau_star: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub id: usize,
    pub n_queries: usize,
    pub quota_frac: f64,
    pub mu1: f64,
    pub p_x: Option<f64>,
}

impl StudyConfig {
    /// Full grid for one treatment type with the default sizes.
    pub fn paper_grid(treatment_type: TreatmentType) -> Self {
        let mut c = Self { treatment_type, ..Self::default() };
        if treatment_type == TreatmentType::Quota {
            c.schemes = vec![RandomizationScheme::QueryBalanced];
            c.throttle_modes = vec![QuotaMode::Joint, QuotaMode::Split];
        }
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| invalid_config(format!("study config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != STUDY_SCHEMA_VERSION {
            return Err(invalid_config(format!(
                "unsupported schema_version {}, expected {STUDY_SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        let empty = [
            ("n_queries", self.n_queries.is_empty()),
            ("quota_fractions", self.quota_fractions.is_empty()),
            ("schemes", self.schemes.is_empty()),
            ("throttle_modes", self.throttle_modes.is_empty()),
            ("conventions", self.conventions.is_empty()),
            ("mu1", self.treatment_type == TreatmentType::Bid && self.mu1.is_empty()),
            ("p_x", self.treatment_type == TreatmentType::Quota && self.p_x.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(invalid_config(format!("`{name}` must not be empty")));
        }
        for (name, n) in [
            ("n_advertisers", self.n_advertisers),
            ("n_bid_draws", self.n_bid_draws),
            ("n_assignments_per_draw", self.n_assignments_per_draw),
            ("n_mc_tau_star", self.n_mc_tau_star),
        ] {
            if n == 0 {
                return Err(invalid_config(format!("`{name}` must be at least 1")));
            }
        }
        for s in &self.schemes {
            s.validate()?;
        }
        for mu1 in &self.mu1 {
            BidDistributionConfig { mu0: self.mu0, mu1: *mu1, v: self.v, coupling: self.bid_coupling }.validate()?;
        }
        BidDistributionConfig { mu0: self.mu0, mu1: self.mu0, v: self.v, coupling: self.bid_coupling }.validate()?;
        if let Some(p) = self.p_x.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(invalid_config(format!("p_x must lie in [0, 1], got {p}")));
        }
        for &nq in &self.n_queries {
            if nq == 0 {
                return Err(invalid_config("n_queries entries must be positive"));
            }
            for &f in &self.quota_fractions {
                let total = integral_quota(f, nq)?;
                if self.throttle_modes.contains(&QuotaMode::Split) && total % 2 != 0 {
                    return Err(invalid_config(format!(
                        "split quota {total} (fraction {f} of {nq}) cannot be halved"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Grid points in output order.
    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for &n_queries in &self.n_queries {
            for &quota_frac in &self.quota_fractions {
                match self.treatment_type {
                    TreatmentType::Bid => {
                        for &mu1 in &self.mu1 {
                            out.push(Scenario { id: out.len(), n_queries, quota_frac, mu1, p_x: None });
                        }
                    }
                    TreatmentType::Quota => {
                        for &p_x in &self.p_x {
                            out.push(Scenario { id: out.len(), n_queries, quota_frac, mu1: self.mu0, p_x: Some(p_x) });
                        }
                    }
                }
            }
        }
        out
    }
}

/// One output row: a (scenario, scheme, throttle mode, convention) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub scenario_id: usize,
    pub n_queries: usize,
    pub n_advertisers: usize,
    pub quota_frac: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub v: f64,
    pub p_x: Option<f64>,
    pub treatment_type: TreatmentType,
    pub scheme: String,
    pub throttle_mode: QuotaMode,
    pub convention: WeightingConvention,
    pub n_outer: usize,
    pub n_inner: usize,
    pub tau_star: f64,
    pub tau_star_se: f64,
    pub mean_est: f64,
    pub bias: f64,
    pub rel_bias: Option<f64>,
    pub rel_bias_se: Option<f64>,
    pub variance: Option<f64>,
    pub var_ratio: Option<f64>,
    pub seed: u64,
    /// Wall-clock seconds for the whole scenario; not written to CSV.
    #[serde(skip)]
    pub runtime_secs: f64,
}

struct DrawResult {
    /// Per throttle mode: (τ*, its Monte Carlo standard error).
    tau_star: Vec<(f64, f64)>,
    /// Per cell: one estimate per inner draw.
    estimates: Vec<Vec<f64>>,
}

fn cell_index(config: &StudyConfig, scheme: usize, mode: usize, conv: usize) -> usize {
    (scheme * config.throttle_modes.len() + mode) * config.conventions.len() + conv
}

fn draw_world<R: Rng>(
    config: &StudyConfig,
    scenario: &Scenario,
    base: &ExperimentInstance,
    rng: &mut R,
) -> Result<ExperimentInstance> {
    let bid_cfg = BidDistributionConfig { mu0: config.mu0, mu1: scenario.mu1, v: config.v, coupling: config.bid_coupling };
    let (b0, b1) = draw_potential_bids(&bid_cfg, base.n_pairs(), rng)?;
    let x: Vec<bool> = match scenario.p_x {
        None => vec![true; base.n_pairs()],
        Some(p) => match config.covariate_level {
            CovariateLevel::Pair => (0..base.n_pairs()).map(|_| rng.random_bool(p)).collect(),
            CovariateLevel::Query => {
                let per_query: Vec<bool> = (0..base.n_queries()).map(|_| rng.random_bool(p)).collect();
                base.pairs().iter().map(|pair| per_query[pair.query]).collect()
            }
        },
    };
    base.with_potentials(&b0, &b1, &x)
}

fn run_draw(
    config: &StudyConfig,
    scenario: &Scenario,
    base: &ExperimentInstance,
    quotas: &[QuotaConfig],
    scheme_keys: &[usize],
    outer: usize,
) -> Result<DrawResult> {
    let seed = config.master_seed;
    let (s, b) = (scenario.id as u64, outer as u64);
    let kind = config.treatment_type.throttle_kind();
    let inst = draw_world(config, scenario, base, &mut derive_stream(seed, &[tag::BIDS, s, b]))?;

    // The counterfactual worlds depend only on each advertiser's total
    // quota, so every constrained mode shares one τ* computation.
    let mut constrained: Option<(f64, f64)> = None;
    let mut tau_star = Vec::with_capacity(quotas.len());
    for quota in quotas {
        let value = match (quota.mode, constrained) {
            (QuotaMode::None, _) => {
                let e = true_effects(&inst, quota, kind, &config.rules, 1, config.tau_star_coupling, &mut derive_stream(seed, &[tag::TAU_STAR, s, b, 0]))?;
                (e.tau_star, e.tau_star_se)
            }
            (_, Some(v)) => v,
            (_, None) => {
                let mut rng = derive_stream(seed, &[tag::TAU_STAR, s, b, 1]);
                let e = true_effects(&inst, quota, kind, &config.rules, config.n_mc_tau_star, config.tau_star_coupling, &mut rng)?;
                constrained = Some((e.tau_star, e.tau_star_se));
                (e.tau_star, e.tau_star_se)
            }
        };
        tau_star.push(value);
    }

    let n_cells = config.schemes.len() * quotas.len() * config.conventions.len();
    let mut estimates = vec![Vec::with_capacity(config.n_assignments_per_draw); n_cells];
    let mut w = vec![false; inst.n_pairs()];
    let mut y = vec![0.0; inst.n_pairs()];
    for (si, scheme) in config.schemes.iter().enumerate() {
        for i in 0..config.n_assignments_per_draw {
            let mut rng = derive_stream(seed, &[tag::CELL, s, b, scheme_keys[si] as u64, i as u64]);
            let a = draw_assignment(scheme, &inst, &mut rng)?;
            debug_assert!(balanced_ok(scheme, &inst, &a.z));
            for (mi, quota) in quotas.iter().enumerate() {
                let mut mask_rng = rng.clone();
                plan(&inst, &a.z, quota, kind).sample(&mut mask_rng, &mut w);
                realize_payments_into(&inst, &a.z, &w, &config.rules, &mut y);
                for (ci, conv) in config.conventions.iter().enumerate() {
                    estimates[cell_index(config, si, mi, ci)].push(estimate_unchecked(&a.z, &a.p, &y, *conv));
                }
            }
        }
    }
    Ok(DrawResult { tau_star, estimates })
}

fn balanced_ok(scheme: &RandomizationScheme, inst: &ExperimentInstance, z: &[bool]) -> bool {
    let treated = z.iter().filter(|&&t| t).count();
    match scheme {
        RandomizationScheme::PairBalanced => treated == inst.n_pairs() / 2,
        RandomizationScheme::QueryBalanced => {
            let queries = (0..inst.n_queries()).filter(|&q| z[inst.query_pairs(q)[0]]).count();
            queries == inst.n_queries() / 2
                && (0..inst.n_queries()).all(|q| inst.query_pairs(q).iter().all(|&i| z[i] == z[inst.query_pairs(q)[0]]))
        }
        _ => true,
    }
}

fn summarize_cell(draws: &[DrawResult], cell: usize, mode: usize) -> (f64, f64, f64, Option<f64>, Option<f64>, Option<f64>) {
    let n_outer = draws.len() as f64;
    let tau_star = draws.iter().map(|d| d.tau_star[mode].0).sum::<f64>() / n_outer;
    let tau_star_se = draws.iter().map(|d| d.tau_star[mode].1.powi(2)).sum::<f64>().sqrt() / n_outer;
    let all: Vec<f64> = draws.iter().flat_map(|d| d.estimates[cell].iter().copied()).collect();
    let mean_est = all.iter().sum::<f64>() / all.len() as f64;

    let ratios: Option<Vec<f64>> = draws
        .iter()
        .map(|d| {
            let ts = d.tau_star[mode].0;
            let est = &d.estimates[cell];
            (ts != 0.0).then(|| (est.iter().sum::<f64>() / est.len() as f64 - ts) / ts)
        })
        .collect();
    let (rel_bias, rel_bias_se) = match ratios {
        Some(r) => {
            let (m, var) = mean_and_variance(&r);
            (Some(m), (r.len() > 1).then(|| (var / n_outer).sqrt()))
        }
        None => (None, None),
    };

    let inner = draws[0].estimates[cell].len();
    let variance = if inner > 1 {
        Some(draws.iter().map(|d| mean_and_variance(&d.estimates[cell]).1).sum::<f64>() / n_outer)
    } else if all.len() > 1 {
        Some(mean_and_variance(&all).1)
    } else {
        None
    };
    (tau_star, tau_star_se, mean_est, rel_bias, rel_bias_se, variance)
}

fn run_scenario(config: &StudyConfig, scenario: &Scenario) -> Result<Vec<StudyRow>> {
    let start = Instant::now();
    let n = scenario.n_queries * config.n_advertisers;
    let base = ExperimentInstance::complete(scenario.n_queries, config.n_advertisers, &vec![1.0; n], &vec![1.0; n])?;
    let quotas: Vec<QuotaConfig> = config
        .throttle_modes
        .iter()
        .map(|&m| QuotaConfig::from_fraction(&base, m, scenario.quota_frac))
        .collect::<Result<_>>()?;
    let scheme_keys: Vec<usize> =
        config.schemes.iter().map(|s| config.schemes.iter().position(|t| t == s).unwrap()).collect();

    let draws: Vec<DrawResult> = (0..config.n_bid_draws)
        .into_par_iter()
        .map(|b| run_draw(config, scenario, &base, &quotas, &scheme_keys, b))
        .collect::<Result<_>>()?;
    let runtime_secs = start.elapsed().as_secs_f64();

    let mut rows = Vec::new();
    for (si, scheme) in config.schemes.iter().enumerate() {
        for (mi, mode) in config.throttle_modes.iter().enumerate() {
            for (ci, conv) in config.conventions.iter().enumerate() {
                let (tau_star, tau_star_se, mean_est, rel_bias, rel_bias_se, variance) =
                    summarize_cell(&draws, cell_index(config, si, mi, ci), mi);
                rows.push(StudyRow {
                    scenario_id: scenario.id,
                    n_queries: scenario.n_queries,
                    n_advertisers: config.n_advertisers,
                    quota_frac: scenario.quota_frac,
                    mu0: config.mu0,
                    mu1: scenario.mu1,
                    v: config.v,
                    p_x: scenario.p_x,
                    treatment_type: config.treatment_type,
                    scheme: scheme.label(),
                    throttle_mode: *mode,
                    convention: *conv,
                    n_outer: config.n_bid_draws,
                    n_inner: config.n_assignments_per_draw,
                    tau_star,
                    tau_star_se,
                    mean_est,
                    bias: mean_est - tau_star,
                    rel_bias,
                    rel_bias_se,
                    variance,
                    var_ratio: None,
                    seed: config.master_seed,
                    runtime_secs,
                });
            }
        }
    }
    fill_variance_ratios(&mut rows);
    Ok(rows)
}

/// Set `var_ratio` on every row relative to the query-balanced row of the
/// same scenario, throttle mode and convention.
fn fill_variance_ratios(rows: &mut [StudyRow]) {
    let reference = RandomizationScheme::QueryBalanced.label();
    let denominators: Vec<Option<f64>> = rows
        .iter()
        .map(|r| {
            rows.iter()
                .find(|d| {
                    d.scheme == reference
                        && d.scenario_id == r.scenario_id
                        && d.throttle_mode == r.throttle_mode
                        && d.convention == r.convention
                })
                .and_then(|d| d.variance)
        })
        .collect();
    for (row, den) in rows.iter_mut().zip(denominators) {
        row.var_ratio = match (row.variance, den) {
            (Some(num), Some(den)) => crate::estimation::variance_ratio(num, den),
            _ => None,
        };
    }
}

/// Run every scenario of the grid on the current rayon pool.
pub fn run_study(config: &StudyConfig) -> Result<Vec<StudyRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for scenario in config.scenarios() {
        rows.extend(run_scenario(config, &scenario)?);
    }
    Ok(rows)
}

/// [`run_study`] on a dedicated pool of `workers` threads.
pub fn run_study_with_workers(config: &StudyConfig, workers: usize) -> Result<Vec<StudyRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| run_study(config))
}

/// Rows of non-reference schemes, each carrying its variance ratio against
/// query-balanced randomization on the same bid draws.
pub fn variance_ratio_study(config: &StudyConfig) -> Result<Vec<StudyRow>> {
    if !config.schemes.contains(&RandomizationScheme::QueryBalanced) || config.schemes.len() < 2 {
        return Err(invalid_config("variance ratios need query_balanced and at least one other scheme"));
    }
    let reference = RandomizationScheme::QueryBalanced.label();
    Ok(run_study(config)?.into_iter().filter(|r| r.scheme != reference).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> StudyConfig {
        StudyConfig {
            n_queries: vec![6],
            quota_fractions: vec![1.0 / 3.0],
            mu1: vec![1.5],
            throttle_modes: vec![QuotaMode::Joint, QuotaMode::Split],
            n_bid_draws: 4,
            n_assignments_per_draw: 5,
            n_mc_tau_star: 20,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn default_config_matches_study_grid() {
        let c = StudyConfig::default();
        assert_eq!(c.n_bid_draws * c.n_assignments_per_draw, 20_000);
        assert_eq!(c.scenarios().len(), 18);
        assert!(c.validate().is_ok());
        assert_eq!(StudyConfig::paper_grid(TreatmentType::Quota).scenarios().len(), 18);
    }

    #[test]
    fn config_round_trip() {
        let c = tiny();
        assert_eq!(StudyConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = tiny();
        c.quota_fractions = vec![0.25];
        assert!(matches!(run_study(&c), Err(Error::InvalidConfig(_))));
        let mut c = tiny();
        c.n_queries = vec![9];
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.schema_version = 2;
        assert!(c.validate().is_err());
        assert!(StudyConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn one_estimate_per_cell_is_reproducible() {
        let mut c = tiny();
        c.n_bid_draws = 1;
        c.n_assignments_per_draw = 1;
        let a = run_study(&c).unwrap();
        let b = run_study(&c).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.mean_est.to_bits(), y.mean_est.to_bits());
            assert_eq!(x.rel_bias_se, None);
        }
    }

    #[test]
    fn duplicated_scheme_has_unit_ratio() {
        let mut c = tiny();
        c.schemes = vec![RandomizationScheme::QueryBalanced, RandomizationScheme::QueryBalanced];
        let rows = run_study(&c).unwrap();
        assert!(rows.iter().all(|r| r.var_ratio == Some(1.0)));
    }

    #[test]
    fn constrained_modes_share_tau_star() {
        let rows = run_study(&tiny()).unwrap();
        let joint: Vec<f64> = rows.iter().filter(|r| r.throttle_mode == QuotaMode::Joint).map(|r| r.tau_star).collect();
        let split: Vec<f64> = rows.iter().filter(|r| r.throttle_mode == QuotaMode::Split).map(|r| r.tau_star).collect();
        assert_eq!(joint, split);
    }

    #[test]
    fn quota_treatment_grid_uses_covariate_rates() {
        let mut c = StudyConfig::paper_grid(TreatmentType::Quota);
        c.n_queries = vec![6];
        c.quota_fractions = vec![1.0 / 3.0];
        c.p_x = vec![0.5];
        c.n_bid_draws = 3;
        c.n_assignments_per_draw = 4;
        c.n_mc_tau_star = 10;
        let rows = run_study(&c).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.p_x == Some(0.5) && r.mu1 == r.mu0));
    }
}
