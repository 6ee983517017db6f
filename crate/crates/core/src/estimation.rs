//! True effects and Horvitz–Thompson estimates of the revenue effect.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auction::{realize_payments_into, settle_query, AuctionRules};
use crate::error::{invalid_config, invalid_input, Result};
use crate::instance::ExperimentInstance;
use crate::randomization::{draw_assignment, Assignment, RandomizationScheme};
use crate::rng::derive_stream;
use crate::throttle::{counterfactual_plan, plan, QuotaConfig, ThrottleKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingConvention {
    /// Treated payments divided by `p_i`, control payments by `1 - p_i`.
    #[default]
    HorvitzThompson,
    /// Plain difference of arm totals.
    Unweighted,
}

impl std::fmt::Display for WeightingConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::HorvitzThompson => "horvitz_thompson",
            Self::Unweighted => "unweighted",
        })
    }
}

/// How the all-treated and all-control masks of one τ* replicate relate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterfactualCoupling {
    /// Fresh independent masks for each counterfactual.
    #[default]
    Independent,
    /// Both counterfactuals replay the same random numbers.
    Common,
}

#[inline]
fn weight(treated: bool, p: f64, convention: WeightingConvention) -> f64 {
    match (convention, treated) {
        (WeightingConvention::Unweighted, true) => 1.0,
        (WeightingConvention::Unweighted, false) => -1.0,
        (WeightingConvention::HorvitzThompson, true) => 1.0 / p,
        (WeightingConvention::HorvitzThompson, false) => -1.0 / (1.0 - p),
    }
}

fn check_estimator_inputs(assignment: &Assignment, y: &[f64], convention: WeightingConvention) -> Result<()> {
    if assignment.z.len() != y.len() || assignment.p.len() != y.len() {
        return Err(invalid_input(format!(
            "assignment ({}) and payments ({}) differ in length",
            assignment.z.len(),
            y.len()
        )));
    }
    if convention == WeightingConvention::HorvitzThompson {
        if let Some(p) = assignment.p.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(invalid_input(format!("inclusion probability {p} is outside (0, 1)")));
        }
    }
    Ok(())
}

/// Signed weighted difference of treated and control payments.
pub fn ht_total(assignment: &Assignment, y: &[f64], convention: WeightingConvention) -> Result<f64> {
    check_estimator_inputs(assignment, y, convention)?;
    Ok(estimate_unchecked(&assignment.z, &assignment.p, y, convention))
}

#[inline]
pub(crate) fn estimate_unchecked(z: &[bool], p: &[f64], y: &[f64], convention: WeightingConvention) -> f64 {
    z.iter()
        .zip(p)
        .zip(y)
        .filter(|(_, &yi)| yi != 0.0)
        .map(|((&zi, &pi), &yi)| yi * weight(zi, pi, convention))
        .sum()
}

/// The estimator restricted to the pairs of advertiser `advertiser` (an id).
pub fn ht_advertiser(
    instance: &ExperimentInstance,
    assignment: &Assignment,
    y: &[f64],
    advertiser: u32,
    convention: WeightingConvention,
) -> Result<f64> {
    check_estimator_inputs(assignment, y, convention)?;
    let a = instance
        .advertiser_index(advertiser)
        .ok_or_else(|| invalid_input(format!("unknown advertiser {advertiser}")))?;
    Ok(instance
        .advertiser_pairs(a)
        .iter()
        .map(|&i| y[i] * weight(assignment.z[i], assignment.p[i], convention))
        .sum())
}

/// Revenue per advertiser (dense index) for a given assignment and mask.
pub(crate) fn advertiser_revenue(
    instance: &ExperimentInstance,
    z: &[bool],
    w: &[bool],
    rules: &AuctionRules,
    out: &mut [f64],
) {
    out.fill(0.0);
    for q in 0..instance.n_queries() {
        if let Some(s) = settle_query(instance, q, z, w, rules) {
            out[instance.pair_advertiser(s.winner)] += instance.pair(s.price_from).bid(z[s.price_from]);
        }
    }
}

/// `τ`, `τ_a` without quota constraints and their expectations `τ*`, `τ*_a`
/// under the throttle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueEffects {
    pub tau: f64,
    pub tau_a: Vec<f64>,
    pub tau_star: f64,
    pub tau_star_a: Vec<f64>,
    pub tau_star_se: f64,
    pub n_mc: usize,
}

/// Compute true effects. `τ` settles every eligible pair once under
/// `Z = 1` and once under `Z = 0` (the quota-treatment filter still
/// applies). `τ*` averages `n_mc` replicates of the same comparison where
/// each advertiser's whole quota serves the single arm.
pub fn true_effects<R: Rng + Clone>(
    instance: &ExperimentInstance,
    quota: &QuotaConfig,
    kind: ThrottleKind,
    rules: &AuctionRules,
    n_mc: usize,
    coupling: CounterfactualCoupling,
    rng: &mut R,
) -> Result<TrueEffects> {
    quota.validate(instance)?;
    let n = instance.n_pairs();
    let na = instance.n_advertisers();
    let ones = vec![true; n];
    let zeros = vec![false; n];

    let unconstrained = QuotaConfig::unconstrained(instance);
    let mut w = vec![false; n];
    let mut r1 = vec![0.0; na];
    let mut r0 = vec![0.0; na];
    counterfactual_plan(instance, true, &unconstrained, kind).sample(rng, &mut w);
    advertiser_revenue(instance, &ones, &w, rules, &mut r1);
    counterfactual_plan(instance, false, &unconstrained, kind).sample(rng, &mut w);
    advertiser_revenue(instance, &zeros, &w, rules, &mut r0);
    let tau_a: Vec<f64> = r1.iter().zip(&r0).map(|(a, b)| a - b).collect();
    let tau = tau_a.iter().sum();

    let plan1 = counterfactual_plan(instance, true, quota, kind);
    let plan0 = counterfactual_plan(instance, false, quota, kind);
    if plan1.is_deterministic() && plan0.is_deterministic() {
        let mut r1 = vec![0.0; na];
        let mut r0 = vec![0.0; na];
        plan1.sample(rng, &mut w);
        advertiser_revenue(instance, &ones, &w, rules, &mut r1);
        plan0.sample(rng, &mut w);
        advertiser_revenue(instance, &zeros, &w, rules, &mut r0);
        let tau_star_a: Vec<f64> = r1.iter().zip(&r0).map(|(a, b)| a - b).collect();
        return Ok(TrueEffects { tau, tau_a, tau_star: tau_star_a.iter().sum(), tau_star_a, tau_star_se: 0.0, n_mc: 1 });
    }
    if n_mc == 0 {
        return Err(invalid_config("n_mc must be at least 1 when quotas bind"));
    }

    let mut sum_a = vec![0.0; na];
    let mut diffs = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let mut shadow = match coupling {
            CounterfactualCoupling::Common => Some(rng.clone()),
            CounterfactualCoupling::Independent => None,
        };
        plan1.sample(rng, &mut w);
        advertiser_revenue(instance, &ones, &w, rules, &mut r1);
        match shadow.as_mut() {
            Some(s) => plan0.sample(s, &mut w),
            None => plan0.sample(rng, &mut w),
        }
        advertiser_revenue(instance, &zeros, &w, rules, &mut r0);
        let mut d = 0.0;
        for (acc, (a, b)) in sum_a.iter_mut().zip(r1.iter().zip(&r0)) {
            *acc += a - b;
            d += a - b;
        }
        diffs.push(d);
    }
    let nf = n_mc as f64;
    let tau_star_a: Vec<f64> = sum_a.iter().map(|s| s / nf).collect();
    let (tau_star, var) = mean_and_variance(&diffs);
    let tau_star_se = if n_mc > 1 { (var / nf).sqrt() } else { 0.0 };
    Ok(TrueEffects { tau, tau_a, tau_star, tau_star_a, tau_star_se, n_mc })
}

/// Estimates and true effects for one realized experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub tau_hat: f64,
    pub tau_hat_a: Vec<f64>,
    pub tau: f64,
    pub tau_a: Vec<f64>,
    pub tau_star: f64,
    pub tau_star_se: f64,
}

impl EffectReport {
    pub fn new(
        instance: &ExperimentInstance,
        assignment: &Assignment,
        y: &[f64],
        effects: &TrueEffects,
        convention: WeightingConvention,
    ) -> Result<Self> {
        let tau_hat = ht_total(assignment, y, convention)?;
        let tau_hat_a = instance
            .advertisers()
            .iter()
            .map(|&id| ht_advertiser(instance, assignment, y, id, convention))
            .collect::<Result<_>>()?;
        Ok(Self {
            tau_hat,
            tau_hat_a,
            tau: effects.tau,
            tau_a: effects.tau_a.clone(),
            tau_star: effects.tau_star,
            tau_star_se: effects.tau_star_se,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean_est: f64,
    pub bias: f64,
    /// `None` when the reference effect is zero.
    pub relative_bias: Option<f64>,
    pub variance: f64,
    pub se_of_mean: f64,
    /// Standard error of the bias, combining the estimate and reference
    /// uncertainties in quadrature.
    pub bias_se: f64,
}

pub(crate) fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, ss / (n - 1.0))
}

pub fn summarize(estimates: &[f64], tau_star: f64, tau_star_se: f64) -> Result<SummaryStats> {
    if estimates.len() < 2 {
        return Err(invalid_input(format!("need at least 2 estimates, got {}", estimates.len())));
    }
    let (mean_est, variance) = mean_and_variance(estimates);
    let se_of_mean = (variance / estimates.len() as f64).sqrt();
    let bias = mean_est - tau_star;
    Ok(SummaryStats {
        n: estimates.len(),
        mean_est,
        bias,
        relative_bias: (tau_star != 0.0).then(|| bias / tau_star),
        variance,
        se_of_mean,
        bias_se: se_of_mean.hypot(tau_star_se),
    })
}

/// `numerator / denominator`, or `None` when the denominator is not positive.
pub fn variance_ratio(numerator: f64, denominator: f64) -> Option<f64> {
    (denominator > 0.0).then(|| numerator / denominator)
}

/// Monte Carlo mean of the estimator and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub se: f64,
    pub draws: usize,
}

/// Estimate `E[τ̂]` by simulating `draws` independent experiments. The
/// result depends only on `seed`, not on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_expected_estimate(
    instance: &ExperimentInstance,
    scheme: &RandomizationScheme,
    quota: &QuotaConfig,
    kind: ThrottleKind,
    rules: &AuctionRules,
    convention: WeightingConvention,
    draws: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    scheme.validate()?;
    quota.validate(instance)?;
    if draws < 2 {
        return Err(invalid_input("need at least 2 draws"));
    }
    const CHUNK: usize = 4096;
    let n_chunks = draws.div_ceil(CHUNK);
    let partials: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| -> Result<(f64, f64)> {
            let mut rng = derive_stream(seed, &[crate::rng::tag::MONTE_CARLO, c as u64]);
            let n = instance.n_pairs();
            let mut w = vec![false; n];
            let mut y = vec![0.0; n];
            let (mut s, mut ss) = (0.0, 0.0);
            for _ in (c * CHUNK)..((c + 1) * CHUNK).min(draws) {
                let a = draw_assignment(scheme, instance, &mut rng)?;
                plan(instance, &a.z, quota, kind).sample(&mut rng, &mut w);
                realize_payments_into(instance, &a.z, &w, rules, &mut y);
                let t = estimate_unchecked(&a.z, &a.p, &y, convention);
                s += t;
                ss += t * t;
            }
            Ok((s, ss))
        })
        .collect::<Result<_>>()?;
    let (s, ss) = partials.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let n = draws as f64;
    let mean = s / n;
    let var = ((ss - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(MonteCarloEstimate { mean, se: (var / n).sqrt(), draws })
}
