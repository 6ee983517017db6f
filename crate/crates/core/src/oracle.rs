//! Exact expectations by exhaustive enumeration.
//!
//! Every assignment in the support of the randomization scheme is visited
//! together with every throttle mask it can produce. Within one assignment
//! the masks are equally likely, so the inner loop only counts how often
//! each (winner, price-setting pair) combination occurs; exact rational
//! arithmetic is applied once per assignment. Bids enter as the exact
//! rationals of their `f64` values.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::auction::{settle_query, AuctionRules};
use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::estimation::WeightingConvention;
use crate::instance::ExperimentInstance;
use crate::randomization::{AssignmentSupport, RandomizationScheme};
use crate::throttle::{counterfactual_plan, plan, QuotaConfig, QuotaMode, ThrottleKind, ThrottlePlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_assignments: u128,
    pub max_masks_per_assignment: u128,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self { max_assignments: 1 << 20, max_masks_per_assignment: 1_000_000 }
    }
}

/// Everything that defines the experiment apart from the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSetup {
    pub scheme: RandomizationScheme,
    pub quota: QuotaConfig,
    pub kind: ThrottleKind,
    pub rules: AuctionRules,
    pub convention: WeightingConvention,
}

impl OracleSetup {
    /// Unthrottled bid experiment with first-price auctions and
    /// Horvitz–Thompson weights.
    pub fn new(scheme: RandomizationScheme) -> Self {
        Self {
            scheme,
            quota: QuotaConfig::none(),
            kind: ThrottleKind::Standard,
            rules: AuctionRules::default(),
            convention: WeightingConvention::HorvitzThompson,
        }
    }

    pub fn with_quota(mut self, quota: QuotaConfig) -> Self {
        self.quota = quota;
        self
    }

    pub fn with_kind(mut self, kind: ThrottleKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_rules(mut self, rules: AuctionRules) -> Self {
        self.rules = rules;
        self
    }

    pub fn with_convention(mut self, convention: WeightingConvention) -> Self {
        self.convention = convention;
        self
    }
}

/// Exact results; all money values are exact rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub expected_estimate: BigRational,
    pub tau: BigRational,
    pub tau_star: BigRational,
    /// `E[τ̂] - τ`.
    pub bias: BigRational,
    /// `E[τ̂] - τ*`.
    pub bias_vs_tau_star: BigRational,
    pub probability_mass: BigRational,
    pub n_assignments: u128,
    /// Total (assignment, mask) states visited.
    pub n_states: u128,
}

/// Lossy conversion for display and tolerance checks.
pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("bids are validated finite")
}

struct ExactBids {
    b0: Vec<BigRational>,
    b1: Vec<BigRational>,
}

impl ExactBids {
    fn new(instance: &ExperimentInstance) -> Self {
        Self {
            b0: instance.pairs().iter().map(|p| exact(p.b0)).collect(),
            b1: instance.pairs().iter().map(|p| exact(p.b1)).collect(),
        }
    }

    fn bid(&self, i: usize, treated: bool) -> &BigRational {
        if treated {
            &self.b1[i]
        } else {
            &self.b0[i]
        }
    }
}

/// Occurrence counts of (winner, price-setting pair) over all masks of a plan.
fn settlement_counts(
    instance: &ExperimentInstance,
    z: &[bool],
    plan: &ThrottlePlan,
    rules: &AuctionRules,
) -> (HashMap<(usize, usize), u64>, u128) {
    let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
    let mut masks: u128 = 0;
    plan.for_each_mask(|w| {
        masks += 1;
        for q in 0..instance.n_queries() {
            if let Some(s) = settle_query(instance, q, z, w, rules) {
                *counts.entry((s.winner, s.price_from)).or_default() += 1;
            }
        }
    });
    (counts, masks)
}

fn check_masks(plan: &ThrottlePlan, budget: &EnumerationBudget) -> Result<u128> {
    let m = plan.mask_count();
    if m > budget.max_masks_per_assignment {
        return Err(Error::TooLarge(format!(
            "{m} throttle masks for one assignment exceed the budget of {}",
            budget.max_masks_per_assignment
        )));
    }
    Ok(m)
}

/// Exact expected revenue when every pair is in arm `treated`.
fn expected_revenue(
    instance: &ExperimentInstance,
    treated: bool,
    quota: &QuotaConfig,
    kind: ThrottleKind,
    rules: &AuctionRules,
    bids: &ExactBids,
    budget: &EnumerationBudget,
) -> Result<BigRational> {
    let z = vec![treated; instance.n_pairs()];
    let plan = counterfactual_plan(instance, treated, quota, kind);
    check_masks(&plan, budget)?;
    let (counts, masks) = settlement_counts(instance, &z, &plan, rules);
    let total = counts
        .iter()
        .fold(BigRational::zero(), |acc, (&(_, j), &c)| acc + bids.bid(j, treated) * BigInt::from(c));
    Ok(total / BigInt::from(masks))
}

/// Exact `τ` (unconstrained) and `τ*` (each advertiser's full quota serving
/// the single arm).
pub fn exact_true_effects(
    instance: &ExperimentInstance,
    quota: &QuotaConfig,
    kind: ThrottleKind,
    rules: &AuctionRules,
    budget: &EnumerationBudget,
) -> Result<(BigRational, BigRational)> {
    quota.validate(instance)?;
    let bids = ExactBids::new(instance);
    let none = QuotaConfig::none();
    let tau = expected_revenue(instance, true, &none, kind, rules, &bids, budget)?
        - expected_revenue(instance, false, &none, kind, rules, &bids, budget)?;
    let tau_star = expected_revenue(instance, true, quota, kind, rules, &bids, budget)?
        - expected_revenue(instance, false, quota, kind, rules, &bids, budget)?;
    Ok((tau, tau_star))
}

fn arm_weights(p: &BigRational, convention: WeightingConvention) -> (BigRational, BigRational) {
    match convention {
        WeightingConvention::Unweighted => (BigRational::one(), -BigRational::one()),
        WeightingConvention::HorvitzThompson => (p.recip(), -(BigRational::one() - p).recip()),
    }
}

/// `E[τ̂]` together with `τ` and `τ*`, all exact.
pub fn exact_expected_estimate(
    instance: &ExperimentInstance,
    setup: &OracleSetup,
    budget: &EnumerationBudget,
) -> Result<OracleReport> {
    setup.scheme.validate()?;
    setup.quota.validate(instance)?;
    let support = AssignmentSupport::new(&setup.scheme, instance)?;
    let n_assignments = support.len();
    if n_assignments > budget.max_assignments {
        return Err(Error::TooLarge(format!(
            "{n_assignments} assignments exceed the budget of {}",
            budget.max_assignments
        )));
    }
    let p = support.marginal_exact().clone();
    if setup.convention == WeightingConvention::HorvitzThompson && (p.is_zero() || p.is_one()) {
        return Err(invalid_input("inclusion probability must lie strictly between 0 and 1"));
    }
    let (w1, w0) = arm_weights(&p, setup.convention);
    let bids = ExactBids::new(instance);

    let assignments: Vec<(Vec<bool>, BigRational)> = support.unit_assignments().collect();
    let per_z: Vec<(BigRational, BigRational, u128)> = assignments
        .par_iter()
        .map(|(unit_z, prob)| -> Result<_> {
            let z = support.expand(instance, unit_z).z;
            let plan = plan(instance, &z, &setup.quota, setup.kind);
            check_masks(&plan, budget)?;
            let (counts, masks) = settlement_counts(instance, &z, &plan, &setup.rules);
            let sum = counts.iter().fold(BigRational::zero(), |acc, (&(i, j), &c)| {
                let wt = if z[i] { &w1 } else { &w0 };
                acc + wt * bids.bid(j, z[j]) * BigInt::from(c)
            });
            let conditional = sum / BigInt::from(masks);
            Ok((prob * conditional, prob.clone(), masks))
        })
        .collect::<Result<_>>()?;

    let mut expected = BigRational::zero();
    let mut mass = BigRational::zero();
    let mut n_states: u128 = 0;
    for (e, pr, m) in per_z {
        expected += e;
        mass += pr;
        n_states = n_states.saturating_add(m);
    }
    if !mass.is_one() {
        return Err(Error::Precondition(format!("enumerated probability mass is {mass}, not 1")));
    }

    let (tau, tau_star) = exact_true_effects(instance, &setup.quota, setup.kind, &setup.rules, budget)?;
    Ok(OracleReport {
        bias: &expected - &tau,
        bias_vs_tau_star: &expected - &tau_star,
        expected_estimate: expected,
        tau,
        tau_star,
        probability_mass: mass,
        n_assignments,
        n_states,
    })
}

/// Closed-form bias of the unweighted estimator for `k` identical bidders
/// under independent fair-coin pair randomization:
/// `(2^-k - 1) (r1 - r0) + (1 - 2^-(k-1)) r1`.
pub fn closed_form_bias_identical(k: u32, r0: f64, r1: f64) -> Result<f64> {
    if k == 0 {
        return Err(invalid_input("need at least one bidder"));
    }
    if !(r1 > r0 && r0 > 0.0 && r1.is_finite()) {
        return Err(invalid_input(format!("need r1 > r0 > 0, got r0 = {r0}, r1 = {r1}")));
    }
    let tau = r1 - r0;
    Ok((0.5f64.powi(k as i32) - 1.0) * tau + (1.0 - 0.5f64.powi(k as i32 - 1)) * r1)
}

/// Exact expected estimate against exact `τ*`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasednessCheck {
    pub expected_estimate: BigRational,
    pub tau_star: BigRational,
    /// `E[τ̂] - τ*`.
    pub gap: BigRational,
}

impl From<OracleReport> for UnbiasednessCheck {
    fn from(r: OracleReport) -> Self {
        Self { expected_estimate: r.expected_estimate, tau_star: r.tau_star, gap: r.bias_vs_tau_star }
    }
}

/// Bid treatment with joint quotas under query randomization. Refuses
/// unless every advertiser is saturated (more eligible queries than quota)
/// or every advertiser is unconstrained.
pub fn verify_joint_quota_unbiasedness(
    instance: &ExperimentInstance,
    quota: &QuotaConfig,
    scheme: &RandomizationScheme,
    rules: &AuctionRules,
    budget: &EnumerationBudget,
) -> Result<UnbiasednessCheck> {
    if !scheme.is_query_level() {
        return Err(Error::Precondition(format!("needs query randomization, got {scheme}")));
    }
    let quota = match quota.mode {
        QuotaMode::Split => return Err(Error::Precondition("needs joint quotas, got split".into())),
        QuotaMode::None => QuotaConfig::unconstrained(instance),
        QuotaMode::Joint => quota.clone(),
    };
    quota.validate(instance)?;
    let saturated: Vec<bool> = (0..instance.n_advertisers())
        .map(|a| instance.eligible_count(a) > quota.quotas[a].total as usize)
        .collect();
    if !(saturated.iter().all(|&s| s) || saturated.iter().all(|&s| !s)) {
        let mixed: Vec<String> = saturated
            .iter()
            .enumerate()
            .filter(|(_, &s)| !s)
            .map(|(a, _)| instance.advertisers()[a].to_string())
            .collect();
        return Err(Error::Precondition(format!(
            "advertisers must be all saturated or all unconstrained; not saturated: {}",
            mixed.join(", ")
        )));
    }
    let setup = OracleSetup::new(*scheme).with_quota(quota).with_rules(*rules);
    Ok(exact_expected_estimate(instance, &setup, budget)?.into())
}

/// Quota treatment with split quotas under query randomization. Runs
/// regardless of whether the sufficient conditions hold.
pub fn verify_split_quota_unbiasedness(
    instance: &ExperimentInstance,
    quota: &QuotaConfig,
    scheme: &RandomizationScheme,
    rules: &AuctionRules,
    budget: &EnumerationBudget,
) -> Result<UnbiasednessCheck> {
    if !scheme.is_query_level() {
        return Err(Error::Precondition(format!("needs query randomization, got {scheme}")));
    }
    if quota.mode != QuotaMode::Split {
        return Err(Error::Precondition(format!("needs split quotas, got {}", quota.mode)));
    }
    let setup = OracleSetup::new(*scheme).with_quota(quota.clone()).with_kind(ThrottleKind::QuotaTreatment).with_rules(*rules);
    Ok(exact_expected_estimate(instance, &setup, budget)?.into())
}

/// Which sufficient condition a counterexample violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitCondition {
    BidZeroWhenX0,
    ControlProportionality,
    TreatedProportionality,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdvertiserCounts {
    pub advertiser: u32,
    /// Eligible queries `N_a`.
    pub n_eligible: usize,
    /// Eligible queries with `x = 1`.
    pub n_eligible_x1: usize,
    /// Distinct control counts `N_a^(0)(Z)` seen over the support.
    pub control_counts: BTreeSet<usize>,
    /// Distinct treated `x = 1` counts seen over the support.
    pub treated_x1_counts: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub condition: SplitCondition,
    pub advertiser: u32,
    /// Query-level assignment; empty for assignment-free conditions.
    pub query_z: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionReport {
    /// How the conditions are scoped across advertisers.
    pub interpretation: &'static str,
    pub advertisers: Vec<AdvertiserCounts>,
    pub bid_zero_when_x0: bool,
    /// Pairs with `x = 0` and a nonzero bid.
    pub offending_pairs: Vec<usize>,
    pub control_proportionality: bool,
    pub treated_proportionality: bool,
    pub n_assignments_checked: u128,
    pub first_counterexample: Option<Counterexample>,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.bid_zero_when_x0 && self.control_proportionality && self.treated_proportionality
    }
}

/// Evaluate the three sufficient conditions for split-quota unbiasedness
/// under a query-level scheme, for every advertiser and every assignment in
/// the support. Ratios are compared by cross-multiplication of integers.
pub fn check_split_quota_conditions(
    instance: &ExperimentInstance,
    quota: &QuotaConfig,
    scheme: &RandomizationScheme,
    budget: &EnumerationBudget,
) -> Result<ConditionReport> {
    if !scheme.is_query_level() {
        return Err(invalid_config(format!("conditions are defined over query randomization, got {scheme}")));
    }
    if quota.mode != QuotaMode::Split {
        return Err(invalid_config(format!("conditions need split quotas, got {}", quota.mode)));
    }
    quota.validate(instance)?;
    let support = AssignmentSupport::new(scheme, instance)?;
    if support.len() > budget.max_assignments {
        return Err(Error::TooLarge(format!(
            "{} assignments exceed the budget of {}",
            support.len(),
            budget.max_assignments
        )));
    }

    let offending_pairs: Vec<usize> =
        instance.pairs().iter().enumerate().filter(|(_, p)| !p.x && (p.b0 != 0.0 || p.b1 != 0.0)).map(|(i, _)| i).collect();
    let mut first_counterexample = offending_pairs.first().map(|&i| Counterexample {
        condition: SplitCondition::BidZeroWhenX0,
        advertiser: instance.pair(i).advertiser,
        query_z: Vec::new(),
    });

    let mut advertisers: Vec<AdvertiserCounts> = (0..instance.n_advertisers())
        .map(|a| AdvertiserCounts {
            advertiser: instance.advertisers()[a],
            n_eligible: instance.eligible_count(a),
            n_eligible_x1: instance.advertiser_pairs(a).iter().filter(|&&i| instance.pair(i).x).count(),
            control_counts: BTreeSet::new(),
            treated_x1_counts: BTreeSet::new(),
        })
        .collect();

    let mut control_ok = true;
    let mut treated_ok = true;
    let mut checked: u128 = 0;
    for (unit_z, _) in support.unit_assignments() {
        checked += 1;
        let z = support.expand(instance, &unit_z).z;
        for (a, rec) in advertisers.iter_mut().enumerate() {
            let q = quota.quotas[a];
            let pairs = instance.advertiser_pairs(a);
            let n0 = pairs.iter().filter(|&&i| !z[i]).count();
            let n1x1 = pairs.iter().filter(|&&i| z[i] && instance.pair(i).x).count();
            rec.control_counts.insert(n0);
            rec.treated_x1_counts.insert(n1x1);
            let total = u128::from(q.total);
            let control = u128::from(q.control) * rec.n_eligible as u128 == total * n0 as u128;
            let treated = u128::from(q.treated) * rec.n_eligible_x1 as u128 == total * n1x1 as u128;
            for (ok, holds, cond) in [
                (&mut control_ok, control, SplitCondition::ControlProportionality),
                (&mut treated_ok, treated, SplitCondition::TreatedProportionality),
            ] {
                if !holds {
                    *ok = false;
                    first_counterexample.get_or_insert_with(|| Counterexample {
                        condition: cond,
                        advertiser: rec.advertiser,
                        query_z: unit_z.clone(),
                    });
                }
            }
        }
    }

    Ok(ConditionReport {
        interpretation: "conditions applied to every advertiser",
        advertisers,
        bid_zero_when_x0: offending_pairs.is_empty(),
        offending_pairs,
        control_proportionality: control_ok,
        treated_proportionality: treated_ok,
        n_assignments_checked: checked,
        first_counterexample,
    })
}
