//! Quota throttling: which eligible pairs actually reach their auctions.
//!
//! Every throttle here reduces to the same shape. Pairs are partitioned
//! into pools (one per advertiser under joint quotas, one per advertiser and
//! arm under split quotas), and a uniformly random subset of
//! `min(quota, pool size)` survives in each pool, independently across
//! pools. The quota treatment first removes treated pairs with covariate
//! `x = 0` from their pools.

use std::fmt;

use itertools::Itertools;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, invalid_input, Result};
use crate::instance::ExperimentInstance;
use crate::randomization::binomial;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotaMode {
    /// No quota constraint; every eligible pair bids.
    #[default]
    None,
    /// One quota per advertiser shared by both arms.
    Joint,
    /// Separate treatment and control quotas per advertiser.
    Split,
}

impl fmt::Display for QuotaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Joint => "joint",
            Self::Split => "split",
        })
    }
}

/// What the experiment changes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThrottleKind {
    /// Bid treatment: the standard throttle regardless of arm.
    #[default]
    Standard,
    /// Throttling treatment: treated pairs with `x = 0` are dropped before
    /// the standard throttle runs.
    QuotaTreatment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvertiserQuota {
    pub total: u32,
    #[serde(default)]
    pub treated: u32,
    #[serde(default)]
    pub control: u32,
}

impl AdvertiserQuota {
    pub fn joint(total: u32) -> Self {
        Self { total, treated: 0, control: 0 }
    }

    pub fn split(treated: u32, control: u32) -> Self {
        Self { total: treated + control, treated, control }
    }
}

/// Resolved quotas, one entry per advertiser in dense-index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotaConfig {
    pub mode: QuotaMode,
    pub quotas: Vec<AdvertiserQuota>,
}

impl QuotaConfig {
    /// No constraint, independent of any instance.
    pub fn none() -> Self {
        Self { mode: QuotaMode::None, quotas: Vec::new() }
    }

    pub fn unconstrained(instance: &ExperimentInstance) -> Self {
        let quotas = (0..instance.n_advertisers())
            .map(|a| AdvertiserQuota::joint(instance.eligible_count(a) as u32))
            .collect();
        Self { mode: QuotaMode::None, quotas }
    }

    pub fn joint(quotas: Vec<u32>) -> Self {
        Self { mode: QuotaMode::Joint, quotas: quotas.into_iter().map(AdvertiserQuota::joint).collect() }
    }

    pub fn split(quotas: Vec<(u32, u32)>) -> Self {
        Self {
            mode: QuotaMode::Split,
            quotas: quotas.into_iter().map(|(t, c)| AdvertiserQuota::split(t, c)).collect(),
        }
    }

    /// Same quota `total` for every advertiser; split mode halves it.
    pub fn uniform(instance: &ExperimentInstance, mode: QuotaMode, total: u32) -> Result<Self> {
        let n = instance.n_advertisers();
        let quotas = match mode {
            QuotaMode::None => return Ok(Self::unconstrained(instance)),
            QuotaMode::Joint => vec![AdvertiserQuota::joint(total); n],
            QuotaMode::Split => {
                if total % 2 != 0 {
                    return Err(invalid_config(format!(
                        "split quota needs an even total to halve, got {total}"
                    )));
                }
                vec![AdvertiserQuota::split(total / 2, total / 2); n]
            }
        };
        let cfg = Self { mode, quotas };
        cfg.validate(instance)?;
        Ok(cfg)
    }

    /// Quota `fraction * N_q[a]` per advertiser; the product must be integral.
    pub fn from_fraction(instance: &ExperimentInstance, mode: QuotaMode, fraction: f64) -> Result<Self> {
        if mode == QuotaMode::None {
            return Ok(Self::unconstrained(instance));
        }
        let quotas = (0..instance.n_advertisers())
            .map(|a| {
                let total = integral_quota(fraction, instance.eligible_count(a))?;
                match mode {
                    QuotaMode::Split if total % 2 != 0 => Err(invalid_config(format!(
                        "split quota needs an even total to halve, got {total} for advertiser {}",
                        instance.advertisers()[a]
                    ))),
                    QuotaMode::Split => Ok(AdvertiserQuota::split(total / 2, total / 2)),
                    _ => Ok(AdvertiserQuota::joint(total)),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { mode, quotas })
    }

    pub fn validate(&self, instance: &ExperimentInstance) -> Result<()> {
        if self.mode == QuotaMode::None {
            return Ok(());
        }
        if self.quotas.len() != instance.n_advertisers() {
            return Err(invalid_config(format!(
                "{} quotas given for {} advertisers",
                self.quotas.len(),
                instance.n_advertisers()
            )));
        }
        if self.mode == QuotaMode::Split {
            if let Some((a, q)) = self.quotas.iter().enumerate().find(|(_, q)| q.treated + q.control != q.total) {
                return Err(invalid_config(format!(
                    "split quotas of advertiser {} do not add up: {} + {} != {}",
                    instance.advertisers()[a],
                    q.treated,
                    q.control,
                    q.total
                )));
            }
        }
        Ok(())
    }

    fn total(&self, instance: &ExperimentInstance, a: usize) -> usize {
        match self.mode {
            QuotaMode::None => instance.eligible_count(a),
            _ => self.quotas[a].total as usize,
        }
    }
}

/// Integer quota for `fraction` of `eligible`, rejecting non-integral products.
pub fn integral_quota(fraction: f64, eligible: usize) -> Result<u32> {
    if !(fraction.is_finite() && fraction >= 0.0) {
        return Err(invalid_config(format!("quota fraction must be non-negative, got {fraction}")));
    }
    let raw = fraction * eligible as f64;
    let rounded = raw.round();
    if (raw - rounded).abs() > 1e-9 * raw.max(1.0) {
        return Err(invalid_config(format!(
            "quota fraction {fraction} of {eligible} eligible queries is not an integer ({raw})"
        )));
    }
    Ok(rounded as u32)
}

/// Serializable quota description resolved against an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotaSpec {
    pub mode: QuotaMode,
    /// Quota as a fraction of each advertiser's eligible queries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fraction: Option<f64>,
    /// Explicit per-advertiser quotas, in ascending advertiser-id order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_advertiser: Option<Vec<AdvertiserQuota>>,
}

impl QuotaSpec {
    pub fn none() -> Self {
        Self { mode: QuotaMode::None, fraction: None, per_advertiser: None }
    }

    pub fn resolve(&self, instance: &ExperimentInstance) -> Result<QuotaConfig> {
        match (self.mode, self.fraction, &self.per_advertiser) {
            (QuotaMode::None, _, _) => Ok(QuotaConfig::unconstrained(instance)),
            (mode, Some(f), None) => QuotaConfig::from_fraction(instance, mode, f),
            (mode, None, Some(list)) => {
                let quotas = list
                    .iter()
                    .map(|q| match mode {
                        QuotaMode::Joint => AdvertiserQuota::joint(q.total),
                        _ => *q,
                    })
                    .collect();
                let cfg = QuotaConfig { mode, quotas };
                cfg.validate(instance)?;
                Ok(cfg)
            }
            _ => Err(invalid_config("quota needs exactly one of `fraction` or `per_advertiser`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThrottleMask {
    pub w: Vec<bool>,
}

impl ThrottleMask {
    pub fn survivors(&self) -> usize {
        self.w.iter().filter(|&&k| k).count()
    }
}

/// A set of pairs of which `keep` survive, chosen uniformly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Pool {
    pub members: Vec<usize>,
    pub keep: usize,
}

/// The pools realized for one assignment (or counterfactual rollout).
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ThrottlePlan {
    pub n_pairs: usize,
    pub pools: Vec<Pool>,
}

impl ThrottlePlan {
    /// True when every pool keeps all its members.
    pub fn is_deterministic(&self) -> bool {
        self.pools.iter().all(|p| p.keep == p.members.len())
    }

    /// Number of equiprobable masks (saturating).
    pub fn mask_count(&self) -> u128 {
        self.pools
            .iter()
            .map(|p| binomial(p.members.len(), p.keep))
            .fold(1u128, |acc, c| acc.saturating_mul(c))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, w: &mut [bool]) {
        w.fill(false);
        for pool in &self.pools {
            if pool.keep == pool.members.len() {
                for &i in &pool.members {
                    w[i] = true;
                }
            } else {
                for k in index::sample(rng, pool.members.len(), pool.keep) {
                    w[pool.members[k]] = true;
                }
            }
        }
    }

    /// Visit every mask in the support; all are equally likely.
    pub fn for_each_mask(&self, mut visit: impl FnMut(&[bool])) {
        let choices: Vec<Vec<Vec<usize>>> = self
            .pools
            .iter()
            .map(|p| p.members.iter().copied().combinations(p.keep).collect())
            .collect();
        let mut w = vec![false; self.n_pairs];
        let mut odometer = vec![0usize; choices.len()];
        loop {
            w.fill(false);
            for (pool, &k) in choices.iter().zip(&odometer) {
                for &i in &pool[k] {
                    w[i] = true;
                }
            }
            visit(&w);
            let mut d = 0;
            loop {
                if d == odometer.len() {
                    return;
                }
                odometer[d] += 1;
                if odometer[d] < choices[d].len() {
                    break;
                }
                odometer[d] = 0;
                d += 1;
            }
        }
    }
}

/// Pairs that survive the quota-treatment filter.
fn filtered(instance: &ExperimentInstance, z: &[bool], kind: ThrottleKind, i: usize) -> bool {
    kind == ThrottleKind::Standard || !z[i] || instance.pair(i).x
}

pub(crate) fn plan(
    instance: &ExperimentInstance,
    z: &[bool],
    quota: &QuotaConfig,
    kind: ThrottleKind,
) -> ThrottlePlan {
    let mut pools = Vec::new();
    for a in 0..instance.n_advertisers() {
        let eligible = instance.advertiser_pairs(a).iter().copied().filter(|&i| filtered(instance, z, kind, i));
        match quota.mode {
            QuotaMode::None => {
                let members: Vec<usize> = eligible.collect();
                pools.push(Pool { keep: members.len(), members });
            }
            QuotaMode::Joint => {
                let members: Vec<usize> = eligible.collect();
                let keep = members.len().min(quota.quotas[a].total as usize);
                pools.push(Pool { members, keep });
            }
            QuotaMode::Split => {
                let (treated, control): (Vec<usize>, Vec<usize>) = eligible.partition(|&i| z[i]);
                let q = quota.quotas[a];
                pools.push(Pool { keep: treated.len().min(q.treated as usize), members: treated });
                pools.push(Pool { keep: control.len().min(q.control as usize), members: control });
            }
        }
    }
    ThrottlePlan { n_pairs: instance.n_pairs(), pools }
}

/// Plan for the world where every pair is in `treated`'s arm and the
/// advertiser's whole quota serves that arm.
pub(crate) fn counterfactual_plan(
    instance: &ExperimentInstance,
    treated: bool,
    quota: &QuotaConfig,
    kind: ThrottleKind,
) -> ThrottlePlan {
    let z = vec![treated; instance.n_pairs()];
    let pools = (0..instance.n_advertisers())
        .map(|a| {
            let members: Vec<usize> =
                instance.advertiser_pairs(a).iter().copied().filter(|&i| filtered(instance, &z, kind, i)).collect();
            let keep = members.len().min(quota.total(instance, a));
            Pool { members, keep }
        })
        .collect();
    ThrottlePlan { n_pairs: instance.n_pairs(), pools }
}

fn check(instance: &ExperimentInstance, z: &[bool], quota: &QuotaConfig, expected: Option<QuotaMode>) -> Result<()> {
    if z.len() != instance.n_pairs() {
        return Err(invalid_input(format!("assignment has length {}, expected {}", z.len(), instance.n_pairs())));
    }
    if let Some(mode) = expected {
        if quota.mode != mode {
            return Err(invalid_config(format!("expected a {mode} quota, got {}", quota.mode)));
        }
    }
    quota.validate(instance)
}

fn draw<R: Rng + ?Sized>(
    instance: &ExperimentInstance,
    z: &[bool],
    quota: &QuotaConfig,
    kind: ThrottleKind,
    rng: &mut R,
) -> ThrottleMask {
    let mut w = vec![false; instance.n_pairs()];
    plan(instance, z, quota, kind).sample(rng, &mut w);
    ThrottleMask { w }
}

/// Joint throttle: per advertiser a uniform subset of size
/// `min(Q[a], N_q[a])` of its eligible pairs survives. The distribution
/// does not depend on `z`.
pub fn throttle_joint<R: Rng + ?Sized>(
    instance: &ExperimentInstance,
    z: &[bool],
    quota: &QuotaConfig,
    rng: &mut R,
) -> Result<ThrottleMask> {
    check(instance, z, quota, Some(QuotaMode::Joint))?;
    Ok(draw(instance, z, quota, ThrottleKind::Standard, rng))
}

/// Split throttle: per advertiser, treated and control pairs are subsampled
/// independently down to their arm quotas.
pub fn throttle_split<R: Rng + ?Sized>(
    instance: &ExperimentInstance,
    z: &[bool],
    quota: &QuotaConfig,
    rng: &mut R,
) -> Result<ThrottleMask> {
    check(instance, z, quota, Some(QuotaMode::Split))?;
    Ok(draw(instance, z, quota, ThrottleKind::Standard, rng))
}

/// Quota treatment: drop treated pairs with `x = 0`, then apply the
/// configured standard throttle (joint, split or none) to what is left.
pub fn throttle_quota_treatment<R: Rng + ?Sized>(
    instance: &ExperimentInstance,
    z: &[bool],
    quota: &QuotaConfig,
    rng: &mut R,
) -> Result<ThrottleMask> {
    check(instance, z, quota, None)?;
    Ok(draw(instance, z, quota, ThrottleKind::QuotaTreatment, rng))
}

/// Dispatch on the quota mode and throttle kind.
pub fn throttle<R: Rng + ?Sized>(
    instance: &ExperimentInstance,
    z: &[bool],
    quota: &QuotaConfig,
    kind: ThrottleKind,
    rng: &mut R,
) -> Result<ThrottleMask> {
    check(instance, z, quota, None)?;
    Ok(draw(instance, z, quota, kind, rng))
}

/// Mask for the all-treated (`treated = true`) or all-control world, in
/// which each advertiser's full quota serves the single arm.
pub fn throttle_counterfactual<R: Rng + ?Sized>(
    instance: &ExperimentInstance,
    treated: bool,
    quota: &QuotaConfig,
    kind: ThrottleKind,
    rng: &mut R,
) -> Result<ThrottleMask> {
    quota.validate(instance)?;
    let mut w = vec![false; instance.n_pairs()];
    counterfactual_plan(instance, treated, quota, kind).sample(rng, &mut w);
    Ok(ThrottleMask { w })
}

/// Whether `w` respects the quota inequalities for assignment `z`.
pub fn satisfies_quota(instance: &ExperimentInstance, z: &[bool], w: &[bool], quota: &QuotaConfig) -> bool {
    (0..instance.n_advertisers()).all(|a| {
        let pairs = instance.advertiser_pairs(a);
        let q = quota.quotas.get(a);
        match (quota.mode, q) {
            (QuotaMode::None, _) => true,
            (QuotaMode::Joint, Some(q)) => pairs.iter().filter(|&&i| w[i]).count() <= q.total as usize,
            (QuotaMode::Split, Some(q)) => {
                let t = pairs.iter().filter(|&&i| w[i] && z[i]).count();
                let c = pairs.iter().filter(|&&i| w[i] && !z[i]).count();
                t <= q.treated as usize && c <= q.control as usize && q.treated + q.control == q.total
            }
            _ => false,
        }
    })
}
