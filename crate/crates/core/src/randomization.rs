//! Randomization schemes producing treatment assignments `Z`.

use std::fmt;

use itertools::Itertools;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Result};
use crate::instance::ExperimentInstance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RandomizationScheme {
    /// Exactly `floor(N_q / 2)` queries treated; every pair follows its query.
    QueryBalanced,
    /// Each query treated independently with probability `p`.
    QueryBernoulli { p: f64 },
    /// Exactly `floor(N / 2)` pairs treated, chosen over all pairs.
    PairBalanced,
    /// Each pair treated independently with probability `p`.
    PairBernoulli { p: f64 },
}

impl RandomizationScheme {
    /// Whether all pairs of a query always share the query's arm.
    pub fn is_query_level(&self) -> bool {
        matches!(self, Self::QueryBalanced | Self::QueryBernoulli { .. })
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::QueryBernoulli { p } | Self::PairBernoulli { p } if !(p > 0.0 && p < 1.0) => {
                Err(invalid_config(format!("Bernoulli probability must lie in (0, 1), got {p}")))
            }
            _ => Ok(()),
        }
    }

    fn units(&self, instance: &ExperimentInstance) -> usize {
        if self.is_query_level() {
            instance.n_queries()
        } else {
            instance.n_pairs()
        }
    }

    /// Marginal inclusion probability of every pair, and the number of
    /// treated units for balanced schemes.
    fn marginal(&self, units: usize) -> Result<(f64, Option<usize>)> {
        self.validate()?;
        match *self {
            Self::QueryBalanced | Self::PairBalanced => {
                if units < 2 {
                    return Err(invalid_config(format!(
                        "balanced randomization needs at least 2 units, got {units}"
                    )));
                }
                let treated = units / 2;
                Ok((treated as f64 / units as f64, Some(treated)))
            }
            Self::QueryBernoulli { p } | Self::PairBernoulli { p } => Ok((p, None)),
        }
    }
}

impl fmt::Display for RandomizationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::QueryBalanced => write!(f, "query_balanced"),
            Self::QueryBernoulli { p } => write!(f, "query_bernoulli({p})"),
            Self::PairBalanced => write!(f, "pair_balanced"),
            Self::PairBernoulli { p } => write!(f, "pair_bernoulli({p})"),
        }
    }
}

/// A realized assignment with per-pair marginal inclusion probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub z: Vec<bool>,
    pub p: Vec<f64>,
    pub scheme: RandomizationScheme,
}

impl Assignment {
    pub fn n_treated(&self) -> usize {
        self.z.iter().filter(|&&t| t).count()
    }

    /// Assignment with every pair in one arm, marginal probability `p`.
    pub fn uniform(n_pairs: usize, treated: bool, p: f64, scheme: RandomizationScheme) -> Self {
        Self { z: vec![treated; n_pairs], p: vec![p; n_pairs], scheme }
    }
}

fn expand(instance: &ExperimentInstance, query_level: bool, unit_z: &[bool]) -> Vec<bool> {
    if query_level {
        instance.pairs().iter().map(|p| unit_z[p.query]).collect()
    } else {
        unit_z.to_vec()
    }
}

pub fn draw_assignment<R: Rng + ?Sized>(
    scheme: &RandomizationScheme,
    instance: &ExperimentInstance,
    rng: &mut R,
) -> Result<Assignment> {
    let units = scheme.units(instance);
    let (p, treated) = scheme.marginal(units)?;
    let unit_z: Vec<bool> = match treated {
        Some(k) => {
            let mut z = vec![false; units];
            for u in index::sample(rng, units, k) {
                z[u] = true;
            }
            z
        }
        None => (0..units).map(|_| rng.random_bool(p)).collect(),
    };
    Ok(Assignment {
        z: expand(instance, scheme.is_query_level(), &unit_z),
        p: vec![p; instance.n_pairs()],
        scheme: *scheme,
    })
}

/// Every assignment with nonzero probability under `scheme`, with exact
/// probabilities.
pub struct AssignmentSupport {
    scheme: RandomizationScheme,
    query_level: bool,
    units: usize,
    treated: Option<usize>,
    p: f64,
    p_exact: BigRational,
}

impl AssignmentSupport {
    pub fn new(scheme: &RandomizationScheme, instance: &ExperimentInstance) -> Result<Self> {
        let units = scheme.units(instance);
        let (p, treated) = scheme.marginal(units)?;
        let p_exact = match *scheme {
            RandomizationScheme::QueryBernoulli { p } | RandomizationScheme::PairBernoulli { p } => {
                BigRational::from_float(p).expect("validated finite")
            }
            _ => BigRational::new(BigInt::from(treated.unwrap()), BigInt::from(units)),
        };
        Ok(Self { scheme: *scheme, query_level: scheme.is_query_level(), units, treated, p, p_exact })
    }

    /// Number of assignments in the support (saturating).
    pub fn len(&self) -> u128 {
        match self.treated {
            Some(k) => binomial(self.units, k),
            None => {
                if self.units >= 127 {
                    u128::MAX
                } else {
                    1u128 << self.units
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Marginal inclusion probability shared by every pair.
    pub fn marginal(&self) -> f64 {
        self.p
    }

    pub fn marginal_exact(&self) -> &BigRational {
        &self.p_exact
    }

    /// Unit-level assignment vectors with their probabilities. Balanced
    /// supports are uniform; Bernoulli supports weight by `p^t (1-p)^(n-t)`.
    pub fn unit_assignments(&self) -> Box<dyn Iterator<Item = (Vec<bool>, BigRational)> + '_> {
        let units = self.units;
        match self.treated {
            Some(k) => {
                let prob = BigRational::new(BigInt::one(), BigInt::from(binomial(units, k)));
                Box::new((0..units).combinations(k).map(move |chosen| {
                    let mut z = vec![false; units];
                    for u in chosen {
                        z[u] = true;
                    }
                    (z, prob.clone())
                }))
            }
            None => {
                let p = self.p_exact.clone();
                let q = BigRational::one() - &p;
                let p_pows = powers(&p, units);
                let q_pows = powers(&q, units);
                Box::new((0u64..(1u64 << units)).map(move |bits| {
                    let z: Vec<bool> = (0..units).map(|u| (bits >> u) & 1 == 1).collect();
                    let t = bits.count_ones() as usize;
                    (z, &p_pows[t] * &q_pows[units - t])
                }))
            }
        }
    }

    /// Pair-level assignment from a unit-level vector.
    pub fn expand(&self, instance: &ExperimentInstance, unit_z: &[bool]) -> Assignment {
        Assignment {
            z: expand(instance, self.query_level, unit_z),
            p: vec![self.p; instance.n_pairs()],
            scheme: self.scheme,
        }
    }

    pub fn is_query_level(&self) -> bool {
        self.query_level
    }
}

fn powers(base: &BigRational, n: usize) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(BigRational::one());
    for k in 1..=n {
        let next = &out[k - 1] * base;
        out.push(next);
    }
    out
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}
