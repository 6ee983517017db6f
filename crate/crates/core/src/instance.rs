//! The fixed "world" an experiment runs on: queries, eligible
//! (query, advertiser) pairs, potential bids and a binary covariate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, invalid_input, Result};

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

/// One eligible (query, advertiser) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    #[serde(rename = "q")]
    pub query: usize,
    #[serde(rename = "a")]
    pub advertiser: u32,
    /// Potential bid under control.
    pub b0: f64,
    /// Potential bid under treatment.
    pub b1: f64,
    #[serde(with = "bit")]
    pub x: bool,
}

impl Pair {
    pub fn new(query: usize, advertiser: u32, b0: f64, b1: f64) -> Self {
        Self { query, advertiser, b0, b1, x: true }
    }

    #[inline]
    pub fn bid(&self, treated: bool) -> f64 {
        if treated {
            self.b1
        } else {
            self.b0
        }
    }
}

mod bit {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!("covariate must be 0 or 1, got {other}"))),
        }
    }
}

/// JSON document form of an [`ExperimentInstance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub queries: usize,
    pub pairs: Vec<Pair>,
}

fn default_schema_version() -> u32 {
    INSTANCE_SCHEMA_VERSION
}

/// A validated experiment instance with query and advertiser indexes.
///
/// Advertiser ids are arbitrary `u32`s; internally they are mapped to dense
/// indexes `0..n_advertisers()` in ascending id order. Quotas and per
/// advertiser effects are reported in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc", into = "InstanceDoc")]
pub struct ExperimentInstance {
    n_queries: usize,
    pairs: Vec<Pair>,
    query_offsets: Vec<usize>,
    query_members: Vec<usize>,
    advertisers: Vec<u32>,
    pair_advertiser: Vec<usize>,
    advertiser_members: Vec<Vec<usize>>,
}

impl ExperimentInstance {
    pub fn new(n_queries: usize, pairs: Vec<Pair>) -> Result<Self> {
        if n_queries == 0 {
            return Err(invalid_input("instance needs at least one query"));
        }
        for (i, p) in pairs.iter().enumerate() {
            if p.query >= n_queries {
                return Err(invalid_input(format!(
                    "pair {i} refers to query {} but there are {n_queries} queries",
                    p.query
                )));
            }
            if !(p.b0.is_finite() && p.b0 >= 0.0 && p.b1.is_finite() && p.b1 >= 0.0) {
                return Err(invalid_input(format!(
                    "pair {i} has invalid potential bids ({}, {})",
                    p.b0, p.b1
                )));
            }
        }

        let mut advertisers: Vec<u32> = pairs.iter().map(|p| p.advertiser).collect();
        advertisers.sort_unstable();
        advertisers.dedup();
        let pair_advertiser: Vec<usize> = pairs
            .iter()
            .map(|p| advertisers.binary_search(&p.advertiser).expect("collected above"))
            .collect();
        let mut advertiser_members = vec![Vec::new(); advertisers.len()];
        for (i, &a) in pair_advertiser.iter().enumerate() {
            advertiser_members[a].push(i);
        }

        let mut counts = vec![0usize; n_queries];
        for p in &pairs {
            counts[p.query] += 1;
        }
        if let Some(q) = counts.iter().position(|&c| c == 0) {
            return Err(invalid_input(format!("query {q} has no eligible pair")));
        }
        let mut query_offsets = Vec::with_capacity(n_queries + 1);
        query_offsets.push(0);
        for c in &counts {
            query_offsets.push(query_offsets.last().unwrap() + c);
        }
        let mut fill = query_offsets.clone();
        let mut query_members = vec![0; pairs.len()];
        for (i, p) in pairs.iter().enumerate() {
            query_members[fill[p.query]] = i;
            fill[p.query] += 1;
        }
        for q in 0..n_queries {
            let members = &query_members[query_offsets[q]..query_offsets[q + 1]];
            let mut seen: Vec<u32> = members.iter().map(|&i| pairs[i].advertiser).collect();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(invalid_input(format!(
                    "query {q} lists the same advertiser more than once"
                )));
            }
        }

        Ok(Self {
            n_queries,
            pairs,
            query_offsets,
            query_members,
            advertisers,
            pair_advertiser,
            advertiser_members,
        })
    }

    /// Every advertiser eligible for every query, pairs ordered query-major.
    pub fn complete(n_queries: usize, n_advertisers: usize, b0: &[f64], b1: &[f64]) -> Result<Self> {
        let n = n_queries * n_advertisers;
        if b0.len() != n || b1.len() != n {
            return Err(invalid_input(format!(
                "expected {n} potential bids, got {} and {}",
                b0.len(),
                b1.len()
            )));
        }
        let pairs = (0..n)
            .map(|i| Pair::new(i / n_advertisers, (i % n_advertisers) as u32, b0[i], b1[i]))
            .collect();
        Self::new(n_queries, pairs)
    }

    /// Same structure with new potential outcomes and covariates.
    pub fn with_potentials(&self, b0: &[f64], b1: &[f64], x: &[bool]) -> Result<Self> {
        let n = self.n_pairs();
        if b0.len() != n || b1.len() != n || x.len() != n {
            return Err(invalid_input("potential outcome vectors must have one entry per pair"));
        }
        if let Some(i) = (0..n).find(|&i| !(b0[i].is_finite() && b0[i] >= 0.0 && b1[i].is_finite() && b1[i] >= 0.0)) {
            return Err(invalid_input(format!("pair {i} has invalid potential bids")));
        }
        let mut out = self.clone();
        for (i, p) in out.pairs.iter_mut().enumerate() {
            p.b0 = b0[i];
            p.b1 = b1[i];
            p.x = x[i];
        }
        Ok(out)
    }

    pub fn n_queries(&self) -> usize {
        self.n_queries
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn n_advertisers(&self) -> usize {
        self.advertisers.len()
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn pair(&self, i: usize) -> &Pair {
        &self.pairs[i]
    }

    /// Pair indexes of query `q`, in ascending pair order.
    pub fn query_pairs(&self, q: usize) -> &[usize] {
        &self.query_members[self.query_offsets[q]..self.query_offsets[q + 1]]
    }

    /// Advertiser ids in dense-index order.
    pub fn advertisers(&self) -> &[u32] {
        &self.advertisers
    }

    pub fn advertiser_index(&self, id: u32) -> Option<usize> {
        self.advertisers.binary_search(&id).ok()
    }

    /// Dense advertiser index of pair `i`.
    pub fn pair_advertiser(&self, i: usize) -> usize {
        self.pair_advertiser[i]
    }

    /// Pair indexes of the advertiser with dense index `a`.
    pub fn advertiser_pairs(&self, a: usize) -> &[usize] {
        &self.advertiser_members[a]
    }

    /// Number of queries advertiser `a` (dense index) is eligible for.
    pub fn eligible_count(&self, a: usize) -> usize {
        self.advertiser_members[a].len()
    }

    /// Number of pairs with covariate x = 1.
    pub fn covariate_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.x).count()
    }

    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            schema_version: INSTANCE_SCHEMA_VERSION,
            queries: self.n_queries,
            pairs: self.pairs.clone(),
        }
    }
}

impl TryFrom<InstanceDoc> for ExperimentInstance {
    type Error = crate::Error;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        if doc.schema_version != INSTANCE_SCHEMA_VERSION {
            return Err(invalid_config(format!(
                "unsupported instance schema_version {} (expected {INSTANCE_SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        Self::new(doc.queries, doc.pairs)
    }
}

impl From<ExperimentInstance> for InstanceDoc {
    fn from(instance: ExperimentInstance) -> Self {
        instance.to_doc()
    }
}

/// Single-auction instances with hand-picked potential bids.
#[derive(Debug, Clone, PartialEq)]
pub enum ToyInstance {
    /// `k` bidders all bidding `r0` under control and `r1` under treatment.
    IdenticalBidders { k: usize, r0: f64, r1: f64 },
    /// Every treated bid beats every control bid; treated bids strictly
    /// decrease with the bidder index.
    DominatingTreatment { b0: Vec<f64>, b1: Vec<f64> },
}

pub fn build_toy_instance(kind: &ToyInstance) -> Result<ExperimentInstance> {
    let (b0, b1) = match kind {
        ToyInstance::IdenticalBidders { k, r0, r1 } => {
            if *k == 0 {
                return Err(invalid_config("identical bidders need k >= 1"));
            }
            if !(*r0 > 0.0 && r1 > r0 && r1.is_finite()) {
                return Err(invalid_config(format!(
                    "identical bidders need R1 > R0 > 0, got R0 = {r0}, R1 = {r1}"
                )));
            }
            (vec![*r0; *k], vec![*r1; *k])
        }
        ToyInstance::DominatingTreatment { b0, b1 } => {
            if b0.is_empty() || b0.len() != b1.len() {
                return Err(invalid_config(
                    "dominating treatment needs equally many control and treatment bids",
                ));
            }
            if let Some(i) = (1..b1.len()).find(|&i| b1[i - 1] <= b1[i]) {
                return Err(invalid_config(format!(
                    "ordering B_i(1) > B_j(1) if i < j violated at bidders {} and {} ({} <= {})",
                    i,
                    i + 1,
                    b1[i - 1],
                    b1[i]
                )));
            }
            let max_control = b0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min_treated = b1.iter().cloned().fold(f64::INFINITY, f64::min);
            if min_treated <= max_control {
                return Err(invalid_config(format!(
                    "ordering B_i(1) > B_j(0) for all i, j violated: min treated bid {min_treated} <= max control bid {max_control}"
                )));
            }
            (b0.clone(), b1.clone())
        }
    };
    let pairs = b0
        .iter()
        .zip(&b1)
        .enumerate()
        .map(|(i, (&c, &t))| Pair::new(0, i as u32 + 1, c, t))
        .collect();
    ExperimentInstance::new(1, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_bidders_shape() {
        let inst = build_toy_instance(&ToyInstance::IdenticalBidders { k: 4, r0: 5.0, r1: 6.0 }).unwrap();
        assert_eq!(inst.n_pairs(), 4);
        assert_eq!(inst.n_queries(), 1);
        assert!(inst.pairs().iter().all(|p| p.b0 == 5.0 && p.b1 == 6.0 && p.x));
    }

    #[test]
    fn dominating_treatment_accepts_reference_bids() {
        let inst = build_toy_instance(&ToyInstance::DominatingTreatment {
            b0: vec![4.0, 4.25, 4.5, 4.75],
            b1: vec![6.0, 5.5, 5.25, 5.0],
        })
        .unwrap();
        assert_eq!(inst.n_pairs(), 4);
    }

    #[test]
    fn dominating_treatment_rejects_increasing_treated_bids() {
        let err = build_toy_instance(&ToyInstance::DominatingTreatment {
            b0: vec![1.0, 1.0],
            b1: vec![5.0, 6.0],
        })
        .unwrap_err();
        assert!(err.to_string().contains("B_i(1) > B_j(1) if i < j"), "{err}");
    }

    #[test]
    fn identical_bidders_reject_bad_ordering() {
        assert!(build_toy_instance(&ToyInstance::IdenticalBidders { k: 3, r0: 6.0, r1: 5.0 }).is_err());
        assert!(build_toy_instance(&ToyInstance::IdenticalBidders { k: 3, r0: 0.0, r1: 5.0 }).is_err());
    }

    #[test]
    fn rejects_duplicate_pairs_and_empty_queries() {
        let dup = vec![Pair::new(0, 1, 1.0, 1.0), Pair::new(0, 1, 2.0, 2.0)];
        assert!(ExperimentInstance::new(1, dup).is_err());
        let gap = vec![Pair::new(0, 1, 1.0, 1.0)];
        assert!(ExperimentInstance::new(2, gap).is_err());
        let negative = vec![Pair::new(0, 1, -1.0, 1.0)];
        assert!(ExperimentInstance::new(1, negative).is_err());
    }

    #[test]
    fn indexes_are_consistent() {
        let inst = ExperimentInstance::complete(3, 2, &[1.0; 6], &[2.0; 6]).unwrap();
        assert_eq!(inst.query_pairs(1), &[2, 3]);
        assert_eq!(inst.advertiser_pairs(1), &[1, 3, 5]);
        assert_eq!(inst.eligible_count(0), 3);
        assert_eq!(inst.advertiser_index(1), Some(1));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let inst = ExperimentInstance::new(
            2,
            vec![
                Pair { query: 0, advertiser: 9, b0: 0.1, b1: 1.0 / 3.0, x: false },
                Pair::new(1, 2, 2.5, 4.75),
            ],
        )
        .unwrap();
        let json = serde_json::to_string(&inst).unwrap();
        assert!(json.contains("\"x\":0"));
        let back: ExperimentInstance = serde_json::from_str(&json).unwrap();
        assert_eq!(back, inst);
    }
}
