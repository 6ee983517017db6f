//! Simulation laboratory for auction A/B experiments under interference.
//!
//! The crate models each (query, advertiser) pair with two potential bids,
//! realizes payments through single-item auctions, throttles pairs to meet
//! per-advertiser quotas, and estimates revenue effects with
//! Horvitz–Thompson totals. Two engines evaluate the estimators:
//!
//! - [`oracle`] enumerates every assignment and throttle mask of a small
//!   instance and returns exact rational expectations;
//! - [`sim`] replicates the lognormal study grid by seeded, parallel
//!   Monte Carlo and emits one summary row per cell.

pub mod auction;
pub mod bids;
pub mod error;
pub mod estimation;
pub mod instance;
pub mod oracle;
pub mod randomization;
pub mod rng;
pub mod sim;
pub mod throttle;

pub use num_bigint;
pub use num_rational;

pub use auction::{
    realize_payments, run_auction, AuctionOutcome, AuctionRules, Mechanism, PaymentVector, TieRule,
};
pub use bids::{draw_potential_bids, BidCoupling, BidDistributionConfig};
pub use error::{Error, Result};
pub use estimation::{
    ht_advertiser, ht_total, summarize, true_effects, CounterfactualCoupling, EffectReport,
    SummaryStats, TrueEffects, WeightingConvention,
};
pub use instance::{build_toy_instance, ExperimentInstance, InstanceDoc, Pair, ToyInstance};
pub use oracle::{
    closed_form_bias_identical, exact_expected_estimate, EnumerationBudget, OracleReport,
    OracleSetup,
};
pub use randomization::{draw_assignment, Assignment, RandomizationScheme};
pub use sim::{run_study, variance_ratio_study, StudyConfig, StudyRow, TreatmentType};
pub use throttle::{
    throttle, throttle_joint, throttle_quota_treatment, throttle_split, AdvertiserQuota,
    QuotaConfig, QuotaMode, QuotaSpec, ThrottleKind, ThrottleMask,
};
