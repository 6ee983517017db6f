use std::path::PathBuf;

use num_traits::Zero;
use throttlab::estimation::monte_carlo_expected_estimate;
use throttlab::num_bigint::BigInt;
use throttlab::num_rational::BigRational;
use throttlab::oracle::{
    check_split_quota_conditions, to_f64, verify_joint_quota_unbiasedness, verify_split_quota_unbiasedness,
};
use throttlab::{
    build_toy_instance, exact_expected_estimate, AuctionRules, EnumerationBudget, Error, ExperimentInstance,
    InstanceDoc, OracleSetup, QuotaConfig, QuotaSpec, RandomizationScheme, ThrottleKind, ToyInstance,
    WeightingConvention,
};

fn fixture(name: &str) -> (ExperimentInstance, QuotaConfig) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    let text = std::fs::read_to_string(path).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let spec: QuotaSpec = serde_json::from_value(doc["experiment"]["quota"].take()).unwrap();
    doc.as_object_mut().unwrap().remove("experiment");
    let inst = ExperimentInstance::try_from(serde_json::from_value::<InstanceDoc>(doc).unwrap()).unwrap();
    let quota = spec.resolve(&inst).unwrap();
    (inst, quota)
}

fn frac(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn pair_coin() -> OracleSetup {
    OracleSetup::new(RandomizationScheme::PairBernoulli { p: 0.5 })
}

#[test]
fn identical_bidders_frozen_values() {
    let inst = build_toy_instance(&ToyInstance::IdenticalBidders { k: 4, r0: 5.0, r1: 6.0 }).unwrap();
    let budget = EnumerationBudget::default();
    let unweighted =
        exact_expected_estimate(&inst, &pair_coin().with_convention(WeightingConvention::Unweighted), &budget).unwrap();
    assert_eq!(unweighted.tau, BigRational::from_integer(1.into()));
    assert_eq!(unweighted.bias, frac(69, 16));
    let ht = exact_expected_estimate(&inst, &pair_coin(), &budget).unwrap();
    assert_eq!(unweighted.expected_estimate, frac(85, 16));
    assert_eq!(ht.bias, frac(77, 8));
}

#[test]
fn dominating_treatment_frozen_value() {
    let inst = build_toy_instance(&ToyInstance::DominatingTreatment {
        b0: vec![4.0, 4.25, 4.5, 4.75],
        b1: vec![6.0, 5.5, 5.25, 5.0],
    })
    .unwrap();
    let r = exact_expected_estimate(
        &inst,
        &pair_coin().with_convention(WeightingConvention::Unweighted),
        &EnumerationBudget::default(),
    )
    .unwrap();
    assert_eq!(r.bias, frac(243, 64));
}

#[test]
fn joint_fixture_is_unbiased_for_expected_effect_only_under_query_randomization() {
    let (inst, quota) = fixture("thm51.json");
    let budget = EnumerationBudget::default();
    let rules = AuctionRules::default();
    let query = verify_joint_quota_unbiasedness(&inst, &quota, &RandomizationScheme::QueryBalanced, &rules, &budget).unwrap();
    assert!(query.gap.is_zero());
    assert_eq!(query.tau_star, frac(65, 32));

    let pair = OracleSetup::new(RandomizationScheme::PairBalanced).with_quota(quota.clone());
    let r = exact_expected_estimate(&inst, &pair, &budget).unwrap();
    assert_eq!(r.bias_vs_tau_star, frac(423, 176));

    let err = verify_joint_quota_unbiasedness(&inst, &quota, &RandomizationScheme::PairBalanced, &rules, &budget);
    assert!(matches!(err, Err(Error::Precondition(_))));
}

#[test]
fn split_fixture_meets_conditions_and_is_unbiased() {
    let (inst, quota) = fixture("thm52.json");
    let budget = EnumerationBudget::default();
    let scheme = RandomizationScheme::QueryBalanced;
    let report = check_split_quota_conditions(&inst, &quota, &scheme, &budget).unwrap();
    assert!(report.all_hold(), "{report:?}");
    let check = verify_split_quota_unbiasedness(&inst, &quota, &scheme, &AuctionRules::default(), &budget).unwrap();
    assert!(check.gap.is_zero());
}

#[test]
fn budget_overflow_is_reported() {
    let (inst, quota) = fixture("thm51.json");
    let tight = EnumerationBudget { max_assignments: 4, ..EnumerationBudget::default() };
    let setup = OracleSetup::new(RandomizationScheme::QueryBalanced).with_quota(quota);
    assert!(matches!(exact_expected_estimate(&inst, &setup, &tight), Err(Error::TooLarge(_))));
}

#[test]
fn monte_carlo_agrees_with_enumeration() {
    let (inst, quota) = fixture("thm51.json");
    let rules = AuctionRules::default();
    for scheme in [RandomizationScheme::QueryBalanced, RandomizationScheme::PairBernoulli { p: 0.5 }] {
        let setup = OracleSetup::new(scheme).with_quota(quota.clone());
        let exact = to_f64(&exact_expected_estimate(&inst, &setup, &EnumerationBudget::default()).unwrap().expected_estimate);
        let mc = monte_carlo_expected_estimate(
            &inst,
            &scheme,
            &quota,
            ThrottleKind::Standard,
            &rules,
            WeightingConvention::HorvitzThompson,
            200_000,
            99,
        )
        .unwrap();
        assert!((mc.mean - exact).abs() <= 4.0 * mc.se, "{scheme}: mc {} ± {} vs {exact}", mc.mean, mc.se);
    }
}
