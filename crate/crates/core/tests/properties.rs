use num_traits::Zero;
use proptest::prelude::*;
use throttlab::oracle::{exact_expected_estimate, verify_joint_quota_unbiasedness};
use throttlab::rng::derive_stream;
use throttlab::sim::StudyConfig;
use throttlab::throttle::satisfies_quota;
use throttlab::{
    draw_assignment, realize_payments, throttle, AuctionRules, EnumerationBudget, ExperimentInstance, Mechanism,
    OracleSetup, QuotaConfig, QuotaMode, RandomizationScheme, ThrottleKind, TieRule,
};

/// Bids on a quarter-unit lattice so ties are common.
fn lattice_bids(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u32..16).prop_map(|k| f64::from(k) / 4.0), n)
}

fn grid(nq: std::ops::Range<usize>, na: std::ops::Range<usize>) -> impl Strategy<Value = ExperimentInstance> {
    (nq, na).prop_flat_map(|(nq, na)| {
        let n = nq * na;
        (lattice_bids(n), lattice_bids(n), prop::collection::vec(any::<bool>(), n)).prop_map(move |(b0, b1, x)| {
            let base = ExperimentInstance::complete(nq, na, &b0, &b1).unwrap();
            base.with_potentials(&b0, &b1, &x).unwrap()
        })
    })
}

fn scheme() -> impl Strategy<Value = RandomizationScheme> {
    prop_oneof![
        Just(RandomizationScheme::QueryBalanced),
        Just(RandomizationScheme::PairBalanced),
        (0.05f64..0.95).prop_map(|p| RandomizationScheme::QueryBernoulli { p }),
        (0.05f64..0.95).prop_map(|p| RandomizationScheme::PairBernoulli { p }),
    ]
}

fn rules() -> impl Strategy<Value = AuctionRules> {
    (any::<bool>(), prop::option::of(any::<u64>())).prop_map(|(second, seed)| {
        AuctionRules::new(
            if second { Mechanism::SecondPrice } else { Mechanism::FirstPrice },
            seed.map_or(TieRule::LowestId, |seed| TieRule::SeededRandom { seed }),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_mask_respects_its_quota(
        inst in grid(2..8, 1..4),
        scheme in scheme(),
        q in 0u32..5,
        split in any::<bool>(),
        quota_treatment in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let na = inst.n_advertisers();
        let quota = if split { QuotaConfig::split(vec![(q / 2, q - q / 2); na]) } else { QuotaConfig::joint(vec![q; na]) };
        let kind = if quota_treatment { ThrottleKind::QuotaTreatment } else { ThrottleKind::Standard };
        let mut rng = derive_stream(seed, &[]);
        for _ in 0..8 {
            let a = draw_assignment(&scheme, &inst, &mut rng).unwrap();
            let w = throttle(&inst, &a.z, &quota, kind, &mut rng).unwrap().w;
            prop_assert!(satisfies_quota(&inst, &a.z, &w, &quota));
            if quota_treatment {
                for ((pair, &z), &kept) in inst.pairs().iter().zip(&a.z).zip(&w) {
                    prop_assert!(!(z && !pair.x && kept));
                }
            }
            if !split && !quota_treatment {
                for adv in 0..na {
                    let kept = inst.advertiser_pairs(adv).iter().filter(|&&i| w[i]).count();
                    prop_assert_eq!(kept, inst.eligible_count(adv).min(q as usize));
                }
            }
        }
    }

    #[test]
    fn assignments_follow_their_scheme(inst in grid(2..10, 1..4), scheme in scheme(), seed in any::<u64>()) {
        let a = draw_assignment(&scheme, &inst, &mut derive_stream(seed, &[])).unwrap();
        if scheme.is_query_level() {
            for q in 0..inst.n_queries() {
                let members = inst.query_pairs(q);
                prop_assert!(members.iter().all(|&i| a.z[i] == a.z[members[0]]));
            }
        }
        match scheme {
            RandomizationScheme::PairBalanced => prop_assert_eq!(a.n_treated(), inst.n_pairs() / 2),
            RandomizationScheme::QueryBalanced => {
                let treated = (0..inst.n_queries()).filter(|&q| a.z[inst.query_pairs(q)[0]]).count();
                prop_assert_eq!(treated, inst.n_queries() / 2);
            }
            _ => {}
        }
        prop_assert!(a.p.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn one_payer_per_query(inst in grid(1..6, 1..5), rules in rules(), seed in any::<u64>()) {
        let mut rng = derive_stream(seed, &[]);
        let a = draw_assignment(&RandomizationScheme::PairBernoulli { p: 0.5 }, &inst, &mut rng).unwrap();
        let w: Vec<bool> = (0..inst.n_pairs()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        let y = realize_payments(&inst, &a.z, &w, &rules).unwrap();
        for q in 0..inst.n_queries() {
            let members = inst.query_pairs(q);
            prop_assert!(members.iter().filter(|&&i| y[i] != 0.0).count() <= 1);
            let top = members.iter().filter(|&&i| w[i]).map(|&i| inst.pair(i).bid(a.z[i])).fold(0.0, f64::max);
            let paid: f64 = members.iter().map(|&i| y[i]).sum();
            prop_assert!(paid <= top);
            if rules.mechanism == Mechanism::FirstPrice {
                prop_assert_eq!(paid, top);
            }
        }
        prop_assert!(w.iter().zip(&y).all(|(&k, &v)| k || v == 0.0));
    }

    /// Without throttling there is no cross-query interference, so the
    /// weighted estimator is exactly unbiased under query randomization.
    #[test]
    fn unthrottled_query_randomization_is_exactly_unbiased(
        inst in grid(1..6, 1..4),
        p in prop_oneof![Just(0.5), Just(0.25), Just(0.375)],
        rules in rules(),
    ) {
        let setup = OracleSetup::new(RandomizationScheme::QueryBernoulli { p }).with_rules(rules);
        let r = exact_expected_estimate(&inst, &setup, &EnumerationBudget::default()).unwrap();
        prop_assert!(r.bias.is_zero(), "bias {}", r.bias);
        prop_assert!(r.probability_mass == num_traits::One::one());
    }

    #[test]
    fn saturated_joint_quota_is_unbiased_for_expected_effect(
        inst in grid(3..5, 1..4),
        q in 1u32..3,
        balanced in any::<bool>(),
    ) {
        let scheme = if balanced { RandomizationScheme::QueryBalanced } else { RandomizationScheme::QueryBernoulli { p: 0.5 } };
        let quota = QuotaConfig::joint(vec![q; inst.n_advertisers()]);
        let c = verify_joint_quota_unbiasedness(&inst, &quota, &scheme, &AuctionRules::default(), &EnumerationBudget::default()).unwrap();
        prop_assert!(c.gap.is_zero(), "gap {}", c.gap);
    }

    #[test]
    fn study_config_json_round_trip(
        nq in prop::collection::vec(prop_oneof![Just(6usize), Just(12), Just(90)], 1..3),
        mu1 in prop::collection::vec(0.5f64..3.0, 1..4),
        seed in any::<u64>(),
        split in any::<bool>(),
    ) {
        let config = StudyConfig {
            master_seed: seed,
            n_queries: nq,
            mu1,
            throttle_modes: if split { vec![QuotaMode::Split] } else { vec![QuotaMode::Joint, QuotaMode::None] },
            ..StudyConfig::default()
        };
        let back = StudyConfig::from_json(&config.to_json()).unwrap();
        prop_assert_eq!(back, config);
    }
}
