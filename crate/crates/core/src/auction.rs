//! Single-item auction mechanics and per-query payment realization.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};
use crate::instance::ExperimentInstance;
use crate::rng::splitmix64;

/// Realized payment per pair, indexed like the instance's pairs.
pub type PaymentVector = Vec<f64>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// The winner pays its own bid.
    #[default]
    FirstPrice,
    /// The winner pays the highest competing bid, or its own bid when alone.
    SecondPrice,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TieRule {
    /// Among tied top bids the smallest pair index wins.
    #[default]
    LowestId,
    /// Among tied top bids a winner is picked by hashing `seed` with the
    /// tied set, so the choice is reproducible.
    SeededRandom { seed: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AuctionRules {
    #[serde(default)]
    pub mechanism: Mechanism,
    #[serde(default)]
    pub tie: TieRule,
}

impl AuctionRules {
    pub fn new(mechanism: Mechanism, tie: TieRule) -> Self {
        Self { mechanism, tie }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    pub winner: Option<usize>,
    pub price: f64,
    /// One entry per submitted bid, in submission order.
    pub payments: Vec<f64>,
}

/// Winner and price-setting participant of one auction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Settlement {
    pub winner: usize,
    pub price_from: usize,
}

/// Settle an auction over positions `0..n`. `id` gives the pair index used
/// for tie-breaking, `amount` the bid; `active` filters participants.
fn settle(
    n: usize,
    active: impl Fn(usize) -> bool,
    id: impl Fn(usize) -> usize,
    amount: impl Fn(usize) -> f64,
    rules: &AuctionRules,
) -> Option<Settlement> {
    let mut best: Option<(f64, usize)> = None;
    let mut tied = 0usize;
    for pos in (0..n).filter(|&p| active(p)) {
        let a = amount(pos);
        match best {
            None => {
                best = Some((a, pos));
                tied = 1;
            }
            Some((b, bpos)) => {
                if a > b {
                    best = Some((a, pos));
                    tied = 1;
                } else if a == b {
                    tied += 1;
                    if id(pos) < id(bpos) {
                        best = Some((a, pos));
                    }
                }
            }
        }
    }
    let (top, lowest) = best?;

    let winner = match rules.tie {
        TieRule::LowestId => lowest,
        TieRule::SeededRandom { .. } if tied == 1 => lowest,
        TieRule::SeededRandom { seed } => {
            let mut candidates: Vec<usize> = (0..n).filter(|&p| active(p) && amount(p) == top).collect();
            candidates.sort_unstable_by_key(|&p| id(p));
            let pick = splitmix64(seed ^ splitmix64(id(lowest) as u64 ^ ((tied as u64) << 40)));
            candidates[(pick % tied as u64) as usize]
        }
    };

    let price_from = match rules.mechanism {
        Mechanism::FirstPrice => winner,
        Mechanism::SecondPrice => {
            let mut runner_up: Option<(f64, usize)> = None;
            for pos in (0..n).filter(|&p| p != winner && active(p)) {
                let a = amount(pos);
                if runner_up.map_or(true, |(b, _)| a > b) {
                    runner_up = Some((a, pos));
                }
            }
            runner_up.map_or(winner, |(_, pos)| pos)
        }
    };
    Some(Settlement { winner, price_from })
}

/// Run one auction over `(pair index, amount)` bids.
pub fn run_auction(bids: &[(usize, f64)], mechanism: Mechanism, tie: TieRule) -> Result<AuctionOutcome> {
    if let Some(&(pair, amount)) = bids.iter().find(|(_, a)| !(a.is_finite() && *a >= 0.0)) {
        return Err(invalid_input(format!("bid {amount} of pair {pair} is not a finite non-negative amount")));
    }
    let mut ids: Vec<usize> = bids.iter().map(|b| b.0).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid_input("a pair may submit at most one bid"));
    }

    let rules = AuctionRules::new(mechanism, tie);
    let mut payments = vec![0.0; bids.len()];
    let settled = settle(bids.len(), |_| true, |p| bids[p].0, |p| bids[p].1, &rules);
    Ok(match settled {
        None => AuctionOutcome { winner: None, price: 0.0, payments },
        Some(s) => {
            let price = bids[s.price_from].1;
            payments[s.winner] = price;
            AuctionOutcome { winner: Some(bids[s.winner].0), price, payments }
        }
    })
}

/// Settle query `q` over surviving pairs. Returned indexes are pair indexes;
/// the price equals the bid of `price_from` under its own arm.
#[inline]
pub(crate) fn settle_query(
    instance: &ExperimentInstance,
    q: usize,
    z: &[bool],
    w: &[bool],
    rules: &AuctionRules,
) -> Option<Settlement> {
    let members = instance.query_pairs(q);
    settle(
        members.len(),
        |p| w[members[p]],
        |p| members[p],
        |p| {
            let i = members[p];
            instance.pair(i).bid(z[i])
        },
        rules,
    )
    .map(|s| Settlement { winner: members[s.winner], price_from: members[s.price_from] })
}

fn check_lengths(instance: &ExperimentInstance, z: &[bool], w: &[bool]) -> Result<()> {
    let n = instance.n_pairs();
    if z.len() != n || w.len() != n {
        return Err(invalid_input(format!(
            "assignment ({}) and throttle mask ({}) must both have length {n}",
            z.len(),
            w.len()
        )));
    }
    Ok(())
}

/// Payments `Y_i(Z)` of every pair: queries are settled independently over
/// the surviving pairs (`w_i = true`), each bidding its potential bid under
/// its own arm. Throttled pairs pay nothing.
pub fn realize_payments(
    instance: &ExperimentInstance,
    z: &[bool],
    w: &[bool],
    rules: &AuctionRules,
) -> Result<PaymentVector> {
    check_lengths(instance, z, w)?;
    let mut y = vec![0.0; instance.n_pairs()];
    realize_payments_into(instance, z, w, rules, &mut y);
    Ok(y)
}

/// Unchecked variant writing into a caller-provided buffer.
pub(crate) fn realize_payments_into(
    instance: &ExperimentInstance,
    z: &[bool],
    w: &[bool],
    rules: &AuctionRules,
    y: &mut [f64],
) {
    y.fill(0.0);
    for q in 0..instance.n_queries() {
        if let Some(s) = settle_query(instance, q, z, w, rules) {
            y[s.winner] = instance.pair(s.price_from).bid(z[s.price_from]);
        }
    }
}
