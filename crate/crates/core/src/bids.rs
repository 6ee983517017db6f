//! Lognormal potential-bid generator.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, invalid_input, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BidCoupling {
    /// Control and treatment bids of a pair share one standard normal draw.
    #[default]
    CommonDraw,
    /// Treatment bids use their own standard normal draw.
    Independent,
}

/// `B(0) ~ Lognormal(mu0, v)`, `B(1) ~ Lognormal(mu1, v)`.
///
/// `v` is the variance of the log bid, so the log-scale standard deviation
/// is `sqrt(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidDistributionConfig {
    pub mu0: f64,
    pub mu1: f64,
    pub v: f64,
    #[serde(default)]
    pub coupling: BidCoupling,
}

impl BidDistributionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(invalid_config(format!("log-scale variance must be positive, got {}", self.v)));
        }
        if !(self.mu0.is_finite() && self.mu1.is_finite()) {
            return Err(invalid_config("log-scale means must be finite"));
        }
        Ok(())
    }
}

/// Draw `(b0, b1)` for `n_pairs` pairs.
pub fn draw_potential_bids<R: Rng + ?Sized>(
    config: &BidDistributionConfig,
    n_pairs: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    config.validate()?;
    if n_pairs == 0 {
        return Err(invalid_input("need at least one pair"));
    }
    let sd = config.v.sqrt();
    let mut b0 = Vec::with_capacity(n_pairs);
    let mut b1 = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let e0: f64 = rng.sample(StandardNormal);
        let e1 = match config.coupling {
            BidCoupling::CommonDraw => e0,
            BidCoupling::Independent => rng.sample(StandardNormal),
        };
        b0.push((config.mu0 + sd * e0).exp());
        b1.push((config.mu1 + sd * e1).exp());
    }
    Ok((b0, b1))
}
