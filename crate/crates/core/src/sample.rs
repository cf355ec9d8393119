//! Seeded random markets for fuzzing and property tests.

use rand::Rng;

use crate::market::{MarketConfig, StrategyMatrix};

/// Positive shares summing to 1; the last entry absorbs rounding.
pub fn random_shares<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut shares: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = shares[..len - 1].iter().sum();
    shares[len - 1] = 1.0 - head;
    shares
}

/// A valid market with prices on the 0.1 grid (so some ISPs may be free)
/// and every other parameter drawn uniformly.
pub fn random_config<R: Rng + ?Sized>(rng: &mut R, n_cps: usize, n_isps: usize) -> MarketConfig {
    MarketConfig {
        n_cps,
        n_isps,
        alpha: rng.gen_range(0.0..=1.0),
        c: rng.gen_range(0.05..=1.0),
        q: (0..n_cps).map(|_| rng.gen_range(0.05..=1.0)).collect(),
        p: (0..n_isps).map(|_| rng.gen_range(0..=10) as f64 / 10.0).collect(),
        delta: (0..n_isps).map(|_| rng.gen_range(0.1..=1.0)).collect(),
        phi: random_shares(rng, 1 << n_cps),
        psi: random_shares(rng, n_isps + 1),
        total_users: 1.0,
    }
}

pub fn random_theta<R: Rng + ?Sized>(rng: &mut R, n_cps: usize, n_isps: usize) -> StrategyMatrix {
    let mut theta = StrategyMatrix::zeros(n_cps, n_isps);
    for i in 0..n_cps {
        for j in 0..n_isps {
            theta.set(i, j, rng.gen_bool(0.5));
        }
    }
    theta
}
