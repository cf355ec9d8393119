//! Reference parameterizations used by the bundled scenarios and tests.

use crate::market::MarketConfig;

/// Duopoly benchmark: a low-value CP 1 and a high-value CP 2, two ISPs with
/// equal baseline shares, no discount. Prices start at 1.0 and are meant to
/// be swept.
pub fn benchmark() -> MarketConfig {
    MarketConfig {
        n_cps: 2,
        n_isps: 2,
        alpha: 0.5,
        c: 0.5,
        q: vec![0.4, 1.0],
        p: vec![1.0, 1.0],
        delta: vec![1.0, 1.0],
        phi: vec![0.1, 0.4, 0.4, 0.1],
        psi: vec![0.2, 0.4, 0.4],
        total_users: 1.0,
    }
}

/// `{0.0, 0.1, ..., 1.0}`, built as `k / 10` so every point is the nearest
/// double to its decimal.
pub fn price_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

/// The benchmark and its one-parameter variations, by name.
pub fn variants() -> Vec<(&'static str, MarketConfig)> {
    let b = benchmark();
    vec![
        ("benchmark", b.clone()),
        ("c=0.2", MarketConfig { c: 0.2, ..b.clone() }),
        ("c=0.8", MarketConfig { c: 0.8, ..b.clone() }),
        ("alpha=0.2", MarketConfig { alpha: 0.2, ..b.clone() }),
        ("alpha=0.8", MarketConfig { alpha: 0.8, ..b.clone() }),
        ("phi=(0.1,0.2,0.6,0.1)", MarketConfig { phi: vec![0.1, 0.2, 0.6, 0.1], ..b.clone() }),
        ("phi=(0.1,0.6,0.2,0.1)", MarketConfig { phi: vec![0.1, 0.6, 0.2, 0.1], ..b.clone() }),
        ("psi=(0.2,0.2,0.6)", MarketConfig { psi: vec![0.2, 0.2, 0.6], ..b.clone() }),
        ("psi=(0.2,0.6,0.2)", MarketConfig { psi: vec![0.2, 0.6, 0.2], ..b }),
    ]
}
