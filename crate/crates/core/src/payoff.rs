//! CP utilities and ISP revenues under a zero-rating profile.

use crate::error::Result;
use crate::market::{allocate, AllocationTable, MarketConfig, StrategyMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct PayoffVector {
    pub cp_utility: Vec<f64>,
    pub isp_revenue: Vec<f64>,
    /// `per_pair_cp[i][j]`: what CP `i` earns through ISP `j`.
    pub per_pair_cp: Vec<Vec<f64>>,
    /// `per_pair_isp[j][i]`: what ISP `j` earns through CP `i`.
    pub per_pair_isp: Vec<Vec<f64>>,
}

pub fn payoffs(config: &MarketConfig, theta: &StrategyMatrix) -> Result<PayoffVector> {
    let alloc = allocate(config, theta)?;
    Ok(payoffs_from(config, theta, &alloc))
}

/// Payoffs for an allocation that was already computed for `theta`.
pub fn payoffs_from(
    config: &MarketConfig,
    theta: &StrategyMatrix,
    alloc: &AllocationTable,
) -> PayoffVector {
    let (n, m) = (config.n_cps, config.n_isps);
    let mut per_pair_cp = vec![vec![0.0; m]; n];
    let mut per_pair_isp = vec![vec![0.0; n]; m];
    for i in 0..n {
        for j in 0..m {
            let users = alloc.x_effective[i][j];
            let (cp, isp) = if theta.get(i, j) {
                let fee = config.delta[j] * config.p[j];
                ((config.q[i] - fee) * users, fee * users)
            } else {
                (config.q[i] * users * config.c, config.p[j] * users * config.c)
            };
            per_pair_cp[i][j] = cp;
            per_pair_isp[j][i] = isp;
        }
    }
    PayoffVector {
        cp_utility: per_pair_cp.iter().map(|r| r.iter().sum()).collect(),
        isp_revenue: per_pair_isp.iter().map(|r| r.iter().sum()).collect(),
        per_pair_cp,
        per_pair_isp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::sample::{random_config, random_theta};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn no_zero_rating_low_value_cp() {
        let pv = payoffs(&presets::benchmark(), &StrategyMatrix::zeros(2, 2)).unwrap();
        assert_abs_diff_eq!(pv.cp_utility[0], 0.08, epsilon = 1e-12);
    }

    #[test]
    fn single_relation_margin() {
        let cfg = presets::benchmark().with_prices(&[0.4, 1.0]);
        let theta = StrategyMatrix::from_bitstring(2, 2, "0010").unwrap();
        let pv = payoffs(&cfg, &theta).unwrap();
        assert_abs_diff_eq!(pv.per_pair_cp[1][0], 0.36, epsilon = 1e-12);
    }

    #[test]
    fn zero_margin_gives_zero_utility() {
        let cfg = presets::benchmark().with_prices(&[0.4, 1.0]);
        let theta = StrategyMatrix::from_bitstring(2, 2, "1000").unwrap();
        assert_eq!(payoffs(&cfg, &theta).unwrap().per_pair_cp[0][0], 0.0);
    }

    proptest! {
        #[test]
        fn payoffs_scale_with_prices(seed in any::<u64>(), k in 0.1f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = random_config(&mut rng, 2, 2);
            let theta = random_theta(&mut rng, 2, 2);
            let base = payoffs(&cfg, &theta).unwrap();
            let scaled_cfg = MarketConfig {
                q: cfg.q.iter().map(|v| v * k).collect(),
                p: cfg.p.iter().map(|v| v * k).collect(),
                ..cfg.clone()
            };
            let scaled = payoffs(&scaled_cfg, &theta).unwrap();
            for (a, b) in base.cp_utility.iter().zip(&scaled.cp_utility) {
                prop_assert!((a * k - b).abs() < 1e-12);
            }
            for (a, b) in base.isp_revenue.iter().zip(&scaled.isp_revenue) {
                prop_assert!((a * k - b).abs() < 1e-12);
            }
        }

        #[test]
        fn only_plain_cells_depend_on_c(seed in any::<u64>(), c_lo in 0.05f64..0.5, bump in 0.01f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = MarketConfig { c: c_lo, ..random_config(&mut rng, 2, 3) };
            let hi = MarketConfig { c: c_lo + bump, ..cfg.clone() };
            let theta = random_theta(&mut rng, 2, 3);
            let a = payoffs(&cfg, &theta).unwrap();
            let b = payoffs(&hi, &theta).unwrap();
            for i in 0..2 {
                for j in 0..3 {
                    if theta.get(i, j) {
                        prop_assert_eq!(a.per_pair_cp[i][j], b.per_pair_cp[i][j]);
                        prop_assert_eq!(a.per_pair_isp[j][i], b.per_pair_isp[j][i]);
                    } else {
                        prop_assert!(b.per_pair_cp[i][j] > a.per_pair_cp[i][j]);
                        if cfg.p[j] > 0.0 {
                            prop_assert!(b.per_pair_isp[j][i] > a.per_pair_isp[j][i]);
                        }
                    }
                }
            }
        }
    }
}
