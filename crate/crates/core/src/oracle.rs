//! Brute-force reference path used to cross-check the closed-form model.
//!
//! Allocation is rebuilt from explicit per-class choice sets, payoffs are
//! summed user class by user class, and stability is checked by trying every
//! single-cell flip. Nothing here calls `allocate`, `payoffs` or `is_zre`.

use crate::error::{ModelError, Result};
use crate::market::{choice_probability, AllocationTable, AuxIndex, MarketConfig, StrategyMatrix};

/// The (auxiliary CP, ISP column) pairs a user class chooses among.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceSet {
    pub pairs: Vec<(AuxIndex, usize)>,
}

impl ChoiceSet {
    /// Every pair, dummy CP and dummy ISP included.
    pub fn full(config: &MarketConfig) -> Self {
        let pairs = (0..config.n_aux() as u32)
            .flat_map(|s| (0..=config.n_isps).map(move |col| (AuxIndex(s), col)))
            .collect();
        ChoiceSet { pairs }
    }

    /// Zero-rated pairs, or every pair if nothing is zero-rated.
    pub fn elastic(config: &MarketConfig, theta: &StrategyMatrix) -> Self {
        let full = Self::full(config);
        let pairs: Vec<_> = full
            .pairs
            .iter()
            .copied()
            .filter(|&(s, col)| pair_zero_rated(theta, s, col))
            .collect();
        if pairs.is_empty() {
            full
        } else {
            ChoiceSet { pairs }
        }
    }

    pub fn contains(&self, s: AuxIndex, col: usize) -> bool {
        self.pairs.contains(&(s, col))
    }
}

fn pair_zero_rated(theta: &StrategyMatrix, s: AuxIndex, col: usize) -> bool {
    if s.is_dummy() || col == 0 {
        return false;
    }
    let mut members = s.members().filter(|&i| i < theta.n_cps()).peekable();
    members.peek().is_some() && members.all(|i| theta.get(i, col - 1))
}

/// Allocation as a mixture of the sticky and the elastic user classes.
pub fn oracle_allocate(config: &MarketConfig, theta: &StrategyMatrix) -> Result<AllocationTable> {
    if theta.n_cps() != config.n_cps || theta.n_isps() != config.n_isps {
        return Err(ModelError::DimensionMismatch {
            got_cps: theta.n_cps(),
            got_isps: theta.n_isps(),
            want_cps: config.n_cps,
            want_isps: config.n_isps,
        });
    }
    let sticky = ChoiceSet::full(config);
    let elastic = ChoiceSet::elastic(config, theta);
    let mut rho = vec![vec![0.0; config.n_isps + 1]; config.n_aux()];
    for (s, row) in rho.iter_mut().enumerate() {
        for (col, cell) in row.iter_mut().enumerate() {
            let aux = AuxIndex(s as u32);
            let from_sticky = choice_probability(&sticky.pairs, aux, col, config)?;
            let from_elastic = choice_probability(&elastic.pairs, aux, col, config)?;
            *cell = (1.0 - config.alpha) * from_sticky + config.alpha * from_elastic;
        }
    }
    let x_pair: Vec<Vec<f64>> = rho
        .iter()
        .map(|r| r.iter().map(|v| v * config.total_users).collect())
        .collect();
    let mut x_effective = vec![vec![0.0; config.n_isps]; config.n_cps];
    for (s, row) in x_pair.iter().enumerate() {
        for cp in AuxIndex(s as u32).members().filter(|&i| i < config.n_cps) {
            for j in 0..config.n_isps {
                x_effective[cp][j] += row[j + 1];
            }
        }
    }
    Ok(AllocationTable {
        rho,
        x_pair,
        x_effective,
    })
}

/// `(cp utilities, isp revenues)` accumulated one user class at a time.
pub fn oracle_payoffs(config: &MarketConfig, theta: &StrategyMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let table = oracle_allocate(config, theta)?;
    let mut u = vec![0.0; config.n_cps];
    let mut r = vec![0.0; config.n_isps];
    for (s, row) in table.x_pair.iter().enumerate() {
        for j in 0..config.n_isps {
            let users = row[j + 1];
            for cp in AuxIndex(s as u32).members().filter(|&i| i < config.n_cps) {
                if theta.get(cp, j) {
                    let fee = config.delta[j] * config.p[j];
                    u[cp] += (config.q[cp] - fee) * users;
                    r[j] += fee * users;
                } else {
                    u[cp] += config.c * config.q[cp] * users;
                    r[j] += config.c * config.p[j] * users;
                }
            }
        }
    }
    Ok((u, r))
}

/// A destabilizing flip found by the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleDeviation {
    pub cp: usize,
    pub isp: usize,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleVerdict {
    Stable,
    Unstable(OracleDeviation),
}

impl OracleVerdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, OracleVerdict::Stable)
    }
}

/// Re-checks every single-cell flip of `theta` from scratch.
pub fn oracle_verify_zre(config: &MarketConfig, theta: &StrategyMatrix) -> Result<OracleVerdict> {
    const TOL: f64 = 1e-12;
    for j in 0..config.n_isps {
        if config.p[j] == 0.0 {
            if let Some(cp) = (0..config.n_cps).find(|&i| !theta.get(i, j)) {
                return Err(ModelError::ForcedCellViolated { cp, isp: j });
            }
        }
    }
    let (u, r) = oracle_payoffs(config, theta)?;
    for cp in 0..config.n_cps {
        for isp in 0..config.n_isps {
            if config.p[isp] == 0.0 {
                continue;
            }
            let mut other = *theta;
            other.set(cp, isp, !theta.get(cp, isp));
            let (u2, r2) = oracle_payoffs(config, &other)?;
            let cp_up = u2[cp] > u[cp] + TOL;
            let isp_up = r2[isp] > r[isp] + TOL;
            let description = if theta.get(cp, isp) {
                if cp_up {
                    Some(format!("CP {} drops zero-rating on ISP {}: {} -> {}", cp + 1, isp + 1, u[cp], u2[cp]))
                } else if isp_up {
                    Some(format!("ISP {} drops zero-rating of CP {}: {} -> {}", isp + 1, cp + 1, r[isp], r2[isp]))
                } else {
                    None
                }
            } else if cp_up && isp_up {
                Some(format!(
                    "CP {} and ISP {} both gain by zero-rating: {} -> {}, {} -> {}",
                    cp + 1,
                    isp + 1,
                    u[cp],
                    u2[cp],
                    r[isp],
                    r2[isp]
                ))
            } else {
                None
            };
            if let Some(description) = description {
                return Ok(OracleVerdict::Unstable(OracleDeviation { cp, isp, description }));
            }
        }
    }
    Ok(OracleVerdict::Stable)
}
