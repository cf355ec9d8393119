//! Market concentration, with/without zero-rating comparisons and grid sweeps.

use std::fmt;

use rayon::prelude::*;

use crate::equilibrium::{discount_equilibrium, enumerate_zre, DiscountOutcome, ZreStatus};
use crate::error::{ModelError, Result};
use crate::market::{allocate, MarketConfig, StrategyMatrix};
use crate::payoff::payoffs_from;

/// Threshold separating "no change" from a signed change.
pub const SIGN_TOL: f64 = 1e-12;

/// Users of each actual CP summed over every ISP column, dummy included.
pub fn cp_users(config: &MarketConfig, theta: &StrategyMatrix) -> Result<Vec<f64>> {
    let alloc = allocate(config, theta)?;
    Ok((0..config.n_cps).map(|i| alloc.cp_users_all_columns(i)).collect())
}

/// Shares of `raw` normalized to sum to 1.
pub fn normalize(raw: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(ModelError::ZeroShares);
    }
    Ok(raw.iter().map(|x| x / total).collect())
}

pub fn cp_shares(config: &MarketConfig, theta: &StrategyMatrix) -> Result<Vec<f64>> {
    normalize(&cp_users(config, theta)?)
}

/// Sum of squared normalized shares.
pub fn hhi_from_shares(raw: &[f64]) -> Result<f64> {
    Ok(normalize(raw)?.iter().map(|s| s * s).sum())
}

pub fn hhi(config: &MarketConfig, theta: &StrategyMatrix) -> Result<f64> {
    hhi_from_shares(&cp_users(config, theta)?)
}

/// The index computed twice: as a sum of squares and as `1/N + N * var`,
/// with the population variance of the normalized shares.
pub fn hhi_variance_identity(raw: &[f64]) -> Result<(f64, f64)> {
    let shares = normalize(raw)?;
    let n = shares.len() as f64;
    let mean = 1.0 / n;
    let var = shares.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    Ok((shares.iter().map(|s| s * s).sum(), 1.0 / n + var * n))
}

/// One grid cell: the selected equilibrium compared with the market where
/// zero-rating does not exist.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub prices: Vec<f64>,
    /// `None` when no equilibrium exists.
    pub selected: Option<StrategyMatrix>,
    pub n_zre: usize,
    pub delta_utility: Vec<f64>,
    pub delta_share: Vec<f64>,
    pub delta_hhi: f64,
    pub pressure: Vec<bool>,
}

impl SweepRecord {
    /// The selected profile as a bitstring, or `NOZRE`.
    pub fn theta_label(&self) -> String {
        self.selected.map_or_else(|| "NOZRE".to_string(), |t| t.to_string())
    }
}

pub fn compare_worlds(config: &MarketConfig) -> Result<SweepRecord> {
    let zre = enumerate_zre(config)?;
    let n = config.n_cps;
    let Some(selected) = zre.selected.filter(|_| zre.status == ZreStatus::EquilibriaFound) else {
        return Ok(SweepRecord {
            prices: config.p.clone(),
            selected: None,
            n_zre: 0,
            delta_utility: vec![0.0; n],
            delta_share: vec![0.0; n],
            delta_hhi: 0.0,
            pressure: vec![false; n],
        });
    };
    let none = StrategyMatrix::zeros(n, config.n_isps);
    let world = |theta: &StrategyMatrix| -> Result<(Vec<f64>, Vec<f64>)> {
        let alloc = allocate(config, theta)?;
        let u = payoffs_from(config, theta, &alloc).cp_utility;
        let users: Vec<f64> = (0..n).map(|i| alloc.cp_users_all_columns(i)).collect();
        Ok((u, users))
    };
    let (u_zr, users_zr) = world(&selected)?;
    let (u_0, users_0) = world(&none)?;
    let (s_zr, s_0) = (normalize(&users_zr)?, normalize(&users_0)?);
    Ok(SweepRecord {
        prices: config.p.clone(),
        selected: Some(selected),
        n_zre: zre.all_zre.len(),
        delta_utility: u_zr.iter().zip(&u_0).map(|(a, b)| a - b).collect(),
        delta_share: s_zr.iter().zip(&s_0).map(|(a, b)| a - b).collect(),
        delta_hhi: hhi_from_shares(&users_zr)? - hhi_from_shares(&users_0)?,
        pressure: zre.pressure,
    })
}

/// Cartesian product of per-ISP price lists, first ISP outermost.
pub fn grid_points(grids: &[Vec<f64>]) -> Vec<Vec<f64>> {
    grids.iter().fold(vec![Vec::new()], |acc, values| {
        acc.iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

fn check_grids(template: &MarketConfig, grids: &[Vec<f64>]) -> Result<()> {
    if grids.len() != template.n_isps {
        return Err(ModelError::InvalidConfig(format!(
            "{} price lists for {} ISPs",
            grids.len(),
            template.n_isps
        )));
    }
    if grids.iter().any(|g| g.is_empty()) {
        return Err(ModelError::InvalidConfig("empty price list".into()));
    }
    Ok(())
}

/// [`compare_worlds`] at every grid point, in [`grid_points`] order.
pub fn grid_sweep(template: &MarketConfig, grids: &[Vec<f64>]) -> Result<Vec<SweepRecord>> {
    check_grids(template, grids)?;
    grid_points(grids)
        .par_iter()
        .map(|p| compare_worlds(&template.with_prices(p)))
        .collect()
}

/// [`discount_equilibrium`] at every grid point, in [`grid_points`] order.
pub fn discount_sweep(
    template: &MarketConfig,
    grids: &[Vec<f64>],
    delta_grid: &[f64],
) -> Result<Vec<(Vec<f64>, DiscountOutcome)>> {
    check_grids(template, grids)?;
    grid_points(grids)
        .par_iter()
        .map(|p| Ok((p.clone(), discount_equilibrium(&template.with_prices(p), delta_grid)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Up,
    Down,
    Flat,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x > SIGN_TOL {
            Sign::Up
        } else if x < -SIGN_TOL {
            Sign::Down
        } else {
            Sign::Flat
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sign::Up => "up",
            Sign::Down => "down",
            Sign::Flat => "flat",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-CP averages over a sweep, plus how many cells moved each way.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSummary {
    pub n_records: usize,
    pub n_no_zre: usize,
    pub mean_delta_utility: Vec<f64>,
    pub mean_delta_share: Vec<f64>,
    pub utility_sign: Vec<Sign>,
    pub share_sign: Vec<Sign>,
    /// `[up, down, flat]` cell counts of the utility change, per CP.
    pub utility_cells: Vec<[usize; 3]>,
    pub share_cells: Vec<[usize; 3]>,
    pub pressure_cells: Vec<usize>,
}

pub fn aggregate_signs(records: &[SweepRecord]) -> Result<SignSummary> {
    let first = records
        .first()
        .ok_or_else(|| ModelError::InvalidConfig("no records to aggregate".into()))?;
    let n = first.delta_utility.len();
    let count = records.len() as f64;
    let mean = |f: &dyn Fn(&SweepRecord) -> f64| records.iter().map(f).sum::<f64>() / count;
    let cells = |f: &dyn Fn(&SweepRecord) -> f64| {
        let mut c = [0usize; 3];
        for r in records {
            c[match Sign::of(f(r)) {
                Sign::Up => 0,
                Sign::Down => 1,
                Sign::Flat => 2,
            }] += 1;
        }
        c
    };
    let mean_delta_utility: Vec<f64> = (0..n).map(|i| mean(&|r| r.delta_utility[i])).collect();
    let mean_delta_share: Vec<f64> = (0..n).map(|i| mean(&|r| r.delta_share[i])).collect();
    Ok(SignSummary {
        n_records: records.len(),
        n_no_zre: records.iter().filter(|r| r.selected.is_none()).count(),
        utility_sign: mean_delta_utility.iter().map(|&x| Sign::of(x)).collect(),
        share_sign: mean_delta_share.iter().map(|&x| Sign::of(x)).collect(),
        utility_cells: (0..n).map(|i| cells(&|r| r.delta_utility[i])).collect(),
        share_cells: (0..n).map(|i| cells(&|r| r.delta_share[i])).collect(),
        pressure_cells: (0..n).map(|i| records.iter().filter(|r| r.pressure[i]).count()).collect(),
        mean_delta_utility,
        mean_delta_share,
    })
}

/// Cells where zero-rating lowered concentration by more than [`SIGN_TOL`].
pub fn concentration_drops(records: &[SweepRecord]) -> Vec<&SweepRecord> {
    records.iter().filter(|r| r.delta_hhi < -SIGN_TOL).collect()
}

/// Cells where only the high-value CP zero-rates but the low-value CP does
/// not lose, or the high-value CP loses.
pub fn exclusion_violations(records: &[SweepRecord], low: usize, high: usize) -> Vec<&SweepRecord> {
    records
        .iter()
        .filter(|r| {
            r.selected.is_some_and(|t| t.row_ones(low) == 0 && t.row_ones(high) > 0)
        })
        .filter(|r| !(r.delta_utility[low] < 0.0 && r.delta_utility[high] >= -SIGN_TOL))
        .collect()
}

/// Cells where only the high-value CP zero-rates.
pub fn exclusion_cells(records: &[SweepRecord], low: usize, high: usize) -> usize {
    records
        .iter()
        .filter(|r| r.selected.is_some_and(|t| t.row_ones(low) == 0 && t.row_ones(high) > 0))
        .count()
}

/// `|HHI(nobody zero-rates) - HHI(everybody zero-rates)|`.
pub fn uniform_zero_rating_hhi_gap(config: &MarketConfig) -> Result<f64> {
    let none = hhi(config, &StrategyMatrix::zeros(config.n_cps, config.n_isps))?;
    let all = hhi(config, &StrategyMatrix::ones(config.n_cps, config.n_isps))?;
    Ok((none - all).abs())
}
