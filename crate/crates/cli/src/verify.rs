//! Invariant battery run by `zerorating verify`.

use zerorating::analysis::{
    concentration_drops, cp_users, exclusion_violations, grid_points, hhi_variance_identity,
    uniform_zero_rating_hhi_gap, SweepRecord,
};
use zerorating::equilibrium::{enumerate_zre, forced_cells, is_zre};
use zerorating::market::allocate;
use zerorating::oracle::{oracle_allocate, oracle_verify_zre};
use zerorating::{MarketConfig, Result, StrategyMatrix};

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    fn from(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

fn check(name: &'static str, status: Status, detail: String) -> Check {
    Check { name, status, detail }
}

fn profiles_respecting_forced(cfg: &MarketConfig) -> Vec<StrategyMatrix> {
    let forced = forced_cells(cfg);
    StrategyMatrix::all(cfg.n_cps, cfg.n_isps)
        .filter(|t| forced.iter().all(|&(i, j)| t.get(i, j)))
        .collect()
}

fn same_prices(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
}

/// Runs every check over the sweep `records` of `template` on `grids`.
pub fn run(
    template: &MarketConfig,
    grids: &[Vec<f64>],
    records: &[SweepRecord],
    expected_no_zre: Option<&[Vec<f64>]>,
) -> Result<Vec<Check>> {
    let points = grid_points(grids);
    let configs: Vec<MarketConfig> = points.iter().map(|p| template.with_prices(p)).collect();
    let mut out = Vec::new();

    // closed form against the choice-set oracle on every profile
    let (mut gap, mut pairs) = (0.0f64, 0usize);
    let mut disagreements = Vec::new();
    for cfg in &configs {
        for t in profiles_respecting_forced(cfg) {
            let a = allocate(cfg, &t)?;
            let b = oracle_allocate(cfg, &t)?;
            for (x, y) in a.rho.iter().flatten().zip(b.rho.iter().flatten()) {
                gap = gap.max((x - y).abs());
            }
            if is_zre(cfg, &t)? != oracle_verify_zre(cfg, &t)?.is_stable() {
                disagreements.push(format!("{t} at p={:?}", cfg.p));
            }
            pairs += 1;
        }
    }
    out.push(check(
        "oracle allocation",
        Status::from(gap < TOL),
        format!("{pairs} profiles, max gap {gap:.2e}"),
    ));
    out.push(check(
        "oracle equilibrium verdicts",
        Status::from(disagreements.is_empty()),
        format!("{} disagreements {:?}", disagreements.len(), disagreements),
    ));

    let unsound: Vec<String> = records
        .iter()
        .zip(&configs)
        .filter_map(|(r, cfg)| r.selected.map(|t| (t, cfg)))
        .filter_map(|(t, cfg)| match oracle_verify_zre(cfg, &t) {
            Ok(v) if v.is_stable() => None,
            Ok(_) => Some(format!("{t} at p={:?}", cfg.p)),
            Err(e) => Some(e.to_string()),
        })
        .collect();
    out.push(check(
        "selected profiles re-verified",
        Status::from(unsound.is_empty()),
        format!("{} rejected {:?}", unsound.len(), unsound),
    ));

    let mut var_gap = 0.0f64;
    let mut uniform_gap = 0.0f64;
    for cfg in &configs {
        for t in [
            StrategyMatrix::zeros(cfg.n_cps, cfg.n_isps),
            StrategyMatrix::ones(cfg.n_cps, cfg.n_isps),
        ] {
            let (a, b) = hhi_variance_identity(&cp_users(cfg, &t)?)?;
            var_gap = var_gap.max((a - b).abs());
        }
        uniform_gap = uniform_gap.max(uniform_zero_rating_hhi_gap(cfg)?);
    }
    for r in records.iter().zip(&configs).filter_map(|(r, cfg)| r.selected.map(|t| (t, cfg))) {
        let (a, b) = hhi_variance_identity(&cp_users(r.1, &r.0)?)?;
        var_gap = var_gap.max((a - b).abs());
    }
    out.push(check(
        "HHI variance form",
        Status::from(var_gap < TOL),
        format!("max gap {var_gap:.2e}"),
    ));
    out.push(check(
        "HHI with nobody vs everybody zero-rating",
        Status::from(uniform_gap < TOL),
        format!("max gap {uniform_gap:.2e}"),
    ));

    // low-value CP never zero-rates where a higher-value CP does not
    let mut pruning = Vec::new();
    for cfg in &configs {
        for t in enumerate_zre(cfg)?.all_zre {
            for lo in 0..cfg.n_cps {
                for hi in (0..cfg.n_cps).filter(|&hi| cfg.q[lo] < cfg.q[hi]) {
                    if (0..cfg.n_isps).any(|j| t.get(lo, j) && !t.get(hi, j)) {
                        pruning.push(format!("{t} at p={:?}", cfg.p));
                    }
                }
            }
        }
    }
    out.push(check(
        "low-value CP never zero-rates alone",
        Status::from(pruning.is_empty()),
        format!("{} offending equilibria {:?}", pruning.len(), pruning),
    ));

    let duopoly = template.n_cps == 2 && template.q[0] <= template.q[1];
    if duopoly && template.phi[1] <= template.phi[2] {
        let drops = concentration_drops(records);
        let min = records.iter().map(|r| r.delta_hhi).fold(f64::INFINITY, f64::min);
        out.push(check(
            "concentration never drops",
            Status::from(drops.is_empty()),
            format!("min dHHI {min:.3e}, {} cells below -1e-12", drops.len()),
        ));
    } else {
        out.push(check(
            "concentration never drops",
            Status::Skip,
            "needs two CPs with q_1 <= q_2 and phi_1 <= phi_2".into(),
        ));
    }
    if duopoly && template.q[0] < template.q[1] {
        let bad = exclusion_violations(records, 0, 1);
        out.push(check(
            "exclusion hurts the low-value CP",
            Status::from(bad.is_empty()),
            format!("{} violating cells", bad.len()),
        ));
    } else {
        out.push(check(
            "exclusion hurts the low-value CP",
            Status::Skip,
            "needs two CPs with q_1 < q_2".into(),
        ));
    }

    let got: Vec<Vec<f64>> = records.iter().filter(|r| r.selected.is_none()).map(|r| r.prices.clone()).collect();
    let zero = records
        .iter()
        .filter(|r| r.selected.is_none())
        .all(|r| r.delta_utility.iter().chain(&r.delta_share).all(|&d| d == 0.0) && r.delta_hhi == 0.0);
    match expected_no_zre {
        Some(want) => {
            let matches = got.len() == want.len() && want.iter().all(|w| got.iter().any(|g| same_prices(g, w)));
            out.push(check(
                "cells without equilibrium",
                Status::from(matches && zero),
                format!("found {got:?}, expected {want:?}"),
            ));
        }
        None => out.push(check(
            "cells without equilibrium",
            Status::from(zero),
            format!("found {got:?} (no expectation given)"),
        )),
    }
    Ok(out)
}

pub fn render(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    checks
        .iter()
        .map(|c| format!("{:<width$}  {}  {}\n", c.name, c.status.label(), c.detail))
        .collect()
}
