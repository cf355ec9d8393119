//! Zero-rating equilibria (ZRE), their selection, zero-rating pressure,
//! best-response dynamics and the ISP discount game.
//!
//! Stability is judged on single-cell deviations. A zero-rating relation is a
//! contract between one CP and one ISP: an existing relation is broken if
//! either side strictly gains by cancelling it, and a missing relation is
//! only a profitable deviation if both sides strictly gain by adding it.
//! Cells of ISPs with price 0 are always zero-rated and never deviate.

use std::collections::HashSet;
use std::fmt;

use crate::error::{ModelError, Result};
use crate::market::{allocate, MarketConfig, StrategyMatrix};
use crate::payoff::payoffs_from;

/// A payoff change counts as a gain only above this margin.
pub const GAIN_TOL: f64 = 1e-12;

/// Largest CP x ISP cell count accepted by exhaustive enumeration.
pub const MAX_ENUM_CELLS: usize = 20;

/// Cells `(cp, isp)` clamped to 1 because the ISP charges nothing.
pub fn forced_cells(config: &MarketConfig) -> Vec<(usize, usize)> {
    (0..config.n_cps)
        .flat_map(|i| (0..config.n_isps).map(move |j| (i, j)))
        .filter(|&(_, j)| config.p[j] == 0.0)
        .collect()
}

fn is_forced(config: &MarketConfig, isp: usize) -> bool {
    config.p[isp] == 0.0
}

fn forced_profile(config: &MarketConfig) -> StrategyMatrix {
    let mut m = StrategyMatrix::zeros(config.n_cps, config.n_isps);
    for (i, j) in forced_cells(config) {
        m.set(i, j, true);
    }
    m
}

fn check_forced(config: &MarketConfig, theta: &StrategyMatrix) -> Result<()> {
    config.check_theta(theta)?;
    match forced_cells(config).into_iter().find(|&(i, j)| !theta.get(i, j)) {
        Some((cp, isp)) => Err(ModelError::ForcedCellViolated { cp, isp }),
        None => Ok(()),
    }
}

/// Who profits from a destabilizing single-cell flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviationKind {
    /// Both sides gain by adding the relation.
    Add,
    CancelByCp,
    CancelByIsp,
}

/// A profitable single-cell deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub cp: usize,
    pub isp: usize,
    pub kind: DeviationKind,
    pub cp_gain: f64,
    pub isp_gain: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (cp, isp) = (self.cp + 1, self.isp + 1);
        match self.kind {
            DeviationKind::Add => write!(
                f,
                "CP {cp} and ISP {isp} both gain by adding zero-rating (+{:.3e} / +{:.3e})",
                self.cp_gain, self.isp_gain
            ),
            DeviationKind::CancelByCp => write!(
                f,
                "CP {cp} gains {:.3e} by cancelling zero-rating with ISP {isp}",
                self.cp_gain
            ),
            DeviationKind::CancelByIsp => write!(
                f,
                "ISP {isp} gains {:.3e} by cancelling zero-rating with CP {cp}",
                self.isp_gain
            ),
        }
    }
}

/// Classifies one flip of cell `(cp, isp)` given the gains of both sides.
/// `currently_on` is the cell value before the flip.
pub fn deviation_kind(currently_on: bool, cp_gain: f64, isp_gain: f64) -> Option<DeviationKind> {
    let cp_wins = cp_gain > GAIN_TOL;
    let isp_wins = isp_gain > GAIN_TOL;
    if currently_on {
        if cp_wins {
            Some(DeviationKind::CancelByCp)
        } else if isp_wins {
            Some(DeviationKind::CancelByIsp)
        } else {
            None
        }
    } else if cp_wins && isp_wins {
        Some(DeviationKind::Add)
    } else {
        None
    }
}

/// Utilities and revenues only; what the search needs per profile.
#[derive(Debug, Clone)]
struct Outcome {
    u: Vec<f64>,
    r: Vec<f64>,
}

fn outcome(config: &MarketConfig, theta: &StrategyMatrix) -> Result<Outcome> {
    let alloc = allocate(config, theta)?;
    let pv = payoffs_from(config, theta, &alloc);
    Ok(Outcome {
        u: pv.cp_utility,
        r: pv.isp_revenue,
    })
}

fn first_violation<F>(config: &MarketConfig, theta: &StrategyMatrix, mut eval: F) -> Result<Option<Violation>>
where
    F: FnMut(&StrategyMatrix) -> Result<Outcome>,
{
    let here = eval(theta)?;
    for i in 0..config.n_cps {
        for j in 0..config.n_isps {
            if is_forced(config, j) {
                continue;
            }
            let there = eval(&theta.flipped(i, j))?;
            let cp_gain = there.u[i] - here.u[i];
            let isp_gain = there.r[j] - here.r[j];
            if let Some(kind) = deviation_kind(theta.get(i, j), cp_gain, isp_gain) {
                return Ok(Some(Violation {
                    cp: i,
                    isp: j,
                    kind,
                    cp_gain,
                    isp_gain,
                }));
            }
        }
    }
    Ok(None)
}

/// First profitable deviation from `theta`, scanning cells row-major.
pub fn find_violation(config: &MarketConfig, theta: &StrategyMatrix) -> Result<Option<Violation>> {
    check_forced(config, theta)?;
    first_violation(config, theta, |t| outcome(config, t))
}

pub fn is_zre(config: &MarketConfig, theta: &StrategyMatrix) -> Result<bool> {
    Ok(find_violation(config, theta)?.is_none())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZreStatus {
    EquilibriaFound,
    NoZre,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZreResult {
    pub status: ZreStatus,
    /// Every equilibrium, in increasing encoding order.
    pub all_zre: Vec<StrategyMatrix>,
    pub selected: Option<StrategyMatrix>,
    /// Per-CP pressure flags for the selected profile; all false on NO_ZRE.
    pub pressure: Vec<bool>,
}

/// Payoffs of every profile, indexed by encoding.
struct ProfileTable {
    outcomes: Vec<Option<Outcome>>,
}

impl ProfileTable {
    /// Fills in only profiles that respect the forced cells; no search step
    /// ever leaves that set.
    fn build(config: &MarketConfig) -> Result<Self> {
        let forced = forced_profile(config).encoding();
        let mut outcomes = vec![None; 1usize << config.n_cells()];
        for theta in StrategyMatrix::all(config.n_cps, config.n_isps) {
            if theta.encoding() & forced == forced {
                outcomes[theta.encoding() as usize] = Some(outcome(config, &theta)?);
            }
        }
        Ok(ProfileTable { outcomes })
    }

    fn get(&self, theta: &StrategyMatrix) -> &Outcome {
        self.outcomes[theta.encoding() as usize]
            .as_ref()
            .expect("profile outside the forced-cell set")
    }

    fn equilibria(&self, config: &MarketConfig) -> Vec<StrategyMatrix> {
        StrategyMatrix::all(config.n_cps, config.n_isps)
            .filter(|t| self.outcomes[t.encoding() as usize].is_some())
            .filter(|t| {
                first_violation(config, t, |x| Ok(self.get(x).clone()))
                    .expect("table lookups are infallible")
                    .is_none()
            })
            .collect()
    }
}

fn check_capacity(config: &MarketConfig) -> Result<()> {
    config.validate()?;
    if config.n_cells() > MAX_ENUM_CELLS {
        return Err(ModelError::Capacity {
            cells: config.n_cells(),
            limit: MAX_ENUM_CELLS,
        });
    }
    Ok(())
}

/// Exhaustively lists every ZRE, selects one and flags pressure on it.
pub fn enumerate_zre(config: &MarketConfig) -> Result<ZreResult> {
    check_capacity(config)?;
    let table = ProfileTable::build(config)?;
    let all_zre = table.equilibria(config);
    if all_zre.is_empty() {
        return Ok(ZreResult {
            status: ZreStatus::NoZre,
            all_zre,
            selected: None,
            pressure: vec![false; config.n_cps],
        });
    }
    let selected = select_zre(config, &all_zre)?;
    let pressure = detect_pressure(config, &selected)?;
    Ok(ZreResult {
        status: ZreStatus::EquilibriaFound,
        all_zre,
        selected: Some(selected),
        pressure,
    })
}

/// Ordering key of [`select_zre`]; larger wins.
pub fn selection_key(config: &MarketConfig, theta: &StrategyMatrix) -> (u32, usize, usize, u64) {
    let top_cp = config.highest_value_cp();
    (
        theta.count_ones(),
        theta.row_ones(top_cp),
        theta.col_ones(config.n_isps - 1),
        !theta.encoding(),
    )
}

/// Picks the equilibrium with the most zero-rated relations, then the most
/// relations of the highest-value CP, then the most relations of the last
/// ISP, then the lowest encoding.
pub fn select_zre(config: &MarketConfig, all_zre: &[StrategyMatrix]) -> Result<StrategyMatrix> {
    all_zre
        .iter()
        .copied()
        .max_by_key(|t| selection_key(config, t))
        .ok_or(ModelError::EmptyEquilibriumSet)
}

/// CP `i` is under pressure when `selected` has it zero-rating with some ISP
/// that it would leave alone if no competitor zero-rated.
///
/// The counterfactual clears every other CP's voluntary relations and picks
/// CP `i`'s utility-maximizing row; among rows within [`GAIN_TOL`] of the
/// best, the one with the fewest relations (then the lowest encoding) wins.
pub fn detect_pressure(config: &MarketConfig, selected: &StrategyMatrix) -> Result<Vec<bool>> {
    check_forced(config, selected)?;
    (0..config.n_cps)
        .map(|i| {
            let alone = solo_best_response(config, i)?;
            Ok((0..config.n_isps).any(|j| !is_forced(config, j) && selected.get(i, j) && !alone.get(i, j)))
        })
        .collect()
}

/// CP `cp`'s preferred row when no other CP zero-rates voluntarily.
pub fn solo_best_response(config: &MarketConfig, cp: usize) -> Result<StrategyMatrix> {
    let base = forced_profile(config);
    let free: Vec<usize> = (0..config.n_isps).filter(|&j| !is_forced(config, j)).collect();
    let rows: Vec<(StrategyMatrix, f64)> = (0..1usize << free.len())
        .map(|row| {
            let mut t = base;
            for (k, &j) in free.iter().enumerate() {
                t.set(cp, j, row >> k & 1 == 1);
            }
            Ok((t, outcome(config, &t)?.u[cp]))
        })
        .collect::<Result<_>>()?;
    let best = rows.iter().map(|(_, u)| *u).fold(f64::NEG_INFINITY, f64::max);
    let pick = rows
        .iter()
        .filter(|(_, u)| *u + GAIN_TOL >= best)
        .min_by_key(|(t, _)| (t.count_ones(), t.encoding()))
        .expect("at least the forced row exists");
    Ok(pick.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agent {
    Cp(usize),
    Isp(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsStatus {
    FixedPoint,
    /// A (profile, next agent) state repeated; `period` counts flips.
    Cycle { period: usize },
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTrace {
    pub status: DynamicsStatus,
    /// Profiles visited, starting with the initial one.
    pub profiles: Vec<StrategyMatrix>,
    /// Number of flips made.
    pub steps: usize,
}

impl DynamicsTrace {
    pub fn last(&self) -> StrategyMatrix {
        *self.profiles.last().expect("trace starts with a profile")
    }
}

/// The single flip an agent would make, if any.
///
/// An agent may cancel any of its relations that it gains from cancelling,
/// and may add a relation only when the counterparty gains too. Among those
/// moves it takes the largest own gain, first cell on ties.
pub fn best_move(
    config: &MarketConfig,
    theta: &StrategyMatrix,
    agent: Agent,
) -> Result<Option<(usize, usize)>> {
    let cells: Vec<(usize, usize)> = match agent {
        Agent::Cp(i) => (0..config.n_isps).map(|j| (i, j)).collect(),
        Agent::Isp(j) => (0..config.n_cps).map(|i| (i, j)).collect(),
    };
    let here = outcome(config, theta)?;
    let mut best: Option<((usize, usize), f64)> = None;
    for (i, j) in cells {
        if is_forced(config, j) {
            continue;
        }
        let there = outcome(config, &theta.flipped(i, j))?;
        let cp_gain = there.u[i] - here.u[i];
        let isp_gain = there.r[j] - here.r[j];
        let (own, other) = match agent {
            Agent::Cp(_) => (cp_gain, isp_gain),
            Agent::Isp(_) => (isp_gain, cp_gain),
        };
        let feasible = own > GAIN_TOL && (theta.get(i, j) || other > GAIN_TOL);
        if feasible && best.map_or(true, |(_, g)| own > g) {
            best = Some(((i, j), own));
        }
    }
    Ok(best.map(|(cell, _)| cell))
}

/// Round-robin single-agent best responses: CP rows in order, then ISP
/// columns in order.
pub fn best_response_dynamics(
    config: &MarketConfig,
    start: &StrategyMatrix,
    max_steps: usize,
) -> Result<DynamicsTrace> {
    config.validate()?;
    check_forced(config, start)?;
    let agents: Vec<Agent> = (0..config.n_cps)
        .map(Agent::Cp)
        .chain((0..config.n_isps).map(Agent::Isp))
        .collect();

    let mut theta = *start;
    let mut profiles = vec![theta];
    let mut steps = 0;
    let mut idle = 0;
    let mut seen: HashSet<(u64, usize)> = HashSet::new();
    let mut step_at: Vec<((u64, usize), usize)> = Vec::new();
    let mut turn = 0;
    loop {
        if idle == agents.len() {
            return Ok(DynamicsTrace {
                status: DynamicsStatus::FixedPoint,
                profiles,
                steps,
            });
        }
        let state = (theta.encoding(), turn);
        if !seen.insert(state) {
            let first = step_at.iter().find(|(s, _)| *s == state).map_or(0, |(_, k)| *k);
            return Ok(DynamicsTrace {
                status: DynamicsStatus::Cycle {
                    period: steps - first,
                },
                profiles,
                steps,
            });
        }
        step_at.push((state, steps));
        if steps == max_steps {
            return Ok(DynamicsTrace {
                status: DynamicsStatus::Inconclusive,
                profiles,
                steps,
            });
        }
        match best_move(config, &theta, agents[turn])? {
            Some((i, j)) => {
                theta = theta.flipped(i, j);
                profiles.push(theta);
                steps += 1;
                idle = 0;
            }
            None => idle += 1,
        }
        turn = (turn + 1) % agents.len();
    }
}

/// `{0.0, 0.1, ..., 1.0}`.
pub fn default_delta_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscountStatus {
    Found,
    NoDiscountEquilibrium,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscountOutcome {
    pub status: DiscountStatus,
    /// Selected discount per ISP.
    pub delta_star: Option<Vec<f64>>,
    /// Equilibrium analysis under `delta_star`.
    pub zre: Option<ZreResult>,
    /// Every discount profile that passed the equilibrium test.
    pub equilibria: Vec<Vec<f64>>,
}

/// ISPs choose discounts from `delta_grid`; each profile is judged by the
/// revenues at its own selected ZRE.
///
/// A discount profile is an equilibrium when it admits a ZRE and no ISP can
/// strictly raise its revenue by moving to another grid value that also
/// admits a ZRE. Among equilibria the one with the largest total discount
/// index wins; remaining ties go to the larger discount of the more
/// expensive ISP (the later ISP on equal prices).
pub fn discount_equilibrium(config: &MarketConfig, delta_grid: &[f64]) -> Result<DiscountOutcome> {
    check_capacity(config)?;
    if delta_grid.is_empty() {
        return Err(ModelError::InvalidConfig("empty discount grid".into()));
    }
    if let Some(d) = delta_grid.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(ModelError::InvalidConfig(format!("discount {d} is outside [0, 1]")));
    }
    let m = config.n_isps;
    let g = delta_grid.len();
    let n_profiles = g.checked_pow(m as u32).ok_or(ModelError::Capacity {
        cells: usize::MAX,
        limit: MAX_ENUM_CELLS,
    })?;

    let decode = |mut code: usize| -> Vec<usize> {
        let mut idx = vec![0; m];
        for slot in idx.iter_mut().rev() {
            *slot = code % g;
            code /= g;
        }
        idx
    };
    let encode = |idx: &[usize]| idx.iter().fold(0, |acc, &k| acc * g + k);
    let deltas = |idx: &[usize]| idx.iter().map(|&k| delta_grid[k]).collect::<Vec<f64>>();

    // revenues at the selected ZRE, None if the profile admits no ZRE
    let mut revenue: Vec<Option<Vec<f64>>> = Vec::with_capacity(n_profiles);
    for code in 0..n_profiles {
        let cfg = config.with_deltas(&deltas(&decode(code)));
        let table = ProfileTable::build(&cfg)?;
        let zre = table.equilibria(&cfg);
        revenue.push(match select_zre(&cfg, &zre) {
            Ok(sel) => Some(table.get(&sel).r.clone()),
            Err(_) => None,
        });
    }

    let mut stable: Vec<Vec<usize>> = Vec::new();
    for (code, rev) in revenue.iter().enumerate() {
        let Some(rev) = rev else { continue };
        let idx = decode(code);
        let holds = (0..m).all(|j| {
            (0..g).filter(|&k| k != idx[j]).all(|k| {
                let mut dev = idx.clone();
                dev[j] = k;
                match &revenue[encode(&dev)] {
                    Some(r) => r[j] <= rev[j] + GAIN_TOL,
                    None => true,
                }
            })
        });
        if holds {
            stable.push(idx);
        }
    }

    let mut by_price: Vec<usize> = (0..m).collect();
    by_price.sort_by(|&a, &b| config.p[b].total_cmp(&config.p[a]).then(b.cmp(&a)));
    let key = |idx: &Vec<usize>| {
        let total: usize = idx.iter().sum();
        (total, by_price.iter().map(|&j| idx[j]).collect::<Vec<_>>())
    };
    let equilibria: Vec<Vec<f64>> = stable.iter().map(|idx| deltas(idx)).collect();
    match stable.iter().max_by_key(|idx| key(idx)) {
        Some(best) => {
            let delta_star = deltas(best);
            let zre = enumerate_zre(&config.with_deltas(&delta_star))?;
            Ok(DiscountOutcome {
                status: DiscountStatus::Found,
                delta_star: Some(delta_star),
                zre: Some(zre),
                equilibria,
            })
        }
        None => Ok(DiscountOutcome {
            status: DiscountStatus::NoDiscountEquilibrium,
            delta_star: None,
            zre: None,
            equilibria,
        }),
    }
}
