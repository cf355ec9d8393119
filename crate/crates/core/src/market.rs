//! Market structure and the user allocation model.
//!
//! Users pick one ISP column (index 0 is the dummy ISP, `k` is actual ISP
//! `k - 1`) and one auxiliary CP, which is a subset of the actual CPs encoded
//! as a bitmask ([`AuxIndex`]). The empty subset is the dummy CP.
//!
//! A fraction `alpha` of users is elastic: when any zero-rated pair exists they
//! only pick among zero-rated pairs. The remaining users stay on the baseline
//! shares `phi_s * psi_j`.

use std::fmt;
use std::str::FromStr;

use crate::error::{ModelError, Result};

/// Tolerance for `sum(phi) == 1` and `sum(psi) == 1`.
pub const SHARE_SUM_TOL: f64 = 1e-12;

/// Largest number of actual CPs; the auxiliary lattice has `2^n` nodes.
pub const MAX_CPS: usize = 16;

/// Largest number of actual CP x ISP cells a [`StrategyMatrix`] can hold.
pub const MAX_CELLS: usize = 64;

/// Exogenous parameters of one market instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    pub n_cps: usize,
    pub n_isps: usize,
    /// Fraction of elastic users.
    pub alpha: f64,
    /// Bandwidth usage coefficient applied to non-zero-rated payoffs.
    pub c: f64,
    /// Per-bandwidth revenue of each actual CP.
    pub q: Vec<f64>,
    /// Per-bandwidth price of each actual ISP.
    pub p: Vec<f64>,
    /// Zero-rating price discount of each actual ISP.
    pub delta: Vec<f64>,
    /// Baseline share of every auxiliary CP, indexed by subset mask.
    pub phi: Vec<f64>,
    /// Baseline share of every ISP column, dummy first.
    pub psi: Vec<f64>,
    /// Market size; 1 means allocations read as shares.
    pub total_users: f64,
}

impl MarketConfig {
    pub fn n_aux(&self) -> usize {
        1 << self.n_cps
    }

    pub fn n_cells(&self) -> usize {
        self.n_cps * self.n_isps
    }

    /// Copy of this config with a different ISP price vector.
    pub fn with_prices(&self, p: &[f64]) -> Self {
        MarketConfig {
            p: p.to_vec(),
            ..self.clone()
        }
    }

    /// Copy of this config with a different discount vector.
    pub fn with_deltas(&self, delta: &[f64]) -> Self {
        MarketConfig {
            delta: delta.to_vec(),
            ..self.clone()
        }
    }

    /// Index of the highest-value CP. Ties go to the later CP.
    pub fn highest_value_cp(&self) -> usize {
        let mut best = 0;
        for (i, &qi) in self.q.iter().enumerate() {
            if qi >= self.q[best] {
                best = i;
            }
        }
        best
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.n_cps == 0 || self.n_isps == 0 {
            return bad("need at least one CP and one ISP".into());
        }
        if self.n_cps > MAX_CPS {
            return bad(format!("at most {MAX_CPS} CPs are supported, got {}", self.n_cps));
        }
        if self.n_cells() > MAX_CELLS {
            return bad(format!(
                "{} CP x ISP cells exceed the supported {MAX_CELLS}",
                self.n_cells()
            ));
        }
        let lengths = [
            ("q", self.q.len(), self.n_cps),
            ("p", self.p.len(), self.n_isps),
            ("delta", self.delta.len(), self.n_isps),
            ("phi", self.phi.len(), self.n_aux()),
            ("psi", self.psi.len(), self.n_isps + 1),
        ];
        for (name, got, want) in lengths {
            if got != want {
                return bad(format!("{name} has {got} entries, expected {want}"));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha = {} is outside [0, 1]", self.alpha));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return bad(format!("c = {} is outside (0, 1]", self.c));
        }
        if !(self.total_users.is_finite() && self.total_users > 0.0) {
            return bad(format!("total_users = {} must be positive", self.total_users));
        }
        for (name, values) in [("q", &self.q), ("p", &self.p)] {
            if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                return bad(format!("{name} contains non-finite value {v}"));
            }
        }
        if let Some(d) = self.delta.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return bad(format!("delta entry {d} is outside [0, 1]"));
        }
        for (name, shares) in [("phi", &self.phi), ("psi", &self.psi)] {
            if let Some(v) = shares.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
                return bad(format!("{name} entry {v} is outside (0, 1]"));
            }
            let sum: f64 = shares.iter().sum();
            if (sum - 1.0).abs() > SHARE_SUM_TOL {
                return bad(format!("{name} sums to {sum}, expected 1"));
            }
        }
        Ok(())
    }

    pub(crate) fn check_theta(&self, theta: &StrategyMatrix) -> Result<()> {
        if theta.n_cps() != self.n_cps || theta.n_isps() != self.n_isps {
            return Err(ModelError::DimensionMismatch {
                got_cps: theta.n_cps(),
                got_isps: theta.n_isps(),
                want_cps: self.n_cps,
                want_isps: self.n_isps,
            });
        }
        Ok(())
    }
}

/// An auxiliary CP: the set of actual CPs a user subscribes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AuxIndex(pub u32);

impl AuxIndex {
    pub const DUMMY: AuxIndex = AuxIndex(0);

    /// The auxiliary CP made of exactly one actual CP.
    pub fn single(cp: usize) -> Self {
        AuxIndex(1 << cp)
    }

    pub fn from_cps(cps: &[usize]) -> Self {
        AuxIndex(cps.iter().fold(0, |m, &i| m | (1 << i)))
    }

    pub fn is_dummy(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, cp: usize) -> bool {
        self.0 >> cp & 1 == 1
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.contains(i))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Binary zero-rating profile over actual CPs (rows) and actual ISPs
/// (columns). Dummy rows and columns are implicitly zero.
///
/// The encoding is the row-major bitstring read as a binary number, so the
/// first cell `(0, 0)` is the most significant bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StrategyMatrix {
    n_cps: usize,
    n_isps: usize,
    bits: u64,
}

impl StrategyMatrix {
    /// All-zero profile.
    ///
    /// # Panics
    /// If `n_cps * n_isps` exceeds [`MAX_CELLS`].
    pub fn zeros(n_cps: usize, n_isps: usize) -> Self {
        assert!(
            n_cps * n_isps <= MAX_CELLS,
            "{n_cps}x{n_isps} strategy matrix exceeds {MAX_CELLS} cells"
        );
        StrategyMatrix {
            n_cps,
            n_isps,
            bits: 0,
        }
    }

    pub fn ones(n_cps: usize, n_isps: usize) -> Self {
        let mut m = Self::zeros(n_cps, n_isps);
        m.bits = Self::full_mask(n_cps * n_isps);
        m
    }

    pub fn from_encoding(n_cps: usize, n_isps: usize, code: u64) -> Result<Self> {
        let cells = n_cps * n_isps;
        if cells > MAX_CELLS {
            return Err(ModelError::Capacity {
                cells,
                limit: MAX_CELLS,
            });
        }
        if code & !Self::full_mask(cells) != 0 {
            return Err(ModelError::IndexOutOfRange {
                what: "profile encoding",
                index: code as usize,
                limit: 1usize << cells.min(63),
            });
        }
        Ok(StrategyMatrix {
            n_cps,
            n_isps,
            bits: code,
        })
    }

    /// Parses a row-major bitstring such as `"0111"`.
    pub fn from_bitstring(n_cps: usize, n_isps: usize, s: &str) -> Result<Self> {
        if s.len() != n_cps * n_isps || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(ModelError::InvalidConfig(format!(
                "'{s}' is not a {n_cps}x{n_isps} bitstring"
            )));
        }
        let code = s.bytes().fold(0u64, |acc, b| acc << 1 | u64::from(b - b'0'));
        Self::from_encoding(n_cps, n_isps, code)
    }

    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let n_isps = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(rows.len(), n_isps);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_isps {
                return Err(ModelError::InvalidConfig("ragged strategy rows".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v != 0);
            }
        }
        Ok(m)
    }

    fn full_mask(cells: usize) -> u64 {
        if cells == 64 {
            u64::MAX
        } else {
            (1u64 << cells) - 1
        }
    }

    fn bit(&self, cp: usize, isp: usize) -> u32 {
        debug_assert!(cp < self.n_cps && isp < self.n_isps);
        (self.n_cps * self.n_isps - 1 - (cp * self.n_isps + isp)) as u32
    }

    pub fn n_cps(&self) -> usize {
        self.n_cps
    }

    pub fn n_isps(&self) -> usize {
        self.n_isps
    }

    pub fn encoding(&self) -> u64 {
        self.bits
    }

    pub fn get(&self, cp: usize, isp: usize) -> bool {
        self.bits >> self.bit(cp, isp) & 1 == 1
    }

    pub fn set(&mut self, cp: usize, isp: usize, on: bool) {
        let b = 1u64 << self.bit(cp, isp);
        if on {
            self.bits |= b;
        } else {
            self.bits &= !b;
        }
    }

    pub fn flipped(&self, cp: usize, isp: usize) -> Self {
        let mut m = *self;
        m.bits ^= 1u64 << self.bit(cp, isp);
        m
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn row_ones(&self, cp: usize) -> usize {
        (0..self.n_isps).filter(|&j| self.get(cp, j)).count()
    }

    pub fn col_ones(&self, isp: usize) -> usize {
        (0..self.n_cps).filter(|&i| self.get(i, isp)).count()
    }

    pub fn to_bitstring(&self) -> String {
        (0..self.n_cps)
            .flat_map(|i| (0..self.n_isps).map(move |j| (i, j)))
            .map(|(i, j)| if self.get(i, j) { '1' } else { '0' })
            .collect()
    }

    /// Every profile of the given shape, in increasing encoding order.
    pub fn all(n_cps: usize, n_isps: usize) -> impl Iterator<Item = StrategyMatrix> {
        let cells = n_cps * n_isps;
        assert!(cells < 64, "cannot enumerate {cells} cells");
        (0..1u64 << cells).map(move |bits| StrategyMatrix {
            n_cps,
            n_isps,
            bits,
        })
    }
}

impl fmt::Display for StrategyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// Parses `"<cps>x<isps>:<bits>"`, e.g. `"2x2:0111"`.
impl FromStr for StrategyMatrix {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        let err = || ModelError::InvalidConfig(format!("cannot parse strategy '{s}'"));
        let (shape, bits) = s.split_once(':').ok_or_else(err)?;
        let (n, m) = shape.split_once('x').ok_or_else(err)?;
        let n: usize = n.trim().parse().map_err(|_| err())?;
        let m: usize = m.trim().parse().map_err(|_| err())?;
        Self::from_bitstring(n, m, bits.trim())
    }
}

/// Whether auxiliary CP `s` is zero-rated with ISP column `col` (0 = dummy).
pub fn extend_theta(theta: &StrategyMatrix, s: AuxIndex, col: usize) -> Result<bool> {
    let n_aux = 1usize << theta.n_cps();
    if s.index() >= n_aux {
        return Err(ModelError::IndexOutOfRange {
            what: "auxiliary CP",
            index: s.index(),
            limit: n_aux,
        });
    }
    if col > theta.n_isps() {
        return Err(ModelError::IndexOutOfRange {
            what: "ISP column",
            index: col,
            limit: theta.n_isps() + 1,
        });
    }
    Ok(extended(theta, s.index(), col))
}

#[inline]
fn extended(theta: &StrategyMatrix, s: usize, col: usize) -> bool {
    s != 0 && col != 0 && (0..theta.n_cps()).all(|i| s >> i & 1 == 0 || theta.get(i, col - 1))
}

/// Probability that a user restricted to `choice_set` picks `(aux, col)`.
pub fn choice_probability(
    choice_set: &[(AuxIndex, usize)],
    aux: AuxIndex,
    col: usize,
    config: &MarketConfig,
) -> Result<f64> {
    if choice_set.is_empty() {
        return Err(ModelError::EmptyChoiceSet);
    }
    let weight = |s: AuxIndex, j: usize| -> Result<f64> {
        let phi = config.phi.get(s.index()).ok_or(ModelError::IndexOutOfRange {
            what: "auxiliary CP",
            index: s.index(),
            limit: config.phi.len(),
        })?;
        let psi = config.psi.get(j).ok_or(ModelError::IndexOutOfRange {
            what: "ISP column",
            index: j,
            limit: config.psi.len(),
        })?;
        Ok(phi * psi)
    };
    let target = weight(aux, col)?;
    let mut total = 0.0;
    let mut member = false;
    for &(s, j) in choice_set {
        total += weight(s, j)?;
        member |= s == aux && j == col;
    }
    Ok(if member { target / total } else { 0.0 })
}

/// Pair shares and user counts under one strategy profile.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationTable {
    /// `rho[s][col]` over auxiliary CPs x ISP columns (dummy column first).
    pub rho: Vec<Vec<f64>>,
    /// `rho * total_users`.
    pub x_pair: Vec<Vec<f64>>,
    /// Effective users of actual CP `i` on actual ISP `j`.
    pub x_effective: Vec<Vec<f64>>,
}

impl AllocationTable {
    /// Effective users of actual CP `cp` summed over every ISP column,
    /// dummy ISP included.
    pub fn cp_users_all_columns(&self, cp: usize) -> f64 {
        self.x_pair
            .iter()
            .enumerate()
            .filter(|(s, _)| s >> cp & 1 == 1)
            .map(|(_, row)| row.iter().sum::<f64>())
            .sum()
    }
}

/// Closed-form user allocation for profile `theta`.
pub fn allocate(config: &MarketConfig, theta: &StrategyMatrix) -> Result<AllocationTable> {
    config.check_theta(theta)?;
    let n_aux = config.n_aux();
    let n_cols = config.n_isps + 1;

    let mut zero_rated = vec![vec![false; n_cols]; n_aux];
    let mut zr_weight = 0.0;
    for (s, row) in zero_rated.iter_mut().enumerate() {
        for (col, cell) in row.iter_mut().enumerate() {
            *cell = extended(theta, s, col);
            if *cell {
                zr_weight += config.phi[s] * config.psi[col];
            }
        }
    }

    let alpha = config.alpha;
    let rho: Vec<Vec<f64>> = (0..n_aux)
        .map(|s| {
            (0..n_cols)
                .map(|col| {
                    let base = config.phi[s] * config.psi[col];
                    if zr_weight == 0.0 {
                        base
                    } else if zero_rated[s][col] {
                        alpha * base / zr_weight + (1.0 - alpha) * base
                    } else {
                        (1.0 - alpha) * base
                    }
                })
                .collect()
        })
        .collect();

    let x_pair: Vec<Vec<f64>> = rho
        .iter()
        .map(|row| row.iter().map(|r| r * config.total_users).collect())
        .collect();

    let x_effective = (0..config.n_cps)
        .map(|i| {
            (1..n_cols)
                .map(|col| {
                    x_pair
                        .iter()
                        .enumerate()
                        .filter(|(s, _)| s >> i & 1 == 1)
                        .map(|(_, row)| row[col])
                        .sum()
                })
                .collect()
        })
        .collect();

    Ok(AllocationTable {
        rho,
        x_pair,
        x_effective,
    })
}

/// Which actual providers to merge into one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSubset {
    Cps(Vec<usize>),
    Isps(Vec<usize>),
}

/// Result of [`merge_providers`].
#[derive(Debug, Clone, PartialEq)]
pub struct MergedMarket {
    pub config: MarketConfig,
    pub theta: StrategyMatrix,
    /// For CP merges: old auxiliary mask -> new auxiliary mask.
    /// For ISP merges: old ISP column -> new ISP column.
    pub node_map: Vec<usize>,
}

/// Merges actual providers that share one zero-rating profile into a single
/// provider placed at the lowest merged index.
///
/// CP merges collapse the auxiliary lattice: every subset is mapped to the
/// subset obtained by replacing merged members with the new CP, and baseline
/// shares of subsets with the same image are summed. The merged provider
/// inherits `q` (or `p` and `delta`) from its lowest-indexed member.
pub fn merge_providers(
    config: &MarketConfig,
    theta: &StrategyMatrix,
    subset: &ProviderSubset,
) -> Result<MergedMarket> {
    config.check_theta(theta)?;
    match subset {
        ProviderSubset::Cps(cps) => merge_cps(config, theta, cps),
        ProviderSubset::Isps(isps) => merge_isps(config, theta, isps),
    }
}

fn sorted_members(members: &[usize], limit: usize, what: &'static str) -> Result<Vec<usize>> {
    let mut m = members.to_vec();
    m.sort_unstable();
    m.dedup();
    if m.is_empty() {
        return Err(ModelError::InvalidConfig("empty merge subset".into()));
    }
    if let Some(&bad) = m.iter().find(|&&i| i >= limit) {
        return Err(ModelError::IndexOutOfRange {
            what,
            index: bad,
            limit,
        });
    }
    Ok(m)
}

fn merge_cps(config: &MarketConfig, theta: &StrategyMatrix, cps: &[usize]) -> Result<MergedMarket> {
    let members = sorted_members(cps, config.n_cps, "CP")?;
    let head = members[0];
    let same_rows = members
        .iter()
        .all(|&i| (0..config.n_isps).all(|j| theta.get(i, j) == theta.get(head, j)));
    if !same_rows {
        return Err(ModelError::MergeProfileMismatch(members));
    }

    // new CP index for every old CP
    let kept: Vec<usize> = (0..config.n_cps)
        .filter(|i| !members[1..].contains(i))
        .collect();
    let new_index = |old: usize| -> usize {
        let target = if members.contains(&old) { head } else { old };
        kept.iter().position(|&k| k == target).unwrap()
    };
    let n_new = kept.len();

    let node_map: Vec<usize> = (0..config.n_aux())
        .map(|s| {
            (0..config.n_cps)
                .filter(|&i| s >> i & 1 == 1)
                .fold(0usize, |acc, i| acc | 1 << new_index(i))
        })
        .collect();
    let mut phi = vec![0.0; 1 << n_new];
    for (s, &t) in node_map.iter().enumerate() {
        phi[t] += config.phi[s];
    }

    let mut new_theta = StrategyMatrix::zeros(n_new, config.n_isps);
    for (k, &old) in kept.iter().enumerate() {
        for j in 0..config.n_isps {
            new_theta.set(k, j, theta.get(old, j));
        }
    }

    let merged = MarketConfig {
        n_cps: n_new,
        q: kept.iter().map(|&i| config.q[i]).collect(),
        phi,
        ..config.clone()
    };
    Ok(MergedMarket {
        config: merged,
        theta: new_theta,
        node_map,
    })
}

fn merge_isps(
    config: &MarketConfig,
    theta: &StrategyMatrix,
    isps: &[usize],
) -> Result<MergedMarket> {
    let members = sorted_members(isps, config.n_isps, "ISP")?;
    let head = members[0];
    let same_cols = members
        .iter()
        .all(|&j| (0..config.n_cps).all(|i| theta.get(i, j) == theta.get(i, head)));
    if !same_cols {
        return Err(ModelError::MergeProfileMismatch(members));
    }

    let kept: Vec<usize> = (0..config.n_isps)
        .filter(|j| !members[1..].contains(j))
        .collect();
    let n_new = kept.len();
    let node_map: Vec<usize> = std::iter::once(0)
        .chain((0..config.n_isps).map(|j| {
            let target = if members.contains(&j) { head } else { j };
            kept.iter().position(|&k| k == target).unwrap() + 1
        }))
        .collect();

    let mut psi = vec![0.0; n_new + 1];
    for (col, &new_col) in node_map.iter().enumerate() {
        psi[new_col] += config.psi[col];
    }
    let mut new_theta = StrategyMatrix::zeros(config.n_cps, n_new);
    for i in 0..config.n_cps {
        for (k, &old) in kept.iter().enumerate() {
            new_theta.set(i, k, theta.get(i, old));
        }
    }
    let merged = MarketConfig {
        n_isps: n_new,
        p: kept.iter().map(|&j| config.p[j]).collect(),
        delta: kept.iter().map(|&j| config.delta[j]).collect(),
        psi,
        ..config.clone()
    };
    Ok(MergedMarket {
        config: merged,
        theta: new_theta,
        node_map,
    })
}
