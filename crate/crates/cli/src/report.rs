//! CSV and JSON writers. Everything here is byte-stable for a given input.

use std::fmt::Write as _;

use serde::Serialize;
use zerorating::analysis::{SignSummary, SweepRecord};
use zerorating::equilibrium::DiscountOutcome;

/// Twelve significant digits, shortest form, no negative zero.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        "0".to_string()
    } else {
        format!("{rounded}")
    }
}

/// Same rounding as [`num`], kept as a number for JSON.
pub fn round12(x: f64) -> f64 {
    let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn grid_csv(records: &[SweepRecord], n_cps: usize, n_isps: usize) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = (1..=n_isps).map(|j| format!("p_{j}")).collect();
    header.push("theta".into());
    header.extend((1..=n_cps).map(|i| format!("du_{i}")));
    header.extend((1..=n_cps).map(|i| format!("dshare_{i}")));
    header.push("dhhi".into());
    header.extend((1..=n_cps).map(|i| format!("pressure_{i}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for r in records {
        let mut row: Vec<String> = r.prices.iter().map(|&p| num(p)).collect();
        row.push(r.theta_label());
        row.extend(r.delta_utility.iter().map(|&d| num(d)));
        row.extend(r.delta_share.iter().map(|&d| num(d)));
        row.push(num(r.delta_hhi));
        row.extend(r.pressure.iter().map(|&f| u8::from(f).to_string()));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn discount_cell(outcome: &DiscountOutcome) -> String {
    match &outcome.delta_star {
        Some(d) => d.iter().map(|&x| num(x)).collect::<Vec<_>>().join(","),
        None => "NONE".to_string(),
    }
}

/// Two ISPs: a matrix with one row per ISP 2 price and one column per ISP 1
/// price, each cell `"d1,d2"`. Otherwise one row per grid point.
pub fn discounts_csv(grids: &[Vec<f64>], cells: &[(Vec<f64>, DiscountOutcome)]) -> String {
    let mut out = String::new();
    if grids.len() == 2 {
        let (p1s, p2s) = (&grids[0], &grids[1]);
        out.push_str("p_2\\p_1");
        for &p1 in p1s {
            let _ = write!(out, ",{}", num(p1));
        }
        out.push('\n');
        for (row, &p2) in p2s.iter().enumerate() {
            out.push_str(&num(p2));
            for col in 0..p1s.len() {
                // cells are ordered with ISP 1 outermost
                let (_, o) = &cells[col * p2s.len() + row];
                let _ = write!(out, ",\"{}\"", discount_cell(o));
            }
            out.push('\n');
        }
    } else {
        let m = grids.len();
        let mut header: Vec<String> = (1..=m).map(|j| format!("p_{j}")).collect();
        header.extend((1..=m).map(|j| format!("delta_{j}")));
        out.push_str(&header.join(","));
        out.push('\n');
        for (p, o) in cells {
            let mut row: Vec<String> = p.iter().map(|&x| num(x)).collect();
            match &o.delta_star {
                Some(d) => row.extend(d.iter().map(|&x| num(x))),
                None => row.extend((0..m).map(|_| "NONE".to_string())),
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct Counts {
    pub up: usize,
    pub down: usize,
    pub flat: usize,
}

impl From<[usize; 3]> for Counts {
    fn from(c: [usize; 3]) -> Self {
        Counts {
            up: c[0],
            down: c[1],
            flat: c[2],
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CpSummary {
    pub cp: usize,
    pub value: f64,
    pub mean_delta_utility: f64,
    pub utility_sign: &'static str,
    pub mean_delta_share: f64,
    pub share_sign: &'static str,
    pub utility_cells: Counts,
    pub share_cells: Counts,
    pub pressure_cells: usize,
}

#[derive(Debug, Serialize)]
pub struct HhiSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub mode: &'static str,
    pub cells: usize,
    pub no_zre_cells: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_discount_equilibrium_cells: Option<Vec<Vec<f64>>>,
    pub selected_profiles: Vec<String>,
    pub cps: Vec<CpSummary>,
    pub delta_hhi: HhiSummary,
}

pub fn summary(
    scenario: &str,
    mode: &'static str,
    q: &[f64],
    records: &[SweepRecord],
    signs: &SignSummary,
    no_discount: Option<Vec<Vec<f64>>>,
) -> Summary {
    let mut profiles: Vec<String> = records.iter().filter_map(|r| r.selected).map(|t| t.to_string()).collect();
    profiles.sort();
    profiles.dedup();
    let hhi: Vec<f64> = records.iter().map(|r| r.delta_hhi).collect();
    let round_all = |v: &[f64]| v.iter().map(|&x| round12(x)).collect::<Vec<_>>();
    Summary {
        scenario: scenario.to_string(),
        mode,
        cells: records.len(),
        no_zre_cells: records
            .iter()
            .filter(|r| r.selected.is_none())
            .map(|r| round_all(&r.prices))
            .collect(),
        no_discount_equilibrium_cells: no_discount.map(|cells| cells.iter().map(|p| round_all(p)).collect()),
        selected_profiles: profiles,
        cps: (0..q.len())
            .map(|i| CpSummary {
                cp: i + 1,
                value: round12(q[i]),
                mean_delta_utility: round12(signs.mean_delta_utility[i]),
                utility_sign: signs.utility_sign[i].label(),
                mean_delta_share: round12(signs.mean_delta_share[i]),
                share_sign: signs.share_sign[i].label(),
                utility_cells: signs.utility_cells[i].into(),
                share_cells: signs.share_cells[i].into(),
                pressure_cells: signs.pressure_cells[i],
            })
            .collect(),
        delta_hhi: HhiSummary {
            mean: round12(hhi.iter().sum::<f64>() / hhi.len() as f64),
            min: round12(hhi.iter().copied().fold(f64::INFINITY, f64::min)),
            max: round12(hhi.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        },
    }
}
