//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so every line is printed even
//! when an earlier criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zerorating::analysis::{
    aggregate_signs, concentration_drops, cp_users, exclusion_cells, exclusion_violations, grid_sweep,
    discount_sweep, hhi_variance_identity, uniform_zero_rating_hhi_gap, Sign,
};
use zerorating::equilibrium::{default_delta_grid, forced_cells, is_zre, DiscountStatus};
use zerorating::market::{allocate, merge_providers, MarketConfig, ProviderSubset, StrategyMatrix};
use zerorating::oracle::{oracle_allocate, oracle_verify_zre};
use zerorating::presets::{benchmark, price_grid, variants};
use zerorating::sample::{random_config, random_theta};

const TOL: f64 = 1e-12;

/// Discount pairs `(ISP 1, ISP 2)` reported for the benchmark market; row
/// index is p_2 / 0.1, column index is p_1 / 0.1.
const EXPECTED_DISCOUNTS: [[(f64, f64); 11]; 11] = [
    [(1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 0.9), (1.0, 0.8), (1.0, 0.7), (1.0, 0.6), (1.0, 0.5)],
    [(1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 0.9), (1.0, 0.8), (1.0, 0.7), (1.0, 0.6), (1.0, 0.5)],
    [(1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 0.8), (1.0, 0.7), (1.0, 0.6), (1.0, 1.0)],
    [(1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 0.7), (1.0, 1.0), (1.0, 0.6)],
    [(1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 0.6)],
    [(1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 0.9), (1.0, 0.8), (1.0, 0.7), (1.0, 0.6)],
    [(0.9, 1.0), (0.9, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 0.8), (1.0, 0.7), (1.0, 1.0)],
    [(0.8, 1.0), (0.8, 1.0), (0.8, 1.0), (1.0, 1.0), (1.0, 1.0), (0.9, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 1.0)],
    [(0.7, 1.0), (0.7, 1.0), (0.7, 1.0), (0.7, 1.0), (1.0, 1.0), (0.8, 1.0), (0.8, 1.0), (1.0, 1.0), (1.0, 1.0), (1.0, 0.9), (1.0, 0.8)],
    [(0.6, 1.0), (0.6, 1.0), (0.6, 1.0), (1.0, 1.0), (1.0, 1.0), (0.7, 1.0), (0.7, 1.0), (1.0, 1.0), (0.9, 1.0), (0.9, 0.9), (0.9, 0.8)],
    [(0.5, 1.0), (0.5, 1.0), (1.0, 1.0), (0.6, 1.0), (0.6, 1.0), (0.6, 1.0), (1.0, 1.0), (1.0, 1.0), (0.8, 1.0), (0.8, 0.9), (0.8, 0.8)],
];

/// Expected arrows `(low utility, low share, high utility, high share)`.
const EXPECTED_SIGNS: [(&str, [Sign; 4]); 9] = {
    use Sign::{Down as D, Up as U};
    [
        ("benchmark", [U, D, U, U]),
        ("c=0.2", [U, D, U, U]),
        ("c=0.8", [D, D, U, U]),
        ("alpha=0.2", [U, D, U, U]),
        ("alpha=0.8", [U, D, U, U]),
        ("phi=(0.1,0.2,0.6,0.1)", [U, D, U, U]),
        ("phi=(0.1,0.6,0.2,0.1)", [U, D, U, U]),
        ("psi=(0.2,0.2,0.6)", [U, D, U, U]),
        ("psi=(0.2,0.6,0.2)", [U, D, U, U]),
    ]
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn duopoly_grid() -> Vec<Vec<f64>> {
    vec![price_grid(), price_grid()]
}

fn idx(p: f64) -> usize {
    (p * 10.0).round() as usize
}

fn cp_order_admissible(t: &StrategyMatrix) -> bool {
    (0..t.n_isps()).all(|j| !(t.get(0, j) && !t.get(1, j)))
}

fn benchmark_profile_map() -> Outcome {
    let start = Instant::now();
    let recs = grid_sweep(&benchmark(), &duopoly_grid()).expect("benchmark sweep");
    let elapsed = start.elapsed();
    let selected: BTreeSet<String> = recs.iter().filter_map(|r| r.selected).map(|t| t.to_string()).collect();
    let admissible = StrategyMatrix::all(2, 2).filter(cp_order_admissible).count();
    let bad: Vec<&String> = selected
        .iter()
        .filter(|s| !cp_order_admissible(&StrategyMatrix::from_bitstring(2, 2, s).unwrap()))
        .collect();
    let passed = recs.len() == 121
        && selected.len() <= admissible
        && bad.is_empty()
        && recs.iter().all(|r| r.selected.is_some())
        && elapsed < Duration::from_secs(5);
    outcome(
        passed,
        format!(
            "{} distinct selected profiles {:?} (admissible {admissible}), {} inadmissible, {:.2?}",
            selected.len(),
            selected,
            bad.len(),
            elapsed
        ),
    )
}

fn missing_equilibria() -> Outcome {
    let cfg = MarketConfig { c: 0.8, ..benchmark() };
    let recs = grid_sweep(&cfg, &duopoly_grid()).expect("c=0.8 sweep");
    let got: BTreeSet<(usize, usize)> = recs
        .iter()
        .filter(|r| r.selected.is_none())
        .map(|r| (idx(r.prices[0]), idx(r.prices[1])))
        .collect();
    let want: BTreeSet<(usize, usize)> = [(3, 3), (3, 4), (4, 3)].into_iter().collect();
    let zero_deltas = recs
        .iter()
        .filter(|r| r.selected.is_none())
        .all(|r| r.delta_utility.iter().chain(&r.delta_share).all(|&d| d == 0.0) && r.delta_hhi == 0.0);
    let fmt = |s: &BTreeSet<(usize, usize)>| {
        s.iter()
            .map(|(a, b)| format!("({:.1},{:.1})", *a as f64 / 10.0, *b as f64 / 10.0))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        got == want && zero_deltas,
        format!("no equilibrium at {} (expected {})", fmt(&got), fmt(&want)),
    )
}

fn discount_table() -> Outcome {
    let start = Instant::now();
    let cells = discount_sweep(&benchmark(), &duopoly_grid(), &default_delta_grid()).expect("discount sweep");
    let elapsed = start.elapsed();

    let mut grid = vec![vec![None; 11]; 11];
    for (p, out) in &cells {
        grid[idx(p[1])][idx(p[0])] = out.delta_star.as_ref().map(|d| (d[0], d[1]));
    }
    let same = |a: Option<(f64, f64)>, b: (f64, f64)| {
        a.is_some_and(|(x, y)| (x - b.0).abs() < 1e-9 && (y - b.1).abs() < 1e-9)
    };

    println!("  discount grid diff (rows p2 = 0.0..1.0, columns p1 = 0.0..1.0; '!' marks a mismatch, expected value after it)");
    let mut mismatches = 0;
    for (row, expected) in grid.iter().zip(EXPECTED_DISCOUNTS.iter()) {
        let line: Vec<String> = row
            .iter()
            .zip(expected)
            .map(|(&got, &want)| {
                let shown = got.map_or("none".to_string(), |(a, b)| format!("{a:.1},{b:.1}"));
                if same(got, want) {
                    format!("{shown:>16}")
                } else {
                    mismatches += 1;
                    format!("{:>16}", format!("{shown}!{:.1},{:.1}", want.0, want.1))
                }
            })
            .collect();
        println!("  {}", line.join(""));
    }

    // (p1, p2) -> expected (delta1, delta2)
    let anchors = [((10, 10), (0.8, 0.8)), ((10, 0), (1.0, 0.5)), ((0, 10), (0.5, 1.0)), ((0, 0), (1.0, 1.0))];
    let anchor_report: Vec<String> = anchors
        .iter()
        .map(|&((p1, p2), want)| {
            let got = grid[p2][p1];
            format!(
                "p=({:.1},{:.1}) got {} want {:.1},{:.1} {}",
                p1 as f64 / 10.0,
                p2 as f64 / 10.0,
                got.map_or("none".to_string(), |(a, b)| format!("{a:.1},{b:.1}")),
                want.0,
                want.1,
                if same(got, want) { "ok" } else { "MISMATCH" }
            )
        })
        .collect();
    let anchors_ok = anchors.iter().all(|&((p1, p2), want)| same(grid[p2][p1], want));
    let none = cells.iter().filter(|(_, o)| o.status == DiscountStatus::NoDiscountEquilibrium).count();
    outcome(
        anchors_ok && elapsed < Duration::from_secs(120),
        format!(
            "{}; {mismatches}/121 cells differ, {none} without equilibrium, {:.2?}",
            anchor_report.join("; "),
            elapsed
        ),
    )
}

fn average_signs() -> Outcome {
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for ((name, cfg), (want_name, want)) in variants().into_iter().zip(EXPECTED_SIGNS) {
        assert_eq!(name, want_name);
        let recs = grid_sweep(&cfg, &duopoly_grid()).expect("variant sweep");
        let s = aggregate_signs(&recs).expect("aggregate");
        let got = [s.utility_sign[0], s.share_sign[0], s.utility_sign[1], s.share_sign[1]];
        lines.push(format!(
            "  {name:<24} dU1 {:+.5} ds1 {:+.5} dU2 {:+.5} ds2 {:+.5}",
            s.mean_delta_utility[0], s.mean_delta_share[0], s.mean_delta_utility[1], s.mean_delta_share[1]
        ));
        if got != want {
            failures.push(format!("{name}: got {got:?} want {want:?}"));
        }
    }
    for l in lines {
        println!("{l}");
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "all 9 grids match".to_string()
        } else {
            failures.join("; ")
        },
    )
}

/// Grids whose parameters satisfy the hypotheses of the concentration check:
/// the low-value CP has no larger value and no larger solo baseline.
fn concentration_family() -> (Vec<(&'static str, MarketConfig)>, Vec<&'static str>) {
    let (family, rest): (Vec<_>, Vec<_>) = variants()
        .into_iter()
        .partition(|(_, c)| c.q[0] <= c.q[1] && c.phi[1] <= c.phi[2]);
    (family, rest.into_iter().map(|(n, _)| n).collect())
}

fn concentration_never_drops() -> Outcome {
    let (family, skipped) = concentration_family();
    let mut worst = f64::INFINITY;
    let mut drops = 0;
    for (_, cfg) in &family {
        let recs = grid_sweep(cfg, &duopoly_grid()).expect("sweep");
        drops += concentration_drops(&recs).len();
        worst = recs.iter().map(|r| r.delta_hhi).fold(worst, f64::min);
    }
    outcome(
        drops == 0,
        format!(
            "{} grids, min dHHI {worst:.3e}, {drops} cells below -1e-12 (outside hypotheses: {skipped:?})",
            family.len()
        ),
    )
}

fn exclusion_hurts_low_value_cp() -> Outcome {
    let mut cells = 0;
    let mut bad = Vec::new();
    for (name, cfg) in variants() {
        let recs = grid_sweep(&cfg, &duopoly_grid()).expect("sweep");
        cells += exclusion_cells(&recs, 0, 1);
        for r in exclusion_violations(&recs, 0, 1) {
            bad.push(format!("{name} p={:?} dU={:?}", r.prices, r.delta_utility));
        }
    }
    outcome(
        bad.is_empty() && cells > 0,
        format!("{cells} cells with only the high-value CP zero-rating, {} violations {:?}", bad.len(), bad),
    )
}

fn concentration_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4848_4931);
    let (mut worst_var, mut worst_uniform) = (0.0f64, 0.0f64);
    const SAMPLES: usize = 1000;
    for _ in 0..SAMPLES {
        let n = rng.gen_range(2..=3);
        let m = rng.gen_range(1..=3);
        let cfg = random_config(&mut rng, n, m);
        let theta = random_theta(&mut rng, n, m);
        let (a, b) = hhi_variance_identity(&cp_users(&cfg, &theta).unwrap()).unwrap();
        worst_var = worst_var.max((a - b).abs());
        worst_uniform = worst_uniform.max(uniform_zero_rating_hhi_gap(&cfg).unwrap());
    }
    outcome(
        worst_var < TOL && worst_uniform < TOL,
        format!("{SAMPLES} configs, max variance-form gap {worst_var:.2e}, max none/all gap {worst_uniform:.2e}"),
    )
}

fn oracle_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0_4ac1e);
    let mut worst = 0.0f64;
    let mut disagreements = 0;
    let mut stable = 0;
    const SAMPLES: usize = 1000;
    for _ in 0..SAMPLES {
        let n = rng.gen_range(2..=3);
        let m = rng.gen_range(2..=3);
        let cfg = random_config(&mut rng, n, m);
        let mut theta = random_theta(&mut rng, n, m);
        let fast = allocate(&cfg, &theta).unwrap();
        let slow = oracle_allocate(&cfg, &theta).unwrap();
        for (x, y) in fast.rho.iter().flatten().zip(slow.rho.iter().flatten()) {
            worst = worst.max((x - y).abs());
        }
        for (x, y) in fast.x_effective.iter().flatten().zip(slow.x_effective.iter().flatten()) {
            worst = worst.max((x - y).abs());
        }
        for (i, j) in forced_cells(&cfg) {
            theta.set(i, j, true);
        }
        let verdict = is_zre(&cfg, &theta).unwrap();
        stable += verdict as usize;
        if verdict != oracle_verify_zre(&cfg, &theta).unwrap().is_stable() {
            disagreements += 1;
        }
    }
    outcome(
        worst < TOL && disagreements == 0,
        format!("{SAMPLES} pairs, max entrywise gap {worst:.2e}, {disagreements} verdict disagreements ({stable} stable)"),
    )
}

fn merge_additivity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3e76e);
    let mut worst = 0.0f64;
    const SAMPLES: usize = 500;
    for k in 0..SAMPLES {
        let n = rng.gen_range(2..=3);
        let m = rng.gen_range(2..=3);
        let cfg = random_config(&mut rng, n, m);
        let mut theta = random_theta(&mut rng, n, m);
        let merge_cps = k % 2 == 0;
        let limit = if merge_cps { n } else { m };
        let mut members: Vec<usize> = (0..limit).filter(|_| rng.gen_bool(0.6)).collect();
        if members.len() < 2 {
            members = vec![0, limit - 1];
        }
        let head = members[0];
        for &x in &members[1..] {
            if merge_cps {
                for j in 0..m {
                    theta.set(x, j, theta.get(head, j));
                }
            } else {
                for i in 0..n {
                    theta.set(i, x, theta.get(i, head));
                }
            }
        }
        let subset = if merge_cps {
            ProviderSubset::Cps(members)
        } else {
            ProviderSubset::Isps(members)
        };
        let merged = merge_providers(&cfg, &theta, &subset).expect("eligible merge");
        let before = allocate(&cfg, &theta).unwrap();
        let after = allocate(&merged.config, &merged.theta).unwrap();
        let mut expected = vec![vec![0.0; after.x_pair[0].len()]; after.x_pair.len()];
        for (s, row) in before.x_pair.iter().enumerate() {
            for (col, &x) in row.iter().enumerate() {
                let (t, c) = if merge_cps { (merged.node_map[s], col) } else { (s, merged.node_map[col]) };
                expected[t][c] += x;
            }
        }
        for (x, y) in after.x_pair.iter().flatten().zip(expected.iter().flatten()) {
            worst = worst.max((x - y).abs());
        }
    }
    outcome(worst < TOL, format!("{SAMPLES} merges, max entrywise gap {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("benchmark equilibrium map", benchmark_profile_map),
        ("cells without equilibrium at c=0.8", missing_equilibria),
        ("discount game anchors", discount_table),
        ("average utility and share arrows", average_signs),
        ("concentration never drops", concentration_never_drops),
        ("exclusion hurts the low-value CP", exclusion_hurts_low_value_cp),
        ("concentration identities", concentration_identities),
        ("closed form vs brute force", oracle_agreement),
        ("merge additivity", merge_additivity),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += !o.passed as usize;
        println!(
            "criterion {} [{}] {name}: {}",
            k + 1,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
