use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use zerorating::analysis::{aggregate_signs, compare_worlds, grid_points, grid_sweep, SweepRecord};
use zerorating::equilibrium::{
    best_response_dynamics, discount_equilibrium, enumerate_zre, forced_cells, DiscountOutcome, DiscountStatus,
};
use zerorating::payoff::payoffs;
use zerorating::{ModelError, StrategyMatrix};

mod report;
mod scenario;
mod verify;

use scenario::{Mode, Scenario};

/// Worker count for grid sweeps; defaults to the available parallelism.
const WORKERS_ENV: &str = "ZR_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Capacity(String),
    #[error("{0}")]
    Io(String),
    #[error("{0} check(s) failed")]
    VerifyFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Io(_) | CliError::VerifyFailed(_) => 1,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Capacity { .. } => CliError::Capacity(e.to_string()),
            other => CliError::Schema(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "zerorating", version, about = "Zero-rating equilibria and market concentration sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the scenario's price grid and write grid.csv and summary.json
    /// (plus discounts.csv in discount-game mode).
    Sweep {
        scenario: PathBuf,
        /// Output directory; defaults to the scenario's `output` entry.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant battery over the scenario's price grid.
    Verify { scenario: PathBuf },
    /// Inspect one price point: every equilibrium, the selected one and
    /// pressure flags.
    Zre {
        scenario: PathBuf,
        /// Comma-separated ISP prices, e.g. `0.3,0.5`.
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        /// Also trace round-robin best responses from the forced-only profile.
        #[arg(long)]
        dynamics: bool,
    },
}

fn init_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Schema(format!("{WORKERS_ENV}={raw} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Per-cell discount outcome and the comparison at the chosen discounts.
fn discount_cells(s: &Scenario) -> Result<Vec<(Vec<f64>, DiscountOutcome, SweepRecord)>, CliError> {
    grid_points(&s.grids)
        .par_iter()
        .map(|p| {
            let cfg = s.template.with_prices(p);
            let outcome = discount_equilibrium(&cfg, &s.delta_grid)?;
            let record = match &outcome.delta_star {
                Some(d) => compare_worlds(&cfg.with_deltas(d))?,
                None => SweepRecord {
                    prices: p.clone(),
                    selected: None,
                    n_zre: 0,
                    delta_utility: vec![0.0; cfg.n_cps],
                    delta_share: vec![0.0; cfg.n_cps],
                    delta_hhi: 0.0,
                    pressure: vec![false; cfg.n_cps],
                },
            };
            Ok((p.clone(), outcome, record))
        })
        .collect()
}

fn sweep(path: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let s = Scenario::load(path)?;
    let dir = out
        .or_else(|| s.output.clone())
        .ok_or_else(|| CliError::Schema("no output directory: pass --out or set `output`".into()))?;
    let (n, m) = (s.template.n_cps, s.template.n_isps);

    let (records, no_discount) = match s.mode {
        Mode::FixedDelta => (grid_sweep(&s.template, &s.grids)?, None),
        Mode::DiscountGame => {
            let cells = discount_cells(&s)?;
            let missing: Vec<Vec<f64>> = cells
                .iter()
                .filter(|(_, o, _)| o.status == DiscountStatus::NoDiscountEquilibrium)
                .map(|(p, _, _)| p.clone())
                .collect();
            let outcomes: Vec<(Vec<f64>, DiscountOutcome)> =
                cells.iter().map(|(p, o, _)| (p.clone(), o.clone())).collect();
            fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
            write(&dir, "discounts.csv", &report::discounts_csv(&s.grids, &outcomes))?;
            (cells.into_iter().map(|(_, _, r)| r).collect(), Some(missing))
        }
    };
    let signs = aggregate_signs(&records)?;
    let summary = report::summary(&s.name, s.mode.label(), &s.template.q, &records, &signs, no_discount);

    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    write(&dir, "grid.csv", &report::grid_csv(&records, n, m))?;
    let mut json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
    json.push('\n');
    write(&dir, "summary.json", &json)?;
    println!("{}: {} cells written to {}", s.name, records.len(), dir.display());
    Ok(())
}

fn verify(path: &Path) -> Result<(), CliError> {
    let s = Scenario::load(path)?;
    let records = grid_sweep(&s.template, &s.grids)?;
    let checks = verify::run(&s.template, &s.grids, &records, s.expected_no_zre.as_deref())?;
    print!("{}", verify::render(&checks));
    let failed = checks.iter().filter(|c| c.status == verify::Status::Fail).count();
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}

fn zre(path: &Path, prices: &[f64], dynamics: bool) -> Result<(), CliError> {
    let s = Scenario::load(path)?;
    if prices.len() != s.template.n_isps {
        return Err(CliError::Schema(format!(
            "--p needs {} prices, got {}",
            s.template.n_isps,
            prices.len()
        )));
    }
    let cfg = s.template.with_prices(prices);
    cfg.validate()?;
    let result = enumerate_zre(&cfg)?;
    let fmt_vec = |v: &[f64]| v.iter().map(|&x| report::num(x)).collect::<Vec<_>>().join(", ");
    println!("prices: [{}]", fmt_vec(prices));
    println!("equilibria: {}", result.all_zre.len());
    for t in &result.all_zre {
        let pv = payoffs(&cfg, t)?;
        println!(
            "  {t}  utilities [{}]  revenues [{}]",
            fmt_vec(&pv.cp_utility),
            fmt_vec(&pv.isp_revenue)
        );
    }
    match result.selected {
        Some(t) => {
            println!("selected: {t}");
            let flags: Vec<String> = result.pressure.iter().map(|&f| u8::from(f).to_string()).collect();
            println!("pressure: [{}]", flags.join(", "));
        }
        None => println!("selected: NOZRE"),
    }
    if dynamics {
        let mut start = StrategyMatrix::zeros(cfg.n_cps, cfg.n_isps);
        for (i, j) in forced_cells(&cfg) {
            start.set(i, j, true);
        }
        let trace = best_response_dynamics(&cfg, &start, 1000)?;
        let path: Vec<String> = trace.profiles.iter().map(|t| t.to_string()).collect();
        println!("dynamics: {:?} after {} flips: {}", trace.status, trace.steps, path.join(" -> "));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_workers().and_then(|()| match cli.command {
        Command::Sweep { scenario, out } => sweep(&scenario, out),
        Command::Verify { scenario } => verify(&scenario),
        Command::Zre { scenario, p, dynamics } => zre(&scenario, &p, dynamics),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
