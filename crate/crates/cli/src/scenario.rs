//! Scenario files: a market, a per-ISP price grid and a run mode.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use zerorating::equilibrium::default_delta_grid;
use zerorating::MarketConfig;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub market: MarketSection,
    /// One entry per ISP.
    pub prices: Vec<PriceAxis>,
    #[serde(default)]
    pub mode: Mode,
    /// Discount values ISPs may choose from in discount-game mode.
    #[serde(default)]
    pub delta_grid: Option<Vec<f64>>,
    /// Price points at which `verify` expects no equilibrium.
    #[serde(default)]
    pub expected_no_zre: Option<Vec<Vec<f64>>>,
    /// Default output directory for `sweep`, relative to the scenario file.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub alpha: f64,
    pub c: f64,
    pub q: Vec<f64>,
    /// Ignored in discount-game mode except for validation.
    pub delta: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    #[serde(default = "one")]
    pub total_users: f64,
}

fn one() -> f64 {
    1.0
}

/// Either explicit values or an evenly spaced range.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PriceAxis {
    Values(Vec<f64>),
    Range { from: f64, to: f64, step: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    FixedDelta,
    DiscountGame,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::FixedDelta => "fixed-delta",
            Mode::DiscountGame => "discount-game",
        }
    }
}

/// Rounds away accumulated binary error so `0.1 * 3` prints and compares as
/// `0.3`.
fn snap(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

impl PriceAxis {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        match *self {
            PriceAxis::Values(ref v) => Ok(v.clone()),
            PriceAxis::Range { from, to, step } => {
                if !(step > 0.0) || !(to >= from) || !from.is_finite() || !to.is_finite() {
                    return Err(format!("bad price range from {from} to {to} step {step}"));
                }
                let n = ((to - from) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|k| snap(from + k as f64 * step)).collect())
            }
        }
    }
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub template: MarketConfig,
    pub grids: Vec<Vec<f64>>,
    pub mode: Mode,
    pub delta_grid: Vec<f64>,
    pub expected_no_zre: Option<Vec<Vec<f64>>>,
    pub output: Option<PathBuf>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let mut scenario = Self::parse(&text).map_err(|e| match e {
            CliError::Schema(msg) => CliError::Schema(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let Some(out) = scenario.output.take() {
            let base = path.parent().unwrap_or(Path::new("."));
            scenario.output = Some(base.join(out));
        }
        Ok(scenario)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        // serde_json errors carry "line L column C"
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        Self::from_file(file)
    }

    fn from_file(file: ScenarioFile) -> Result<Self, CliError> {
        let schema = |msg: String| CliError::Schema(msg);
        if file.prices.is_empty() {
            return Err(schema("prices: need one price list per ISP".into()));
        }
        let grids: Vec<Vec<f64>> = file
            .prices
            .iter()
            .enumerate()
            .map(|(j, axis)| {
                let v = axis.values().map_err(|e| schema(format!("prices[{j}]: {e}")))?;
                if v.is_empty() {
                    return Err(schema(format!("prices[{j}]: empty price list")));
                }
                if let Some(p) = v.iter().find(|p| !p.is_finite() || **p < 0.0) {
                    return Err(schema(format!("prices[{j}]: invalid price {p}")));
                }
                Ok(v)
            })
            .collect::<Result<_, _>>()?;

        let m = file.market;
        let template = MarketConfig {
            n_cps: m.q.len(),
            n_isps: grids.len(),
            alpha: m.alpha,
            c: m.c,
            q: m.q,
            p: grids.iter().map(|g| g[0]).collect(),
            delta: m.delta,
            phi: m.phi,
            psi: m.psi,
            total_users: m.total_users,
        };
        template.validate().map_err(|e| schema(format!("market: {e}")))?;

        let delta_grid = file.delta_grid.unwrap_or_else(default_delta_grid);
        if delta_grid.is_empty() || delta_grid.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(schema("delta_grid: need values in [0, 1]".into()));
        }
        if let Some(points) = &file.expected_no_zre {
            if points.iter().any(|p| p.len() != template.n_isps) {
                return Err(schema(format!(
                    "expected_no_zre: every point needs {} prices",
                    template.n_isps
                )));
            }
        }
        Ok(Scenario {
            name: file.name,
            template,
            grids,
            mode: file.mode,
            delta_grid,
            expected_no_zre: file.expected_no_zre,
            output: file.output,
        })
    }
}
