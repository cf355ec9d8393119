//! Zero-rating equilibria in a two-sided market of ISPs and content providers.
//!
//! The crate models how users split across (CP subset, ISP) pairs, what each
//! provider earns under a zero-rating profile, which profiles are stable, and
//! how stable outcomes change market concentration.

pub mod analysis;
pub mod equilibrium;
pub mod error;
pub mod market;
pub mod oracle;
pub mod payoff;
pub mod presets;
pub mod sample;

pub use error::{ModelError, Result};
pub use market::{allocate, AllocationTable, AuxIndex, MarketConfig, StrategyMatrix};
pub use payoff::{payoffs, PayoffVector};
