//! Free-group automorphisms through graph maps: strata, universal-cover
//! chains, Nielsen 1-chains and their overlap graphs, bounded flare scans,
//! and group-ring trace series for Fuglede–Kadison log-determinants.

pub mod chain;
pub mod det;
pub mod endo;
pub mod error;
pub mod flare;
pub mod graph;
pub mod nielsen;
pub mod par;
pub mod ring;
pub mod rm;
pub mod strata;
pub mod torsion;
pub mod word;

pub use error::{Error, Result};
