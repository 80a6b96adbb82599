//! CountSketch and private (Gaussian-noised) CountSketch.
//!
//! The crate is organized around one pipeline:
//!
//! * [`hashing`] — seeded fully-random hash/sign families, materialized as tables
//! * [`sketch`] — the linear sketch map, mergeable tables, and the
//!   median / mean / min estimators
//! * [`privacy`] — Gaussian noise calibration for (ε, δ)-DP and zCDP,
//!   sensitivity accounting, local-model encoding
//! * [`analysis`] — tail norms, error reports, empirical failure rates
//! * [`datasets`] — city-population CSVs and market-basket transaction files
//!
//! Everything is deterministic given a master seed: hash families, noise
//! draws, and Monte Carlo trials all derive their streams from explicit
//! seeds, so experiments replay bit-for-bit.

pub mod analysis;
pub mod datasets;
pub mod error;
pub mod hashing;
pub mod privacy;
pub mod seeds;
pub mod sketch;

pub use error::{Error, Result};
pub use hashing::{HashFamily, SketchParams};
pub use privacy::{NoiseKind, NoiseSpec, PrivacyBudget};
pub use sketch::{SparseVector, Sketch, Variant};
