//! Coincidence counting, normalized cross-correlation, and peak fitting.
//!
//! The normalized correlation of signal and idler arrivals is
//! `g²(τ) = R_si(τ) / (R_s · R_i)`: the coincidence rate at delay τ over the
//! rate expected from uncorrelated singles. Uncorrelated light gives 1 at
//! every delay; photon pairs give a peak at their relative delay.

mod fit;
mod histogram;

pub use fit::{centroid_spread, fit_gaussian, GaussianFit, SpreadFit, SPREAD_BINS};
pub use histogram::{
    coincidence_histogram, far_region_stats, g2_normalize, subtract_accidentals, G2Histogram,
};

use thiserror::Error;

/// Default coincidence bin width, ps.
pub const DEFAULT_BIN_WIDTH_PS: u64 = 162;
/// Default histogram half-range: the multiple of 162 ps closest to 10 ns.
pub const DEFAULT_TAU_RANGE_PS: u64 = 62 * DEFAULT_BIN_WIDTH_PS;
/// Default start of the flat far region used for the accidental floor, ps.
pub const DEFAULT_FAR_FROM_PS: u64 = 5_000;

#[derive(Debug, Error)]
pub enum CorrelationError {
    #[error("rejected input: {0}")]
    Rejected(String),
    #[error("singles rates or duration are zero; g² is undefined")]
    UndefinedNormalization,
    #[error("no bins beyond |τ| > {far_from_ps} ps inside ±{tau_range_ps} ps; widen the range")]
    NoFlatRegion { far_from_ps: u64, tau_range_ps: u64 },
    #[error("fit needs at least 5 nonzero bins, got {0}")]
    TooFewBins(usize),
    #[error("fit did not converge after {iterations} iterations (residual norm {residual_norm})")]
    FitFailed { iterations: u32, residual_norm: f64 },
    #[error("malformed histogram file: {0}")]
    Format(String),
}
