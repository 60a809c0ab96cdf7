//! Shared fixtures for the resde benchmarks.

use resde::{lookup, SdeProblem};

/// Catalog problems exercised by the scheme benchmarks.
pub const PROBLEMS: [&str; 3] = ["sin2d", "parabolic", "himmelblau_stoch"];

/// `(n, M)` sizes for single-path benchmarks.
pub const SIZES: [(usize, usize); 3] = [(50, 50), (200, 200), (800, 800)];

pub fn problem(name: &str) -> SdeProblem {
    lookup(name).unwrap_or_else(|e| panic!("{e}"))
}
