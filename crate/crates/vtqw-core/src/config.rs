//! Numeric tolerances and resource caps.

use serde::{Deserialize, Serialize};

/// Default cap on the dense Hilbert-space dimension.
pub const DEFAULT_MAX_DIM: usize = 1 << 14;

/// Largest admissible subroutine horizon.
pub const MAX_HORIZON: usize = 63;

/// Environment variable overriding [`DEFAULT_MAX_DIM`].
pub const MAX_DIM_ENV: &str = "VTQW_MAX_DIM";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Residual allowed on construction-time invariants.
    pub construction: f64,
    /// Residual allowed on optimization (KKT) conditions.
    pub optimization: f64,
    /// Gram–Schmidt drop threshold when orthonormalizing state sets.
    pub drop: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { construction: 1e-9, optimization: 1e-8, drop: 1e-12 }
    }
}

/// Dimension cap, honouring `VTQW_MAX_DIM` when it parses as a positive integer.
pub fn max_dimension() -> usize {
    std::env::var(MAX_DIM_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&d| d > 0)
        .unwrap_or(DEFAULT_MAX_DIM)
}

pub(crate) fn check_dimension(dim: usize) -> crate::Result<()> {
    let cap = max_dimension();
    if dim > cap {
        Err(crate::Error::DimensionCap { dim, cap })
    } else {
        Ok(())
    }
}
