//! Smoothed directional averages
//! `A^j f(x) = ∫ f(x + 2^{-j} t v(x)) α(t) dt`, the maximal operator over
//! dyadic scales, and its linearization.
//!
//! Two independent evaluators are provided. [`exact`] sums the Fourier
//! series `Σ_ξ f̂(ξ) α̂(2^{-j}⟨ξ, v(x)⟩) e^{2πi⟨ξ,x⟩}`; since `α̂` vanishes
//! outside `[-1, 1]` only a strip of about `2^{j+1}` frequencies per row
//! contributes. [`quadrature`] discretizes the line integral in space.

pub mod exact;
pub mod linearize;
pub mod quadrature;

use std::ops::RangeInclusive;

pub use exact::{average_exact, average_exact_grid, exact_grid_rows, SpectralRow, SpectralRows};
pub use linearize::{linearize, split_identity, LinearizationMaps, SplitReport};
pub use quadrature::{average_quadrature, maximal_brute, QuadratureOptions};

use crate::error::{Error, Result};
use crate::field::VectorFieldSpec;
use crate::grid::TorusGrid;

/// Admissible averaging scales: `2^{-j} ≤ ε₀` and `j ≤ n - 5`.
pub fn scale_range(grid: TorusGrid, eps0: f64) -> Result<RangeInclusive<u32>> {
    let j_min = (-eps0.log2() - 1e-12).ceil().max(0.0) as u32;
    let j_max = grid.n_log2().saturating_sub(5);
    if j_min > j_max {
        return Err(Error::Config(format!(
            "no admissible scale: 2^-j ≤ {eps0} needs j ≥ {j_min}, grid allows j ≤ {j_max}"
        )));
    }
    Ok(j_min..=j_max)
}

pub(crate) fn check_scale(field: &VectorFieldSpec, j: u32) -> Result<()> {
    if 2f64.powi(-(j as i32)) > field.eps0 * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "scale 2^-{j} exceeds eps0 = {}",
            field.eps0
        )));
    }
    Ok(())
}
