//! Shared fixtures for the kernel benchmarks.

use hlmax_core::grid::{random_function, SpectralWeighting};
use hlmax_core::{FieldKind, GridFunction, TorusGrid, VectorFieldSpec};

/// Grid sizes (log₂ N) the benchmarks sweep.
pub const SIZES: [u32; 3] = [8, 9, 10];

/// A seeded unit-norm random function on `2^n_log2 × 2^n_log2`.
pub fn input(n_log2: u32) -> GridFunction {
    let grid = TorusGrid::new(n_log2).expect("benchmark grid size");
    random_function(grid, 7, None, SpectralWeighting::Flat).expect("random input")
}

pub fn shear() -> VectorFieldSpec {
    VectorFieldSpec::with_default_amplitude(FieldKind::Shear, 0.125).expect("shear field")
}

pub fn vertical_shear() -> VectorFieldSpec {
    VectorFieldSpec::with_default_amplitude(FieldKind::VerticalShear, 0.125).expect("vertical shear field")
}
