//! Numerical toolkit for maximal averages along planar vector fields.
//!
//! Everything lives on the unit torus `[0,1)²` sampled on an `N × N` grid
//! with `N` a power of two. The crate is organised bottom-up:
//!
//! * [`grid`] periodic grid functions, the DFT, Fourier profiles and every
//!   frequency multiplier (Littlewood–Paley pieces, cone projection, tile
//!   multipliers).
//! * [`field`] the vector-field families, the angular function `ω_x(t)` and
//!   the sublevel-set condition.
//! * [`averages`] the smoothed directional averages `A^j`, evaluated both
//!   exactly on the Fourier side and by spatial quadrature, plus the maximal
//!   operator and its linearization.
//! * [`rects`] rectangles `R_{x,j}`, greedy coverings and overlap counting.
//! * [`tiles`] dyadic slope intervals, tiles, wave packets and the
//!   per-rectangle energy estimates.
//! * [`harness`] experiment configuration, reports and the end-to-end runs.

pub mod averages;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod rects;
pub mod tiles;

pub use averages::{LinearizationMaps, QuadratureOptions};
pub use error::{Error, Result};
pub use field::{Dependence, FieldKind, SublevelReport, VectorFieldSpec};
pub use grid::{GridFunction, TorusGrid};
pub use harness::{DecayReport, ExperimentConfig, Tolerances};
pub use rects::{Covering, OverlapReport, Rect};
pub use tiles::{DyadicInterval, Tile, TileExpansion};

/// A point of the torus, `(x₁, x₂)`.
pub type Point = [f64; 2];

/// Half-angle of the cone `Γ₀` around the horizontal axis.
pub const CONE_HALF_ANGLE: f64 = std::f64::consts::PI / 10.0;
