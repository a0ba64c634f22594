//! Periodic grid functions on the unit torus and their spectra.
//!
//! Samples and Fourier coefficients share one layout: index `a * N + b`
//! where `a` runs along `x₁` (resp. the first frequency `ξ`) and `b` along
//! `x₂` (resp. `η`). Columns of constant `x₁` are therefore contiguous.
//!
//! Coefficients are Fourier-series coefficients, `c(ξ) = N⁻² Σ_x f(x)
//! e^{-2πi⟨ξ,x⟩}`, so `f(x) = Σ_ξ c(ξ) e^{2πi⟨ξ,x⟩}` and the discrete norm
//! `(N⁻² Σ|f|²)^{1/2}` equals the ℓ² norm of the coefficients.

pub(crate) mod fft;
pub mod multipliers;
pub mod profiles;
pub mod random;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

pub use fft::{fft_inplace, Direction};
pub use multipliers::{
    apply_tile_multiplier, cone_factor, cone_project, littlewood_paley, lp_range, mean_part, tile_multiplier,
};
pub use random::{random_function, SpectralWeighting};

/// An `N × N` sampling of the unit torus, `N = 2^n_log2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGrid {
    n_log2: u32,
}

impl TorusGrid {
    pub const MIN_LOG2: u32 = 8;
    pub const MAX_LOG2: u32 = 12;

    pub fn new(n_log2: u32) -> Result<Self> {
        if !(Self::MIN_LOG2..=Self::MAX_LOG2).contains(&n_log2) {
            return Err(Error::Config(format!(
                "grid exponent {n_log2} outside [{}, {}]",
                Self::MIN_LOG2,
                Self::MAX_LOG2
            )));
        }
        Ok(Self { n_log2 })
    }

    pub fn n_log2(&self) -> u32 {
        self.n_log2
    }

    pub fn n(&self) -> usize {
        1 << self.n_log2
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n() as f64
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.n() * self.n()
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize) -> usize {
        (a << self.n_log2) | b
    }

    /// Signed frequency carried by array index `i`, in `[-N/2, N/2)`.
    #[inline]
    pub fn freq(&self, i: usize) -> i64 {
        let n = self.n();
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Array index of signed frequency `k` (taken modulo `N`).
    #[inline]
    pub fn freq_index(&self, k: i64) -> usize {
        k.rem_euclid(self.n() as i64) as usize
    }

    pub fn point(&self, a: usize, b: usize) -> Point {
        let h = self.spacing();
        [a as f64 * h, b as f64 * h]
    }

    /// Grid cell containing `x` (cells are centred on grid points).
    pub fn cell_of(&self, x: Point) -> (usize, usize) {
        let n = self.n() as f64;
        let wrap = |t: f64| ((t * n).round().rem_euclid(n)) as usize;
        (wrap(x[0]), wrap(x[1]))
    }
}

/// Complex samples on a [`TorusGrid`] with an optional cached spectrum.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: TorusGrid,
    samples: Vec<Complex64>,
    spectrum: Option<Vec<Complex64>>,
}

impl GridFunction {
    pub fn new(grid: TorusGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        Ok(Self {
            grid,
            samples,
            spectrum: None,
        })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.len()],
            spectrum: None,
        }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(Point) -> Complex64) -> Self {
        let n = grid.n();
        let mut samples = Vec::with_capacity(grid.len());
        for a in 0..n {
            for b in 0..n {
                samples.push(f(grid.point(a, b)));
            }
        }
        Self {
            grid,
            samples,
            spectrum: None,
        }
    }

    /// The character `e^{2πi⟨m,x⟩}`.
    pub fn character(grid: TorusGrid, m: [i64; 2]) -> Self {
        let n = grid.n() as i64;
        let table = fft::twiddles(grid.n());
        let mut samples = Vec::with_capacity(grid.len());
        for a in 0..n {
            for b in 0..n {
                let k = (m[0] * a + m[1] * b).rem_euclid(n) as usize;
                samples.push(table[k]);
            }
        }
        Self {
            grid,
            samples,
            spectrum: None,
        }
    }

    /// Builds a function from Fourier coefficients; the spectrum stays cached.
    pub fn from_spectrum(grid: TorusGrid, spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                spectrum.len()
            )));
        }
        let mut samples = spectrum.clone();
        fft::fft2(&mut samples, grid.n(), Direction::Inverse);
        Ok(Self {
            grid,
            samples,
            spectrum: Some(spectrum),
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> Complex64 {
        self.samples[self.grid.index(a, b)]
    }

    pub fn spectrum(&self) -> Option<&[Complex64]> {
        self.spectrum.as_deref()
    }

    pub fn has_spectrum(&self) -> bool {
        self.spectrum.is_some()
    }

    /// Computes and caches the spectrum.
    pub fn transform(mut self) -> Self {
        if self.spectrum.is_none() {
            self.spectrum = Some(self.compute_spectrum());
        }
        self
    }

    pub fn compute_spectrum(&self) -> Vec<Complex64> {
        let mut data = self.samples.clone();
        fft::fft2(&mut data, self.grid.n(), Direction::Forward);
        let scale = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// The cached spectrum, or a freshly computed one.
    pub fn spectrum_owned(&self) -> Vec<Complex64> {
        match &self.spectrum {
            Some(s) => s.clone(),
            None => self.compute_spectrum(),
        }
    }

    /// Inverse transform of the cached spectrum; used to check round trips.
    pub fn inverse_of_spectrum(&self) -> Option<Vec<Complex64>> {
        let mut data = self.spectrum.clone()?;
        fft::fft2(&mut data, self.grid.n(), Direction::Inverse);
        Some(data)
    }

    /// Discrete L² norm `(N⁻² Σ|f|²)^{1/2}`.
    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.samples.iter().map(|c| c.norm_sqr()).sum();
        (s / self.grid.len() as f64).sqrt()
    }

    pub fn norm_sup(&self) -> f64 {
        self.samples.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Discrete inner product `N⁻² Σ f ḡ`.
    pub fn inner(&self, other: &GridFunction) -> Complex64 {
        let s: Complex64 = self.samples.iter().zip(&other.samples).map(|(f, g)| f * g.conj()).sum();
        s / self.grid.len() as f64
    }

    /// Multiplies the spectrum pointwise by `m(ξ, η)`.
    pub fn apply_multiplier(&self, m: impl Fn(i64, i64) -> f64) -> GridFunction {
        let grid = self.grid;
        let n = grid.n();
        let mut spec = self.spectrum_owned();
        for i1 in 0..n {
            let xi = grid.freq(i1);
            for i2 in 0..n {
                let w = m(xi, grid.freq(i2));
                let c = &mut spec[grid.index(i1, i2)];
                if w == 0.0 {
                    *c = Complex64::new(0.0, 0.0);
                } else {
                    *c *= w;
                }
            }
        }
        GridFunction::from_spectrum(grid, spec).expect("same grid")
    }

    pub fn scaled(&self, s: Complex64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            samples: self.samples.iter().map(|c| c * s).collect(),
            spectrum: self.spectrum.as_ref().map(|sp| sp.iter().map(|c| c * s).collect()),
        }
    }

    /// `a·self + b·other`, keeping a spectrum when both operands have one.
    pub fn combine(&self, a: Complex64, other: &GridFunction, b: Complex64) -> GridFunction {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(f, g)| a * f + b * g)
            .collect();
        let spectrum = match (&self.spectrum, &other.spectrum) {
            (Some(s), Some(t)) => Some(s.iter().zip(t).map(|(f, g)| a * f + b * g).collect()),
            _ => None,
        };
        GridFunction {
            grid: self.grid,
            samples,
            spectrum,
        }
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }
}
