//! Seeded random test functions.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::multipliers::cone_factor;
use super::{GridFunction, TorusGrid};
use crate::error::{Error, Result};

/// Variance profile of the random coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralWeighting {
    /// Independent unit-variance coefficients.
    #[default]
    Flat,
    /// Variance `|ξ|⁻²`, which puts equal energy in every dyadic annulus.
    PerOctave,
}

fn mix(seed: u64, xi: i64, eta: i64) -> u64 {
    // splitmix64 over the seed and the frequency, so the draw at a given
    // frequency does not depend on the grid size
    let mut z =
        seed ^ (xi as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (eta as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A unit-norm function with complex Gaussian coefficients, zero mean and
/// spectrum outside the cone (where the cone projection is the identity).
///
/// With `band = Some((k_min, k_max))` the spectrum is further restricted to
/// `2^{k_min+1} ≤ |ξ| ≤ 2^{k_max+1}`, the annulus where the Littlewood–Paley
/// pieces `k_min..=k_max` live and every other piece but the neighbours
/// vanishes. Coefficients are drawn per frequency, so a band-limited function
/// is the same on every grid that resolves it.
pub fn random_function(
    grid: TorusGrid,
    seed: u64,
    band: Option<(i32, i32)>,
    weighting: SpectralWeighting,
) -> Result<GridFunction> {
    let n = grid.n();
    let (lo, hi) = match band {
        Some((k_min, k_max)) => {
            if k_min > k_max || k_min < -1 || k_max > grid.n_log2() as i32 - 2 {
                return Err(Error::Config(format!(
                    "band ({k_min}, {k_max}) not resolved by N = {n}"
                )));
            }
            (2f64.powi(k_min + 1), 2f64.powi(k_max + 1))
        }
        None => (0.0, f64::INFINITY),
    };
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut energy = 0.0;
    for i1 in 0..n {
        let xi = grid.freq(i1);
        for i2 in 0..n {
            let eta = grid.freq(i2);
            let r2 = (xi * xi + eta * eta) as f64;
            let r = r2.sqrt();
            if r < lo || r > hi || cone_factor(xi, eta) < 1.0 {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, xi, eta));
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let scale = match weighting {
                SpectralWeighting::Flat => 1.0,
                SpectralWeighting::PerOctave => 1.0 / r,
            };
            let c = Complex64::new(re, im) * scale;
            energy += c.norm_sqr();
            spec[grid.index(i1, i2)] = c;
        }
    }
    if energy == 0.0 {
        return Err(Error::Config("empty spectral band".into()));
    }
    let norm = energy.sqrt();
    spec.iter_mut().for_each(|c| *c /= norm);
    GridFunction::from_spectrum(grid, spec)
}
