//! Frequency multipliers. All of them are real, even under `ξ → -ξ` and
//! diagonal in frequency, so they commute with each other.

use std::ops::RangeInclusive;

use super::profiles::{beta_tilde, psi, smoothstep};
use super::{GridFunction, TorusGrid};
use crate::error::{Error, Result};
use crate::tiles::DyadicInterval;
use crate::CONE_HALF_ANGLE;

/// Width of the angular transition of the cone projection.
pub const CONE_TRANSITION: f64 = std::f64::consts::PI / 40.0;

/// Littlewood–Paley indices whose pieces meet the nonzero grid frequencies.
///
/// Piece `k` lives on `2^k < |ξ| < 2^{k+2}`; frequencies of length `1` and
/// `√2` need the pieces `k = -1, 0`, and `|ξ| ≤ N/√2` needs `k ≤ n - 1`.
pub fn lp_range(grid: TorusGrid) -> RangeInclusive<i32> {
    -1..=grid.n_log2() as i32 - 1
}

#[inline]
pub fn lp_factor(k: i32, xi: i64, eta: i64) -> f64 {
    let r = ((xi * xi + eta * eta) as f64).sqrt();
    psi(r * 2f64.powi(-k))
}

/// `P_k f`, the multiplier `ψ(2^{-k}|ξ|)`.
pub fn littlewood_paley(f: &GridFunction, k: i32) -> Result<GridFunction> {
    let range = lp_range(f.grid());
    if !range.contains(&k) {
        return Err(Error::Precondition(format!(
            "Littlewood-Paley index {k} outside {range:?}"
        )));
    }
    Ok(f.apply_multiplier(|xi, eta| lp_factor(k, xi, eta)))
}

/// The zero-frequency component of `f`.
pub fn mean_part(f: &GridFunction) -> GridFunction {
    f.apply_multiplier(|xi, eta| if xi == 0 && eta == 0 { 1.0 } else { 0.0 })
}

/// Keep factor of the projection onto the complement of the cone: `0` for
/// directions within `π/10` of the horizontal axis, `1` beyond
/// `π/10 + π/40`, and `0` at the origin.
#[inline]
pub fn cone_factor(xi: i64, eta: i64) -> f64 {
    if xi == 0 && eta == 0 {
        return 0.0;
    }
    let phi = (eta.unsigned_abs() as f64).atan2(xi.unsigned_abs() as f64);
    smoothstep((phi - CONE_HALF_ANGLE) / CONE_TRANSITION)
}

pub fn cone_project(f: &GridFunction) -> GridFunction {
    f.apply_multiplier(cone_factor)
}

/// `m̂_{k+l,ω}(ξ, η) = β̃(2^{-k-l}|η|) β_ω(ξ/η)`, zero on `η = 0`.
#[inline]
pub fn tile_multiplier(kl: u32, omega: &DyadicInterval, xi: i64, eta: i64) -> f64 {
    if eta == 0 {
        return 0.0;
    }
    let radial = beta_tilde(eta.unsigned_abs() as f64 / (1u64 << kl) as f64);
    if radial == 0.0 {
        return 0.0;
    }
    radial * omega.bump(xi as f64 / eta as f64)
}

pub fn apply_tile_multiplier(f: &GridFunction, k: u32, l: u32, omega: &DyadicInterval) -> Result<GridFunction> {
    let n_log2 = f.grid().n_log2();
    if k + l + 2 > n_log2 {
        return Err(Error::Precondition(format!(
            "k + l = {} exceeds n_log2 - 2 = {}",
            k + l,
            n_log2 as i64 - 2
        )));
    }
    Ok(f.apply_multiplier(|xi, eta| tile_multiplier(k + l, omega, xi, eta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn grid() -> TorusGrid {
        TorusGrid::new(8).unwrap()
    }

    fn max_diff(a: &GridFunction, b: &GridFunction) -> f64 {
        a.samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn lp_keeps_and_kills_characters() {
        let g = grid();
        for k in 1..6 {
            let m = 1i64 << (k + 1);
            let f = GridFunction::character(g, [m, 0]);
            assert!(max_diff(&littlewood_paley(&f, k).unwrap(), &f) < 1e-12);
            let f = GridFunction::character(g, [0, m / 4]);
            assert!(littlewood_paley(&f, k).unwrap().norm_sup() < 1e-12);
        }
        assert!(littlewood_paley(&GridFunction::character(g, [1, 0]), 9).is_err());
    }

    #[test]
    fn lp_partition_of_unity_on_the_lattice() {
        let g = grid();
        let n = g.n();
        for i1 in 0..n {
            for i2 in 0..n {
                let (xi, eta) = (g.freq(i1), g.freq(i2));
                if xi == 0 && eta == 0 {
                    continue;
                }
                let s: f64 = lp_range(g).map(|k| lp_factor(k, xi, eta)).sum();
                assert!((s - 1.0).abs() < 1e-12, "({xi},{eta}) sum {s}");
            }
        }
    }

    #[test]
    fn cone_examples() {
        let g = grid();
        let f = GridFunction::character(g, [9, 1]);
        assert!(cone_project(&f).norm_sup() < 1e-12);
        let f = GridFunction::character(g, [0, 7]);
        assert!(max_diff(&cone_project(&f), &f) < 1e-12);
        let one = GridFunction::from_fn(g, |_| Complex64::new(1.0, 0.0));
        assert!(cone_project(&one).norm_sup() < 1e-12);
        assert_eq!(cone_factor(-3, -3), 1.0);
        assert_eq!(cone_factor(5, 0), 0.0);
    }

    #[test]
    fn tile_multiplier_examples() {
        let g = grid();
        let (k, l) = (3, 1);
        let omega = DyadicInterval::new(2, 0);
        // ω = [0, 1/4) has centre 1/8, so β_ω(0) = β(-1/2) = 1
        for m2 in [16i64, 20, 32] {
            let f = GridFunction::character(g, [0, m2]);
            let out = apply_tile_multiplier(&f, k, l, &omega).unwrap();
            assert!(max_diff(&out, &f) < 1e-12, "m2={m2}");
        }
        let f = GridFunction::character(g, [5, 0]);
        assert!(apply_tile_multiplier(&f, k, l, &omega).unwrap().norm_sup() < 1e-14);
        // slope 1 lies outside 2ω = [-1/8, 3/8)
        let f = GridFunction::character(g, [20, 20]);
        assert!(apply_tile_multiplier(&f, k, l, &omega).unwrap().norm_sup() < 1e-14);
        assert!(apply_tile_multiplier(&f, 4, 3, &omega).is_err());
    }

    #[test]
    fn multipliers_commute() {
        let g = grid();
        let f = crate::grid::random_function(g, 3, None, Default::default())
            .unwrap()
            .sub(&GridFunction::character(g, [3, 1]));
        let a = cone_project(&littlewood_paley(&f, 4).unwrap());
        let b = littlewood_paley(&cone_project(&f), 4).unwrap();
        assert!(max_diff(&a, &b) < 1e-13);
    }
}
