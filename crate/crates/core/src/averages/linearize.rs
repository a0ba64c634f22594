//! The linearization `J(x)`, `δ(x)`, `K(x)` of the maximal operator and the
//! high/low Littlewood–Paley split of `A^{J(x)} f(x)`.

use num_complex::Complex64;
use serde::Serialize;

use super::exact::{exact_grid_rows, SpectralRows};
use super::scale_range;
use crate::error::{Error, Result};
use crate::field::VectorFieldSpec;
use crate::grid::multipliers::lp_factor;
use crate::grid::{lp_range, GridFunction, TorusGrid};

#[derive(Debug, Clone, Serialize)]
pub struct LinearizationMaps {
    #[serde(skip)]
    pub grid: TorusGrid,
    /// Scale attaining the maximum, smallest on ties.
    #[serde(rename = "J")]
    pub j_map: Vec<u32>,
    /// `2^{-K-1} < δ ≤ 2^{-K}`; `n_log2` where `δ = 0`.
    #[serde(rename = "K")]
    pub k_map: Vec<i32>,
    /// `δ(x) = 2^{-J(x)} sup_{|t| < 2^{-J(x)}} ω_x(t)`.
    pub delta: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub j_range: (u32, u32),
}

/// Dyadic exponent `K` with `2^{-K-1} < δ ≤ 2^{-K}`.
pub fn width_exponent(delta: f64) -> i32 {
    let mut k = (-delta.log2()).floor() as i32;
    // guard against rounding at exact powers of two
    while 2f64.powi(-k) < delta {
        k -= 1;
    }
    while 2f64.powi(-k - 1) >= delta {
        k += 1;
    }
    k
}

fn spectrum_of(f: &GridFunction) -> Result<&[Complex64]> {
    f.spectrum()
        .ok_or_else(|| Error::Precondition("spectrum not computed".into()))
}

pub fn linearize(f: &GridFunction, field: &VectorFieldSpec) -> Result<LinearizationMaps> {
    let grid = f.grid();
    let range = scale_range(grid, field.eps0)?;
    let rows = SpectralRows::from_dense(grid, spectrum_of(f)?);
    let mut best = vec![-1.0f64; grid.len()];
    let mut j_map = vec![*range.start(); grid.len()];
    for j in range.clone() {
        let a = exact_grid_rows(&rows, field, j);
        for ((b, jm), z) in best.iter_mut().zip(j_map.iter_mut()).zip(&a) {
            if z.norm() > *b {
                *b = z.norm();
                *jm = j;
            }
        }
    }
    let sups: Vec<(u32, Vec<f64>)> = range
        .clone()
        .map(|j| (j, field.sup_omega_map(grid, 2f64.powi(-(j as i32)))))
        .collect();
    let n_log2 = grid.n_log2() as i32;
    let mut delta = Vec::with_capacity(grid.len());
    let mut k_map = Vec::with_capacity(grid.len());
    let mut degenerate = Vec::with_capacity(grid.len());
    for (i, &j) in j_map.iter().enumerate() {
        let sup = sups[(j - range.start()) as usize].1[i];
        let d = 2f64.powi(-(j as i32)) * sup;
        delta.push(d);
        degenerate.push(d == 0.0);
        k_map.push(if d == 0.0 { n_log2 } else { width_exponent(d) });
    }
    Ok(LinearizationMaps {
        grid,
        j_map,
        k_map,
        delta,
        degenerate,
        j_range: (*range.start(), *range.end()),
    })
}

/// The three parts of `A^{J(x)} f(x)` and how well they recombine.
#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    /// `‖Σ_{k ≥ K(x)} A^{J(x)} P_k f‖₂`.
    pub high_norm: f64,
    /// `‖Σ_{k < K(x)} A^{J(x)} P_k f + A^{J(x)} P_mean f‖₂`.
    pub low_norm: f64,
    pub mean_norm: f64,
    /// `‖A^{J(x)} f(x)‖₂`.
    pub total_norm: f64,
    /// `‖A^J f - high - low‖₂ / ‖A^J f‖₂`.
    pub recombination_error: f64,
}

pub fn split_identity(f: &GridFunction, field: &VectorFieldSpec, maps: &LinearizationMaps) -> Result<SplitReport> {
    let grid = f.grid();
    let spec = spectrum_of(f)?;
    let len = grid.len();
    let (j_lo, j_hi) = maps.j_range;
    let mut total = vec![Complex64::new(0.0, 0.0); len];
    let mut high = total.clone();
    let mut low = total.clone();
    let mut mean = total.clone();

    let filtered = |m: &dyn Fn(i64, i64) -> f64| {
        let mut s = spec.to_vec();
        let n = grid.n();
        for i1 in 0..n {
            for i2 in 0..n {
                let w = m(grid.freq(i1), grid.freq(i2));
                let c = &mut s[grid.index(i1, i2)];
                *c = if w == 0.0 { Complex64::new(0.0, 0.0) } else { *c * w };
            }
        }
        SpectralRows::from_dense(grid, &s)
    };

    let full = SpectralRows::from_dense(grid, spec);
    let mean_rows = filtered(&|xi, eta| if xi == 0 && eta == 0 { 1.0 } else { 0.0 });
    let pieces: Vec<(i32, SpectralRows)> = lp_range(grid)
        .map(|k| (k, filtered(&|xi, eta| lp_factor(k, xi, eta))))
        .collect();
    for j in j_lo..=j_hi {
        let pick: Vec<usize> = (0..len).filter(|&i| maps.j_map[i] == j).collect();
        if pick.is_empty() {
            continue;
        }
        let a = exact_grid_rows(&full, field, j);
        let am = exact_grid_rows(&mean_rows, field, j);
        for &i in &pick {
            total[i] = a[i];
            mean[i] = am[i];
            low[i] += am[i];
        }
        for (k, rows) in &pieces {
            if rows.rows().is_empty() {
                continue;
            }
            let ak = exact_grid_rows(rows, field, j);
            for &i in &pick {
                if *k >= maps.k_map[i] {
                    high[i] += ak[i];
                } else {
                    low[i] += ak[i];
                }
            }
        }
    }
    let norm = |v: &[Complex64]| (v.iter().map(|z| z.norm_sqr()).sum::<f64>() / len as f64).sqrt();
    let residual: Vec<Complex64> = (0..len).map(|i| total[i] - high[i] - low[i]).collect();
    let total_norm = norm(&total);
    Ok(SplitReport {
        high_norm: norm(&high),
        low_norm: norm(&low),
        mean_norm: norm(&mean),
        total_norm,
        recombination_error: if total_norm == 0.0 {
            norm(&residual)
        } else {
            norm(&residual) / total_norm
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldKind;
    use crate::grid::{random_function, SpectralWeighting};

    #[test]
    fn width_exponent_brackets() {
        for &d in &[1.0, 0.5, 0.3, 2f64.powi(-10), 2f64.powi(-10) * 1.0001, 1e-7] {
            let k = width_exponent(d);
            assert!(2f64.powi(-k - 1) < d && d <= 2f64.powi(-k), "{d} {k}");
        }
    }

    #[test]
    fn single_character_selects_finest_scale() {
        let g = TorusGrid::new(9).unwrap();
        let fld = VectorFieldSpec::with_default_amplitude(FieldKind::Constant, 0.125).unwrap();
        let f = GridFunction::character(g, [8, 0]).transform();
        let maps = linearize(&f, &fld).unwrap();
        assert_eq!(maps.j_range, (3, 4));
        assert!(maps.j_map.iter().all(|&j| j == 4));
        assert!(maps.degenerate.iter().all(|&d| d));
        assert!(maps.k_map.iter().all(|&k| k == 9));
    }

    #[test]
    fn shear_width_is_about_square_of_length() {
        let g = TorusGrid::new(9).unwrap();
        let fld = VectorFieldSpec::with_default_amplitude(FieldKind::Shear, 0.125).unwrap();
        let f = random_function(g, 3, Some((1, 5)), SpectralWeighting::Flat).unwrap();
        let maps = linearize(&f, &fld).unwrap();
        // away from the turning points of the sawtooth
        for a in (0..g.n()).filter(|&a| (a as f64 / g.n() as f64 - 0.5).abs() > 0.35) {
            let i = g.index(a, 17);
            let j = maps.j_map[i] as i32;
            assert!((maps.k_map[i] - 2 * j).abs() <= 1, "a={a}: K={} J={j}", maps.k_map[i]);
        }
    }

    #[test]
    fn split_recombines() {
        let g = TorusGrid::new(8).unwrap();
        let fld = VectorFieldSpec::with_default_amplitude(FieldKind::Sine, 0.125).unwrap();
        let f = random_function(g, 5, None, SpectralWeighting::Flat).unwrap();
        let maps = linearize(&f, &fld).unwrap();
        let r = split_identity(&f, &fld, &maps).unwrap();
        assert!(r.recombination_error < 1e-10, "{}", r.recombination_error);
        assert!(r.high_norm + r.low_norm >= r.total_norm - 1e-12);
    }
}
