//! Fourier-side evaluation of `A^j`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::check_scale;
use crate::error::{Error, Result};
use crate::field::{Dependence, VectorFieldSpec};
use crate::grid::profiles::alpha_hat;
use crate::grid::{fft_inplace, Direction, GridFunction, TorusGrid};
use crate::Point;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coefficients of one frequency row `η`, on the contiguous range
/// `ξ_start .. ξ_start + coeffs.len()` of signed frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRow {
    pub eta: i64,
    pub xi_start: i64,
    pub coeffs: Vec<Complex64>,
}

/// A spectrum stored row by row, keeping only the span of nonzero
/// coefficients in each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRows {
    grid: TorusGrid,
    rows: Vec<SpectralRow>,
}

impl SpectralRows {
    pub fn from_dense(grid: TorusGrid, spec: &[Complex64]) -> Self {
        let n = grid.n();
        let half = (n / 2) as i64;
        let mut rows = Vec::new();
        for ie in 0..n {
            let at = |xi: i64| spec[grid.index(grid.freq_index(xi), ie)];
            let Some(lo) = (-half..half).find(|&xi| at(xi) != ZERO) else {
                continue;
            };
            let hi = (-half..half).rev().find(|&xi| at(xi) != ZERO).unwrap_or(lo);
            rows.push(SpectralRow {
                eta: grid.freq(ie),
                xi_start: lo,
                coeffs: (lo..=hi).map(at).collect(),
            });
        }
        Self { grid, rows }
    }

    /// Rows must carry distinct `η` and frequencies inside `[-N/2, N/2)`.
    pub fn from_rows(grid: TorusGrid, rows: Vec<SpectralRow>) -> Result<Self> {
        let half = (grid.n() / 2) as i64;
        for r in &rows {
            let end = r.xi_start + r.coeffs.len() as i64;
            if r.eta < -half || r.eta >= half || r.xi_start < -half || end > half {
                return Err(Error::Precondition(format!(
                    "row η = {} spans frequencies outside the grid",
                    r.eta
                )));
            }
        }
        Ok(Self { grid, rows })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn rows(&self) -> &[SpectralRow] {
        &self.rows
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let g = self.grid;
        let mut out = vec![ZERO; g.len()];
        for r in &self.rows {
            let ie = g.freq_index(r.eta);
            for (i, c) in r.coeffs.iter().enumerate() {
                out[g.index(g.freq_index(r.xi_start + i as i64), ie)] += c;
            }
        }
        out
    }

    /// Largest `|ξ|` among coefficients above `threshold`.
    pub fn max_frequency(&self, threshold: f64) -> f64 {
        let mut best = 0i64;
        for r in &self.rows {
            for (i, c) in r.coeffs.iter().enumerate() {
                if c.norm() > threshold {
                    let xi = r.xi_start + i as i64;
                    best = best.max(xi * xi + r.eta * r.eta);
                }
            }
        }
        (best as f64).sqrt()
    }
}

/// Signed `ξ` range (inclusive) of row `row` that can meet `|⟨ξ, v⟩| < 2^j`.
#[inline]
fn window(row: &SpectralRow, v: [f64; 2], two_j: f64) -> (i64, i64) {
    let centre = -(row.eta as f64) * v[1] / v[0];
    let half = two_j / v[0];
    let lo = ((centre - half).floor() as i64).max(row.xi_start);
    let hi = ((centre + half).ceil() as i64).min(row.xi_start + row.coeffs.len() as i64 - 1);
    (lo, hi)
}

fn spectral_rows(f: &GridFunction) -> Result<SpectralRows> {
    let spec = f
        .spectrum()
        .ok_or_else(|| Error::Precondition("spectrum not computed".into()))?;
    Ok(SpectralRows::from_dense(f.grid(), spec))
}

/// `A^j f` at arbitrary points. Points with bitwise equal directions share
/// their `α̂` factors.
pub fn average_exact(f: &GridFunction, field: &VectorFieldSpec, j: u32, points: &[Point]) -> Result<Vec<Complex64>> {
    check_scale(field, j)?;
    let rows = spectral_rows(f)?;
    Ok(exact_points_rows(&rows, field, j, points))
}

pub fn exact_points_rows(rows: &SpectralRows, field: &VectorFieldSpec, j: u32, points: &[Point]) -> Vec<Complex64> {
    let two_j = (1u64 << j) as f64;
    let scale = 1.0 / two_j;
    let dirs: Vec<[f64; 2]> = points.iter().map(|&x| field.eval(x)).collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| (dirs[i][0].to_bits(), dirs[i][1].to_bits()));
    let mut buckets: Vec<&[usize]> = Vec::new();
    let mut start = 0;
    for i in 1..=order.len() {
        if i == order.len() || dirs[order[i]] != dirs[order[start]] {
            buckets.push(&order[start..i]);
            start = i;
        }
    }
    let results: Vec<Vec<(usize, Complex64)>> = buckets
        .par_iter()
        .map(|bucket| {
            let v = dirs[bucket[0]];
            // weighted coefficients shared by the whole bucket
            let weighted: Vec<(i64, i64, Vec<Complex64>)> = rows
                .rows()
                .iter()
                .filter_map(|r| {
                    let (lo, hi) = window(r, v, two_j);
                    if lo > hi {
                        return None;
                    }
                    let w: Vec<Complex64> = (lo..=hi)
                        .map(|xi| {
                            let a = alpha_hat(scale * (xi as f64 * v[0] + r.eta as f64 * v[1]));
                            r.coeffs[(xi - r.xi_start) as usize] * a
                        })
                        .collect();
                    Some((r.eta, lo, w))
                })
                .collect();
            bucket
                .iter()
                .map(|&i| {
                    let x = points[i];
                    let step = Complex64::cis(std::f64::consts::TAU * x[0]);
                    let mut total = ZERO;
                    for (eta, lo, w) in &weighted {
                        let mut phase = Complex64::cis(
                            std::f64::consts::TAU * ((*lo as f64 * x[0]).fract() + (*eta as f64 * x[1]).fract()),
                        );
                        for c in w {
                            total += c * phase;
                            phase *= step;
                        }
                    }
                    (i, total)
                })
                .collect()
        })
        .collect();
    let mut out = vec![ZERO; points.len()];
    for (i, z) in results.into_iter().flatten() {
        out[i] = z;
    }
    out
}

/// `A^j f` on the whole grid.
pub fn average_exact_grid(f: &GridFunction, field: &VectorFieldSpec, j: u32) -> Result<GridFunction> {
    check_scale(field, j)?;
    let rows = spectral_rows(f)?;
    GridFunction::new(f.grid(), exact_grid_rows(&rows, field, j))
}

/// `A^j` of a row-stored spectrum on the whole grid.
///
/// Fields depending on `x₁` only are evaluated column by column: the
/// direction is fixed along a column, so the column is the inverse DFT in
/// `η` of `h(η) = Σ_ξ f̂ α̂ e^{2πiξx₁}`. Fields depending on `x₂` only are
/// handled row by row in the same way.
pub fn exact_grid_rows(rows: &SpectralRows, field: &VectorFieldSpec, j: u32) -> Vec<Complex64> {
    let grid = rows.grid();
    let n = grid.n();
    let two_j = (1u64 << j) as f64;
    let scale = 1.0 / two_j;
    let tw = twiddles(n);
    let mask = n as i64 - 1;
    let mut out = vec![ZERO; grid.len()];
    match field.dependence() {
        Dependence::Constant | Dependence::X1 => {
            out.par_chunks_mut(n).enumerate().for_each(|(a, col)| {
                let v = field.eval(grid.point(a, 0));
                for r in rows.rows() {
                    let (lo, hi) = window(r, v, two_j);
                    let mut h = ZERO;
                    for xi in lo..=hi {
                        let w = alpha_hat(scale * (xi as f64 * v[0] + r.eta as f64 * v[1]));
                        if w != 0.0 {
                            h += r.coeffs[(xi - r.xi_start) as usize] * w * tw[((xi * a as i64) & mask) as usize];
                        }
                    }
                    col[grid.freq_index(r.eta)] += h;
                }
                fft_inplace(col, Direction::Inverse);
            });
        }
        Dependence::X2 => {
            let lines: Vec<Vec<Complex64>> = (0..n)
                .into_par_iter()
                .map(|b| {
                    let v = field.eval(grid.point(0, b));
                    let mut g = vec![ZERO; n];
                    for r in rows.rows() {
                        let (lo, hi) = window(r, v, two_j);
                        let ph = tw[((r.eta * b as i64) & mask) as usize];
                        for xi in lo..=hi {
                            let w = alpha_hat(scale * (xi as f64 * v[0] + r.eta as f64 * v[1]));
                            if w != 0.0 {
                                g[grid.freq_index(xi)] += r.coeffs[(xi - r.xi_start) as usize] * w * ph;
                            }
                        }
                    }
                    fft_inplace(&mut g, Direction::Inverse);
                    g
                })
                .collect();
            for (b, line) in lines.into_iter().enumerate() {
                for (a, z) in line.into_iter().enumerate() {
                    out[grid.index(a, b)] = z;
                }
            }
        }
    }
    out
}

fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::cis(std::f64::consts::TAU * k as f64 / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldKind;
    use crate::grid::{random_function, SpectralWeighting};

    fn field(kind: FieldKind) -> VectorFieldSpec {
        VectorFieldSpec::with_default_amplitude(kind, 0.125).unwrap()
    }

    #[test]
    fn constant_function_is_preserved() {
        let g = TorusGrid::new(8).unwrap();
        let one = GridFunction::from_fn(g, |_| Complex64::new(1.0, 0.0)).transform();
        let pts = [[0.1, 0.2], [0.7, 0.55]];
        for kind in FieldKind::ALL {
            let out = average_exact(&one, &field(kind), 4, &pts).unwrap();
            for z in out {
                assert!((z - 1.0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn character_examples_for_constant_field() {
        let g = TorusGrid::new(8).unwrap();
        let f = field(FieldKind::Constant);
        let j = 4;
        let m = 20; // 2^-4 · 20 > 1
        let ch = GridFunction::character(g, [m, 0]).transform();
        let out = average_exact_grid(&ch, &f, j).unwrap();
        assert!(out.norm_sup() < 1e-14);
        let ch = GridFunction::character(g, [0, 9]).transform();
        let out = average_exact_grid(&ch, &f, j).unwrap();
        let err = out.sub(&ch).norm_sup();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn missing_spectrum_is_rejected() {
        let g = TorusGrid::new(8).unwrap();
        let f = GridFunction::character(g, [1, 1]);
        assert!(matches!(
            average_exact(&f, &field(FieldKind::Shear), 4, &[[0.0, 0.0]]),
            Err(Error::Precondition(_))
        ));
        let f = f.transform();
        assert!(average_exact(&f, &field(FieldKind::Shear), 2, &[[0.0, 0.0]]).is_err());
    }

    #[test]
    fn grid_and_point_paths_agree() {
        let g = TorusGrid::new(8).unwrap();
        let f = random_function(g, 9, None, SpectralWeighting::Flat).unwrap();
        for kind in [FieldKind::Shear, FieldKind::VerticalShear, FieldKind::Sine] {
            let fld = field(kind);
            let full = average_exact_grid(&f, &fld, 4).unwrap();
            let pts: Vec<(usize, usize)> = (0..40).map(|i| ((i * 37) % 256, (i * 101 + 5) % 256)).collect();
            let xs: Vec<Point> = pts.iter().map(|&(a, b)| g.point(a, b)).collect();
            let vals = average_exact(&f, &fld, 4, &xs).unwrap();
            for (&(a, b), z) in pts.iter().zip(vals) {
                assert!((full.at(a, b) - z).norm() < 1e-12, "{kind:?}");
            }
        }
    }

    #[test]
    fn linear_and_contractive() {
        let g = TorusGrid::new(8).unwrap();
        let f = random_function(g, 1, Some((1, 4)), SpectralWeighting::Flat).unwrap();
        let h = random_function(g, 2, Some((2, 5)), SpectralWeighting::Flat).unwrap();
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5));
        let fld = field(FieldKind::Sine);
        let lhs = average_exact_grid(&f.combine(a, &h, b), &fld, 3).unwrap();
        let af = average_exact_grid(&f, &fld, 3).unwrap();
        let ah = average_exact_grid(&h, &fld, 3).unwrap();
        let rhs = af.combine(a, &ah, b);
        assert!(lhs.sub(&rhs).norm_sup() < 1e-12 * (1.0 + lhs.norm_sup()));
        assert!(af.norm_sup() <= f.norm_sup() * (1.0 + 1e-6));
    }

    #[test]
    fn row_storage_round_trips() {
        let g = TorusGrid::new(8).unwrap();
        let f = random_function(g, 4, Some((2, 3)), SpectralWeighting::Flat).unwrap();
        let rows = SpectralRows::from_dense(g, f.spectrum().unwrap());
        assert_eq!(rows.to_dense(), f.spectrum().unwrap());
        assert!(rows.max_frequency(0.0) <= 16.0);
    }
}
