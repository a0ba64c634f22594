//! Spatial quadrature of `A^j`, and the maximal operator built on it.
//!
//! The `t`-grid is aligned with the grid columns: the step `s` is chosen so
//! that `2^{-j} s v₁(x)` is a whole number of cells. Along a line the
//! integrand has frequencies at most `2^{-j}B` (`B` the spectral radius of
//! `f`) and `α` has frequencies in `[-1, 1]`, so by Poisson summation the
//! trapezoid rule is exact once `1/s > 1 + 2^{-j}B`; the only errors left
//! are the `α` tail beyond `T` and the `x₂` interpolation.
//!
//! For fields depending on `x₁` the `x₂` shift is applied exactly as a
//! phase on the column spectra. For fields depending on `x₂` the samples
//! are interpolated by an eight-point Lagrange stencil in `x₂`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_scale, scale_range};
use crate::error::{Error, Result};
use crate::field::{Dependence, VectorFieldSpec};
use crate::grid::profiles::{alpha, alpha_truncation};
use crate::grid::{fft_inplace, Direction, GridFunction, TorusGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const STENCIL: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureOptions {
    /// Mass of `α` allowed outside the truncation window.
    pub tail_mass: f64,
    /// Spectral radius of `f`; measured from the spectrum when absent.
    pub bandwidth: Option<f64>,
    /// Coefficients below this fraction of the largest are ignored when
    /// measuring the spectral radius.
    pub band_threshold: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            tail_mass: 1e-10,
            bandwidth: None,
            band_threshold: 1e-15,
        }
    }
}

struct Plan {
    /// Columns advanced per `t` step.
    stride: usize,
    /// `t` step.
    step: f64,
    /// Steps on each side of `t = 0`.
    count: i64,
}

fn plan(grid: TorusGrid, eps: f64, v1: f64, bandwidth: f64, t_max: f64) -> Result<Plan> {
    let n = grid.n() as f64;
    let s_max = 1.0 / (1.0 + eps * bandwidth);
    let stride = ((1.0 - 1e-12) * s_max * eps * v1 * n).floor();
    if stride < 1.0 {
        return Err(Error::Precondition(format!(
            "averaging length {eps} too short for an alias-free column-aligned rule on N = {n}"
        )));
    }
    let step = stride / (eps * v1 * n);
    Ok(Plan {
        stride: stride as usize,
        step,
        count: (t_max / step).floor() as i64,
    })
}

fn bandwidth(f: &GridFunction, spec: &[Complex64], opts: &QuadratureOptions) -> f64 {
    if let Some(b) = opts.bandwidth {
        return b;
    }
    let g = f.grid();
    let n = g.n();
    let max = spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let cut = opts.band_threshold * max;
    let mut best = 0i64;
    for i1 in 0..n {
        let xi = g.freq(i1);
        for i2 in 0..n {
            if spec[g.index(i1, i2)].norm() > cut {
                let eta = g.freq(i2);
                best = best.max(xi * xi + eta * eta);
            }
        }
    }
    (best as f64).sqrt()
}

/// `A^j f` on the whole grid by column-aligned quadrature.
pub fn average_quadrature(
    f: &GridFunction,
    field: &VectorFieldSpec,
    j: u32,
    opts: &QuadratureOptions,
) -> Result<GridFunction> {
    check_scale(field, j)?;
    let grid = f.grid();
    let spec = f.spectrum_owned();
    let band = bandwidth(f, &spec, opts);
    let eps = 2f64.powi(-(j as i32));
    let t_max = alpha_truncation(opts.tail_mass);
    let samples = match field.dependence() {
        Dependence::Constant | Dependence::X1 => columns_shifted(grid, spec, field, eps, band, t_max)?,
        Dependence::X2 => rows_interpolated(f, field, eps, band, t_max)?,
    };
    GridFunction::new(grid, samples)
}

fn columns_shifted(
    grid: TorusGrid,
    spec: Vec<Complex64>,
    field: &VectorFieldSpec,
    eps: f64,
    band: f64,
    t_max: f64,
) -> Result<Vec<Complex64>> {
    let n = grid.n();
    // column spectra F_a(η) = Σ_ξ f̂(ξ, η) e^{2πiξa/N}
    let mut cols = spec;
    crate::grid::fft::fft_axis0(&mut cols, n, Direction::Inverse);
    let active: Vec<usize> = (0..n)
        .filter(|&ie| (0..n).any(|a| cols[grid.index(a, ie)] != ZERO))
        .collect();
    let etas: Vec<f64> = active.iter().map(|&ie| grid.freq(ie) as f64).collect();
    let plans: Vec<Plan> = (0..n)
        .map(|a| plan(grid, eps, field.eval(grid.point(a, 0))[0], band, t_max))
        .collect::<Result<_>>()?;
    let mut out = vec![ZERO; grid.len()];
    out.par_chunks_mut(n).enumerate().for_each(|(a, col)| {
        let v = field.eval(grid.point(a, 0));
        let p = &plans[a];
        // x₂ advances by 2^{-j} s v₂ per step
        let dx2 = eps * p.step * v[1];
        let step_phase: Vec<Complex64> = etas
            .iter()
            .map(|&e| Complex64::cis(std::f64::consts::TAU * e * dx2))
            .collect();
        let mut phase: Vec<Complex64> = etas
            .iter()
            .map(|&e| Complex64::cis(std::f64::consts::TAU * e * dx2 * (-p.count) as f64))
            .collect();
        let mut acc = vec![ZERO; active.len()];
        for m in -p.count..=p.count {
            let w = p.step * alpha(m as f64 * p.step);
            if w != 0.0 {
                let src = (a as i64 + m * p.stride as i64).rem_euclid(n as i64) as usize;
                let base = src * n;
                for (k, &ie) in active.iter().enumerate() {
                    acc[k] += cols[base + ie] * phase[k] * w;
                }
            }
            for (ph, st) in phase.iter_mut().zip(&step_phase) {
                *ph *= st;
            }
        }
        for (k, &ie) in active.iter().enumerate() {
            col[ie] = acc[k];
        }
        fft_inplace(col, Direction::Inverse);
    });
    Ok(out)
}

/// Weights of the `STENCIL`-point Lagrange rule at `frac` for nodes
/// `-3..=4` relative to the node below.
fn lagrange_weights(frac: f64) -> [f64; STENCIL] {
    let mut w = [1.0; STENCIL];
    for (k, wk) in w.iter_mut().enumerate() {
        let xk = k as f64 - 3.0;
        for m in 0..STENCIL {
            if m != k {
                let xm = m as f64 - 3.0;
                *wk *= (frac - xm) / (xk - xm);
            }
        }
    }
    w
}

fn rows_interpolated(
    f: &GridFunction,
    field: &VectorFieldSpec,
    eps: f64,
    band: f64,
    t_max: f64,
) -> Result<Vec<Complex64>> {
    let grid = f.grid();
    let n = grid.n();
    let ni = n as i64;
    // rows of constant x₂, contiguous in x₁
    let samples = f.samples();
    let mut by_row = vec![ZERO; grid.len()];
    for a in 0..n {
        for b in 0..n {
            by_row[b * n + a] = samples[grid.index(a, b)];
        }
    }
    let plans: Vec<Plan> = (0..n)
        .map(|b| plan(grid, eps, field.eval(grid.point(0, b))[0], band, t_max))
        .collect::<Result<_>>()?;
    let lines: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|b| {
            let v = field.eval(grid.point(0, b));
            let p = &plans[b];
            let mut line = vec![ZERO; n];
            for m in -p.count..=p.count {
                let t = m as f64 * p.step;
                let w = p.step * alpha(t);
                if w == 0.0 {
                    continue;
                }
                let y = b as f64 + eps * t * v[1] * n as f64;
                let below = y.floor();
                let lw = lagrange_weights(y - below);
                let shift = (m * p.stride as i64).rem_euclid(ni) as usize;
                for (k, &weight) in lw.iter().enumerate() {
                    let r = (below as i64 + k as i64 - 3).rem_euclid(ni) as usize;
                    let row = &by_row[r * n..(r + 1) * n];
                    let c = weight * w;
                    // out[a] += c · row[(a + shift) mod n], in two contiguous runs
                    let (head, tail) = line.split_at_mut(n - shift);
                    for (o, z) in head.iter_mut().zip(&row[shift..]) {
                        *o += z * c;
                    }
                    for (o, z) in tail.iter_mut().zip(&row[..shift]) {
                        *o += z * c;
                    }
                }
            }
            line
        })
        .collect();
    let mut out = vec![ZERO; grid.len()];
    for (b, line) in lines.into_iter().enumerate() {
        for (a, z) in line.into_iter().enumerate() {
            out[grid.index(a, b)] = z;
        }
    }
    Ok(out)
}

/// `sup_j |A^j f|` over the admissible dyadic scales, by quadrature.
pub fn maximal_brute(f: &GridFunction, field: &VectorFieldSpec, opts: &QuadratureOptions) -> Result<GridFunction> {
    let grid = f.grid();
    let mut best = vec![0.0f64; grid.len()];
    for j in scale_range(grid, field.eps0)? {
        let a = average_quadrature(f, field, j, opts)?;
        for (m, z) in best.iter_mut().zip(a.samples()) {
            *m = m.max(z.norm());
        }
    }
    GridFunction::new(grid, best.into_iter().map(|m| Complex64::new(m, 0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averages::average_exact_grid;
    use crate::field::FieldKind;
    use crate::grid::{random_function, SpectralWeighting};

    fn field(kind: FieldKind) -> VectorFieldSpec {
        VectorFieldSpec::with_default_amplitude(kind, 0.125).unwrap()
    }

    fn rel_l2(a: &GridFunction, b: &GridFunction) -> f64 {
        a.sub(b).norm_l2() / b.norm_l2()
    }

    #[test]
    fn constant_function() {
        let g = TorusGrid::new(8).unwrap();
        let one = GridFunction::from_fn(g, |_| Complex64::new(1.0, 0.0));
        for kind in FieldKind::ALL {
            let out = average_quadrature(&one, &field(kind), 3, &Default::default()).unwrap();
            for z in out.samples() {
                assert!((z - 1.0).norm() < 1e-9, "{kind:?}: {z}");
            }
        }
    }

    #[test]
    fn high_character_is_killed() {
        let g = TorusGrid::new(8).unwrap();
        let ch = GridFunction::character(g, [40, 0]);
        let out = average_quadrature(&ch, &field(FieldKind::Constant), 3, &Default::default()).unwrap();
        assert!(out.norm_sup() < 1e-3);
    }

    #[test]
    fn agrees_with_exact_evaluator() {
        let g = TorusGrid::new(8).unwrap();
        let f = random_function(g, 11, Some((1, 3)), SpectralWeighting::Flat).unwrap();
        for kind in [FieldKind::Shear, FieldKind::Sine, FieldKind::VerticalShear] {
            let fld = field(kind);
            let q = average_quadrature(&f, &fld, 3, &Default::default()).unwrap();
            let e = average_exact_grid(&f, &fld, 3).unwrap();
            let err = rel_l2(&q, &e);
            assert!(err < 1e-6, "{kind:?}: {err}");
        }
    }

    #[test]
    fn maximal_dominates_each_scale() {
        let g = TorusGrid::new(9).unwrap();
        let f = random_function(g, 2, Some((0, 2)), SpectralWeighting::Flat).unwrap();
        let fld = field(FieldKind::Shear);
        let opts = QuadratureOptions::default();
        let m = maximal_brute(&f, &fld, &opts).unwrap();
        for j in scale_range(g, fld.eps0).unwrap() {
            let a = average_quadrature(&f, &fld, j, &opts).unwrap();
            for (x, y) in m.samples().iter().zip(a.samples()) {
                assert!(x.re >= y.norm() - 1e-9);
            }
        }
    }
}
