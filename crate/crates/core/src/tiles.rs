//! Dyadic slope intervals, tiles, wave packets and their coefficients.
//!
//! For `κ = k + l` and `θ = κ - j` the frequency plane is cut by the
//! multipliers `m̂_ω(ξ, η) = β̃(2^{-κ}|η|) β(2^θ(ξ/η - c_ω))`, one per
//! interval `ω` of length `2^{-θ}` in `[-20, 20)`. Each `ω` comes with a
//! partition of the torus into `2^j × 2^κ` cells: block `u` covers the
//! columns `[u L, (u+1) L)`, `L = N 2^{-j}`, and inside a block the rows are
//! cut into strips of height `W = N 2^{-κ}` sheared by slope `-c_ω`. The
//! tile centres form the lattice `((u + ½) 2^{-j}, (w + ½) 2^{-κ})`.
//!
//! The wave packet of a tile is `φ̂_s = √m̂_ω e^{-2πi⟨ξ, c_s⟩} / Z_ω` with
//! `Z_ω² = Σ m̂_ω`, so `‖φ_s‖₂ = 1` on the grid. Averaging the wave-packet
//! expansion over all lattice offsets of the tiling reproduces
//! `f * m_ω / κ_ω` exactly, with `κ_ω = |s| Σ m̂_ω`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averages::exact::{exact_grid_rows, exact_points_rows, SpectralRow, SpectralRows};
use crate::error::{Error, Result};
use crate::field::VectorFieldSpec;
use crate::grid::profiles::{beta_omega, beta_tilde_root, sigma};
use crate::grid::{fft_inplace, Direction, GridFunction, TorusGrid};
use crate::rects::{Interval, Rect};
use crate::Point;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Half-extent of the slope range covered by the intervals.
pub const SLOPE_RANGE: i64 = 20;

/// `[index 2^{-θ}, (index + 1) 2^{-θ})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub theta: u32,
    pub index: i64,
}

impl DyadicInterval {
    pub fn new(theta: u32, index: i64) -> Self {
        Self { theta, index }
    }

    pub fn length(&self) -> f64 {
        2f64.powi(-(self.theta as i32))
    }

    pub fn lo(&self) -> f64 {
        self.index as f64 * self.length()
    }

    pub fn hi(&self) -> f64 {
        (self.index + 1) as f64 * self.length()
    }

    pub fn center(&self) -> f64 {
        (self.index as f64 + 0.5) * self.length()
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lo() && y < self.hi()
    }

    /// Whether `y` lies in the interval dilated by `factor` about its centre.
    pub fn dilated_contains(&self, factor: f64, y: f64) -> bool {
        (y - self.center()).abs() < 0.5 * factor * self.length()
    }

    /// `β_ω(y) = β(2^θ (y - c_ω))`.
    #[inline]
    pub fn bump(&self, y: f64) -> f64 {
        beta_omega(self.theta, self.center(), y)
    }

    #[inline]
    fn bump_root(&self, y: f64) -> f64 {
        sigma((1u64 << self.theta) as f64 * (y - self.center()))
    }

    pub fn negated(&self) -> Interval {
        Interval {
            lo: -self.hi(),
            hi: -self.lo(),
        }
    }
}

/// The `40 · 2^θ` intervals of length `2^{-θ}` tiling `[-20, 20)`.
pub fn dyadic_grid(theta: u32) -> Vec<DyadicInterval> {
    let per = 1i64 << theta;
    (-SLOPE_RANGE * per..SLOPE_RANGE * per)
        .map(|i| DyadicInterval::new(theta, i))
        .collect()
}

/// Scales `(j, k, l)` of a tile family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scales {
    pub j: u32,
    pub k: u32,
    pub l: u32,
}

impl Scales {
    pub fn kappa(&self) -> u32 {
        self.k + self.l
    }

    pub fn theta(&self) -> Result<u32> {
        self.kappa()
            .checked_sub(self.j)
            .ok_or_else(|| Error::Precondition(format!("θ = k + l - j negative for {self:?}")))
    }

    /// Requires cells at least four grid points across in both directions.
    pub fn check(&self, grid: TorusGrid) -> Result<()> {
        self.theta()?;
        let n = grid.n_log2();
        if self.kappa() + 2 > n || self.j + 2 > n {
            return Err(Error::Precondition(format!(
                "tiles at {self:?} are not resolved by N = {}",
                grid.n()
            )));
        }
        Ok(())
    }

    pub fn tiles_per_omega(&self) -> usize {
        1 << (self.j + self.kappa())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub scales: Scales,
    pub omega: DyadicInterval,
    pub cell: (u32, u32),
    pub center: Point,
}

impl Tile {
    pub fn new(scales: Scales, omega: DyadicInterval, u: u32, w: u32) -> Self {
        let center = [
            (u as f64 + 0.5) * 2f64.powi(-(scales.j as i32)),
            (w as f64 + 0.5) * 2f64.powi(-(scales.kappa() as i32)),
        ];
        Self {
            scales,
            omega,
            cell: (u, w),
            center,
        }
    }

    /// `|s| = 2^{-j-κ}`.
    pub fn area(&self) -> f64 {
        1.0 / self.scales.tiles_per_omega() as f64
    }

    /// The tile as a rectangle of length `2^{-j}` and width `2^{-κ}` whose
    /// long side has slope `-c_ω`.
    pub fn rect(&self) -> Rect {
        let c = -self.omega.center();
        let r = (1.0 + c * c).sqrt();
        let width = 2f64.powi(-(self.scales.kappa() as i32));
        Rect {
            center: self.center,
            orientation: [1.0 / r, c / r],
            length: 2f64.powi(-(self.scales.j as i32)),
            width,
            delta: width,
            j: self.scales.j,
        }
    }

    /// Row offset of column `a` inside the tile's block.
    fn offset(&self, grid: TorusGrid, a: usize) -> i64 {
        shear_offset(grid, self.scales, &self.omega, a)
    }

    /// Grid cells of the sheared cell.
    pub fn cells(&self, grid: TorusGrid) -> Vec<usize> {
        let n = grid.n();
        let len = n >> self.scales.j;
        let wid = n >> self.scales.kappa();
        let (u, w) = (self.cell.0 as usize, self.cell.1 as usize);
        let mut out = Vec::with_capacity(len * wid);
        for a in u * len..(u + 1) * len {
            let off = self.offset(grid, a);
            for r in 0..wid {
                let b = ((w * wid + r) as i64 + off).rem_euclid(n as i64) as usize;
                out.push(grid.index(a, b));
            }
        }
        out
    }
}

fn shear_offset(grid: TorusGrid, scales: Scales, omega: &DyadicInterval, a: usize) -> i64 {
    let len = grid.n() >> scales.j;
    let u = a / len;
    let rel = a as f64 - (u * len) as f64 - 0.5 * (len as f64 - 1.0);
    (-omega.center() * rel + 0.5).floor() as i64
}

/// The tile of the `ω`-family containing grid cell `(a, b)`.
pub fn tile_containing(grid: TorusGrid, scales: Scales, omega: DyadicInterval, a: usize, b: usize) -> Tile {
    let n = grid.n();
    let len = n >> scales.j;
    let wid = n >> scales.kappa();
    let off = shear_offset(grid, scales, &omega, a);
    let w = ((b as i64 - off).rem_euclid(n as i64) as usize) / wid;
    Tile::new(scales, omega, (a / len) as u32, w as u32)
}

/// `√m̂_ω` on its support, row by row.
#[derive(Debug, Clone)]
pub struct OmegaSupport {
    pub omega: DyadicInterval,
    pub kappa: u32,
    pub rows: Vec<(i64, i64, Vec<f64>)>,
    /// `Σ m̂_ω` over the grid.
    pub mass: f64,
}

impl OmegaSupport {
    pub fn new(grid: TorusGrid, kappa: u32, omega: DyadicInterval) -> Self {
        let half = (grid.n() / 2) as i64;
        let scale = 2f64.powi(-(kappa as i32));
        let reach = 2.0 * omega.length();
        let c = omega.center();
        let mut rows = Vec::new();
        let mut mass = 0.0;
        for eta in -half..half {
            if eta == 0 {
                continue;
            }
            let radial = beta_tilde_root(eta.unsigned_abs() as f64 * scale);
            if radial == 0.0 {
                continue;
            }
            let e = eta as f64;
            let (a, b) = (e * (c - reach), e * (c + reach));
            let lo = (a.min(b).floor() as i64).max(-half);
            let hi = (a.max(b).ceil() as i64).min(half - 1);
            let vals: Vec<(i64, f64)> = (lo..=hi)
                .map(|xi| (xi, radial * omega.bump_root(xi as f64 / e)))
                .filter(|&(_, v)| v != 0.0)
                .collect();
            let Some(&(first, _)) = vals.first() else {
                continue;
            };
            let last = vals.last().map(|v| v.0).unwrap_or(first);
            let root: Vec<f64> = (first..=last)
                .map(|xi| radial * omega.bump_root(xi as f64 / e))
                .collect();
            mass += root.iter().map(|r| r * r).sum::<f64>();
            rows.push((eta, first, root));
        }
        Self {
            omega,
            kappa,
            rows,
            mass,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.mass == 0.0
    }

    /// `‖φ_s‖_∞ = Σ √m̂ / Z`, attained at the tile centre.
    pub fn sup_norm(&self) -> f64 {
        let s: f64 = self.rows.iter().flat_map(|r| r.2.iter()).sum();
        s / self.mass.sqrt()
    }
}

/// All `ω ∈ 𝒟_θ` whose multiplier meets the grid.
pub fn active_omegas(grid: TorusGrid, scales: Scales) -> Result<Vec<OmegaSupport>> {
    scales.check(grid)?;
    let theta = scales.theta()?;
    Ok(dyadic_grid(theta)
        .into_par_iter()
        .map(|omega| OmegaSupport::new(grid, scales.kappa(), omega))
        .filter(|s| !s.is_empty())
        .collect())
}

/// Energy of `f` on the frequencies where some `m̂_ω` is nonzero.
pub fn band_energy(f: &GridFunction, scales: Scales) -> Result<f64> {
    let grid = f.grid();
    let spec = spectrum_of(f);
    let mut hit = vec![false; grid.len()];
    for s in active_omegas(grid, scales)? {
        for (eta, lo, root) in &s.rows {
            let ie = grid.freq_index(*eta);
            for (i, r) in root.iter().enumerate() {
                if *r != 0.0 {
                    hit[grid.index(grid.freq_index(lo + i as i64), ie)] = true;
                }
            }
        }
    }
    Ok(spec
        .iter()
        .zip(&hit)
        .filter(|(_, &h)| h)
        .map(|(c, _)| c.norm_sqr())
        .sum())
}

/// Schur-test bound for the frame operator `f ↦ Σ_s ⟨f, φ_s⟩ φ_s`:
/// `sup_ξ Σ_ω (|𝒰| / Z_ω²) √m̂_ω(ξ) Σ_{ξ' ≡ ξ} √m̂_ω(ξ')`, the congruence
/// taken modulo the dual lattice `2^j ℤ × 2^κ ℤ`. Bounds
/// `Σ_s |⟨f, φ_s⟩|² / ‖f‖₂²` for every `f`.
pub fn frame_bound(grid: TorusGrid, scales: Scales) -> Result<f64> {
    let (pj, pk) = (1usize << scales.j, 1usize << scales.kappa());
    let tiles = scales.tiles_per_omega() as f64;
    let mut acc = vec![0.0f64; grid.len()];
    for s in active_omegas(grid, scales)? {
        let mut class = vec![0.0f64; pj * pk];
        let slot = |xi: i64, eta: i64| xi.rem_euclid(pj as i64) as usize * pk + eta.rem_euclid(pk as i64) as usize;
        for (eta, lo, root) in &s.rows {
            for (i, r) in root.iter().enumerate() {
                class[slot(lo + i as i64, *eta)] += r;
            }
        }
        let w = tiles / s.mass;
        for (eta, lo, root) in &s.rows {
            let ie = grid.freq_index(*eta);
            for (i, r) in root.iter().enumerate() {
                let xi = lo + i as i64;
                acc[grid.index(grid.freq_index(xi), ie)] += w * r * class[slot(xi, *eta)];
            }
        }
    }
    Ok(acc.into_iter().fold(0.0, f64::max))
}

/// Row-stored spectrum of the wave packet of `tile`.
pub fn wavelet_rows(grid: TorusGrid, tile: &Tile, support: &OmegaSupport) -> Result<SpectralRows> {
    if support.is_empty() {
        return Err(Error::Precondition(format!(
            "interval {:?} carries no frequencies on N = {}",
            tile.omega,
            grid.n()
        )));
    }
    let z = support.mass.sqrt();
    let c = tile.center;
    let rows = support
        .rows
        .iter()
        .map(|(eta, lo, root)| SpectralRow {
            eta: *eta,
            xi_start: *lo,
            coeffs: root
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let xi = (lo + i as i64) as f64;
                    let ph = -((xi * c[0]).fract() + (*eta as f64 * c[1]).fract());
                    Complex64::cis(TAU * ph) * (r / z)
                })
                .collect(),
        })
        .collect();
    SpectralRows::from_rows(grid, rows)
}

/// The wave packet `φ_s` on the grid.
pub fn wavelet(grid: TorusGrid, tile: &Tile) -> Result<GridFunction> {
    tile.scales.check(grid)?;
    let support = OmegaSupport::new(grid, tile.scales.kappa(), tile.omega);
    let rows = wavelet_rows(grid, tile, &support)?;
    GridFunction::from_spectrum(grid, rows.to_dense())
}

/// Unnormalized 2-D transform of a `rows × cols` array stored row-major.
fn fft2_rect(data: &mut [Complex64], rows: usize, cols: usize, dir: Direction) {
    for r in data.chunks_mut(cols) {
        fft_inplace(r, dir);
    }
    let mut col = vec![ZERO; rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        fft_inplace(&mut col, dir);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
}

/// `⟨f, φ_s⟩` for every tile of one family, translated by `shift` grid
/// cells; indexed `u · 2^κ + w`.
fn family_coefficients(
    grid: TorusGrid,
    spec: &[Complex64],
    scales: Scales,
    support: &OmegaSupport,
    shift: (usize, usize),
) -> Vec<Complex64> {
    let (pj, pk) = (1usize << scales.j, 1usize << scales.kappa());
    let z = support.mass.sqrt();
    let n = grid.n() as f64;
    let o1 = 0.5 / pj as f64 + shift.0 as f64 / n;
    let o2 = 0.5 / pk as f64 + shift.1 as f64 / n;
    let mut folded = vec![ZERO; pj * pk];
    for (eta, lo, root) in &support.rows {
        let ie = grid.freq_index(*eta);
        let r2 = eta.rem_euclid(pk as i64) as usize;
        let pe = (*eta as f64 * o2).fract();
        for (i, r) in root.iter().enumerate() {
            let xi = lo + i as i64;
            let c = spec[grid.index(grid.freq_index(xi), ie)];
            if c == ZERO {
                continue;
            }
            let ph = (xi as f64 * o1).fract() + pe;
            let r1 = xi.rem_euclid(pj as i64) as usize;
            folded[r1 * pk + r2] += c * Complex64::cis(TAU * ph) * (r / z);
        }
    }
    fft2_rect(&mut folded, pj, pk, Direction::Inverse);
    folded
}

/// Adds the spectrum of `Σ_s a_s φ_s` (tiles translated by `shift`) to `acc`.
fn family_synthesis(
    grid: TorusGrid,
    coeffs: &[Complex64],
    scales: Scales,
    support: &OmegaSupport,
    shift: (usize, usize),
    acc: &mut [Complex64],
) {
    let (pj, pk) = (1usize << scales.j, 1usize << scales.kappa());
    let z = support.mass.sqrt();
    let n = grid.n() as f64;
    let mut hat = coeffs.to_vec();
    fft2_rect(&mut hat, pj, pk, Direction::Forward);
    let o1 = 0.5 / pj as f64 + shift.0 as f64 / n;
    let o2 = 0.5 / pk as f64 + shift.1 as f64 / n;
    for (eta, lo, root) in &support.rows {
        let ie = grid.freq_index(*eta);
        let r2 = eta.rem_euclid(pk as i64) as usize;
        let pe = (*eta as f64 * o2).fract();
        for (i, r) in root.iter().enumerate() {
            let xi = lo + i as i64;
            let ph = -((xi as f64 * o1).fract() + pe);
            let r1 = xi.rem_euclid(pj as i64) as usize;
            acc[grid.index(grid.freq_index(xi), ie)] += hat[r1 * pk + r2] * Complex64::cis(TAU * ph) * (r / z);
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyCoefficients {
    pub omega: DyadicInterval,
    /// `Σ m̂_ω` on the grid.
    pub mass: f64,
    /// Indexed `u · 2^κ + w`.
    #[serde(skip)]
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TileExpansion {
    pub scales: Scales,
    pub families: Vec<FamilyCoefficients>,
    /// Relative `L²` error of the offset-averaged wave-packet synthesis
    /// against `Σ_ω f * m_ω`; `None` when not computed.
    pub reproduction_error: Option<f64>,
}

/// One CSV record of a [`TileExpansion`].
#[derive(Debug, Serialize)]
struct CoefficientRecord {
    theta: u32,
    omega_index: i64,
    u: usize,
    w: usize,
    abs: f64,
}

impl TileExpansion {
    /// `Σ_s |⟨f, φ_s⟩|²`.
    pub fn coefficient_energy(&self) -> f64 {
        self.families
            .iter()
            .flat_map(|f| f.values.iter())
            .map(|c| c.norm_sqr())
            .sum()
    }

    pub fn family(&self, omega: &DyadicInterval) -> Option<&FamilyCoefficients> {
        self.families.iter().find(|f| f.omega == *omega)
    }

    /// Writes `(θ, ω index, u, w, |coefficient|)` rows, skipping those below
    /// `cutoff`.
    pub fn write_csv<W: std::io::Write>(&self, out: W, cutoff: f64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let pk = 1usize << self.scales.kappa();
        for fam in &self.families {
            for (i, c) in fam.values.iter().enumerate() {
                if c.norm() > cutoff {
                    w.serialize(CoefficientRecord {
                        theta: fam.omega.theta,
                        omega_index: fam.omega.index,
                        u: i / pk,
                        w: i % pk,
                        abs: c.norm(),
                    })?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn spectrum_of(f: &GridFunction) -> Vec<Complex64> {
    f.spectrum_owned()
}

/// Coefficients `⟨f, φ_s⟩` of every tile at scales `(j, k, l)`.
///
/// With `reproduce` set, also averages the synthesis `Σ_s ⟨f, φ_s⟩ φ_s` over
/// every lattice offset of the tiling and compares `Σ_ω κ_ω ·` (average)
/// with `Σ_ω f * m_ω`.
pub fn analyze(f: &GridFunction, scales: Scales, reproduce: bool) -> Result<TileExpansion> {
    let grid = f.grid();
    let spec = spectrum_of(f);
    let supports = active_omegas(grid, scales)?;
    let families: Vec<FamilyCoefficients> = supports
        .par_iter()
        .map(|s| FamilyCoefficients {
            omega: s.omega,
            mass: s.mass,
            values: family_coefficients(grid, &spec, scales, s, (0, 0)),
        })
        .collect();
    let reproduction_error = if reproduce {
        Some(reproduction_error(grid, &spec, scales, &supports))
    } else {
        None
    };
    Ok(TileExpansion {
        scales,
        families,
        reproduction_error,
    })
}

fn reproduction_error(grid: TorusGrid, spec: &[Complex64], scales: Scales, supports: &[OmegaSupport]) -> f64 {
    let n = grid.n();
    let len = n >> scales.j;
    let wid = n >> scales.kappa();
    let offsets = (len * wid) as f64;
    let tiles = scales.tiles_per_omega() as f64;
    let partial: Vec<Vec<Complex64>> = supports
        .par_iter()
        .map(|s| {
            let mut acc = vec![ZERO; grid.len()];
            for p1 in 0..len {
                for p2 in 0..wid {
                    let c = family_coefficients(grid, spec, scales, s, (p1, p2));
                    family_synthesis(grid, &c, scales, s, (p1, p2), &mut acc);
                }
            }
            let kappa_omega = s.mass / tiles;
            acc.iter_mut().for_each(|z| *z *= kappa_omega / offsets);
            acc
        })
        .collect();
    let mut synth = vec![ZERO; grid.len()];
    for p in partial {
        for (a, b) in synth.iter_mut().zip(p) {
            *a += b;
        }
    }
    let mut direct = vec![ZERO; grid.len()];
    for s in supports {
        for (eta, lo, root) in &s.rows {
            let ie = grid.freq_index(*eta);
            for (i, r) in root.iter().enumerate() {
                let idx = grid.index(grid.freq_index(lo + i as i64), ie);
                direct[idx] += spec[idx] * (r * r);
            }
        }
    }
    let num: f64 = synth.iter().zip(&direct).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = direct.iter().map(|b| b.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VanishingReport {
    /// `max |A^j φ_s(x)| / ‖φ_s‖_∞` over grid points with `-u(x)` outside
    /// the dilated interval.
    pub necessary_condition_violation: f64,
    /// Fraction of the tile's cells where `|A^j φ_s| > threshold`.
    pub support_fraction: f64,
    /// Fraction of the grid where `-u(x)` lies in the dilated interval.
    pub admissible_fraction: f64,
}

/// Measures where `A^j φ_s` can be nonzero. A frequency `(ξ, η)` survives
/// `A^j` at `x` only if `|ξ + η u(x)| < 2^j/v₁(x)`; combined with the support
/// of `m̂_ω` this confines `-u(x)` to `ω` dilated by a factor below `9`.
pub fn vanishing_measure(
    grid: TorusGrid,
    tile: &Tile,
    field: &VectorFieldSpec,
    dilation: f64,
    threshold: f64,
) -> Result<VanishingReport> {
    tile.scales.check(grid)?;
    let support = OmegaSupport::new(grid, tile.scales.kappa(), tile.omega);
    let rows = wavelet_rows(grid, tile, &support)?;
    let values = exact_grid_rows(&rows, field, tile.scales.j);
    let sup = support.sup_norm();
    let n = grid.n();
    let mut violation = 0.0f64;
    let mut admissible = 0usize;
    for (i, z) in values.iter().enumerate() {
        let u = field.slope(grid.point(i / n, i % n));
        if tile.omega.dilated_contains(dilation, -u) {
            admissible += 1;
        } else {
            violation = violation.max(z.norm());
        }
    }
    let cells = tile.cells(grid);
    let live = cells.iter().filter(|&&i| values[i].norm() > threshold).count();
    Ok(VanishingReport {
        necessary_condition_violation: violation / sup,
        support_fraction: live as f64 / cells.len() as f64,
        admissible_fraction: admissible as f64 / grid.len() as f64,
    })
}

/// Numerator and denominator of the per-rectangle energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RectEnergy {
    /// `Σ_ω ∫_R |Σ_{c_s ∈ R⃗} ⟨f, φ_s⟩ A^j φ_s|²`.
    pub energy: f64,
    /// `Σ_ω Σ_{c_s ∈ R⃗} |⟨f, φ_s⟩|²`.
    pub coefficient_mass: f64,
    pub tiles: usize,
}

impl RectEnergy {
    pub fn ratio(&self) -> f64 {
        if self.coefficient_mass == 0.0 {
            0.0
        } else {
            self.energy / self.coefficient_mass
        }
    }
}

/// `R + p 2^{-j} v + q 2^{-k} v^⊥`, in units of the rectangle's own sides.
pub fn translate_rect(r: &Rect, p: i64, q: i64) -> Rect {
    let [v1, v2] = r.orientation;
    let (dl, dw) = (p as f64 * r.length, q as f64 * r.delta.max(r.width));
    r.translate([dl * v1 - dw * v2, dl * v2 + dw * v1])
}

/// Tiles of one family whose centres lie in `r`.
pub fn tiles_in_rect(scales: Scales, omega: DyadicInterval, r: &Rect) -> Vec<Tile> {
    let (pj, pk) = (1i64 << scales.j, 1i64 << scales.kappa());
    let [v1, v2] = r.orientation;
    let (hl, hw) = (0.5 * r.length, 0.5 * r.width);
    let e1 = hl * v1.abs() + hw * v2.abs();
    let e2 = hl * v2.abs() + hw * v1.abs();
    let u_lo = ((r.center[0] - e1) * pj as f64 - 0.5).floor() as i64;
    let u_hi = ((r.center[0] + e1) * pj as f64 - 0.5).ceil() as i64;
    let w_lo = ((r.center[1] - e2) * pk as f64 - 0.5).floor() as i64;
    let w_hi = ((r.center[1] + e2) * pk as f64 - 0.5).ceil() as i64;
    let mut seen = std::collections::BTreeSet::new();
    for u in u_lo..=u_hi {
        for w in w_lo..=w_hi {
            let (uu, ww) = (u.rem_euclid(pj) as u32, w.rem_euclid(pk) as u32);
            let t = Tile::new(scales, omega, uu, ww);
            if r.contains(t.center) {
                seen.insert((uu, ww));
            }
        }
    }
    seen.into_iter().map(|(u, w)| Tile::new(scales, omega, u, w)).collect()
}

/// Energy of the tiles centred in the translate `R⃗^{p,q}` of `r`, measured
/// on the cells of `r` with the exact evaluator.
///
/// Families for which `-u` stays outside the dilated `ω` on all of `r`
/// contribute nothing to the energy (the vanishing property) and are
/// skipped there; their coefficients still count in the mass.
pub fn rect_energy(
    expansion: &TileExpansion,
    grid: TorusGrid,
    field: &VectorFieldSpec,
    r: &Rect,
    p: i64,
    q: i64,
    dilation: f64,
) -> Result<RectEnergy> {
    let scales = expansion.scales;
    let moved = translate_rect(r, p, q);
    let cells = r.cells(grid);
    let n = grid.n();
    let points: Vec<Point> = cells.iter().map(|&i| grid.point(i / n, i % n)).collect();
    let slopes: Vec<f64> = points.iter().map(|&x| -field.slope(x)).collect();
    let pk = 1usize << scales.kappa();
    let mut energy = 0.0;
    let mut mass = 0.0;
    let mut count = 0;
    for fam in &expansion.families {
        let tiles = tiles_in_rect(scales, fam.omega, &moved);
        if tiles.is_empty() {
            continue;
        }
        count += tiles.len();
        let coeffs: Vec<Complex64> = tiles
            .iter()
            .map(|t| fam.values[t.cell.0 as usize * pk + t.cell.1 as usize])
            .collect();
        mass += coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if !slopes.iter().any(|&s| fam.omega.dilated_contains(dilation, s)) {
            continue;
        }
        let support = OmegaSupport::new(grid, scales.kappa(), fam.omega);
        let z = support.mass.sqrt();
        let rows: Vec<SpectralRow> = support
            .rows
            .iter()
            .map(|(eta, lo, root)| SpectralRow {
                eta: *eta,
                xi_start: *lo,
                coeffs: root
                    .iter()
                    .enumerate()
                    .map(|(i, rt)| {
                        let xi = (lo + i as i64) as f64;
                        let mut s = ZERO;
                        for (t, c) in tiles.iter().zip(&coeffs) {
                            let ph = -((xi * t.center[0]).fract() + (*eta as f64 * t.center[1]).fract());
                            s += c * Complex64::cis(TAU * ph);
                        }
                        s * (rt / z)
                    })
                    .collect(),
            })
            .collect();
        let rows = SpectralRows::from_rows(grid, rows)?;
        let vals = exact_points_rows(&rows, field, scales.j, &points);
        energy += vals.iter().map(|z| z.norm_sqr()).sum::<f64>() / grid.len() as f64;
    }
    Ok(RectEnergy {
        energy,
        coefficient_mass: mass,
        tiles: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::profiles::{beta_integral, beta_tilde};
    use crate::grid::{apply_tile_multiplier, random_function, SpectralWeighting};

    fn g9() -> TorusGrid {
        TorusGrid::new(9).unwrap()
    }

    const SC: Scales = Scales { j: 4, k: 5, l: 2 };

    #[test]
    fn dyadic_grid_counts_and_tiles_the_range() {
        assert_eq!(dyadic_grid(0).len(), 40);
        assert_eq!(dyadic_grid(3).len(), 320);
        let d = dyadic_grid(2);
        assert_eq!(d[0].lo(), -20.0);
        assert_eq!(d.last().unwrap().hi(), 20.0);
        for w in d.windows(2) {
            assert_eq!(w[0].hi(), w[1].lo());
        }
    }

    #[test]
    fn cells_partition_the_torus() {
        let g = TorusGrid::new(8).unwrap();
        let sc = Scales { j: 3, k: 4, l: 1 };
        for omega in [
            DyadicInterval::new(2, 0),
            DyadicInterval::new(2, -7),
            DyadicInterval::new(2, 5),
        ] {
            let mut owner = vec![usize::MAX; g.len()];
            let pk = 1u32 << sc.kappa();
            for u in 0..(1u32 << sc.j) {
                for w in 0..pk {
                    let t = Tile::new(sc, omega, u, w);
                    let cells = t.cells(g);
                    assert_eq!(cells.len() as f64, t.area() * g.len() as f64);
                    for c in cells {
                        assert_eq!(owner[c], usize::MAX);
                        owner[c] = (u * pk + w) as usize;
                    }
                }
            }
            assert!(owner.iter().all(|&o| o != usize::MAX));
            let t = tile_containing(g, sc, omega, 77, 200);
            assert_eq!(owner[g.index(77, 200)], (t.cell.0 * pk + t.cell.1) as usize);
        }
    }

    #[test]
    fn uncertainty_interval_of_tile_is_negated_omega() {
        let omega = DyadicInterval::new(3, 2);
        let t = Tile::new(SC, omega, 1, 3);
        let ex = t.rect().uncertainty_interval().unwrap();
        let neg = omega.negated();
        assert!((ex.lo - neg.lo).abs() < 1e-12 && (ex.hi - neg.hi).abs() < 1e-12);
    }

    #[test]
    fn wavelets_are_normalized_translates() {
        let g = g9();
        let omega = DyadicInterval::new(3, -3);
        let a = wavelet(g, &Tile::new(SC, omega, 2, 5)).unwrap();
        let b = wavelet(g, &Tile::new(SC, omega, 3, 7)).unwrap();
        assert!((a.norm_l2() - 1.0).abs() < 1e-8);
        // shift by one block (32 columns) and two strips (8 rows)
        let n = g.n();
        let mut diff = 0.0f64;
        for x in 0..n {
            for y in 0..n {
                let s = a.at(x, y);
                let t = b.at((x + 32) % n, (y + 8) % n);
                diff = diff.max((s - t).norm());
            }
        }
        assert!(diff < 1e-12, "{diff}");
        let spec = a.spectrum().unwrap();
        for i1 in 0..n {
            for i2 in 0..n {
                let m = crate::grid::tile_multiplier(SC.kappa(), &omega, g.freq(i1), g.freq(i2));
                if m == 0.0 {
                    assert!(spec[g.index(i1, i2)].norm() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn self_coefficient_dominates() {
        let g = g9();
        let omega = DyadicInterval::new(3, 4);
        let tile = Tile::new(SC, omega, 5, 77);
        let f = wavelet(g, &tile).unwrap();
        let e = analyze(&f, SC, false).unwrap();
        let fam = e.family(&omega).unwrap();
        let pk = 1usize << SC.kappa();
        let own = fam.values[5 * pk + 77];
        assert!((own - 1.0).norm() < 1e-10);
        assert!(fam.values.iter().all(|c| c.norm() <= own.norm() + 1e-12));
    }

    #[test]
    fn off_support_function_has_zero_coefficients() {
        let g = g9();
        // horizontal frequencies are outside every tile multiplier
        let f = GridFunction::character(g, [50, 0]).transform();
        let e = analyze(&f, SC, false).unwrap();
        assert!(e.families.iter().flat_map(|f| &f.values).all(|c| c.norm() <= 1e-12));
    }

    #[test]
    fn reproduction_is_exact() {
        let g = TorusGrid::new(8).unwrap();
        let sc = Scales { j: 3, k: 3, l: 2 };
        let f = random_function(g, 8, None, SpectralWeighting::Flat).unwrap();
        let e = analyze(&f, sc, true).unwrap();
        let err = e.reproduction_error.unwrap();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn orthogonality_skeleton() {
        let g = g9();
        let a = wavelet(g, &Tile::new(SC, DyadicInterval::new(3, 0), 1, 1)).unwrap();
        let b = wavelet(g, &Tile::new(SC, DyadicInterval::new(3, 4), 1, 1)).unwrap();
        assert!(a.inner(&b).norm() < 1e-12);
        let omega = DyadicInterval::new(3, 1);
        let base = wavelet(g, &Tile::new(SC, omega, 4, 40)).unwrap();
        for d in 1..8u32 {
            let other = wavelet(g, &Tile::new(SC, omega, 4, 40 + d)).unwrap();
            let ip = base.inner(&other).norm();
            assert!(ip * (1.0 + d as f64).powi(4) <= 2.5, "d={d}: {ip}");
        }
    }

    #[test]
    fn bessel_bound_against_band() {
        let g = g9();
        // families clipped to a single frequency by the Nyquist box make the
        // worst case equal to the number of tiles
        let bound = frame_bound(g, SC).unwrap();
        assert!((bound - SC.tiles_per_omega() as f64).abs() < 1e-6, "{bound}");
        for seed in 0..3 {
            let f = random_function(g, seed, None, SpectralWeighting::Flat).unwrap();
            let e = analyze(&f, SC, false).unwrap();
            let band = band_energy(&f, SC).unwrap();
            let ratio = e.coefficient_energy() / band;
            assert!(ratio <= BESSEL_CONSTANT * (1.0 + 1e-6), "seed {seed}: {ratio}");
        }
    }

    /// Frame constant on random band-limited inputs, measured at `SC`.
    const BESSEL_CONSTANT: f64 = 0.5;

    #[test]
    fn averaged_slope_sum_reproduces_gamma() {
        // (1/20) ∫ Σ_ω β_ω(y + t) dt over t ∈ [-10, 10] equals ∫β for the
        // slopes that occur outside the cone
        let gamma = beta_integral();
        for theta in [0u32, 2] {
            let omegas = dyadic_grid(theta);
            for &y in &[-3.0, -0.7, 0.0, 1.3, 3.0] {
                let steps = (20 * 64) << theta;
                let h = 20.0 / steps as f64;
                let mut acc = 0.0;
                for i in 0..=steps {
                    let t = -10.0 + i as f64 * h;
                    let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                    acc += w * omegas.iter().map(|o| o.bump(y + t)).sum::<f64>();
                }
                let avg = acc * h / 20.0;
                assert!((avg - gamma).abs() < 1e-8, "θ={theta} y={y}: {avg} vs {gamma}");
            }
        }
        assert!(beta_tilde(1.5) == 1.0);
    }

    #[test]
    fn tile_multiplier_matches_support() {
        let g = g9();
        let omega = DyadicInterval::new(3, 2);
        let s = OmegaSupport::new(g, SC.kappa(), omega);
        let f = random_function(g, 1, None, SpectralWeighting::Flat).unwrap();
        let direct = apply_tile_multiplier(&f, SC.k, SC.l, &omega).unwrap();
        let spec = f.spectrum().unwrap();
        let mut dense = vec![ZERO; g.len()];
        for (eta, lo, root) in &s.rows {
            for (i, r) in root.iter().enumerate() {
                let idx = g.index(g.freq_index(lo + i as i64), g.freq_index(*eta));
                dense[idx] = spec[idx] * (r * r);
            }
        }
        let via = GridFunction::from_spectrum(g, dense).unwrap();
        assert!(direct.sub(&via).norm_sup() < 1e-12);
    }
}
