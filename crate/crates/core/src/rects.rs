//! Rectangles `R_{x,j}` adapted to the field, greedy coverings of the sets
//! `Ω_{j,k}`, overlap counting and the eccentricity laws.
//!
//! A rectangle contains a point of the torus when some integer translate of
//! the point lies in it; rasterization keeps the grid cells whose centres
//! are contained.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{least_squares, VectorFieldSpec};
use crate::grid::TorusGrid;
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Point,
    pub orientation: [f64; 2],
    pub length: f64,
    /// Geometric width, never below one grid cell.
    pub width: f64,
    /// The nominal width `δ(R)` before clamping.
    pub delta: f64,
    pub j: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[inline]
fn inside(d: Point, v: [f64; 2], half_len: f64, half_wid: f64) -> bool {
    (d[0] * v[0] + d[1] * v[1]).abs() <= half_len && (d[1] * v[0] - d[0] * v[1]).abs() <= half_wid
}

impl Rect {
    pub fn slope(&self) -> f64 {
        self.orientation[1] / self.orientation[0]
    }

    /// `width / length`.
    pub fn eccentricity(&self) -> f64 {
        self.width / self.length
    }

    /// `p` times longer and `q` times wider, same centre and direction.
    pub fn dilate(&self, p: f64, q: f64) -> Rect {
        Rect {
            length: self.length * p,
            width: self.width * q,
            delta: self.delta * q,
            ..*self
        }
    }

    pub fn translate(&self, d: Point) -> Rect {
        Rect {
            center: [self.center[0] + d[0], self.center[1] + d[1]],
            ..*self
        }
    }

    pub fn contains(&self, x: Point) -> bool {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let base = [d[0] - d[0].round(), d[1] - d[1].round()];
        let (hl, hw) = (0.5 * self.length, 0.5 * self.width);
        if inside(base, self.orientation, hl, hw) {
            return true;
        }
        for s1 in -1..=1 {
            for s2 in -1..=1 {
                if (s1, s2) != (0, 0) && inside([base[0] + s1 as f64, base[1] + s2 as f64], self.orientation, hl, hw) {
                    return true;
                }
            }
        }
        false
    }

    fn corners(&self) -> [Point; 4] {
        let [v1, v2] = self.orientation;
        let (hl, hw) = (0.5 * self.length, 0.5 * self.width);
        let c = self.center;
        let e = [v1 * hl, v2 * hl];
        let w = [-v2 * hw, v1 * hw];
        [
            [c[0] + e[0] + w[0], c[1] + e[1] + w[1]],
            [c[0] + e[0] - w[0], c[1] + e[1] - w[1]],
            [c[0] - e[0] + w[0], c[1] - e[1] + w[1]],
            [c[0] - e[0] - w[0], c[1] - e[1] - w[1]],
        ]
    }

    /// Whether the rectangles meet, for the nearest translate of `other`.
    pub fn intersects(&self, other: &Rect) -> bool {
        let d = [other.center[0] - self.center[0], other.center[1] - self.center[1]];
        let shift = [-d[0].round(), -d[1].round()];
        let other = other.translate(shift);
        let (a, b) = (self.corners(), other.corners());
        let axes = [
            self.orientation,
            [-self.orientation[1], self.orientation[0]],
            other.orientation,
            [-other.orientation[1], other.orientation[0]],
        ];
        axes.iter().all(|ax| {
            let proj = |p: &Point| p[0] * ax[0] + p[1] * ax[1];
            let (amin, amax) = a
                .iter()
                .map(proj)
                .fold((f64::MAX, f64::MIN), |(l, h), x| (l.min(x), h.max(x)));
            let (bmin, bmax) = b
                .iter()
                .map(proj)
                .fold((f64::MAX, f64::MIN), |(l, h), x| (l.min(x), h.max(x)));
            amax >= bmin && bmax >= amin
        })
    }

    /// Slopes within `w/l` of the rectangle's slope, centred on it.
    pub fn uncertainty_interval(&self) -> Result<Interval> {
        let s = self.slope();
        if s.abs() >= 1.0 {
            return Err(Error::Domain(format!("slope {s} not below 1")));
        }
        let half = 0.5 * self.width / self.length;
        Ok(Interval {
            lo: s - half,
            hi: s + half,
        })
    }

    /// Visits every grid cell (once) whose centre the rectangle contains.
    pub fn for_each_cell(&self, grid: TorusGrid, mut visit: impl FnMut(usize)) {
        let n = grid.n() as i64;
        let nf = n as f64;
        let [v1, v2] = self.orientation;
        let (hl, hw) = (0.5 * self.length, 0.5 * self.width);
        let ext1 = hl * v1.abs() + hw * v2.abs();
        let a_lo = ((self.center[0] - ext1) * nf).floor() as i64 - 1;
        let a_hi = ((self.center[0] + ext1) * nf).ceil() as i64 + 1;
        let mut wraps = a_hi - a_lo + 1 > n;
        let mut found = Vec::new();
        for a in a_lo..=a_hi {
            let d1 = a as f64 / nf - self.center[0];
            // x₂ range allowed by the two slabs
            let (mut lo, mut hi) = ((-hw + d1 * v2) / v1, (hw + d1 * v2) / v1);
            if v2 != 0.0 {
                let (p, q) = ((-hl - d1 * v1) / v2, (hl - d1 * v1) / v2);
                lo = lo.max(p.min(q));
                hi = hi.min(p.max(q));
            } else if (d1 * v1).abs() > hl + 1e-12 {
                continue;
            }
            if lo > hi + 2.0 / nf {
                continue;
            }
            let b_lo = ((self.center[1] + lo) * nf).floor() as i64 - 1;
            let b_hi = ((self.center[1] + hi) * nf).ceil() as i64 + 1;
            wraps |= b_hi - b_lo + 1 > n;
            let wa = a.rem_euclid(n) as usize;
            for b in b_lo..=b_hi {
                let wb = b.rem_euclid(n) as usize;
                if self.contains(grid.point(wa, wb)) {
                    found.push(grid.index(wa, wb));
                }
            }
        }
        if wraps {
            found.sort_unstable();
            found.dedup();
        }
        found.into_iter().for_each(&mut visit);
    }

    pub fn cells(&self, grid: TorusGrid) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_cell(grid, |i| out.push(i));
        out
    }
}

/// `δ(R_{x,j}) = 2^{-j} sup_{|t| < 2^{-j}} ω_x(t)`.
pub fn nominal_width(field: &VectorFieldSpec, x: Point, j: u32) -> f64 {
    let len = 2f64.powi(-(j as i32));
    len * field.sup_omega(x, len)
}

pub fn rect_at(field: &VectorFieldSpec, grid: TorusGrid, x: Point, j: u32) -> Result<Rect> {
    let length = 2f64.powi(-(j as i32));
    if length > field.eps0 * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "length 2^-{j} exceeds eps0 = {}",
            field.eps0
        )));
    }
    let delta = nominal_width(field, x, j);
    Ok(Rect {
        center: x,
        orientation: field.eval(x),
        length,
        width: delta.max(grid.spacing()),
        delta,
        j,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Covering {
    #[serde(skip)]
    pub grid: TorusGrid,
    pub j: u32,
    pub k: u32,
    pub rects: Vec<Rect>,
    #[serde(skip)]
    pub omega_jk_mask: Vec<bool>,
    #[serde(skip)]
    pub omega_prime_mask: Vec<bool>,
}

/// One exported rectangle of a covering.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RectExport {
    pub center: Point,
    pub orientation: [f64; 2],
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoveringExport {
    pub n_log2: u32,
    pub j: u32,
    pub k: u32,
    pub omega_cells: usize,
    pub rects: Vec<RectExport>,
}

impl Covering {
    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    pub fn export(&self) -> CoveringExport {
        CoveringExport {
            n_log2: self.grid.n_log2(),
            j: self.j,
            k: self.k,
            omega_cells: self.omega_jk_mask.iter().filter(|&&b| b).count(),
            rects: self
                .rects
                .iter()
                .map(|r| RectExport {
                    center: r.center,
                    orientation: r.orientation,
                    length: r.length,
                    width: r.width,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.export())?)
    }
}

/// `Ω_{j,k} = {x : 2^{-k} ≤ δ(R_{x,j}) < 2^{1-k}}`; degenerate cells never belong.
pub fn omega_mask(field: &VectorFieldSpec, grid: TorusGrid, j: u32, k: u32) -> Vec<bool> {
    let len = 2f64.powi(-(j as i32));
    let lo = 2f64.powi(-(k as i32));
    field
        .sup_omega_map(grid, len)
        .into_iter()
        .map(|s| {
            let d = len * s;
            d > 0.0 && d >= lo && d < 2.0 * lo
        })
        .collect()
}

pub fn cover(field: &VectorFieldSpec, grid: TorusGrid, j: u32, k: u32) -> Result<Covering> {
    if k < j || k > 2 * grid.n_log2() {
        return Err(Error::Precondition(format!(
            "k = {k} outside [j, 2 n_log2] = [{j}, {}]",
            2 * grid.n_log2()
        )));
    }
    let mask = omega_mask(field, grid, j, k);
    cover_mask(field, grid, j, k, mask)
}

/// Greedy covering of the cells flagged in `mask`, scanning rows of
/// constant `x₂` in order of increasing `x₁`.
pub fn cover_mask(field: &VectorFieldSpec, grid: TorusGrid, j: u32, k: u32, mask: Vec<bool>) -> Result<Covering> {
    let n = grid.n();
    let width = 2f64.powi(-(k as i32));
    let mut in_rects = vec![false; grid.len()];
    let mut prime = vec![false; grid.len()];
    let mut rects = Vec::new();
    for b in 0..n {
        for a in 0..n {
            let i = grid.index(a, b);
            if !mask[i] || in_rects[i] {
                continue;
            }
            let base = rect_at(field, grid, grid.point(a, b), j)?;
            let r = Rect {
                width: width.max(grid.spacing()),
                delta: width,
                ..base
            };
            r.for_each_cell(grid, |c| in_rects[c] = true);
            r.dilate(2.0, 2.0).for_each_cell(grid, |c| prime[c] = true);
            rects.push(r);
        }
    }
    Ok(Covering {
        grid,
        j,
        k,
        rects,
        omega_jk_mask: mask,
        omega_prime_mask: prime,
    })
}

/// Result of re-checking a covering with the geometric predicate only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoveringCheck {
    pub widths_exact: bool,
    pub centers_fresh: bool,
    pub omega_covered: bool,
}

impl CoveringCheck {
    pub fn ok(&self) -> bool {
        self.widths_exact && self.centers_fresh && self.omega_covered
    }
}

pub fn verify_covering(cov: &Covering) -> CoveringCheck {
    let target = 2f64.powi(-(cov.k as i32));
    let widths_exact = cov.rects.iter().all(|r| r.delta == target);
    let index = RectIndex::new(&cov.rects);
    let centers_fresh = (0..cov.rects.len()).into_par_iter().all(|m| {
        let x = cov.rects[m].center;
        index.candidates(x).all(|i| i >= m || !cov.rects[i].contains(x))
    });
    let doubled: Vec<Rect> = cov.rects.iter().map(|r| r.dilate(2.0, 2.0)).collect();
    let index = RectIndex::new(&doubled);
    let n = cov.grid.n();
    let omega_covered = (0..cov.grid.len()).into_par_iter().all(|i| {
        if !cov.omega_jk_mask[i] {
            return true;
        }
        let x = cov.grid.point(i / n, i % n);
        index.candidates(x).any(|m| doubled[m].contains(x))
    });
    CoveringCheck {
        widths_exact,
        centers_fresh,
        omega_covered,
    }
}

/// Rectangles bucketed by centre on a square grid of cells at least as wide
/// as the largest half-extent, so a point can only lie in rectangles of its
/// own or a neighbouring bucket.
struct RectIndex {
    side: usize,
    buckets: Vec<Vec<usize>>,
}

impl RectIndex {
    fn new(rects: &[Rect]) -> Self {
        let reach = rects
            .iter()
            .map(|r| {
                let [v1, v2] = r.orientation;
                let (hl, hw) = (0.5 * r.length, 0.5 * r.width);
                (hl * v1.abs() + hw * v2.abs()).max(hl * v2.abs() + hw * v1.abs())
            })
            .fold(0.0f64, f64::max);
        let side = if reach > 0.0 {
            ((1.0 / reach).floor() as usize).clamp(1, 512)
        } else {
            512
        };
        let mut buckets = vec![Vec::new(); side * side];
        for (i, r) in rects.iter().enumerate() {
            buckets[Self::bucket(side, r.center)].push(i);
        }
        Self { side, buckets }
    }

    fn coord(side: usize, t: f64) -> usize {
        ((t.rem_euclid(1.0) * side as f64) as usize).min(side - 1)
    }

    fn bucket(side: usize, x: Point) -> usize {
        Self::coord(side, x[0]) * side + Self::coord(side, x[1])
    }

    fn candidates(&self, x: Point) -> impl Iterator<Item = usize> + '_ {
        let s = self.side as i64;
        let (b0, b1) = (Self::coord(self.side, x[0]) as i64, Self::coord(self.side, x[1]) as i64);
        let mut cells: Vec<usize> = (-1..=1)
            .flat_map(|d0| (-1..=1).map(move |d1| ((b0 + d0).rem_euclid(s) * s + (b1 + d1).rem_euclid(s)) as usize))
            .collect();
        cells.sort_unstable();
        cells.dedup();
        cells.into_iter().flat_map(move |c| self.buckets[c].iter().copied())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OverlapReport {
    pub max_overlap: u32,
    pub dilation: (u32, u32),
    pub fitted_b0: Option<f64>,
    pub fitted_a0: Option<f64>,
}

/// Pointwise count of rectangles containing each cell.
pub fn overlap_counts(grid: TorusGrid, rects: &[Rect]) -> Vec<u32> {
    let mut counts = vec![0u32; grid.len()];
    for r in rects {
        r.for_each_cell(grid, |c| counts[c] += 1);
    }
    counts
}

/// Maximal overlap of the covering rectangles dilated by `(p, q)`.
pub fn overlap(cov: &Covering, p: u32, q: u32) -> OverlapReport {
    let dilated: Vec<Rect> = cov.rects.iter().map(|r| r.dilate(p as f64, q as f64)).collect();
    let counts = overlap_counts(cov.grid, &dilated);
    OverlapReport {
        max_overlap: counts.into_iter().max().unwrap_or(0),
        dilation: (p, q),
        fitted_b0: None,
        fitted_a0: None,
    }
}

/// Overlaps at every dilation and the log-log slope of overlap against
/// `p + q + 1`.
pub fn overlap_sweep(cov: &Covering, dilations: &[(u32, u32)]) -> Vec<OverlapReport> {
    let mut reports: Vec<OverlapReport> = dilations.iter().map(|&(p, q)| overlap(cov, p, q)).collect();
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.max_overlap > 0)
        .map(|r| {
            (
                ((r.dilation.0 + r.dilation.1 + 1) as f64).ln(),
                (r.max_overlap as f64).ln(),
            )
        })
        .collect();
    let b0 = least_squares(&pts).map(|f| f.0);
    for r in &mut reports {
        r.fitted_b0 = b0;
    }
    reports
}

/// A pair of rectangles `R_{x,j}`, `R_{x',j'}` to be compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSample {
    pub x: Point,
    pub x_prime: Point,
    pub j: u32,
    pub j_prime: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EccentricityTolerances {
    /// Bound on `δ(R_{x,j}) / δ(R_{x',j})` and its inverse when `x' ∈ R_{x,j}`.
    pub width_ratio: f64,
    /// Allowed factor by which a much smaller rectangle may be more eccentric.
    pub eccentricity_factor: f64,
    /// Minimal `j' - j` for the eccentricity comparison.
    pub scale_gap: u32,
}

impl Default for EccentricityTolerances {
    fn default() -> Self {
        Self {
            width_ratio: 8.0,
            eccentricity_factor: 8.0,
            scale_gap: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EccentricityReport {
    pub width_pairs: usize,
    pub nesting_pairs: usize,
    pub degenerate_pairs: usize,
    pub width_counterexamples: Vec<PairSample>,
    pub nesting_counterexamples: Vec<PairSample>,
    pub fitted_a0: Option<f64>,
}

impl EccentricityReport {
    pub fn counterexamples(&self) -> usize {
        self.width_counterexamples.len() + self.nesting_counterexamples.len()
    }
}

/// Random pairs: `count` with `x' ∈ R_{x,j}` and equal scales, then `count`
/// with `j' ≥ j + gap` and `2R_{x,j} ∩ 2R_{x',j'} ≠ ∅`.
pub fn sample_pairs(
    field: &VectorFieldSpec,
    grid: TorusGrid,
    scales: (u32, u32),
    gap: u32,
    count: usize,
    seed: u64,
) -> Result<Vec<PairSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * count);
    for _ in 0..count {
        let j = rng.random_range(scales.0..=scales.1);
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let r = rect_at(field, grid, x, j)?;
        let (s, t): (f64, f64) = (rng.random_range(-0.5..=0.5), rng.random_range(-0.5..=0.5));
        let [v1, v2] = r.orientation;
        let xp = [
            x[0] + s * r.length * v1 - t * r.delta * v2,
            x[1] + s * r.length * v2 + t * r.delta * v1,
        ];
        out.push(PairSample {
            x,
            x_prime: xp,
            j,
            j_prime: j,
        });
    }
    let mut found = 0;
    let mut attempts = 0;
    while found < count && attempts < 100 * count {
        attempts += 1;
        let j = rng.random_range(scales.0..=scales.1);
        let jp = j + gap + rng.random_range(0..=2);
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let r = rect_at(field, grid, x, j)?;
        let (s, t): (f64, f64) = (rng.random_range(-1.2..=1.2), rng.random_range(-1.5..=1.5));
        let [v1, v2] = r.orientation;
        let w = r.width.max(2f64.powi(-(jp as i32)));
        let xp = [
            x[0] + s * r.length * v1 - t * w * v2,
            x[1] + s * r.length * v2 + t * w * v1,
        ];
        let rp = rect_at(field, grid, xp, jp)?;
        if r.dilate(2.0, 2.0).intersects(&rp.dilate(2.0, 2.0)) {
            out.push(PairSample {
                x,
                x_prime: xp,
                j,
                j_prime: jp,
            });
            found += 1;
        }
    }
    Ok(out)
}

/// Checks the width comparison for nearby points and the eccentricity
/// ordering for nested scales, and fits the eccentricity growth exponent
/// from the nested rectangles `R_{x,j}`, `R_{x,j+j₀}`, `j₀ = 1..=nest_max`.
pub fn eccentricity_checks(
    field: &VectorFieldSpec,
    pairs: &[PairSample],
    nest: (Point, u32, u32),
    tol: &EccentricityTolerances,
) -> EccentricityReport {
    let mut report = EccentricityReport {
        width_pairs: 0,
        nesting_pairs: 0,
        degenerate_pairs: 0,
        width_counterexamples: Vec::new(),
        nesting_counterexamples: Vec::new(),
        fitted_a0: None,
    };
    let results: Vec<(PairSample, f64, f64)> = pairs
        .par_iter()
        .map(|p| {
            (
                *p,
                nominal_width(field, p.x, p.j),
                nominal_width(field, p.x_prime, p.j_prime),
            )
        })
        .collect();
    for (p, d, dp) in results {
        if d == 0.0 && dp == 0.0 {
            report.degenerate_pairs += 1;
            continue;
        }
        if p.j == p.j_prime {
            report.width_pairs += 1;
            let ratio = d / dp;
            if !(ratio >= 1.0 / tol.width_ratio && ratio <= tol.width_ratio) {
                report.width_counterexamples.push(p);
            }
        } else if p.j_prime >= p.j + tol.scale_gap {
            report.nesting_pairs += 1;
            let ecc = d / 2f64.powi(-(p.j as i32));
            let ecc_p = dp / 2f64.powi(-(p.j_prime as i32));
            if ecc * tol.eccentricity_factor < ecc_p || ecc_p.is_nan() {
                report.nesting_counterexamples.push(p);
            }
        }
    }
    let (x, j, nest_max) = nest;
    let base = nominal_width(field, x, j) / 2f64.powi(-(j as i32));
    if base > 0.0 {
        let a0 = (1..=nest_max)
            .filter_map(|j0| {
                let jj = j + j0;
                let e = nominal_width(field, x, jj) / 2f64.powi(-(jj as i32));
                (e > 0.0).then(|| (base / e).ln() / (j0 as f64 * 2f64.ln()))
            })
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        report.fitted_a0 = a0;
    }
    report
}
