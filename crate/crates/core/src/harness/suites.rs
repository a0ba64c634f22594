//! Field checks, the maximal operator, coverings, tiles, the high/low split
//! and the covering geometry suite.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::decay::admissible_pairs;
use super::{log_slope, ExperimentConfig, Outcome};
use crate::averages::{linearize, maximal_brute, scale_range, split_identity};
use crate::error::Result;
use crate::field::{default_probes, default_taus, FieldKind, SublevelReport};
use crate::grid::{littlewood_paley, lp_range, mean_part, random_function, SpectralWeighting};
use crate::rects::{
    cover, overlap, overlap_counts, sample_pairs, verify_covering, CoveringCheck, CoveringExport, EccentricityReport,
};
use crate::tiles::{active_omegas, analyze, band_energy, vanishing_measure, Scales, Tile, VanishingReport};
use crate::CONE_HALF_ANGLE;

macro_rules! outcome {
    ($t:ty) => {
        impl Outcome for $t {
            fn passed(&self) -> bool {
                self.passed
            }
            fn failures(&self) -> &[String] {
                &self.failures
            }
        }
    };
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldCheckReport {
    pub field: String,
    pub amplitude: f64,
    /// `max ||v(x)| - 1|` over the grid.
    pub unit_deviation: f64,
    /// Largest angle of `v` with the horizontal axis over the grid.
    pub max_angle: f64,
    pub sublevel: SublevelReport,
    pub c0_range: Option<(f64, f64)>,
    pub passed: bool,
    pub failures: Vec<String>,
}
outcome!(FieldCheckReport);

pub fn run_field_check(config: &ExperimentConfig) -> Result<FieldCheckReport> {
    config.validate()?;
    let grid = config.grid()?;
    let field = config.field_spec()?;
    let n = grid.n();
    let (mut unit, mut angle) = (0.0f64, 0.0f64);
    for a in 0..n {
        for b in 0..n {
            let v = field.eval(grid.point(a, b));
            unit = unit.max((v[0].hypot(v[1]) - 1.0).abs());
            angle = angle.max(v[1].atan2(v[0]).abs());
        }
    }
    let sublevel = field.fit_condition(&default_probes(config.probes), &config.sublevel_eps, &default_taus())?;
    let tol = &config.tolerances;
    let c0_range = match field.kind {
        FieldKind::Shear => Some(tol.c0_shear),
        FieldKind::Quadratic => Some(tol.c0_quadratic),
        _ => None,
    };
    let mut failures = Vec::new();
    if unit > 1e-12 {
        failures.push(format!("|v| deviates from 1 by {unit:.3e}"));
    }
    if angle >= CONE_HALF_ANGLE {
        failures.push(format!("v leaves the cone: angle {angle:.4}"));
    }
    if field.kind != FieldKind::Constant {
        match sublevel.fitted_c0 {
            Some(c0) => {
                if let Some((lo, hi)) = c0_range {
                    if !(lo..=hi).contains(&c0) {
                        failures.push(format!("fitted c0 = {c0:.4} outside [{lo}, {hi}]"));
                    }
                } else if c0 <= 0.0 {
                    failures.push(format!("fitted c0 = {c0:.4} not positive"));
                }
            }
            None => failures.push("no nondegenerate probe, c0 undefined".into()),
        }
        if let Some(r) = sublevel.max_residual {
            if c0_range.is_some() && r > tol.c0_residual {
                failures.push(format!("fit residual {r:.3} > {}", tol.c0_residual));
            }
        }
    }
    Ok(FieldCheckReport {
        field: field.kind.name().into(),
        amplitude: field.amplitude,
        unit_deviation: unit,
        max_angle: angle,
        sublevel,
        c0_range,
        passed: failures.is_empty(),
        failures,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MaximalReport {
    pub field: String,
    pub n_log2: u32,
    pub seeds: Vec<u64>,
    /// `‖M f‖₂ / ‖f‖₂` per seed.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub passed: bool,
    pub failures: Vec<String>,
    pub runtime_seconds: f64,
}
outcome!(MaximalReport);

pub fn run_maximal(config: &ExperimentConfig) -> Result<MaximalReport> {
    let start = Instant::now();
    config.validate()?;
    let grid = config.grid()?;
    let field = config.field_spec()?;
    let seeds: Vec<u64> = (0..config.seeds as u64).map(|i| config.seed + i).collect();
    let mut ratios = Vec::new();
    for &s in &seeds {
        let f = random_function(grid, s, config.band, SpectralWeighting::Flat)?;
        let m = maximal_brute(&f, &field, &config.quadrature).map_err(|e| e.at(format!("seed {s}")))?;
        ratios.push(m.norm_l2() / f.norm_l2());
    }
    let failures: Vec<String> = ratios
        .iter()
        .zip(&seeds)
        .filter(|(r, _)| !r.is_finite())
        .map(|(r, s)| format!("seed {s}: ratio {r}"))
        .collect();
    Ok(MaximalReport {
        field: field.kind.name().into(),
        n_log2: grid.n_log2(),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        seeds,
        ratios,
        passed: failures.is_empty(),
        failures,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoveringSummary {
    pub j: u32,
    pub k: u32,
    pub rects: usize,
    pub check: CoveringCheck,
    /// Maximal overlap of the 2-dilated rectangles.
    pub overlap_2: u32,
    /// `(p, q, max overlap)` of the `(p, q)`-dilated rectangles.
    pub sweep: Vec<(u32, u32, u32)>,
    /// Log-log slope of the sweep against `p + q + 1`.
    pub fitted_b0: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverReport {
    pub field: String,
    pub n_log2: u32,
    pub summaries: Vec<CoveringSummary>,
    pub coverings: Vec<CoveringExport>,
    pub passed: bool,
    pub failures: Vec<String>,
}
outcome!(CoverReport);

fn summarize(cov: &crate::rects::Covering, sweep: &[(u32, u32)]) -> CoveringSummary {
    let sweep: Vec<(u32, u32, u32)> = sweep
        .iter()
        .map(|&(p, q)| (p, q, overlap(cov, p, q).max_overlap))
        .collect();
    let fitted_b0 = log_slope(sweep.iter().map(|&(p, q, o)| ((p + q + 1) as f64, o as f64)), 2.0);
    CoveringSummary {
        j: cov.j,
        k: cov.k,
        rects: cov.rects.len(),
        check: verify_covering(cov),
        overlap_2: overlap(cov, 2, 2).max_overlap,
        sweep,
        fitted_b0,
    }
}

pub fn run_cover(config: &ExperimentConfig) -> Result<CoverReport> {
    config.validate()?;
    let grid = config.grid()?;
    let field = config.field_spec()?;
    let pairs = match config.cover {
        Some(p) => vec![p],
        None => admissible_pairs(grid, config.eps0)?,
    };
    let mut summaries = Vec::new();
    let mut coverings = Vec::new();
    let mut failures = Vec::new();
    for (j, k) in pairs {
        let cov = cover(&field, grid, j, k).map_err(|e| e.at(format!("(j, k) = ({j}, {k})")))?;
        if cov.is_empty() {
            continue;
        }
        let s = summarize(&cov, &config.pq_sweep);
        if !s.check.ok() {
            failures.push(format!("covering ({j}, {k}) invalid: {:?}", s.check));
        }
        if s.overlap_2 > config.tolerances.overlap_max {
            failures.push(format!(
                "covering ({j}, {k}): overlap {} > {}",
                s.overlap_2, config.tolerances.overlap_max
            ));
        }
        summaries.push(s);
        coverings.push(cov.export());
    }
    Ok(CoverReport {
        field: field.kind.name().into(),
        n_log2: grid.n_log2(),
        summaries,
        coverings,
        passed: failures.is_empty(),
        failures,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub field: String,
    pub n_log2: u32,
    pub coverings: Vec<CoveringSummary>,
    /// Largest 2-dilated overlap over all coverings.
    pub max_overlap: u32,
    /// Largest number of 2-dilated rectangles from all coverings together
    /// over one cell.
    pub cross_scale_overlap: u32,
    /// Largest per-covering growth exponent of the overlap.
    pub fitted_b0: Option<f64>,
    pub eccentricity: EccentricityReport,
    pub counterexamples: usize,
    pub passed: bool,
    pub failures: Vec<String>,
    pub runtime_seconds: f64,
}
outcome!(GeometryReport);

/// One CSV row of the overlap sweep.
#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub j: u32,
    pub k: u32,
    pub p: u32,
    pub q: u32,
    pub max_overlap: u32,
}

impl GeometryReport {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.coverings
            .iter()
            .flat_map(|c| {
                c.sweep.iter().map(move |&(p, q, o)| SweepRow {
                    j: c.j,
                    k: c.k,
                    p,
                    q,
                    max_overlap: o,
                })
            })
            .collect()
    }
}

pub fn run_geometry_suite(config: &ExperimentConfig) -> Result<GeometryReport> {
    let start = Instant::now();
    config.validate()?;
    let grid = config.grid()?;
    let field = config.field_spec()?;
    let tol = &config.tolerances;
    let mut coverings = Vec::new();
    let mut cross = vec![0u32; grid.len()];
    let mut failures = Vec::new();
    for (j, k) in admissible_pairs(grid, config.eps0)? {
        let cov = cover(&field, grid, j, k).map_err(|e| e.at(format!("(j, k) = ({j}, {k})")))?;
        if cov.is_empty() {
            continue;
        }
        let doubled: Vec<_> = cov.rects.iter().map(|r| r.dilate(2.0, 2.0)).collect();
        for (c, o) in cross.iter_mut().zip(overlap_counts(grid, &doubled)) {
            *c += o;
        }
        let s = summarize(&cov, &config.pq_sweep);
        if !s.check.ok() {
            failures.push(format!("covering ({j}, {k}) invalid: {:?}", s.check));
        }
        coverings.push(s);
    }
    let max_overlap = coverings.iter().map(|c| c.overlap_2).max().unwrap_or(0);
    if max_overlap > tol.overlap_max {
        failures.push(format!("max overlap {max_overlap} > {}", tol.overlap_max));
    }
    let fitted_b0 = coverings
        .iter()
        .filter_map(|c| c.fitted_b0)
        .fold(None, |m: Option<f64>, b| Some(m.map_or(b, |m| m.max(b))));
    if let Some(b0) = fitted_b0 {
        if b0 > tol.overlap_exponent {
            failures.push(format!("overlap growth exponent {b0:.3} > {}", tol.overlap_exponent));
        }
    }
    let range = scale_range(grid, config.eps0)?;
    let pairs = sample_pairs(
        &field,
        grid,
        (*range.start(), *range.end()),
        tol.eccentricity.scale_gap,
        tol.eccentricity_pairs.div_ceil(2),
        config.seed,
    )?;
    let eccentricity =
        crate::rects::eccentricity_checks(&field, &pairs, ([0.13, 0.37], *range.start(), 6), &tol.eccentricity);
    let counterexamples = eccentricity.counterexamples();
    if counterexamples > 0 {
        failures.push(format!("{counterexamples} eccentricity counterexamples"));
    }
    Ok(GeometryReport {
        field: field.kind.name().into(),
        n_log2: grid.n_log2(),
        coverings,
        max_overlap,
        cross_scale_overlap: cross.into_iter().max().unwrap_or(0),
        fitted_b0,
        eccentricity,
        counterexamples,
        passed: failures.is_empty(),
        failures,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitCheckReport {
    pub field: String,
    pub seeds: Vec<u64>,
    pub recombination_errors: Vec<f64>,
    pub high_norms: Vec<f64>,
    pub low_norms: Vec<f64>,
    pub total_norms: Vec<f64>,
    pub max_recombination_error: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}
outcome!(SplitCheckReport);

pub fn run_split_check(config: &ExperimentConfig) -> Result<SplitCheckReport> {
    config.validate()?;
    let grid = config.grid()?;
    let field = config.field_spec()?;
    let seeds: Vec<u64> = (0..config.seeds as u64).map(|i| config.seed + i).collect();
    let mut report = SplitCheckReport {
        field: field.kind.name().into(),
        seeds: seeds.clone(),
        recombination_errors: Vec::new(),
        high_norms: Vec::new(),
        low_norms: Vec::new(),
        total_norms: Vec::new(),
        max_recombination_error: 0.0,
        passed: true,
        failures: Vec::new(),
    };
    for s in seeds {
        let f = random_function(grid, s, config.band, SpectralWeighting::Flat)?;
        let maps = linearize(&f, &field).map_err(|e| e.at(format!("seed {s}")))?;
        let r = split_identity(&f, &field, &maps).map_err(|e| e.at(format!("seed {s}")))?;
        if r.recombination_error > config.tolerances.split_recombination {
            report
                .failures
                .push(format!("seed {s}: recombination error {:.3e}", r.recombination_error));
        }
        if r.high_norm + r.low_norm < r.total_norm - 1e-8 {
            report.failures.push(format!("seed {s}: triangle inequality fails"));
        }
        report.max_recombination_error = report.max_recombination_error.max(r.recombination_error);
        report.recombination_errors.push(r.recombination_error);
        report.high_norms.push(r.high_norm);
        report.low_norms.push(r.low_norm);
        report.total_norms.push(r.total_norm);
    }
    report.passed = report.failures.is_empty();
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct TilesReport {
    pub field: String,
    pub scales: Scales,
    pub seeds: Vec<u64>,
    /// `‖f - Σ_k P_k f - mean‖₂ / ‖f‖₂`, worst seed.
    pub lp_reconstruction_error: f64,
    /// `|‖f‖₂² - Σ|f̂|²| / ‖f‖₂²`, worst seed.
    pub parseval_error: f64,
    pub reproduction_error: Option<f64>,
    /// `Σ_s |⟨f, φ_s⟩|²` over the energy of `f` on the tile frequencies,
    /// worst seed.
    pub bessel_ratio: f64,
    pub vanishing: Vec<(Tile, VanishingReport)>,
    pub max_violation: f64,
    pub passed: bool,
    pub failures: Vec<String>,
    pub runtime_seconds: f64,
    #[serde(skip)]
    pub expansion: Option<crate::tiles::TileExpansion>,
}
outcome!(TilesReport);

pub fn run_tiles(config: &ExperimentConfig) -> Result<TilesReport> {
    let start = Instant::now();
    config.validate()?;
    config.validate_tiles()?;
    let grid = config.grid()?;
    let field = config.field_spec()?;
    let t = &config.tiles;
    let scales = Scales { j: t.j, k: t.k, l: t.l };
    let tol = &config.tolerances;
    let seeds: Vec<u64> = (0..config.seeds as u64).map(|i| config.seed + i).collect();
    let (mut lp_err, mut parseval, mut bessel) = (0.0f64, 0.0f64, 0.0f64);
    let mut repro: Option<f64> = None;
    let mut expansion = None;
    for &s in &seeds {
        let f = random_function(grid, s, config.band, SpectralWeighting::Flat)?;
        let mut sum = mean_part(&f);
        for k in lp_range(grid) {
            sum = sum.add(&littlewood_paley(&f, k)?);
        }
        let norm = f.norm_l2();
        lp_err = lp_err.max(f.sub(&sum).norm_l2() / norm);
        let spec_energy: f64 = f.spectrum_owned().iter().map(|c| c.norm_sqr()).sum();
        parseval = parseval.max((norm * norm - spec_energy).abs() / (norm * norm));
        let e = analyze(&f, scales, t.reproduce).map_err(|e| e.at(format!("seed {s}")))?;
        let band = band_energy(&f, scales)?;
        if band > 0.0 {
            bessel = bessel.max(e.coefficient_energy() / band);
        }
        if let Some(r) = e.reproduction_error {
            repro = Some(repro.map_or(r, |m: f64| m.max(r)));
        }
        expansion = Some(e);
    }

    // vanishing check on tiles whose interval is near the field slopes
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let omegas: Vec<_> = active_omegas(grid, scales)?
        .into_iter()
        .filter(|s| s.omega.center().abs() < 0.6)
        .map(|s| s.omega)
        .collect();
    let mut vanishing = Vec::new();
    let mut max_violation = 0.0f64;
    for _ in 0..t.sample_tiles {
        let omega = omegas[rng.random_range(0..omegas.len())];
        let u = rng.random_range(0..1u32 << scales.j);
        let w = rng.random_range(0..1u32 << scales.kappa());
        let tile = Tile::new(scales, omega, u, w);
        let r = vanishing_measure(grid, &tile, &field, tol.vanishing_dilation, tol.support_threshold)?;
        max_violation = max_violation.max(r.necessary_condition_violation);
        vanishing.push((tile, r));
    }

    let mut failures = Vec::new();
    if lp_err > tol.lp_reconstruction {
        failures.push(format!("Littlewood–Paley reconstruction error {lp_err:.3e}"));
    }
    if parseval > tol.parseval {
        failures.push(format!("Parseval defect {parseval:.3e}"));
    }
    if let Some(r) = repro {
        if r > tol.reproduction {
            failures.push(format!("reproduction error {r:.3e}"));
        }
    }
    if bessel > tol.bessel_constant * (1.0 + 1e-6) {
        failures.push(format!("Bessel ratio {bessel:.4} > {}", tol.bessel_constant));
    }
    if max_violation > tol.vanishing {
        failures.push(format!("vanishing violated: {max_violation:.3e}"));
    }
    Ok(TilesReport {
        field: field.kind.name().into(),
        scales,
        seeds,
        lp_reconstruction_error: lp_err,
        parseval_error: parseval,
        reproduction_error: repro,
        bessel_ratio: bessel,
        vanishing,
        max_violation,
        passed: failures.is_empty(),
        failures,
        runtime_seconds: start.elapsed().as_secs_f64(),
        expansion,
    })
}

/// Mean support fraction of `A^j φ_s` over tiles whose interval contains
/// the field slope at the centre of their block.
#[derive(Debug, Clone, Serialize)]
pub struct SupportDecayReport {
    pub field: String,
    pub n_log2: u32,
    pub j: u32,
    pub k: u32,
    /// `(l, mean support fraction)`.
    pub fractions: Vec<(u32, f64)>,
    pub tiles: Vec<(Tile, VanishingReport)>,
    /// Log₂-slope of the mean fraction against `l`.
    pub fitted_slope: Option<f64>,
    pub passed: bool,
    pub failures: Vec<String>,
    pub runtime_seconds: f64,
}
outcome!(SupportDecayReport);

/// Support fractions at `(j, k, l)` for `l` in the config's `l_list`, with
/// `j` the coarsest admissible scale and `k` the largest value keeping every
/// `k + l` resolved.
pub fn run_support_decay(config: &ExperimentConfig) -> Result<SupportDecayReport> {
    let start = Instant::now();
    config.validate()?;
    let grid = config.grid()?;
    let field = config.field_spec()?;
    let n = grid.n_log2();
    let j = *scale_range(grid, config.eps0)?.start();
    let l_max = config.l_list.iter().copied().max().unwrap_or(0);
    let k = (n - 2).saturating_sub(l_max).max(j);
    let tol = &config.tolerances;
    let mut fractions = Vec::new();
    let mut tiles = Vec::new();
    for &l in &config.l_list {
        let scales = Scales { j, k, l };
        scales.check(grid)?;
        let theta = scales.theta()?;
        let mut sum = 0.0;
        let blocks = 1u32 << j;
        for u in 0..blocks {
            let x = [(u as f64 + 0.5) / blocks as f64, 0.5];
            let slope = -field.slope(x);
            let index = (slope * (1u64 << theta) as f64).floor() as i64;
            let omega = crate::tiles::DyadicInterval::new(theta, index);
            let tile = Tile::new(scales, omega, u, 0);
            let r = vanishing_measure(grid, &tile, &field, tol.vanishing_dilation, tol.support_threshold)
                .map_err(|e| e.at(format!("(j, k, l) = ({j}, {k}, {l}), block {u}")))?;
            sum += r.support_fraction;
            tiles.push((tile, r));
        }
        fractions.push((l, sum / blocks as f64));
    }
    let fitted_slope = crate::field::least_squares(
        &fractions
            .iter()
            .filter(|f| f.1 > 0.0)
            .map(|&(l, f)| (l as f64, f.log2()))
            .collect::<Vec<_>>(),
    )
    .map(|f| f.0);
    let mut failures = Vec::new();
    match fitted_slope {
        Some(s) if s <= tol.support_slope => {}
        Some(s) => failures.push(format!(
            "support fraction slope {s:.3} > {} (fractions {fractions:?})",
            tol.support_slope
        )),
        None => failures.push("support fraction slope undefined".into()),
    }
    Ok(SupportDecayReport {
        field: field.kind.name().into(),
        n_log2: n,
        j,
        k,
        fractions,
        tiles,
        fitted_slope,
        passed: failures.is_empty(),
        failures,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}
