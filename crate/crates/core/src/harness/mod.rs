//! Experiment configuration, the end-to-end runs and report output.
//!
//! Every threshold that decides a pass or fail lives in [`Tolerances`], and
//! every run is a pure function of its [`ExperimentConfig`]: the same config
//! gives the same report except for the `runtime_seconds` fields.

mod decay;
mod suites;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::averages::scale_range;
use crate::error::{Error, Result};
use crate::field::{FieldKind, VectorFieldSpec};
use crate::grid::TorusGrid;
use crate::rects::EccentricityTolerances;
use crate::QuadratureOptions;

pub use decay::{admissible_pairs, run_decay, DecayEntry, DecayReport, DecayRow};
pub use suites::{
    run_cover, run_field_check, run_geometry_suite, run_maximal, run_split_check, run_support_decay, run_tiles,
    CoverReport, CoveringSummary, FieldCheckReport, GeometryReport, MaximalReport, SplitCheckReport,
    SupportDecayReport, SweepRow, TilesReport,
};

/// Thresholds of every pass/fail decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub lp_reconstruction: f64,
    pub reproduction: f64,
    pub parseval: f64,
    /// Bound on `|A^j φ_s| / ‖φ_s‖_∞` where the field direction misses `ω`.
    pub vanishing: f64,
    /// Dilation of `ω` about its centre within which `-u(x)` may fall.
    pub vanishing_dilation: f64,
    /// `|A^j φ_s|` above this counts towards the support fraction.
    pub support_threshold: f64,
    /// Largest admissible log₂-slope of the support fraction against `l`.
    pub support_slope: f64,
    pub evaluator_agreement: f64,
    pub overlap_max: u32,
    pub overlap_grid_ratio: f64,
    pub overlap_exponent: f64,
    pub eccentricity: EccentricityTolerances,
    pub eccentricity_pairs: usize,
    pub c0_shear: (f64, f64),
    pub c0_quadratic: (f64, f64),
    pub c0_residual: f64,
    pub mu_floor: f64,
    pub m_floor: f64,
    pub oracle_relative: f64,
    pub maximal_grid_factor: f64,
    pub split_recombination: f64,
    /// Frame constant of the wave packets on random inputs,
    /// `Σ|⟨f, φ_s⟩|² ≤ C ‖f_band‖²`.
    pub bessel_constant: f64,
    /// Coefficients below this are left out of energy sums.
    pub sparsity_cutoff: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lp_reconstruction: 1e-8,
            reproduction: 1e-8,
            parseval: 1e-10,
            vanishing: 1e-10,
            vanishing_dilation: 9.0,
            support_threshold: 1e-8,
            support_slope: -0.8,
            evaluator_agreement: 1e-3,
            overlap_max: 12,
            overlap_grid_ratio: 1.5,
            overlap_exponent: 4.0,
            eccentricity: EccentricityTolerances::default(),
            eccentricity_pairs: 1000,
            c0_shear: (0.85, 1.15),
            c0_quadratic: (0.4, 0.6),
            c0_residual: 0.5,
            mu_floor: 0.2,
            m_floor: 2.0,
            oracle_relative: 0.05,
            maximal_grid_factor: 2.0,
            split_recombination: 1e-8,
            bessel_constant: 0.5,
            sparsity_cutoff: 1e-14,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("lp_reconstruction", self.lp_reconstruction),
            ("reproduction", self.reproduction),
            ("parseval", self.parseval),
            ("vanishing", self.vanishing),
            ("vanishing_dilation", self.vanishing_dilation),
            ("support_threshold", self.support_threshold),
            ("evaluator_agreement", self.evaluator_agreement),
            ("overlap_max", self.overlap_max as f64),
            ("overlap_grid_ratio", self.overlap_grid_ratio),
            ("overlap_exponent", self.overlap_exponent),
            ("eccentricity.width_ratio", self.eccentricity.width_ratio),
            (
                "eccentricity.eccentricity_factor",
                self.eccentricity.eccentricity_factor,
            ),
            ("c0_residual", self.c0_residual),
            ("mu_floor", self.mu_floor),
            ("m_floor", self.m_floor),
            ("oracle_relative", self.oracle_relative),
            ("maximal_grid_factor", self.maximal_grid_factor),
            ("split_recombination", self.split_recombination),
            ("bessel_constant", self.bessel_constant),
            ("sparsity_cutoff", self.sparsity_cutoff),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("tolerance {name} = {v} must be positive")));
            }
        }
        for (name, (lo, hi)) in [("c0_shear", self.c0_shear), ("c0_quadratic", self.c0_quadratic)] {
            if !(lo > 0.0 && lo <= hi) {
                return Err(Error::Config(format!("tolerance range {name} = ({lo}, {hi}) is empty")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub kind: FieldKind,
    /// Family default when absent.
    #[serde(default)]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TilesConfig {
    pub j: u32,
    pub k: u32,
    pub l: u32,
    /// Tiles sampled for the vanishing check.
    pub sample_tiles: usize,
    /// Also run the offset-averaged reproduction check.
    pub reproduce: bool,
}

impl Default for TilesConfig {
    fn default() -> Self {
        Self {
            j: 4,
            k: 5,
            l: 2,
            sample_tiles: 20,
            reproduce: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    /// JSON report.
    pub report: Option<PathBuf>,
    /// CSV table (per-l energies, per-(p, q) overlaps, tile coefficients).
    pub csv: Option<PathBuf>,
    /// JSON dump of the Fourier profiles.
    pub profiles: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_log2: u32,
    pub field: FieldConfig,
    pub eps0: f64,
    pub seed: u64,
    /// Number of seeded random inputs, starting at `seed`.
    pub seeds: usize,
    pub l_list: Vec<u32>,
    pub pq_sweep: Vec<(u32, u32)>,
    /// Restricts `cover` to one `(j, k)`; all admissible pairs when absent.
    pub cover: Option<(u32, u32)>,
    /// Littlewood–Paley band `(k_min, k_max)` of the random inputs; the
    /// whole cone complement up to Nyquist when absent.
    pub band: Option<(i32, i32)>,
    /// Probes on `x₁ = 0` for the sublevel fit.
    pub probes: usize,
    pub sublevel_eps: Vec<f64>,
    /// `l` at which the decay energy is recomputed by quadrature.
    pub oracle_l: Option<u32>,
    pub tiles: TilesConfig,
    pub quadrature: QuadratureOptions,
    pub tolerances: Tolerances,
    pub output: OutputPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_log2: 9,
            field: FieldConfig {
                kind: FieldKind::Shear,
                amplitude: None,
            },
            eps0: 0.125,
            seed: 42,
            seeds: 10,
            l_list: (1..=6).collect(),
            pq_sweep: vec![(1, 1), (2, 2), (4, 4), (8, 8)],
            cover: None,
            band: None,
            probes: 64,
            sublevel_eps: vec![0.05, 0.025],
            oracle_l: Some(2),
            tiles: TilesConfig::default(),
            quadrature: QuadratureOptions::default(),
            tolerances: Tolerances::default(),
            output: OutputPaths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.n_log2).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn field_spec(&self) -> Result<VectorFieldSpec> {
        let kind = self.field.kind;
        let amp = self.field.amplitude.unwrap_or_else(|| kind.default_amplitude());
        VectorFieldSpec::new(kind, amp, self.eps0).map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    /// Checks the scales, the field and the tolerance table.
    pub fn validate(&self) -> Result<()> {
        if !(6..=13).contains(&self.n_log2) {
            return Err(Error::Config(format!("n_log2 = {} outside [6, 13]", self.n_log2)));
        }
        let grid = self.grid()?;
        self.field_spec()?;
        scale_range(grid, self.eps0)?;
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if self.l_list.is_empty() {
            return Err(Error::Config("l_list is empty".into()));
        }
        if self.pq_sweep.is_empty() {
            return Err(Error::Config("pq_sweep is empty".into()));
        }
        if let Some(&e) = self.sublevel_eps.iter().find(|&&e| !(e > 0.0 && e <= self.eps0)) {
            return Err(Error::Config(format!("sublevel_eps entry {e} outside (0, eps0]")));
        }
        if self.probes == 0 {
            return Err(Error::Config("probes must be at least 1".into()));
        }
        if let Some((j, k)) = self.cover {
            let n = self.n_log2;
            if !scale_range(grid, self.eps0)?.contains(&j) || k < j || k > (2 * j + 6).min(n - 2) {
                return Err(Error::Config(format!(
                    "cover scales ({j}, {k}) not admissible for N = {}",
                    grid.n()
                )));
            }
        }
        self.tolerances.validate()
    }

    /// Checks that the tile scales fit the grid; only the tile run needs it.
    pub fn validate_tiles(&self) -> Result<()> {
        let grid = self.grid()?;
        let t = &self.tiles;
        if t.k + t.l < t.j || t.k + t.l + 2 > self.n_log2 || t.j + 2 > self.n_log2 {
            return Err(Error::Config(format!(
                "tile scales (j, k, l) = ({}, {}, {}) not resolved by N = {}",
                t.j,
                t.k,
                t.l,
                grid.n()
            )));
        }
        Ok(())
    }
}

/// Common surface of every report.
pub trait Outcome: Serialize {
    fn passed(&self) -> bool;
    fn failures(&self) -> &[String];
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Relative fit `log y = slope · log x + b` over the positive entries.
pub(crate) fn log_slope(points: impl IntoIterator<Item = (f64, f64)>, base: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .into_iter()
        .filter(|&(x, y)| x > 0.0 && y > 0.0)
        .map(|(x, y)| (x.log(base), y.log(base)))
        .collect();
    crate::field::least_squares(&pts).map(|f| f.0)
}
