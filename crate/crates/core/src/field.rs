//! Periodic unit vector fields `v = (1, u)/√(1 + u²)` in the cone around the
//! horizontal axis, the angular function `ω_x(t)` and the sublevel-set
//! condition `|{|t| ≤ ε : ω_x(t) < τ sup ω_x}| ≤ C₀ τ^{c₀} 2ε`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::{Point, CONE_HALF_ANGLE};

/// Number of equispaced `t` samples used for sublevel measures and suprema.
pub const T_SAMPLES: usize = 4096;

/// Allowed excess of `|∇v|` over 1.
pub const C1_TOLERANCE: f64 = 1e-9;

/// Transition length of the periodic sawtooth used by the shear families.
const SAW_SMOOTHING: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Constant,
    /// `u(x) = A·saw(x₁)` with `saw(s) = s` near `0`.
    Shear,
    /// `u(x) = A(1 - cos 2πx₁)/(2π²) = A x₁² + O(x₁⁴)`.
    Quadratic,
    /// `u(x) = A sin 2πx₁`.
    Sine,
    /// `u(x) = A·saw(x₂)`.
    VerticalShear,
}

impl FieldKind {
    pub const ALL: [FieldKind; 5] = [
        FieldKind::Constant,
        FieldKind::Shear,
        FieldKind::Quadratic,
        FieldKind::Sine,
        FieldKind::VerticalShear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Constant => "constant",
            FieldKind::Shear => "shear",
            FieldKind::Quadratic => "quadratic",
            FieldKind::Sine => "sine",
            FieldKind::VerticalShear => "vertical-shear",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown field family {name:?}")))
    }

    pub fn default_amplitude(self) -> f64 {
        match self {
            FieldKind::Constant => 0.0,
            FieldKind::Shear | FieldKind::Quadratic | FieldKind::VerticalShear => 1.0,
            FieldKind::Sine => 0.15,
        }
    }
}

/// Which coordinate the field depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dependence {
    Constant,
    X1,
    X2,
}

/// Stable `ln cosh z - ln 2`.
#[inline]
fn lncosh_shifted(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - 2f64.ln()
}

/// Odd 1-periodic sawtooth: `saw(s) ≈ s` on `|s| < 1/4 - O(d)`, turning
/// back smoothly near `±1/4`; `saw' = tanh((1/4 - |s|)/d)` on `[-1/2, 1/2)`.
fn saw(s: f64) -> f64 {
    let d = SAW_SMOOTHING;
    let s = s - s.round();
    s.signum() * d * (lncosh_shifted(0.25 / d) - lncosh_shifted((0.25 - s.abs()) / d))
}

fn saw_derivative(s: f64) -> f64 {
    let s = s - s.round();
    ((0.25 - s.abs()) / SAW_SMOOTHING).tanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldSpec {
    pub kind: FieldKind,
    pub amplitude: f64,
    pub eps0: f64,
}

/// Sublevel measure at one `(x, ε, τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sublevel {
    pub ratio: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SublevelReport {
    pub tau_samples: Vec<f64>,
    /// Ratios pooled over nondegenerate `(probe, ε)` pairs, `τ` innermost.
    pub measured_ratios: Vec<f64>,
    /// `None` when every probe is degenerate.
    pub fitted_c0: Option<f64>,
    #[serde(rename = "fitted_C0")]
    pub fitted_big_c0: Option<f64>,
    pub max_residual: Option<f64>,
    pub degenerate_fraction: f64,
}

impl VectorFieldSpec {
    /// Validates the cone bound, the `C¹` bound and `ε₀ ∈ (0, 1/8]`.
    pub fn new(kind: FieldKind, amplitude: f64, eps0: f64) -> Result<Self> {
        if !(eps0 > 0.0 && eps0 <= 0.125) {
            return Err(Error::Config(format!("eps0 = {eps0} outside (0, 1/8]")));
        }
        if !amplitude.is_finite() {
            return Err(Error::Config("amplitude must be finite".into()));
        }
        let spec = Self { kind, amplitude, eps0 };
        let cone = CONE_HALF_ANGLE.tan();
        let samples = 1 << 14;
        for i in 0..samples {
            let s = i as f64 / samples as f64;
            let (u, du) = (spec.profile(s), spec.profile_derivative(s));
            if u.abs() >= cone {
                return Err(Error::Config(format!(
                    "{} field with amplitude {amplitude} leaves the cone (|u| = {:.4} at {s})",
                    kind.name(),
                    u.abs()
                )));
            }
            if du.abs() / (1.0 + u * u) > 1.0 + C1_TOLERANCE {
                return Err(Error::Config(format!(
                    "{} field with amplitude {amplitude} violates the C¹ bound at {s}",
                    kind.name()
                )));
            }
        }
        Ok(spec)
    }

    pub fn with_default_amplitude(kind: FieldKind, eps0: f64) -> Result<Self> {
        Self::new(kind, kind.default_amplitude(), eps0)
    }

    pub fn dependence(&self) -> Dependence {
        match self.kind {
            FieldKind::Constant => Dependence::Constant,
            FieldKind::VerticalShear => Dependence::X2,
            _ => Dependence::X1,
        }
    }

    /// `u` as a function of the coordinate it depends on.
    pub fn profile(&self, s: f64) -> f64 {
        let a = self.amplitude;
        match self.kind {
            FieldKind::Constant => a,
            FieldKind::Shear | FieldKind::VerticalShear => a * saw(s),
            FieldKind::Quadratic => {
                a * (1.0 - (std::f64::consts::TAU * s).cos()) / (2.0 * std::f64::consts::PI * std::f64::consts::PI)
            }
            FieldKind::Sine => a * (std::f64::consts::TAU * s).sin(),
        }
    }

    pub fn profile_derivative(&self, s: f64) -> f64 {
        let a = self.amplitude;
        match self.kind {
            FieldKind::Constant => 0.0,
            FieldKind::Shear | FieldKind::VerticalShear => a * saw_derivative(s),
            FieldKind::Quadratic => a * (std::f64::consts::TAU * s).sin() / std::f64::consts::PI,
            FieldKind::Sine => a * std::f64::consts::TAU * (std::f64::consts::TAU * s).cos(),
        }
    }

    /// The slope `u(x) = v₂/v₁`.
    #[inline]
    pub fn slope(&self, x: Point) -> f64 {
        match self.dependence() {
            Dependence::Constant | Dependence::X1 => self.profile(x[0]),
            Dependence::X2 => self.profile(x[1]),
        }
    }

    #[inline]
    pub fn eval(&self, x: Point) -> [f64; 2] {
        let u = self.slope(x);
        let r = (1.0 + u * u).sqrt();
        [1.0 / r, u / r]
    }

    /// `ω_x(t) = |det[v(x + t v(x)), v(x)]|`.
    #[inline]
    pub fn omega(&self, x: Point, t: f64) -> f64 {
        let v = self.eval(x);
        let w = self.eval([x[0] + t * v[0], x[1] + t * v[1]]);
        (w[0] * v[1] - w[1] * v[0]).abs()
    }

    /// `ω_x(t)` as the sine of the angle between the two slopes.
    pub fn omega_angular(&self, x: Point, t: f64) -> f64 {
        let u0 = self.slope(x);
        let v1 = 1.0 / (1.0 + u0 * u0).sqrt();
        let y = [x[0] + t * v1, x[1] + t * u0 * v1];
        (self.slope(y).atan() - u0.atan()).sin().abs()
    }

    fn omega_samples(&self, x: Point, eps: f64) -> Vec<f64> {
        let h = 2.0 * eps / T_SAMPLES as f64;
        (0..T_SAMPLES)
            .map(|i| self.omega(x, -eps + (i as f64 + 0.5) * h))
            .collect()
    }

    /// `sup_{|t| ≤ ε} ω_x(t)` over the sampling points.
    pub fn sup_omega(&self, x: Point, eps: f64) -> f64 {
        self.omega_samples(x, eps).into_iter().fold(0.0, f64::max)
    }

    /// `sup_{|t| ≤ ε} ω_x(t)` at every grid point, reusing values along the
    /// coordinate the field does not depend on.
    pub fn sup_omega_map(&self, grid: TorusGrid, eps: f64) -> Vec<f64> {
        let n = grid.n();
        let line: Vec<f64> = match self.dependence() {
            Dependence::Constant => vec![0.0; n],
            Dependence::X1 => (0..n).map(|a| self.sup_omega(grid.point(a, 0), eps)).collect(),
            Dependence::X2 => (0..n).map(|b| self.sup_omega(grid.point(0, b), eps)).collect(),
        };
        let mut out = Vec::with_capacity(grid.len());
        for a in 0..n {
            for b in 0..n {
                out.push(match self.dependence() {
                    Dependence::X2 => line[b],
                    _ => line[a],
                });
            }
        }
        out
    }

    /// Fraction of `t ∈ [-ε, ε]` with `ω_x(t) < τ sup ω_x`.
    pub fn sublevel_ratio(&self, x: Point, eps: f64, tau: f64) -> Sublevel {
        self.sublevel_ratios(x, eps, &[tau])[0]
    }

    pub fn sublevel_ratios(&self, x: Point, eps: f64, taus: &[f64]) -> Vec<Sublevel> {
        let w = self.omega_samples(x, eps);
        let sup = w.iter().copied().fold(0.0, f64::max);
        taus.iter()
            .map(|&tau| {
                if sup == 0.0 {
                    Sublevel {
                        ratio: 1.0,
                        degenerate: true,
                    }
                } else {
                    let cut = tau * sup;
                    let count = w.iter().filter(|&&o| o < cut).count();
                    Sublevel {
                        ratio: count as f64 / T_SAMPLES as f64,
                        degenerate: false,
                    }
                }
            })
            .collect()
    }

    /// Least-squares fit of `log ratio = c₀ log τ + log C₀` pooled over all
    /// nondegenerate probes and scales.
    pub fn fit_condition(&self, probes: &[Point], eps_list: &[f64], taus: &[f64]) -> Result<SublevelReport> {
        if let Some(&e) = eps_list.iter().find(|&&e| !(e > 0.0 && e <= self.eps0)) {
            return Err(Error::Precondition(format!("ε = {e} outside (0, ε₀]")));
        }
        if let Some(&t) = taus.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::Precondition(format!("τ = {t} outside (0, 1)")));
        }
        let mut ratios = Vec::new();
        let mut points = Vec::new();
        let (mut degenerate, mut total) = (0usize, 0usize);
        for &x in probes {
            for &eps in eps_list {
                total += 1;
                let s = self.sublevel_ratios(x, eps, taus);
                if s[0].degenerate {
                    degenerate += 1;
                    continue;
                }
                for (sub, &tau) in s.iter().zip(taus) {
                    ratios.push(sub.ratio);
                    if sub.ratio > 0.0 {
                        points.push((tau.ln(), sub.ratio.ln()));
                    }
                }
            }
        }
        let fit = least_squares(&points);
        let max_residual = fit.map(|(slope, icept)| {
            points
                .iter()
                .map(|&(x, y)| (y - slope * x - icept).abs())
                .fold(0.0, f64::max)
        });
        Ok(SublevelReport {
            tau_samples: taus.to_vec(),
            measured_ratios: ratios,
            fitted_c0: fit.map(|f| f.0),
            fitted_big_c0: fit.map(|f| f.1.exp()),
            max_residual,
            degenerate_fraction: if total == 0 {
                1.0
            } else {
                degenerate as f64 / total as f64
            },
        })
    }
}

/// Ordinary least squares `y = a x + b`; `None` with fewer than two distinct `x`.
pub fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

/// The `τ` values `2^{-1}, …, 2^{-8}`.
pub fn default_taus() -> Vec<f64> {
    (1..=8).map(|i| 2f64.powi(-i)).collect()
}

/// `count` probes on the line `x₁ = 0`.
pub fn default_probes(count: usize) -> Vec<Point> {
    (0..count).map(|i| [0.0, (i as f64 + 0.5) / count as f64]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(kind: FieldKind) -> VectorFieldSpec {
        VectorFieldSpec::with_default_amplitude(kind, 0.125).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(field(FieldKind::Constant).eval([0.3, 0.7]), [1.0, 0.0]);
        let shear = field(FieldKind::Shear);
        assert_eq!(shear.eval([0.0, 0.0]), [1.0, 0.0]);
        let v = shear.eval([0.1, 0.0]);
        assert!(
            (v[0] - 0.995037).abs() < 1e-6 && (v[1] - 0.099504).abs() < 1e-6,
            "{v:?}"
        );
    }

    #[test]
    fn omega_examples() {
        assert_eq!(field(FieldKind::Constant).omega([0.2, 0.4], 0.05), 0.0);
        let shear = field(FieldKind::Shear);
        assert_eq!(shear.omega([0.3, 0.1], 0.0), 0.0);
        assert!((shear.omega([0.0, 0.0], 0.1) - 0.1 / 1.01f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn sublevel_examples() {
        let s = field(FieldKind::Constant).sublevel_ratio([0.1, 0.2], 0.05, 0.5);
        assert_eq!(
            s,
            Sublevel {
                ratio: 1.0,
                degenerate: true
            }
        );
        let s = field(FieldKind::Shear).sublevel_ratio([0.0, 0.0], 0.05, 0.25);
        assert!((s.ratio - 0.25).abs() <= 0.02 && !s.degenerate);
        let s = field(FieldKind::Quadratic).sublevel_ratio([0.0, 0.0], 0.05, 0.25);
        assert!((s.ratio - 0.5).abs() <= 0.05);
    }

    #[test]
    fn fit_examples() {
        let taus = default_taus();
        let probes = default_probes(64);
        let eps = [0.05, 0.025];
        let r = field(FieldKind::Shear).fit_condition(&probes, &eps, &taus).unwrap();
        let c0 = r.fitted_c0.unwrap();
        assert!((0.85..=1.15).contains(&c0), "{c0}");
        assert!(r.max_residual.unwrap() <= 0.5);
        let r = field(FieldKind::Quadratic).fit_condition(&probes, &eps, &taus).unwrap();
        let c0 = r.fitted_c0.unwrap();
        assert!((0.4..=0.6).contains(&c0), "{c0}");
        let r = field(FieldKind::Constant).fit_condition(&probes, &eps, &taus).unwrap();
        assert_eq!(r.degenerate_fraction, 1.0);
        assert!(r.fitted_c0.is_none());
    }

    #[test]
    fn shear_sup_is_nearly_linear() {
        let shear = field(FieldKind::Shear);
        for eps in [0.05, 0.02, 0.01, 0.001] {
            let q = shear.sup_omega([0.0, 0.3], eps) / eps;
            assert!((0.9..=1.0).contains(&q), "ε={eps}: {q}");
        }
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(VectorFieldSpec::new(FieldKind::Constant, 0.5, 0.1)
            .unwrap_err()
            .is_config());
        assert!(VectorFieldSpec::new(FieldKind::Sine, 0.3, 0.1).is_err());
        assert!(VectorFieldSpec::new(FieldKind::Shear, 1.0, 0.2).is_err());
        assert!(VectorFieldSpec::new(FieldKind::Shear, 1.0, 0.0).is_err());
        assert!(FieldKind::parse("vertical-shear").is_ok());
        assert!(FieldKind::parse("spiral").is_err());
    }

    proptest! {
        #[test]
        fn unit_cone_periodic(kind in 0usize..5, x1 in -2.0f64..2.0, x2 in -2.0f64..2.0) {
            let f = field(FieldKind::ALL[kind]);
            let v = f.eval([x1, x2]);
            prop_assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs() <= 1e-12);
            prop_assert!(v[1].abs().atan2(v[0].abs()) < CONE_HALF_ANGLE);
            let w = f.eval([x1 + 1.0, x2 - 1.0]);
            prop_assert!((v[0] - w[0]).abs() < 1e-12 && (v[1] - w[1]).abs() < 1e-12);
        }

        #[test]
        fn omega_paths_agree(kind in 0usize..5, x1 in 0.0f64..1.0, x2 in 0.0f64..1.0, t in -0.125f64..0.125) {
            let f = field(FieldKind::ALL[kind]);
            prop_assert!((f.omega([x1, x2], t) - f.omega_angular([x1, x2], t)).abs() <= 1e-12);
        }

        #[test]
        fn sublevel_monotone_in_tau(kind in 1usize..5, x1 in 0.0f64..1.0, x2 in 0.0f64..1.0, eps in 0.005f64..0.125) {
            let f = field(FieldKind::ALL[kind]);
            let taus: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
            let r = f.sublevel_ratios([x1, x2], eps, &taus);
            for w in r.windows(2) {
                prop_assert!(w[0].ratio <= w[1].ratio);
            }
            prop_assert!(r.iter().all(|s| (0.0..=1.0).contains(&s.ratio)));
        }

        #[test]
        fn finite_difference_c1_bound(kind in 0usize..5, x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
            let f = field(FieldKind::ALL[kind]);
            let h = 1e-6;
            for dir in [[h, 0.0], [0.0, h]] {
                let a = f.eval([x1 - dir[0], x2 - dir[1]]);
                let b = f.eval([x1 + dir[0], x2 + dir[1]]);
                let d = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt() / (2.0 * h);
                prop_assert!(d <= 1.0 + 1e-4, "{d}");
            }
        }
    }
}
