//! Closed-form one-dimensional profiles and the averaging kernel `α`.
//!
//! All bumps are built from the exp-based smoothstep `S`, which is `0` on
//! `(-∞, 0]`, `1` on `[1, ∞)` and `C^∞` in between:
//!
//! * `σ(x) = S(2 - |x|)`, `β = σ²` (so `√β = σ` is smooth), `β = 1` on
//!   `[-1, 1]`, `β = 0` outside `(-2, 2)`;
//! * `β̃ = (S(2x - 1) · S(5 - 2x))²`, supported in `[1/2, 5/2]`, `1` on `[1, 2]`;
//! * `ψ(r) = β(r/2) - β(r)`, the Littlewood–Paley annulus profile;
//! * `α = ρ² / ‖ρ‖²` with `ρ̂(ξ) = exp(-1/(1/4 - ξ²))` on `|ξ| < 1/2`, so `α ≥ 0`,
//!   `∫α = 1` and `α̂ = ρ̂ * ρ̂ / ‖ρ̂‖²` is supported in `[-1, 1]`.

use std::sync::OnceLock;

use serde::Serialize;

#[inline]
fn expneg(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Smooth transition from `0` (for `x ≤ 0`) to `1` (for `x ≥ 1`).
#[inline]
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = expneg(x);
        a / (a + expneg(1.0 - x))
    }
}

#[inline]
pub fn sigma(x: f64) -> f64 {
    smoothstep(2.0 - x.abs())
}

#[inline]
pub fn beta(x: f64) -> f64 {
    let s = sigma(x);
    s * s
}

#[inline]
pub fn beta_tilde_root(x: f64) -> f64 {
    smoothstep(2.0 * x - 1.0) * smoothstep(5.0 - 2.0 * x)
}

#[inline]
pub fn beta_tilde(x: f64) -> f64 {
    let s = beta_tilde_root(x);
    s * s
}

#[inline]
pub fn psi(r: f64) -> f64 {
    beta(0.5 * r) - beta(r)
}

/// `β_ω(x) = β(2^θ (x - c_ω))`.
#[inline]
pub fn beta_omega(theta: u32, center: f64, x: f64) -> f64 {
    beta((1u64 << theta) as f64 * (x - center))
}

#[inline]
fn rho_hat(xi: f64) -> f64 {
    let d = 0.25 - xi * xi;
    if d <= 0.0 {
        0.0
    } else {
        (-1.0 / d).exp()
    }
}

const ALPHA_HAT_STEPS: usize = 8192;
const ALPHA_STEP: f64 = 1.0 / 256.0;
const ALPHA_T_MAX: f64 = 32.0;
const QUAD_POINTS: usize = 2048;

struct AlphaTables {
    /// `α̂` on `[0, 1]` at step `1/ALPHA_HAT_STEPS`.
    hat: Vec<f64>,
    /// `α` on `[0, ALPHA_T_MAX]` at step `ALPHA_STEP`.
    space: Vec<f64>,
    /// `∫_{|t| > t_i} α`.
    tail: Vec<f64>,
}

fn tables() -> &'static AlphaTables {
    static TABLES: OnceLock<AlphaTables> = OnceLock::new();
    TABLES.get_or_init(build_tables)
}

fn build_tables() -> AlphaTables {
    // trapezoid on [-1/2, 1/2]; the integrands vanish to all orders at the ends
    let h = 1.0 / QUAD_POINTS as f64;
    let nodes: Vec<f64> = (0..=QUAD_POINTS).map(|i| -0.5 + i as f64 * h).collect();
    let rh: Vec<f64> = nodes.iter().map(|&x| rho_hat(x)).collect();
    let norm: f64 = rh.iter().map(|r| r * r).sum::<f64>() * h;

    let hat = (0..=ALPHA_HAT_STEPS)
        .map(|i| {
            let zeta = i as f64 / ALPHA_HAT_STEPS as f64;
            let s: f64 = nodes.iter().zip(&rh).map(|(&y, &r)| r * rho_hat(zeta - y)).sum();
            s * h / norm
        })
        .collect();

    let m = (ALPHA_T_MAX / ALPHA_STEP).round() as usize;
    let half: Vec<(f64, f64)> = nodes
        .iter()
        .zip(&rh)
        .filter(|(x, _)| **x >= 0.0)
        .map(|(&x, &r)| (x, if x == 0.0 { 0.5 * r } else { r }))
        .collect();
    let space: Vec<f64> = (0..=m)
        .map(|i| {
            let t = i as f64 * ALPHA_STEP;
            let w = std::f64::consts::TAU * t;
            let rho: f64 = 2.0 * h * half.iter().map(|&(x, r)| r * (w * x).cos()).sum::<f64>();
            rho * rho / norm
        })
        .collect();

    // two-sided tail mass, trapezoid from the far end
    let mut tail = vec![0.0; m + 1];
    for i in (0..m).rev() {
        tail[i] = tail[i + 1] + ALPHA_STEP * (space[i] + space[i + 1]);
    }
    AlphaTables { hat, space, tail }
}

/// Lagrange interpolation on the `2·HALF` table nodes around `pos`.
#[inline]
fn lagrange<const HALF: isize>(table: &[f64], pos: f64, fetch: impl Fn(&[f64], isize) -> f64) -> f64 {
    let i0 = pos.floor() as isize;
    let frac = pos - i0 as f64;
    let mut acc = 0.0;
    for k in 1 - HALF..=HALF {
        let mut w = 1.0;
        for m in 1 - HALF..=HALF {
            if m != k {
                w *= (frac - m as f64) / (k - m) as f64;
            }
        }
        acc += w * fetch(table, i0 + k);
    }
    acc
}

/// Fourier transform of the averaging kernel; exactly zero for `|ζ| ≥ 1`.
#[inline]
pub fn alpha_hat(zeta: f64) -> f64 {
    let z = zeta.abs();
    if z >= 1.0 {
        return 0.0;
    }
    let t = tables();
    let v = lagrange::<2>(&t.hat, z * ALPHA_HAT_STEPS as f64, |tab, i| {
        let i = i.unsigned_abs();
        tab.get(i).copied().unwrap_or(0.0)
    });
    v.max(0.0)
}

/// The averaging kernel `α(t)` (nonnegative, unit mass).
#[inline]
pub fn alpha(t: f64) -> f64 {
    let z = t.abs();
    if z >= ALPHA_T_MAX {
        return 0.0;
    }
    let tab = tables();
    lagrange::<3>(&tab.space, z / ALPHA_STEP, |tab, i| {
        let i = i.unsigned_abs();
        tab.get(i).copied().unwrap_or(0.0)
    })
    .max(0.0)
}

/// Smallest tabulated `T` with `∫_{|t|>T} α < tail_mass`.
pub fn alpha_truncation(tail_mass: f64) -> f64 {
    let t = tables();
    let i = t.tail.iter().position(|&m| m < tail_mass).unwrap_or(t.tail.len() - 1);
    i as f64 * ALPHA_STEP
}

/// `∫α` by the trapezoid rule on the table (exact for band-limited `α` up to
/// truncation at the table end).
pub fn alpha_mass() -> f64 {
    let t = tables();
    t.tail[0]
}

/// `∫β`, the value of the averaged slope multiplier `γ`.
pub fn beta_integral() -> f64 {
    let k = 8192;
    let h = 4.0 / k as f64;
    (0..=k).map(|i| beta(-2.0 + i as f64 * h)).sum::<f64>() * h
}

/// `Σ_ω β_ω(y)` over the dyadic intervals of length `2^{-θ}`, continued
/// periodically past `±20` so that the sum is `2^{-θ}`-periodic on all of
/// `[-20, 20]`.
pub fn beta_theta(theta: u32, y: f64) -> f64 {
    let scale = (1u64 << theta) as f64;
    let z = scale * y;
    let base = z.floor();
    let mut acc = 0.0;
    for m in -3..=2 {
        let c = base + m as f64 + 0.5;
        acc += beta(z - c);
    }
    acc
}

/// The same sum restricted to intervals contained in `[-20, 20]`.
pub fn beta_theta_truncated(theta: u32, y: f64) -> f64 {
    let scale = (1u64 << theta) as f64;
    let z = scale * y;
    let base = z.floor();
    let lo = -20.0 * scale;
    let hi = 20.0 * scale;
    let mut acc = 0.0;
    for m in -3..=2 {
        let c = base + m as f64 + 0.5;
        if c - 0.5 >= lo && c + 0.5 <= hi {
            acc += beta(z - c);
        }
    }
    acc
}

/// `γ_θ(x) = (1/20) ∫_{-10}^{10} β_θ(x + t) dt` by a trapezoid rule with
/// `per_period` nodes per period of `β_θ`.
pub fn gamma_theta(theta: u32, x: f64, per_period: usize) -> f64 {
    let periods = 20usize << theta;
    let nodes = periods * per_period;
    let h = 20.0 / nodes as f64;
    let mut acc = 0.5 * (beta_theta(theta, x - 10.0) + beta_theta(theta, x + 10.0));
    for i in 1..nodes {
        acc += beta_theta(theta, x - 10.0 + i as f64 * h);
    }
    acc * h / 20.0
}

/// Variation `max - min` of `γ_θ` over `x ∈ [-10, 10]`.
pub fn gamma_check(theta: u32) -> f64 {
    let per_period = if theta <= 8 { 32 } else { 8 };
    let xs = 21;
    let values: Vec<f64> = (0..xs)
        .map(|i| {
            // irrational-ish offsets so the samples do not align with the period
            let x = -10.0 + 20.0 * (i as f64 + 0.414_213_562) / xs as f64;
            gamma_theta(theta, x, per_period)
        })
        .collect();
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let min = values.iter().copied().fold(f64::MAX, f64::min);
    max - min
}

/// Named profile, for introspection and JSON dumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Alpha,
    AlphaHat,
    Beta,
    BetaTilde,
    Psi,
}

impl Profile {
    pub const ALL: [Profile; 5] = [
        Profile::Alpha,
        Profile::AlphaHat,
        Profile::Beta,
        Profile::BetaTilde,
        Profile::Psi,
    ];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Profile::Alpha => alpha(x),
            Profile::AlphaHat => alpha_hat(x),
            Profile::Beta => beta(x),
            Profile::BetaTilde => beta_tilde(x),
            Profile::Psi => psi(x),
        }
    }

    fn range(self) -> (f64, f64) {
        match self {
            Profile::Alpha => (-12.0, 12.0),
            Profile::AlphaHat => (-1.25, 1.25),
            Profile::Beta => (-2.5, 2.5),
            Profile::BetaTilde => (0.0, 3.0),
            Profile::Psi => (0.0, 5.0),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ProfileDump {
    pub gamma_constant: f64,
    pub alpha_mass: f64,
    pub alpha_truncation: f64,
    pub profiles: Vec<ProfileSamples>,
}

#[derive(Debug, Serialize)]
pub struct ProfileSamples {
    pub name: Profile,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Samples every profile on its natural range.
pub fn dump_profiles(samples: usize) -> ProfileDump {
    let profiles = Profile::ALL
        .iter()
        .map(|&p| {
            let (lo, hi) = p.range();
            let x: Vec<f64> = (0..samples)
                .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
                .collect();
            let y = x.iter().map(|&x| p.eval(x)).collect();
            ProfileSamples { name: p, x, y }
        })
        .collect();
    ProfileDump {
        gamma_constant: beta_integral(),
        alpha_mass: alpha_mass(),
        alpha_truncation: alpha_truncation(1e-9),
        profiles,
    }
}
