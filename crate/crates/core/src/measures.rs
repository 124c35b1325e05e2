//! The Gaussian reference measure, its heat-regularized family, and the
//! Gibbs log-weights (all relative to the Gaussian).
//!
//! Convention: `μ` is the law of `Σ g_n / <n> e^{inx}` with `E|g_n|^2 = 1`,
//! real and imaginary parts of `g_n` independent with variance 1/2. Every
//! sampler draws modes in the order `0, 1, -1, 2, -2, ...`, so a sample at
//! truncation `N` projects onto the sample at any `M < N` drawn from the same
//! generator.
//!
//! Log-weights may be `f64::NEG_INFINITY`; exponentiated they give exact zeros.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::complex_gaussian;
use crate::spectral::{japanese_bracket, SpectralField, SpectralSpace};

/// Physical and regularization parameters shared by the Gibbs densities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsParams {
    /// Focusing exponent, in `[2, 6)`.
    pub p: f64,
    /// Mass cutoff level.
    #[serde(rename = "K")]
    pub k: f64,
    /// Mass tilt `exp(-Λ ‖u‖²)`.
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    /// Strength of the polynomial penalty `R (‖u‖² - K)_+^8` (or `^σ`).
    #[serde(rename = "R")]
    pub r: f64,
    /// Soft-cutoff penalty level.
    #[serde(rename = "L")]
    pub l: f64,
    pub eps0: f64,
    /// Exponent of the smoothed cutoff; must exceed `p/2 + 1`.
    pub sigma: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl Default for GibbsParams {
    fn default() -> Self {
        Self { p: 4.0, k: 1.0, lambda: 0.0, r: 1.0, l: 1.0, eps0: 0.1, sigma: 5.0, n: 8 }
    }
}

impl GibbsParams {
    pub fn validate(&self) -> Result<()> {
        if !(2.0..6.0).contains(&self.p) {
            return Err(invalid(format!("p must lie in [2, 6), got {}", self.p)));
        }
        if !(self.k > 0.0) {
            return Err(invalid(format!("K must be > 0, got {}", self.k)));
        }
        if !(self.lambda >= 0.0) {
            return Err(invalid(format!("Lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.r >= 0.0) {
            return Err(invalid(format!("R must be >= 0, got {}", self.r)));
        }
        if !(self.l >= 0.0) {
            return Err(invalid(format!("L must be >= 0, got {}", self.l)));
        }
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(invalid(format!("eps0 must lie in (0, 1), got {}", self.eps0)));
        }
        if !(self.sigma > self.p / 2.0 + 1.0) {
            return Err(invalid(format!("sigma must exceed p/2 + 1 = {}, got {}", self.p / 2.0 + 1.0, self.sigma)));
        }
        Ok(())
    }
}

/// Frequencies `0, 1, -1, 2, -2, ..., N, -N`: decreasing variance under `μ`.
pub fn variance_order(max_freq: usize) -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=max_freq as i64).flat_map(|n| [n, -n]))
}

fn sample_scaled<R: Rng + ?Sized>(space: &SpectralSpace, rng: &mut R, scale: impl Fn(i64) -> f64) -> SpectralField {
    let mut u = SpectralField::zeros(space);
    let big_n = space.max_frequency() as i64;
    let coeffs = u.coeffs_mut();
    for n in variance_order(space.max_frequency()) {
        coeffs[(n + big_n) as usize] = complex_gaussian(rng) * scale(n);
    }
    u
}

/// A draw of `(P_N)_* μ`.
pub fn sample_mu<R: Rng + ?Sized>(space: &SpectralSpace, rng: &mut R) -> SpectralField {
    sample_scaled(space, rng, |n| 1.0 / japanese_bracket(n))
}

/// A draw of `(P_N)_* μ̄_t`: each mode of a `μ` draw scaled by `sqrt(1 - e^{-t<n>^2})`.
pub fn sample_mu_bar<R: Rng + ?Sized>(space: &SpectralSpace, t: f64, rng: &mut R) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(invalid(format!("heat time must be >= 0, got {t}")));
    }
    Ok(sample_scaled(space, rng, |n| {
        let b2 = 1.0 + (n as f64).powi(2);
        (-(-t * b2).exp_m1()).sqrt() / b2.sqrt()
    }))
}

/// `E_μ ‖P_N u‖²_{L²} = Σ_{|n|≤N} <n>^{-2}`.
pub fn expected_mass(max_freq: usize) -> f64 {
    variance_order(max_freq).map(|n| 1.0 / (1.0 + (n as f64).powi(2))).sum()
}

pub fn mass(u: &SpectralField) -> f64 {
    u.mass()
}

/// `H(u) = ½ ∫|∇u|² - (1/p) ∫|u|^p`.
pub fn hamiltonian(u: &SpectralField, p: f64) -> Result<f64> {
    let s = u.sobolev_norms();
    Ok(0.5 * (s.h1_sq - s.l2_sq) - u.lp_norm_p(p)? / p)
}

#[inline]
fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

fn shifted(u: &SpectralField, phi: &SpectralField) -> SpectralField {
    u + phi
}

fn truncated(u: &SpectralField, n: usize) -> SpectralField {
    if n >= u.space().max_frequency() {
        u.clone()
    } else {
        u.project(n).expect("level checked against truncation")
    }
}

/// Log-density of `ρ_φ` against `μ`: `(1/p)∫|u+φ|^p` on `{‖u+φ‖² ≤ K}`, `-∞` off it.
pub fn log_weight_sharp(u: &SpectralField, phi: &SpectralField, params: &GibbsParams) -> f64 {
    let v = shifted(u, phi);
    if v.mass() <= params.k {
        v.lp_norm_p(params.p).expect("p >= 2") / params.p
    } else {
        f64::NEG_INFINITY
    }
}

/// Log-density of the mass-tilted sharp-cutoff measure `ρ_Λ` against `μ`.
pub fn log_weight_tilted(u: &SpectralField, params: &GibbsParams) -> f64 {
    let v = truncated(u, params.n);
    let m = v.mass();
    if m <= params.k {
        -params.lambda * m + v.lp_norm_p(params.p).expect("p >= 2") / params.p
    } else {
        f64::NEG_INFINITY
    }
}

/// `-Λ‖P_N u‖² + (1/p)∫|P_N u|^p - R(‖P_N u‖² - K)_+^8`.
pub fn log_weight_polynomial(u: &SpectralField, params: &GibbsParams) -> f64 {
    let v = truncated(u, params.n);
    let m = v.mass();
    -params.lambda * m + v.lp_norm_p(params.p).expect("p >= 2") / params.p
        - params.r * positive_part(m - params.k).powi(8)
}

/// Soft cutoff: `(1/p)∫|P_N(u+φ)|^p` inside `{‖P_N(u+φ)‖² ≤ K}`, `-L` outside.
pub fn log_weight_soft(u: &SpectralField, phi: &SpectralField, params: &GibbsParams) -> f64 {
    let v = truncated(&shifted(u, phi), params.n);
    soft_weight_of_shifted(&v, params)
}

pub(crate) fn soft_weight_of_shifted(v: &SpectralField, params: &GibbsParams) -> f64 {
    if v.mass() <= params.k {
        v.lp_norm_p(params.p).expect("p >= 2") / params.p
    } else {
        -params.l
    }
}

/// `(1/p)∫|u+φ|^p - R(‖u+φ‖² - K)_+^σ`, twice differentiable in `φ`.
pub fn log_weight_smoothed(u: &SpectralField, phi: &SpectralField, params: &GibbsParams) -> f64 {
    let v = shifted(u, phi);
    let m = v.mass();
    v.lp_norm_p(params.p).expect("p >= 2") / params.p - params.r * positive_part(m - params.k).powf(params.sigma)
}
