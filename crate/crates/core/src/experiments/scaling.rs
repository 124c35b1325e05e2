//! Concentrating bumps `φ_M(x) = √M φ₁(Mx)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spectral::{SpectralField, SpectralSpace};

/// Points of the reference quadrature for norms of `φ₁`.
const REFERENCE_POINTS: usize = 1 << 17;

/// `b(x) = exp(-1/(1 - (x/π)²))` on `(-π, π)`, zero elsewhere.
fn bump(x: f64) -> f64 {
    let s = x / PI;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn bump_derivative(x: f64) -> f64 {
    let s = x / PI;
    if s.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s * s;
        bump(x) * (-2.0 * s / (PI * d * d))
    }
}

/// Maps `x` to its representative in `[-π, π)`.
fn centered(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFamily {
    k: f64,
    amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub l2_sq: f64,
    pub l2_sq_target: f64,
    pub lp_p: f64,
    pub lp_p_target: f64,
    pub lpm2: f64,
    pub lpm2_target: f64,
    pub h1: f64,
    /// `‖P_N φ_M‖_{H¹} / M`
    pub h1_over_m: f64,
    /// `‖P_N φ_M - φ_M‖_{L^p} / ‖φ_M‖_{L^p}`
    pub projection_error: f64,
}

impl ScalingCheck {
    /// Largest relative deviation among the three scaling identities.
    pub fn max_relative_deviation(&self) -> f64 {
        [
            (self.l2_sq - self.l2_sq_target).abs() / self.l2_sq_target,
            (self.lp_p - self.lp_p_target).abs() / self.lp_p_target,
            (self.lpm2 - self.lpm2_target).abs() / self.lpm2_target,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl ScalingFamily {
    /// Normalized so that `‖φ₁‖²_{L²} = K/2`.
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(invalid(format!("K must be > 0, got {k}")));
        }
        let raw = Self { k, amplitude: 1.0 }.reference_norm(2.0);
        Ok(Self { k, amplitude: (0.5 * k / raw).sqrt() })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `φ₁(x)` on the circle.
    pub fn profile(&self, x: f64) -> f64 {
        self.amplitude * bump(centered(x))
    }

    /// `φ_M(x) = √M φ₁(Mx)` with `φ₁` extended by zero off `(-π, π)`.
    pub fn value(&self, m: usize, x: f64) -> f64 {
        let m = m as f64;
        m.sqrt() * self.amplitude * bump(m * centered(x))
    }

    /// `∫|φ₁|^q dx/2π` by a fine midpoint rule.
    pub fn reference_norm(&self, q: f64) -> f64 {
        let h = 2.0 * PI / REFERENCE_POINTS as f64;
        (0..REFERENCE_POINTS)
            .map(|j| (self.amplitude * bump(-PI + (j as f64 + 0.5) * h)).powf(q))
            .sum::<f64>()
            / REFERENCE_POINTS as f64
    }

    /// `∫|φ₁'|² dx/2π`
    fn reference_gradient_sq(&self) -> f64 {
        let h = 2.0 * PI / REFERENCE_POINTS as f64;
        (0..REFERENCE_POINTS)
            .map(|j| (self.amplitude * bump_derivative(-PI + (j as f64 + 0.5) * h)).powi(2))
            .sum::<f64>()
            / REFERENCE_POINTS as f64
    }

    /// `‖φ_M‖^q_{L^q} = M^{q/2 - 1} ‖φ₁‖^q_{L^q}`.
    pub fn exact_norm(&self, m: usize, q: f64) -> f64 {
        (m as f64).powf(0.5 * q - 1.0) * self.reference_norm(q)
    }

    /// `‖φ_M‖²_{H¹} = ‖φ₁‖² + M² ‖φ₁'‖²`.
    pub fn exact_h1_sq(&self, m: usize) -> f64 {
        self.reference_norm(2.0) + (m as f64).powi(2) * self.reference_gradient_sq()
    }

    fn fine_space(&self, m: usize, space: &SpectralSpace) -> SpectralSpace {
        SpectralSpace::new((4 * space.dim()).max(128 * m))
    }

    /// `P_N φ_M`, from the coefficients of `φ_M` sampled on a fine grid.
    pub fn field(&self, m: usize, space: &SpectralSpace) -> SpectralField {
        let fine = self.fine_space(m, space);
        let values: Vec<Complex64> = fine.nodes().iter().map(|x| Complex64::new(self.value(m, *x), 0.0)).collect();
        SpectralField::from_grid(&fine, &values).project(space.max_frequency()).expect("fine space is larger").embed(space)
    }

    pub fn check(&self, m: usize, space: &SpectralSpace, p: f64) -> ScalingCheck {
        let phi = self.field(m, space);
        let fine = self.fine_space(m, space);
        let exact: Vec<Complex64> = fine.nodes().iter().map(|x| Complex64::new(self.value(m, *x), 0.0)).collect();
        let projected = phi.embed(&fine).grid_values();
        let diff: Vec<Complex64> = exact.iter().zip(&projected).map(|(a, b)| a - b).collect();
        let lp_exact = self.exact_norm(m, p);
        let projection_error = (crate::spectral::grid_abs_pow_mean(&diff, p) / lp_exact).powf(1.0 / p);
        let s = phi.sobolev_norms();
        let h1 = s.h1_sq.sqrt();
        ScalingCheck {
            m,
            n: space.max_frequency(),
            l2_sq: s.l2_sq,
            l2_sq_target: 0.5 * self.k,
            lp_p: phi.lp_norm_p(p).expect("p >= 2"),
            lp_p_target: lp_exact,
            lpm2: phi.lp_norm_p(p - 2.0).expect("p >= 3"),
            lpm2_target: self.exact_norm(m, p - 2.0),
            h1,
            h1_over_m: h1 / m as f64,
            projection_error,
        }
    }
}
