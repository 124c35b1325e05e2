//! Two-sided log-Sobolev bracket for a single complex mode.
//!
//! On `ℝ² ≅ ℂ` the density is `∝ exp(-U(|z|))` with
//! `U(r) = (Λ + ½) r² - r^p/p + penalty`, optionally restricted to the disk
//! `r² ≤ K`. The upper bound is Bakry–Émery on the grid minimum of the
//! Hessian; the lower bound is the best entropy/Dirichlet ratio over
//! exponential tilts and smoothed radial steps, computed by polar quadrature.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ExperimentReport;
use crate::error::{invalid, Error, Result};
use crate::hessian::bakry_emery_bound;

/// Largest admissible quadrature mass loss.
pub const MAX_LOST_MASS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Dim2Cutoff {
    None,
    Sharp {
        #[serde(rename = "K")]
        k: f64,
    },
    /// `R (r² - K)_+^8`
    Polynomial {
        #[serde(rename = "R")]
        r: f64,
        #[serde(rename = "K")]
        k: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dim2Params {
    pub p: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub cutoff: Dim2Cutoff,
    /// Include the `-r^p/p` term.
    pub focusing: bool,
}

impl Dim2Params {
    /// The standard Gaussian on `ℝ²`.
    pub fn gaussian() -> Self {
        Self { p: 2.0, lambda: 0.0, cutoff: Dim2Cutoff::None, focusing: false }
    }

    fn a(&self) -> f64 {
        self.lambda + 0.5
    }

    fn potential(&self, r: f64) -> f64 {
        let mut u = self.a() * r * r;
        if self.focusing {
            u -= r.powf(self.p) / self.p;
        }
        if let Dim2Cutoff::Polynomial { r: big_r, k } = self.cutoff {
            u += big_r * (r * r - k).max(0.0).powi(8);
        }
        u
    }

    fn potential_derivative(&self, r: f64) -> f64 {
        r * self.radial_curvature(r)
    }

    /// `U'(r)/r`
    fn radial_curvature(&self, r: f64) -> f64 {
        let mut c = 2.0 * self.a();
        if self.focusing {
            c -= r.powf(self.p - 2.0);
        }
        if let Dim2Cutoff::Polynomial { r: big_r, k } = self.cutoff {
            c += 16.0 * big_r * (r * r - k).max(0.0).powi(7);
        }
        c
    }

    /// `U''(r)`
    fn second_derivative(&self, r: f64) -> f64 {
        let mut c = 2.0 * self.a();
        if self.focusing {
            c -= (self.p - 1.0) * r.powf(self.p - 2.0);
        }
        if let Dim2Cutoff::Polynomial { r: big_r, k } = self.cutoff {
            let e = (r * r - k).max(0.0);
            c += 16.0 * big_r * e.powi(7) + 224.0 * big_r * r * r * e.powi(6);
        }
        c
    }
}

/// Eigenvalues `(U''(r), U'(r)/r)` of the Hessian of `U(|z|)` at radius `r`.
pub fn dim2_hessian_eigenvalues(params: &Dim2Params, r: f64) -> (f64, f64) {
    (params.second_derivative(r), params.radial_curvature(r))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsiBracket {
    pub lower: f64,
    /// `+∞` when the Hessian is not positive on the whole domain.
    pub upper: f64,
    pub min_curvature: f64,
    pub best_trial: String,
    pub radius: f64,
    pub lost_mass: f64,
}

struct Quadrature {
    /// `(r, θ, weight)` with weights summing to one.
    nodes: Vec<(f64, f64, f64)>,
}

impl Quadrature {
    /// `Ent(G) / E|∇F|²` with `G = F² = e^{g}`; trials with negligible
    /// Dirichlet energy are discarded since both terms are then rounding noise.
    fn ratio(&self, log_f2: impl Fn(f64, f64) -> f64, grad_sq_over_f2: impl Fn(f64, f64) -> f64) -> f64 {
        let g: Vec<f64> = self.nodes.iter().map(|(r, t, _)| log_f2(*r, *t)).collect();
        let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut e, mut dir) = (0.0, 0.0);
        for ((r, t, w), gi) in self.nodes.iter().zip(&g) {
            let f2 = (gi - gmax).exp();
            e += w * f2;
            dir += w * f2 * grad_sq_over_f2(*r, *t);
        }
        if !(dir > 1e-10 * e) {
            return 0.0;
        }
        let log_e = e.ln();
        // E[x ln x - x + 1] with x = G / E[G]: every term is nonnegative.
        let ent: f64 = self
            .nodes
            .iter()
            .zip(&g)
            .map(|((_, _, w), gi)| {
                let d = (gi - gmax - log_e).exp_m1();
                w * ((1.0 + d) * d.ln_1p() - d)
            })
            .sum();
        ent / (dir / e)
    }
}

fn domain_radius(params: &Dim2Params) -> Result<(f64, f64)> {
    if let Dim2Cutoff::Sharp { k } = params.cutoff {
        return Ok((k.sqrt(), 0.0));
    }
    let u_min = (0..2000).map(|i| params.potential(i as f64 * 0.005)).fold(f64::INFINITY, f64::min);
    let mut r = 1.0;
    while r < 1e3 {
        let du = params.potential_derivative(r);
        if params.potential(r) - u_min > 60.0 && du > 0.0 {
            let steps = 4000;
            let h = r / steps as f64;
            let z: f64 = (0..steps)
                .map(|i| {
                    let s = (i as f64 + 0.5) * h;
                    (u_min - params.potential(s)).exp() * s * h
                })
                .sum();
            // Tail beyond r for a potential growing at least linearly from there.
            let tail = (u_min - params.potential(r)).exp() * r / du;
            return Ok((r, tail / z));
        }
        r *= 1.25;
    }
    Err(Error::GridTooSmall { lost_mass: f64::INFINITY })
}

/// Bracket `lower ≤ LS ≤ upper` from a polar grid of `n_r × n_theta` nodes.
pub fn lsi_bracket(params: &Dim2Params, n_r: usize, n_theta: usize) -> Result<LsiBracket> {
    if n_r < 8 || n_theta < 8 {
        return Err(invalid("polar grid needs at least 8 x 8 nodes"));
    }
    let (radius, lost_mass) = domain_radius(params)?;
    if lost_mass > MAX_LOST_MASS {
        return Err(Error::GridTooSmall { lost_mass });
    }
    let hr = radius / n_r as f64;
    let ht = 2.0 * PI / n_theta as f64;
    let radii: Vec<f64> = (0..n_r).map(|i| (i as f64 + 0.5) * hr).collect();
    let u_min = radii.iter().map(|r| params.potential(*r)).fold(f64::INFINITY, f64::min);
    let mut nodes = Vec::with_capacity(n_r * n_theta);
    let mut total = 0.0;
    for r in &radii {
        let w = (u_min - params.potential(*r)).exp() * r;
        for j in 0..n_theta {
            nodes.push((*r, (j as f64 + 0.5) * ht, w));
            total += w;
        }
    }
    for n in &mut nodes {
        n.2 /= total;
    }
    let quad = Quadrature { nodes };

    let min_curvature = (0..=4 * n_r)
        .map(|i| {
            let r = radius * i as f64 / (4 * n_r) as f64;
            let (a, b) = dim2_hessian_eigenvalues(params, r);
            a.min(b)
        })
        .fold(f64::INFINITY, f64::min);
    let upper = bakry_emery_bound(min_curvature).unwrap_or(f64::INFINITY);

    let mut lower = 0.0;
    let mut best_trial = String::from("none");
    for i in 0..60 {
        let s = 0.05 * 1.08f64.powi(i);
        let v = quad.ratio(|r, t| s * r * t.cos(), |_, _| s * s / 4.0);
        if v > lower {
            lower = v;
            best_trial = format!("tilt s={s:.4}");
        }
    }
    let floor = 0.05;
    for i in 1..40 {
        let r0 = radius * i as f64 / 40.0;
        for width in [0.02, 0.05, 0.1, 0.2, 0.4].map(|w| w * radius) {
            // F = floor + ½(1 - tanh((r - r0)/width))
            let f = |r: f64| floor + 0.5 * (1.0 - ((r - r0) / width).tanh());
            let df = |r: f64| -0.5 / (width * ((r - r0) / width).cosh().powi(2));
            let v = quad.ratio(|r, _| 2.0 * f(r).ln(), |r, _| (df(r) / f(r)).powi(2));
            if v > lower {
                lower = v;
                best_trial = format!("step r0={r0:.4} width={width:.4}");
            }
        }
    }
    Ok(LsiBracket { lower, upper, min_curvature, best_trial, radius, lost_mass })
}

/// [`lsi_bracket`] wrapped as a report; `lower ≤ upper` is a hard check.
pub fn lsi_bracket_dim2(params: &Dim2Params, n_r: usize, n_theta: usize) -> Result<ExperimentReport> {
    let b = lsi_bracket(params, n_r, n_theta)?;
    let mut report = ExperimentReport::new(
        "lsi-bracket",
        serde_json::json!({"params": params, "n_r": n_r, "n_theta": n_theta, "best_trial": b.best_trial}),
        0,
    );
    let cells = n_r * n_theta;
    report.push_exact("lower", 0.0, b.lower, cells);
    report.push_exact("upper", 0.0, b.upper, cells);
    report.push_exact("min_curvature", 0.0, b.min_curvature, cells);
    report.push_exact("lost_mass", 0.0, b.lost_mass, cells);
    report.assert("lower_le_upper", b.lower <= b.upper * (1.0 + 1e-3), format!("{} <= {}", b.lower, b.upper));
    Ok(report)
}
