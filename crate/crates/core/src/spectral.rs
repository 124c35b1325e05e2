//! Fourier-side representation of complex fields on the circle `R / 2πZ`.
//!
//! A field is stored by its coefficients on the frequencies `-N..=N` (the
//! coefficient of `e^{inx}`), contiguous in ascending `n`. Integrals use the
//! normalized measure `dx / 2π` and are evaluated with the rectangle rule on
//! an oversampled uniform grid, which is exact for trigonometric polynomials
//! of degree below the grid size.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_OVERSAMPLING: usize = 4;

/// `<n> = sqrt(1 + n^2)`, the symbol of `<∇>`.
#[inline]
pub fn japanese_bracket(n: i64) -> f64 {
    let n = n as f64;
    (1.0 + n * n).sqrt()
}

/// `<n>^2 = 1 + n^2`.
#[inline]
pub fn bracket_sq(n: i64) -> f64 {
    let n = n as f64;
    1.0 + n * n
}

struct SpaceInner {
    max_freq: usize,
    oversampling: usize,
    grid_size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// The truncated space `P_N L^2(T)` together with its quadrature grid.
///
/// Cloning is cheap; FFT plans are shared.
#[derive(Clone)]
pub struct SpectralSpace {
    inner: Arc<SpaceInner>,
}

impl SpectralSpace {
    pub fn new(max_freq: usize) -> Self {
        Self::with_oversampling(max_freq, DEFAULT_OVERSAMPLING).expect("default oversampling is valid")
    }

    /// Grid size is the smallest power of two holding `oversampling * (2N + 1)` nodes.
    pub fn with_oversampling(max_freq: usize, oversampling: usize) -> Result<Self> {
        if oversampling == 0 {
            return Err(invalid("oversampling factor must be at least 1"));
        }
        let min_nodes = oversampling
            .checked_mul(2 * max_freq + 1)
            .ok_or_else(|| invalid("grid size overflows"))?;
        let grid_size = min_nodes.max(2).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid_size);
        let inverse = planner.plan_fft_inverse(grid_size);
        Ok(Self {
            inner: Arc::new(SpaceInner { max_freq, oversampling, grid_size, forward, inverse }),
        })
    }

    #[inline]
    pub fn max_frequency(&self) -> usize {
        self.inner.max_freq
    }

    #[inline]
    pub fn grid_size(&self) -> usize {
        self.inner.grid_size
    }

    #[inline]
    pub fn oversampling(&self) -> usize {
        self.inner.oversampling
    }

    /// Number of complex modes, `2N + 1`.
    #[inline]
    pub fn dim(&self) -> usize {
        2 * self.inner.max_freq + 1
    }

    /// Dimension of the space viewed as a real Hilbert space.
    #[inline]
    pub fn real_dim(&self) -> usize {
        2 * self.dim()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = i64> {
        let n = self.inner.max_freq as i64;
        -n..=n
    }

    #[inline]
    pub fn index_of(&self, n: i64) -> Option<usize> {
        let big_n = self.inner.max_freq as i64;
        (n.abs() <= big_n).then(|| (n + big_n) as usize)
    }

    #[inline]
    pub fn frequency_at(&self, index: usize) -> i64 {
        index as i64 - self.inner.max_freq as i64
    }

    /// Quadrature nodes `x_j = 2πj / G`.
    pub fn nodes(&self) -> Vec<f64> {
        let g = self.grid_size();
        (0..g).map(|j| std::f64::consts::TAU * j as f64 / g as f64).collect()
    }

    /// Values `u(x_j)` of the trigonometric polynomial with the given coefficients.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(coeffs.len(), self.dim());
        let g = self.grid_size();
        let mut buf = vec![Complex64::new(0.0, 0.0); g];
        for (i, c) in coeffs.iter().enumerate() {
            let n = self.frequency_at(i);
            buf[n.rem_euclid(g as i64) as usize] = *c;
        }
        self.inner.inverse.process(&mut buf);
        buf
    }

    /// Discrete Fourier coefficients of grid values, restricted to `|n| <= N`.
    ///
    /// This is the exact adjoint of [`synthesize`](Self::synthesize) under the
    /// quadrature inner product, so gradients of grid functionals computed
    /// through it are gradients of the discretized functional.
    pub fn analyze(&self, values: &[Complex64]) -> Vec<Complex64> {
        let g = self.grid_size();
        assert_eq!(values.len(), g, "grid length mismatch");
        let mut buf = values.to_vec();
        self.inner.forward.process(&mut buf);
        let scale = 1.0 / g as f64;
        self.frequencies()
            .map(|n| buf[n.rem_euclid(g as i64) as usize] * scale)
            .collect()
    }

    pub(crate) fn check_same(&self, other: &SpectralSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch { left: self.max_frequency(), right: other.max_frequency() })
        }
    }
}

impl PartialEq for SpectralSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.max_freq == other.inner.max_freq
                && self.inner.grid_size == other.inner.grid_size)
    }
}

impl fmt::Debug for SpectralSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralSpace")
            .field("max_freq", &self.inner.max_freq)
            .field("oversampling", &self.inner.oversampling)
            .field("grid_size", &self.inner.grid_size)
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevNorms {
    /// `Σ |û(n)|^2`
    pub l2_sq: f64,
    /// `Σ <n>^2 |û(n)|^2`
    pub h1_sq: f64,
}

/// A trigonometric polynomial of degree at most `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    space: SpectralSpace,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(space: &SpectralSpace) -> Self {
        Self { space: space.clone(), coeffs: vec![Complex64::new(0.0, 0.0); space.dim()] }
    }

    pub fn from_coeffs(space: &SpectralSpace, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(invalid(format!(
                "expected {} coefficients for N = {}, got {}",
                space.dim(),
                space.max_frequency(),
                coeffs.len()
            )));
        }
        Ok(Self { space: space.clone(), coeffs })
    }

    /// Field with the listed `(n, û(n))` modes; all others zero.
    pub fn from_modes(space: &SpectralSpace, modes: &[(i64, Complex64)]) -> Result<Self> {
        let mut u = Self::zeros(space);
        for &(n, c) in modes {
            let i = space
                .index_of(n)
                .ok_or_else(|| invalid(format!("frequency {n} outside |n| <= {}", space.max_frequency())))?;
            u.coeffs[i] += c;
        }
        Ok(u)
    }

    pub fn constant(space: &SpectralSpace, c: Complex64) -> Self {
        Self::from_modes(space, &[(0, c)]).expect("frequency 0 is always present")
    }

    /// Projection of grid samples onto `|n| <= N`.
    pub fn from_grid(space: &SpectralSpace, values: &[Complex64]) -> Self {
        Self { space: space.clone(), coeffs: space.analyze(values) }
    }

    /// Packs `[Re û(-N), Im û(-N), ..., Re û(N), Im û(N)]`, an orthonormal
    /// coordinate system for the real inner product.
    pub fn from_real_vec(space: &SpectralSpace, x: &[f64]) -> Result<Self> {
        if x.len() != space.real_dim() {
            return Err(invalid(format!("expected {} real coordinates, got {}", space.real_dim(), x.len())));
        }
        let coeffs = x.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Ok(Self { space: space.clone(), coeffs })
    }

    pub fn to_real_vec(&self) -> Vec<f64> {
        self.coeffs.iter().flat_map(|c| [c.re, c.im]).collect()
    }

    #[inline]
    pub fn space(&self) -> &SpectralSpace {
        &self.space
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// `û(n)`, zero outside the truncation.
    pub fn coeff(&self, n: i64) -> Complex64 {
        self.space.index_of(n).map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn grid_values(&self) -> Vec<Complex64> {
        self.space.synthesize(&self.coeffs)
    }

    /// `P_M u`: zeroes every coefficient with `|n| > M`.
    pub fn project(&self, m: usize) -> Result<Self> {
        let big_n = self.space.max_frequency();
        if m > big_n {
            return Err(invalid(format!("projection level {m} exceeds truncation N = {big_n}")));
        }
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            if self.space.frequency_at(i).unsigned_abs() as usize > m {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        Ok(out)
    }

    /// Re-expresses the field in another truncation, zero-padding or dropping modes.
    pub fn embed(&self, space: &SpectralSpace) -> Self {
        let mut out = Self::zeros(space);
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            *c = self.coeff(space.frequency_at(i));
        }
        out
    }

    /// `∫ |u|^p dx` under the normalized measure.
    pub fn lp_norm_p(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(invalid(format!("L^p exponent must be >= 1, got {p}")));
        }
        Ok(grid_abs_pow_mean(&self.grid_values(), p))
    }

    pub fn sobolev_norms(&self) -> SobolevNorms {
        let mut l2_sq = 0.0;
        let mut h1_sq = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let a = c.norm_sqr();
            l2_sq += a;
            h1_sq += bracket_sq(self.space.frequency_at(i)) * a;
        }
        SobolevNorms { l2_sq, h1_sq }
    }

    /// `‖u‖_{L^2}^2`, the mass.
    pub fn mass(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn h1_sq(&self) -> f64 {
        self.sobolev_norms().h1_sq
    }

    /// `Re ∫ f conj(g) dx`, the real Hilbert structure on `L^2(T; C)`.
    pub fn real_inner(&self, other: &SpectralField) -> Result<f64> {
        self.space.check_same(&other.space)?;
        Ok(self.real_inner_unchecked(other))
    }

    pub(crate) fn real_inner_unchecked(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &SpectralField) {
        assert_eq!(self.space, other.space, "spectral spaces differ");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * alpha;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for c in &mut self.coeffs {
            *c *= alpha;
        }
    }

    /// Multiplies `û(n)` by `f(n)` for every mode.
    pub fn apply_multiplier(&mut self, f: impl Fn(i64) -> f64) {
        let big_n = self.space.max_frequency() as i64;
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            *c *= f(i as i64 - big_n);
        }
    }

    /// Phase rotation `u ↦ e^{iθ} u`.
    pub fn rotate_phase(&self, theta: f64) -> Self {
        let z = Complex64::from_polar(1.0, theta);
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= z;
        }
        out
    }

    /// Translation `u(·) ↦ u(· + a)`.
    pub fn translate(&self, a: f64) -> Self {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let n = self.space.frequency_at(i) as f64;
            *c *= Complex64::from_polar(1.0, n * a);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Mean of `|v_j|^p` over grid values, i.e. the rectangle-rule `∫ |u|^p dx`.
pub fn grid_abs_pow_mean(values: &[Complex64], p: f64) -> f64 {
    let sum: f64 = if p == 2.0 {
        values.iter().map(|v| v.norm_sqr()).sum()
    } else if p == 4.0 {
        values.iter().map(|v| v.norm_sqr().powi(2)).sum()
    } else {
        let half = 0.5 * p;
        values.iter().map(|v| v.norm_sqr().powf(half)).sum()
    };
    sum / values.len() as f64
}

impl Add<&SpectralField> for &SpectralField {
    type Output = SpectralField;

    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub<&SpectralField> for &SpectralField {
    type Output = SpectralField;

    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;

    fn mul(self, rhs: f64) -> SpectralField {
        let mut out = self.clone();
        out.scale(rhs);
        out
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;

    fn neg(self) -> SpectralField {
        self * -1.0
    }
}
