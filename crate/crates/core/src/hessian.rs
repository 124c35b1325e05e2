//! Gradient and Hessian of the regularized Hamiltonian
//!
//! `H(u) = Λ‖u‖² - (1/p)∫|u|^p + R(‖u‖² - K)_+^8 + ½‖u‖²_{H¹}`
//!
//! on the truncated space, viewed as a real Hilbert space with
//! `<f, g> = Re ∫ f conj(g) dx`. The focusing integral is the grid quadrature
//! of the spectral module, and every derivative here is the exact derivative
//! of that discretized functional.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::{dense_min, lanczos_min, EigenPair};
use crate::error::{invalid, Result};
use crate::measures::GibbsParams;
use crate::spectral::{bracket_sq, SpectralField, SpectralSpace};

/// Regularization of `|u|` in `|u|^{p-4}` when `p < 4`.
pub const DELTA_REG: f64 = 1e-8;

/// Largest real dimension handled by the dense eigensolver.
pub const DENSE_MAX_DIM: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizedHamiltonianParams {
    pub p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

impl From<&GibbsParams> for RegularizedHamiltonianParams {
    fn from(g: &GibbsParams) -> Self {
        Self { p: g.p, k: g.k, lambda: g.lambda, r: g.r }
    }
}

impl RegularizedHamiltonianParams {
    fn excess(&self, mass: f64) -> f64 {
        (mass - self.k).max(0.0)
    }
}

pub fn regularized_hamiltonian(u: &SpectralField, params: &RegularizedHamiltonianParams) -> f64 {
    let s = u.sobolev_norms();
    params.lambda * s.l2_sq - u.lp_norm_p(params.p).expect("p >= 2") / params.p
        + params.r * params.excess(s.l2_sq).powi(8)
        + 0.5 * s.h1_sq
}

/// `(1 - Δ)u + 2Λu - P_N(|u|^{p-2}u) + 16R(‖u‖² - K)_+^7 u`.
pub fn grad_h(u: &SpectralField, params: &RegularizedHamiltonianParams) -> SpectralField {
    let space = u.space();
    let values = u.grid_values();
    let half = 0.5 * (params.p - 2.0);
    let focusing: Vec<Complex64> = values.iter().map(|v| v * v.norm_sqr().powf(half)).collect();
    let focusing = space.analyze(&focusing);
    let penalty = 16.0 * params.r * params.excess(u.mass()).powi(7);
    let coeffs = u
        .coeffs()
        .iter()
        .zip(&focusing)
        .enumerate()
        .map(|(i, (c, f))| c * (bracket_sq(space.frequency_at(i)) + 2.0 * params.lambda + penalty) - f)
        .collect();
    SpectralField::from_coeffs(space, coeffs).expect("same dimension")
}

/// The Hessian of `H` at a fixed `u`, applied matrix-free.
pub struct HessianOperator {
    space: SpectralSpace,
    params: RegularizedHamiltonianParams,
    u: SpectralField,
    values: Vec<Complex64>,
    /// `|u|^{p-2}` on the grid.
    pow_pm2: Vec<f64>,
    /// `(p-2)|u|^{p-4}` on the grid, regularized for `p < 4`.
    cross: Vec<f64>,
    /// `16R(m - K)_+^7`
    shift7: f64,
    /// `224R(m - K)_+^6`
    rank_one: f64,
}

impl HessianOperator {
    pub fn new(u: &SpectralField, params: &RegularizedHamiltonianParams) -> Self {
        let values = u.grid_values();
        let p = params.p;
        let pow_pm2 = values.iter().map(|v| v.norm_sqr().powf(0.5 * (p - 2.0))).collect();
        let cross = values
            .iter()
            .map(|v| {
                let a = v.norm_sqr();
                if p >= 4.0 {
                    (p - 2.0) * a.powf(0.5 * (p - 4.0))
                } else {
                    (p - 2.0) * (a + DELTA_REG * DELTA_REG).powf(0.5 * (p - 4.0))
                }
            })
            .collect();
        let excess = params.excess(u.mass());
        Self {
            space: u.space().clone(),
            params: *params,
            u: u.clone(),
            values,
            pow_pm2,
            cross,
            shift7: 16.0 * params.r * excess.powi(7),
            rank_one: 224.0 * params.r * excess.powi(6),
        }
    }

    pub fn space(&self) -> &SpectralSpace {
        &self.space
    }

    /// Grid values of the focusing part `|u|^{p-2}w + (p-2)|u|^{p-4}Re(ū w)u`.
    fn focusing_grid(&self, w: &SpectralField) -> Vec<Complex64> {
        let wv = w.grid_values();
        wv.iter()
            .zip(&self.values)
            .zip(self.pow_pm2.iter().zip(&self.cross))
            .map(|((w, u), (a, b))| w * *a + u * (b * (u.conj() * w).re))
            .collect()
    }

    pub fn apply(&self, w: &SpectralField) -> SpectralField {
        assert_eq!(w.space(), &self.space, "spectral spaces differ");
        let focusing = self.space.analyze(&self.focusing_grid(w));
        let uw = self.u.real_inner_unchecked(w);
        let diag = 2.0 * self.params.lambda + self.shift7;
        let coeffs = w
            .coeffs()
            .iter()
            .zip(self.u.coeffs())
            .zip(&focusing)
            .enumerate()
            .map(|(i, ((wc, uc), f))| {
                wc * (bracket_sq(self.space.frequency_at(i)) + diag) + uc * (self.rank_one * uw) - f
            })
            .collect();
        SpectralField::from_coeffs(&self.space, coeffs).expect("same dimension")
    }

    pub fn apply_real(&self, x: &[f64]) -> Vec<f64> {
        let w = SpectralField::from_real_vec(&self.space, x).expect("real dimension matches");
        self.apply(&w).to_real_vec()
    }

    /// `<Hess H(u) w, w>`.
    pub fn form(&self, w: &SpectralField) -> f64 {
        self.apply(w).real_inner_unchecked(w)
    }

    /// `(p-1) ∫ |u|^{p-2} |w|^2 dx`
    pub fn focusing_majorant(&self, w: &SpectralField) -> f64 {
        let wv = w.grid_values();
        let s: f64 = wv.iter().zip(&self.pow_pm2).map(|(w, a)| a * w.norm_sqr()).sum();
        (self.params.p - 1.0) * s / wv.len() as f64
    }

    /// `∫ |u|^{p-2}|w|² + (p-2)|u|^{p-4}(Re ū w)²`, the exact focusing form.
    pub fn focusing_form(&self, w: &SpectralField) -> f64 {
        let wv = w.grid_values();
        let s: f64 = wv
            .iter()
            .zip(&self.values)
            .zip(self.pow_pm2.iter().zip(&self.cross))
            .map(|((w, u), (a, b))| a * w.norm_sqr() + b * (u.conj() * w).re.powi(2))
            .sum();
        s / wv.len() as f64
    }

    /// `2Λ‖w‖² + ‖w‖²_{H¹} + 16R(m-K)_+^7‖w‖² - (p-1)∫|u|^{p-2}|w|²`.
    pub fn majorant_form(&self, w: &SpectralField) -> f64 {
        let s = w.sobolev_norms();
        (2.0 * self.params.lambda + self.shift7) * s.l2_sq + s.h1_sq - self.focusing_majorant(w)
    }
}

pub fn hessian_apply_exact(
    u: &SpectralField,
    w: &SpectralField,
    params: &RegularizedHamiltonianParams,
) -> Result<SpectralField> {
    u.space().check_same(w.space())?;
    Ok(HessianOperator::new(u, params).apply(w))
}

pub fn hessian_form_majorant(u: &SpectralField, w: &SpectralField, params: &RegularizedHamiltonianParams) -> Result<f64> {
    u.space().check_same(w.space())?;
    Ok(HessianOperator::new(u, params).majorant_form(w))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    Dense,
    Iterative,
}

impl EigenMethod {
    /// Dense up to [`DENSE_MAX_DIM`] real dimensions, iterative beyond.
    pub fn auto(space: &SpectralSpace) -> Self {
        if space.real_dim() <= DENSE_MAX_DIM {
            Self::Dense
        } else {
            Self::Iterative
        }
    }
}

#[derive(Clone, Debug)]
pub struct HessianReport {
    pub min_eigenvalue: f64,
    pub attaining_direction: SpectralField,
    pub method: EigenMethod,
    pub residual: f64,
    pub iterations: usize,
}

/// One JSON-lines record per eigen-report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HessianRecord {
    pub min_eigenvalue: f64,
    pub residual: f64,
    pub method: EigenMethod,
    #[serde(rename = "N")]
    pub n: usize,
    pub params: RegularizedHamiltonianParams,
}

impl HessianReport {
    pub fn record(&self, params: &RegularizedHamiltonianParams) -> HessianRecord {
        HessianRecord {
            min_eigenvalue: self.min_eigenvalue,
            residual: self.residual,
            method: self.method,
            n: self.attaining_direction.space().max_frequency(),
            params: *params,
        }
    }
}

fn pair_to_report(space: &SpectralSpace, pair: EigenPair, method: EigenMethod) -> HessianReport {
    HessianReport {
        min_eigenvalue: pair.value,
        attaining_direction: SpectralField::from_real_vec(space, &pair.vector).expect("real dimension matches"),
        method,
        residual: pair.residual,
        iterations: pair.iterations,
    }
}

/// Smallest eigenvalue of `Hess H(u)` on the truncated real Hilbert space.
pub fn min_eigenvalue(
    u: &SpectralField,
    params: &RegularizedHamiltonianParams,
    method: EigenMethod,
) -> Result<HessianReport> {
    let op = HessianOperator::new(u, params);
    min_eigenvalue_of(&op, method)
}

pub fn min_eigenvalue_of(op: &HessianOperator, method: EigenMethod) -> Result<HessianReport> {
    let space = op.space().clone();
    let dim = space.real_dim();
    let apply = |x: &[f64]| op.apply_real(x);
    match method {
        EigenMethod::Dense => {
            if dim > DENSE_MAX_DIM {
                return Err(invalid(format!("dense eigensolve limited to dimension {DENSE_MAX_DIM}, got {dim}")));
            }
            Ok(pair_to_report(&space, dense_min(&apply, dim), method))
        }
        EigenMethod::Iterative => {
            // Start from the lowest free mode plus a little of everything.
            let start: Vec<f64> = (0..dim).map(|i| if i < 2 * space.dim() { 1.0 / (1.0 + i as f64) } else { 0.0 }).collect();
            let pair = lanczos_min(&apply, &start, 60.min(dim), 400, 1e-9);
            Ok(pair_to_report(&space, pair, method))
        }
    }
}

/// `2/λ` when `λ > 0`; `None` when the criterion does not apply.
pub fn bakry_emery_bound(lambda: f64) -> Option<f64> {
    (lambda > 0.0).then(|| 2.0 / lambda)
}

/// `Λ_* = -min_{m ≥ 0} [(m - K)_+^7 - C(1 + m)^4]`.
pub fn lambda_star(k: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) || !(k >= 0.0) {
        return Err(invalid(format!("lambda_star needs C > 0 and K >= 0, got C = {c}, K = {k}")));
    }
    let f = |m: f64| (m - k).max(0.0).powi(7) - c * (1.0 + m).powi(4);
    let df = |m: f64| 7.0 * (m - k).max(0.0).powi(6) - 4.0 * c * (1.0 + m).powi(3);
    // Beyond a point where f > 0 and f' > 0, f keeps increasing.
    let mut width = 1.0;
    while !(f(k + width) > 0.0 && df(k + width) > 0.0) {
        width *= 2.0;
    }
    let hi = k + width;
    let steps = 20_000;
    let h = hi / steps as f64;
    let (mut best_i, mut best) = (0usize, f(0.0));
    for i in 1..=steps {
        let v = f(i as f64 * h);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    // Golden-section refinement on the bracketing cells.
    let (mut a, mut b) = ((best_i.saturating_sub(1)) as f64 * h, ((best_i + 1).min(steps)) as f64 * h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    Ok(-best.min(f1).min(f2).min(f(k)))
}

/// Search settings for [`sobolev_chain_constant_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainSearch {
    /// Coefficient `a` of the `a‖w‖²_{H¹}` allowance.
    pub allowance: f64,
    pub n_random: usize,
    pub n_ascent: usize,
    pub ascent_steps: usize,
    pub seed: u64,
}

impl Default for ChainSearch {
    fn default() -> Self {
        Self { allowance: 0.5, n_random: 64, n_ascent: 8, ascent_steps: 60, seed: 0x5eed }
    }
}

#[derive(Clone, Debug)]
pub struct ChainConstant {
    pub c: f64,
    /// The field attaining the supremum over the battery.
    pub witness: SpectralField,
}

/// Largest eigenpair of `(p-1)|u|^{p-2} - a(1 - Δ)` on the truncated space.
fn chain_top_pair(u: &SpectralField, p: f64, allowance: f64) -> (f64, SpectralField) {
    let space = u.space().clone();
    let weight: Vec<f64> = u.grid_values().iter().map(|v| (p - 1.0) * v.norm_sqr().powf(0.5 * (p - 2.0))).collect();
    let neg = |x: &[f64]| {
        let w = SpectralField::from_real_vec(&space, x).expect("real dimension matches");
        let g: Vec<Complex64> = w.grid_values().iter().zip(&weight).map(|(v, a)| v * *a).collect();
        let mw = space.analyze(&g);
        let out: Vec<Complex64> = w
            .coeffs()
            .iter()
            .zip(&mw)
            .enumerate()
            .map(|(i, (c, m))| c * (allowance * bracket_sq(space.frequency_at(i))) - m)
            .collect();
        SpectralField::from_coeffs(&space, out).expect("same dimension").to_real_vec()
    };
    let dim = space.real_dim();
    let pair = if dim <= DENSE_MAX_DIM {
        dense_min(&neg, dim)
    } else {
        let start: Vec<f64> = (0..dim).map(|i| 1.0 / (1.0 + i as f64)).collect();
        lanczos_min(&neg, &start, 60.min(dim), 200, 1e-9)
    };
    (-pair.value, SpectralField::from_real_vec(&space, &pair.vector).expect("real dimension matches"))
}

/// Smallest `C` for which the chain inequality holds at this `u`:
/// `max(0, λ_max((p-1)|u|^{p-2} - a(1-Δ))) / (1 + ‖u‖²)⁴`.
pub fn chain_ratio(u: &SpectralField, p: f64, allowance: f64) -> f64 {
    chain_top_pair(u, p, allowance).0.max(0.0) / (1.0 + u.mass()).powi(4)
}

/// Whether `(p-1)∫|u|^{p-2}|w|² ≤ C(1+‖u‖²)⁴‖w‖² + a‖w‖²_{H¹}`, up to a relative `1e-12`.
pub fn chain_inequality_holds(u: &SpectralField, w: &SpectralField, p: f64, c: f64, allowance: f64) -> bool {
    let lhs = (p - 1.0) * {
        let wv = w.grid_values();
        let uv = u.grid_values();
        uv.iter().zip(&wv).map(|(u, w)| u.norm_sqr().powf(0.5 * (p - 2.0)) * w.norm_sqr()).sum::<f64>() / wv.len() as f64
    };
    let s = w.sobolev_norms();
    let rhs = c * (1.0 + u.mass()).powi(4) * s.l2_sq + allowance * s.h1_sq;
    lhs <= rhs * (1.0 + 1e-12) + 1e-300
}

/// Gradient ascent of [`chain_ratio`] in `u` with backtracking.
fn chain_ascent(mut u: SpectralField, p: f64, allowance: f64, steps: usize) -> (f64, SpectralField) {
    let space = u.space().clone();
    let (mut lam, mut v) = chain_top_pair(&u, p, allowance);
    let mut f = lam.max(0.0) / (1.0 + u.mass()).powi(4);
    let mut step = 0.1;
    for _ in 0..steps {
        if lam <= 0.0 || p == 2.0 {
            break;
        }
        let uv = u.grid_values();
        let vv = v.grid_values();
        let g: Vec<Complex64> = uv
            .iter()
            .zip(&vv)
            .map(|(u, v)| u * ((p - 1.0) * (p - 2.0) * (u.norm_sqr() + DELTA_REG * DELTA_REG).powf(0.5 * (p - 4.0)) * v.norm_sqr()))
            .collect();
        let one_m = 1.0 + u.mass();
        let mut grad = SpectralField::from_coeffs(&space, space.analyze(&g)).expect("same dimension");
        grad.scale(1.0 / one_m.powi(4));
        grad.axpy(-8.0 * lam / one_m.powi(5), &u);
        let gn = grad.mass().sqrt();
        if gn < 1e-12 {
            break;
        }
        let mut improved = false;
        while step > 1e-8 {
            let mut trial = u.clone();
            trial.axpy(step / gn, &grad);
            let (l2, v2) = chain_top_pair(&trial, p, allowance);
            let f2 = l2.max(0.0) / (1.0 + trial.mass()).powi(4);
            if f2 > f {
                u = trial;
                lam = l2;
                v = v2;
                f = f2;
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (f, u)
}

/// Searched constant of the Sobolev–Young chain with the default `½‖w‖²_{H¹}` allowance.
pub fn sobolev_chain_constant(space: &SpectralSpace, p: f64) -> Result<f64> {
    Ok(sobolev_chain_constant_with(space, p, &ChainSearch::default())?.c)
}

/// Supremum of [`chain_ratio`] over a battery of zero, constant, bump and
/// Gaussian fields at several amplitudes, each refined by gradient ascent.
pub fn sobolev_chain_constant_with(space: &SpectralSpace, p: f64, search: &ChainSearch) -> Result<ChainConstant> {
    if !(2.0..=4.0).contains(&p) {
        return Err(invalid(format!("chain constant needs 2 <= p <= 4, got {p}")));
    }
    if !(search.allowance > 0.0) {
        return Err(invalid("allowance must be positive"));
    }
    let a = search.allowance;
    let mut battery = vec![SpectralField::zeros(space)];
    for amp in [0.25, 0.5, 1.0, 1.5, 2.0, 3.0] {
        battery.push(SpectralField::constant(space, Complex64::new(amp, 0.0)));
    }
    let nodes = space.nodes();
    for width in [0.3, 0.6, 1.2] {
        let bump: Vec<Complex64> = nodes
            .iter()
            .map(|x| {
                let d = if *x > std::f64::consts::PI { x - 2.0 * std::f64::consts::PI } else { *x };
                Complex64::new((-(d / width).powi(2)).exp(), 0.0)
            })
            .collect();
        let bump = SpectralField::from_grid(space, &bump);
        for amp in [0.5, 1.0, 2.0] {
            battery.push(&bump * (amp / bump.mass().sqrt()));
        }
    }
    let stream = crate::rng::RngStream::new(search.seed, 0xc4a1);
    for k in 0..search.n_random {
        let amp = [0.5, 1.0, 1.5, 2.5][k % 4];
        battery.push(&crate::measures::sample_mu(space, &mut stream.substream(k as u64)) * amp);
    }
    let mut scored: Vec<(f64, SpectralField)> = battery.into_iter().map(|u| (chain_ratio(&u, p, a), u)).collect();
    scored.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut best = scored[0].clone();
    for (_, u) in scored.into_iter().take(search.n_ascent) {
        let (f, w) = chain_ascent(u, p, a, search.ascent_steps);
        if f > best.0 {
            best = (f, w);
        }
    }
    Ok(ChainConstant { c: best.0, witness: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::sample_mu;
    use crate::rng::RngStream;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn params(p: f64, lambda: f64, r: f64) -> RegularizedHamiltonianParams {
        RegularizedHamiltonianParams { p, k: 1.0, lambda, r }
    }

    #[test]
    fn gradient_vanishes_at_zero() {
        let s = SpectralSpace::new(4);
        for p in [2.5, 3.0, 4.0, 5.0] {
            let g = grad_h(&SpectralField::zeros(&s), &params(p, 0.7, 1.0));
            assert_eq!(g.mass(), 0.0);
        }
    }

    #[test]
    fn gradient_of_constant_field() {
        let s = SpectralSpace::new(3);
        let z = c(0.3, -0.5);
        let pr = params(4.0, 0.4, 1.0);
        let g = grad_h(&SpectralField::constant(&s, z), &pr);
        let expected = z * (1.0 + 2.0 * 0.4) - z * z.norm_sqr();
        assert!((g.coeff(0) - expected).norm() < 1e-14);
        assert!(g.coeff(1).norm() < 1e-14);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let s = SpectralSpace::new(5);
        let stream = RngStream::new(1, 2);
        for (k, p) in [2.0, 3.0, 4.0, 5.0].into_iter().enumerate() {
            let pr = RegularizedHamiltonianParams { p, k: 1.0, lambda: 0.3, r: 2.0 };
            let u = sample_mu(&s, &mut stream.substream(k as u64));
            let w = sample_mu(&s, &mut stream.substream(100 + k as u64));
            let eps = 1e-5;
            let fd = (regularized_hamiltonian(&(&u + &(&w * eps)), &pr)
                - regularized_hamiltonian(&(&u - &(&w * eps)), &pr))
                / (2.0 * eps);
            let exact = grad_h(&u, &pr).real_inner(&w).unwrap();
            assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "p = {p}: {fd} vs {exact}");
        }
    }

    #[test]
    fn hessian_at_zero_is_free_operator() {
        let s = SpectralSpace::new(4);
        let w = sample_mu(&s, &mut RngStream::new(3, 3).rng());
        let pr = params(4.0, 0.6, 1.0);
        let hw = hessian_apply_exact(&SpectralField::zeros(&s), &w, &pr).unwrap();
        let form = hw.real_inner(&w).unwrap();
        let n = w.sobolev_norms();
        assert!((form - (2.0 * 0.6 * n.l2_sq + n.h1_sq)).abs() < 1e-12);
        let maj = hessian_form_majorant(&SpectralField::zeros(&s), &w, &pr).unwrap();
        assert!((maj - form).abs() < 1e-12);
    }

    #[test]
    fn hessian_of_constant_field_on_pure_mode() {
        // Oracle: ∫ (Re(c̄ e^{inx}))² = |c|²/2, so the exact form is
        // 2Λ + <n>² - |c|² - 2·|c|²/2 and the majorant 2Λ + <n>² - 3|c|².
        let s = SpectralSpace::new(4);
        let z = c(0.4, 0.3);
        let u = SpectralField::constant(&s, z);
        let pr = params(4.0, 0.5, 1.0);
        let op = HessianOperator::new(&u, &pr);
        for n in [1i64, -2, 3] {
            let w = SpectralField::from_modes(&s, &[(n, c(1.0, 0.0))]).unwrap();
            let b2 = bracket_sq(n);
            assert!((op.form(&w) - (1.0 + b2 - 2.0 * z.norm_sqr())).abs() < 1e-12);
            assert!((op.majorant_form(&w) - (1.0 + b2 - 3.0 * z.norm_sqr())).abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_is_self_adjoint() {
        let s = SpectralSpace::new(6);
        let stream = RngStream::new(5, 5);
        for (k, p) in [2.0, 2.5, 3.0, 4.0, 5.5].into_iter().enumerate() {
            let k = k as u64;
            let pr = RegularizedHamiltonianParams { p, k: 0.5, lambda: 0.2, r: 1.0 };
            let u = sample_mu(&s, &mut stream.substream(3 * k));
            let w1 = sample_mu(&s, &mut stream.substream(3 * k + 1));
            let w2 = sample_mu(&s, &mut stream.substream(3 * k + 2));
            let op = HessianOperator::new(&u, &pr);
            let a = op.apply(&w1).real_inner(&w2).unwrap();
            let b = w1.real_inner(&op.apply(&w2)).unwrap();
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn majorant_dominates_exact_focusing_form() {
        let s = SpectralSpace::new(5);
        let stream = RngStream::new(8, 1);
        for k in 0..2000u64 {
            let p = 2.0 + 4.0 * (k % 97) as f64 / 97.0;
            let pr = params(p, 0.0, 0.0);
            let u = sample_mu(&s, &mut stream.substream(2 * k));
            let w = sample_mu(&s, &mut stream.substream(2 * k + 1));
            let op = HessianOperator::new(&u, &pr);
            let exact = op.focusing_form(&w);
            let maj = op.focusing_majorant(&w);
            assert!(exact <= maj * (1.0 + 1e-10) + 1e-300, "p = {p}");
        }
    }

    #[test]
    fn eigen_examples() {
        let s1 = SpectralSpace::new(1);
        let r = min_eigenvalue(&SpectralField::zeros(&s1), &params(4.0, 1.0, 1.0), EigenMethod::Dense).unwrap();
        assert!((r.min_eigenvalue - 3.0).abs() < 1e-12);
        assert!(r.residual <= 1e-8 * r.min_eigenvalue.abs().max(1.0));
        for n in [0, 3, 9] {
            let s = SpectralSpace::new(n);
            let r = min_eigenvalue(&SpectralField::zeros(&s), &params(4.0, 0.0, 1.0), EigenMethod::Dense).unwrap();
            assert!((r.min_eigenvalue - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_and_iterative_agree() {
        let s = SpectralSpace::new(8);
        let stream = RngStream::new(12, 0);
        for k in 0..5 {
            let u = &sample_mu(&s, &mut stream.substream(k)) * 1.5;
            let pr = params(4.0, 0.1, 1.0);
            let d = min_eigenvalue(&u, &pr, EigenMethod::Dense).unwrap();
            let i = min_eigenvalue(&u, &pr, EigenMethod::Iterative).unwrap();
            assert!((d.min_eigenvalue - i.min_eigenvalue).abs() < 1e-6, "{} vs {}", d.min_eigenvalue, i.min_eigenvalue);
            let resid = HessianOperator::new(&u, &pr).apply(&d.attaining_direction);
            let mut r = resid.clone();
            r.axpy(-d.min_eigenvalue, &d.attaining_direction);
            assert!(r.mass().sqrt() <= d.residual * (1.0 + 1e-9) + 1e-15);
            assert!(d.residual <= 1e-8 * d.min_eigenvalue.abs().max(1.0));
        }
    }

    #[test]
    fn bakry_emery_examples() {
        assert_eq!(bakry_emery_bound(1.0), Some(2.0));
        assert_eq!(bakry_emery_bound(2.0), Some(1.0));
        assert_eq!(bakry_emery_bound(0.0), None);
        assert_eq!(bakry_emery_bound(-3.0), None);
    }

    #[test]
    fn lambda_star_behaviour() {
        // Oracle: a fine grid on [0, 10] plus the known location of the kink.
        let oracle = |k: f64, c: f64| {
            let f = |m: f64| (m - k).max(0.0).powi(7) - c * (1.0 + m).powi(4);
            -(0..=2_000_000).map(|i| f(i as f64 * 5e-6)).fold(f64::INFINITY, f64::min)
        };
        let ls = lambda_star(1.0, 1.0).unwrap();
        assert!(ls > 0.0);
        assert!((ls - oracle(1.0, 1.0)).abs() < 1e-6 * ls, "{ls} vs {}", oracle(1.0, 1.0));
        assert!(lambda_star(1.0, 1e-9).unwrap() < 1e-6);
        let mut prev = 0.0;
        for c in [0.01, 0.1, 1.0, 3.0, 10.0] {
            let v = lambda_star(1.0, c).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = 0.0;
        for k in [0.0, 0.5, 1.0, 2.0] {
            let v = lambda_star(k, 1.0).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(lambda_star(1.0, 0.0).is_err());
    }

    #[test]
    fn chain_constant_p2_is_below_one() {
        let s = SpectralSpace::new(4);
        let c = sobolev_chain_constant(&s, 2.0).unwrap();
        assert!((c - 0.5).abs() < 1e-12, "{c}");
        assert!(c <= 1.0);
        assert!(sobolev_chain_constant(&s, 5.0).is_err());
    }

    #[test]
    fn chain_constant_holds_on_random_pairs() {
        let s = SpectralSpace::new(6);
        for p in [3.0, 4.0] {
            let c = sobolev_chain_constant(&s, p).unwrap();
            assert!(c > 0.0);
            let stream = RngStream::new(99, p as u64);
            for k in 0..1000u64 {
                let amp = 0.2 + 3.0 * (k % 10) as f64 / 10.0;
                let u = &sample_mu(&s, &mut stream.substream(2 * k)) * amp;
                let w = sample_mu(&s, &mut stream.substream(2 * k + 1));
                assert!(chain_inequality_holds(&u, &w, p, c, 0.5), "p = {p}, k = {k}");
            }
        }
    }

    #[test]
    fn chain_constant_shrinks_with_allowance() {
        let s = SpectralSpace::new(5);
        let half = sobolev_chain_constant_with(&s, 4.0, &ChainSearch::default()).unwrap();
        let full = sobolev_chain_constant_with(&s, 4.0, &ChainSearch { allowance: 1.0, ..ChainSearch::default() }).unwrap();
        assert!(full.c <= half.c, "{} > {}", full.c, half.c);
        assert!((chain_ratio(&half.witness, 4.0, 0.5) - half.c).abs() < 1e-12);
    }

    #[test]
    fn hessian_matches_second_differences() {
        let s = SpectralSpace::new(5);
        let stream = RngStream::new(21, 4);
        let mut checked = 0;
        for k in 0..40u64 {
            let p = [2.5, 3.0, 4.0, 5.0][(k % 4) as usize];
            let pr = RegularizedHamiltonianParams { p, k: 2.0, lambda: 0.3, r: 1.5 };
            let u = &sample_mu(&s, &mut stream.substream(2 * k)) * (0.5 + (k % 5) as f64 * 0.3);
            if (u.mass() - pr.k).abs() < 0.05 {
                continue;
            }
            let w = sample_mu(&s, &mut stream.substream(2 * k + 1));
            let eps = 1e-4;
            let fd = (regularized_hamiltonian(&(&u + &(&w * eps)), &pr) - 2.0 * regularized_hamiltonian(&u, &pr)
                + regularized_hamiltonian(&(&u - &(&w * eps)), &pr))
                / (eps * eps);
            let form = HessianOperator::new(&u, &pr).form(&w);
            assert!((fd - form).abs() <= 1e-4 * (1.0 + form.abs()), "p = {p}: {fd} vs {form}");
            checked += 1;
        }
        assert!(checked > 30);
    }
}
