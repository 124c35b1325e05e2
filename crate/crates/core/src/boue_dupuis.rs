//! Time-discretized Boué–Dupuis variational problem
//!
//! `log E[e^{V(Y_1)}] = sup_Θ E[V(Y_1 + Θ(1)) - ∫₀¹‖Θ̇‖²_{H¹} dt]`
//!
//! with `Y_t = ⟨∇⟩^{-1} W_t` and `E|Ŵ_t(n)|² = t`. The drift cost carries no
//! factor ½ because each complex Brownian coordinate has real and imaginary
//! parts of variance `t/2`. On a grid of `T` steps the cost is
//! `(1/T) Σ_k ‖θ_k‖²_{H¹}` with `Θ(t_{k+1}) = Θ(t_k) + θ_k / T`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mc::{self, map_chunks, mean_var, McEstimate};
use crate::measures::{log_weight_soft, GibbsParams};
use crate::rng::{complex_gaussian, RngStream};
use crate::spectral::{bracket_sq, japanese_bracket, SpectralField, SpectralSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    steps: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { steps: 64 }
    }
}

impl TimeGrid {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("time grid needs at least one step"));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| k as f64 / self.steps as f64).collect()
    }
}

/// Increments `Ŷ_{t_{k+1}}(n) - Ŷ_{t_k}(n)`, one row per step.
fn increments<R: Rng + ?Sized>(space: &SpectralSpace, grid: TimeGrid, rng: &mut R) -> Vec<Vec<Complex64>> {
    let scale: Vec<f64> = space.frequencies().map(|n| grid.dt().sqrt() / japanese_bracket(n)).collect();
    (0..grid.steps).map(|_| scale.iter().map(|s| complex_gaussian(rng) * *s).collect()).collect()
}

/// `Y_{t_k}` for `k = 0..=T`, starting from `Y_0 = 0`.
pub fn simulate_y<R: Rng + ?Sized>(grid: TimeGrid, space: &SpectralSpace, rng: &mut R) -> Vec<SpectralField> {
    let mut y = vec![Complex64::new(0.0, 0.0); space.dim()];
    let mut path = vec![SpectralField::zeros(space)];
    for inc in increments(space, grid, rng) {
        for (a, b) in y.iter_mut().zip(&inc) {
            *a += b;
        }
        path.push(SpectralField::from_coeffs(space, y.clone()).expect("same dimension"));
    }
    path
}

/// A potential `V` on the truncated field space.
pub trait Potential: Send + Sync {
    fn value(&self, u: &SpectralField) -> f64;

    /// The real-structure gradient, when `V` is differentiable.
    fn gradient(&self, _u: &SpectralField) -> Option<SpectralField> {
        None
    }
}

pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn value(&self, _u: &SpectralField) -> f64 {
        0.0
    }

    fn gradient(&self, u: &SpectralField) -> Option<SpectralField> {
        Some(SpectralField::zeros(u.space()))
    }
}

/// `V(u) = a Re û(0)`.
pub struct LinearPotential {
    pub a: f64,
}

impl Potential for LinearPotential {
    fn value(&self, u: &SpectralField) -> f64 {
        self.a * u.coeff(0).re
    }

    fn gradient(&self, u: &SpectralField) -> Option<SpectralField> {
        Some(SpectralField::from_modes(u.space(), &[(0, Complex64::new(self.a, 0.0))]).expect("mode 0 exists"))
    }
}

/// `(1/p)∫|u+φ|^p` inside `{‖u+φ‖² ≤ K}`, `-L` outside.
pub struct SoftCutoffPotential {
    pub phi: SpectralField,
    pub params: GibbsParams,
}

impl Potential for SoftCutoffPotential {
    fn value(&self, u: &SpectralField) -> f64 {
        log_weight_soft(u, &self.phi, &self.params)
    }
}

/// `(1/p)∫|u+φ|^p - R(‖u+φ‖² - K)_+^σ`.
pub struct SmoothedPotential {
    pub phi: SpectralField,
    pub params: GibbsParams,
}

impl Potential for SmoothedPotential {
    fn value(&self, u: &SpectralField) -> f64 {
        crate::measures::log_weight_smoothed(u, &self.phi, &self.params)
    }

    fn gradient(&self, u: &SpectralField) -> Option<SpectralField> {
        let v = u + &self.phi;
        let p = self.params.p;
        let g: Vec<Complex64> = v.grid_values().iter().map(|z| z * z.norm_sqr().powf(0.5 * (p - 2.0))).collect();
        let mut grad = SpectralField::from_coeffs(v.space(), v.space().analyze(&g)).expect("same dimension");
        let excess = (v.mass() - self.params.k).max(0.0);
        if excess > 0.0 {
            let s = self.params.sigma;
            grad.axpy(-2.0 * self.params.r * s * excess.powf(s - 1.0), &v);
        }
        Some(grad)
    }
}

/// Wraps a closure, with an optional gradient closure.
pub struct FnPotential<F, G = fn(&SpectralField) -> SpectralField> {
    value: F,
    gradient: Option<G>,
}

impl<F> FnPotential<F> {
    pub fn new(value: F) -> Self {
        Self { value, gradient: None }
    }
}

impl<F, G> FnPotential<F, G> {
    pub fn with_gradient(value: F, gradient: G) -> Self {
        Self { value, gradient: Some(gradient) }
    }
}

impl<F, G> Potential for FnPotential<F, G>
where
    F: Fn(&SpectralField) -> f64 + Send + Sync,
    G: Fn(&SpectralField) -> SpectralField + Send + Sync,
{
    fn value(&self, u: &SpectralField) -> f64 {
        (self.value)(u)
    }

    fn gradient(&self, u: &SpectralField) -> Option<SpectralField> {
        self.gradient.as_ref().map(|g| g(u))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftClass {
    DeterministicConstant,
    DeterministicTimeDependent,
    LinearFeedback,
}

/// A drift on the time grid, with `Θ(0) = 0`.
///
/// `theta` holds one row for the constant class and `T` rows otherwise; for
/// linear feedback the rows are the offsets `b_k` and `gain` the per-mode
/// factors `A_k` in `θ_k = A_k (Y_{t_k} + Θ(t_k)) + b_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftPath {
    class: DriftClass,
    space: SpectralSpace,
    grid: TimeGrid,
    theta: Vec<Vec<Complex64>>,
    gain: Vec<Vec<Complex64>>,
}

struct Rollout {
    endpoint: SpectralField,
    cost: f64,
    /// `Y_{t_k} + Θ(t_k)` and `θ_k` per step, kept for feedback gradients.
    states: Vec<Vec<Complex64>>,
    thetas: Vec<Vec<Complex64>>,
}

impl DriftPath {
    pub fn zeros(class: DriftClass, space: &SpectralSpace, grid: TimeGrid) -> Self {
        let zero = vec![Complex64::new(0.0, 0.0); space.dim()];
        let rows = if class == DriftClass::DeterministicConstant { 1 } else { grid.steps };
        let gain = if class == DriftClass::LinearFeedback { vec![zero.clone(); grid.steps] } else { Vec::new() };
        Self { class, space: space.clone(), grid, theta: vec![zero; rows], gain }
    }

    /// `Θ(t) = tθ`.
    pub fn constant(theta: &SpectralField, grid: TimeGrid) -> Self {
        Self {
            class: DriftClass::DeterministicConstant,
            space: theta.space().clone(),
            grid,
            theta: vec![theta.coeffs().to_vec()],
            gain: Vec::new(),
        }
    }

    pub fn time_dependent(thetas: &[SpectralField]) -> Result<Self> {
        let grid = TimeGrid::new(thetas.len())?;
        let space = thetas[0].space().clone();
        for t in thetas {
            space.check_same(t.space())?;
        }
        Ok(Self {
            class: DriftClass::DeterministicTimeDependent,
            space,
            grid,
            theta: thetas.iter().map(|t| t.coeffs().to_vec()).collect(),
            gain: Vec::new(),
        })
    }

    pub fn linear_feedback(gains: &[Vec<Complex64>], offsets: &[SpectralField]) -> Result<Self> {
        let grid = TimeGrid::new(offsets.len())?;
        let space = offsets[0].space().clone();
        if gains.len() != offsets.len() || gains.iter().any(|g| g.len() != space.dim()) {
            return Err(invalid("one gain row per step, one gain per mode"));
        }
        Ok(Self {
            class: DriftClass::LinearFeedback,
            space,
            grid,
            theta: offsets.iter().map(|t| t.coeffs().to_vec()).collect(),
            gain: gains.to_vec(),
        })
    }

    pub fn class(&self) -> DriftClass {
        self.class
    }

    pub fn space(&self) -> &SpectralSpace {
        &self.space
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn is_deterministic(&self) -> bool {
        self.class != DriftClass::LinearFeedback
    }

    /// `Θ(1)` for deterministic drifts.
    pub fn endpoint(&self) -> Option<SpectralField> {
        if !self.is_deterministic() {
            return None;
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); self.space.dim()];
        for row in &self.theta {
            for (a, b) in acc.iter_mut().zip(row) {
                *a += b;
            }
        }
        let w = 1.0 / self.theta.len() as f64;
        Some(SpectralField::from_coeffs(&self.space, acc.into_iter().map(|c| c * w).collect()).expect("same dimension"))
    }

    fn row_cost(&self, row: &[Complex64]) -> f64 {
        row.iter().enumerate().map(|(i, c)| bracket_sq(self.space.frequency_at(i)) * c.norm_sqr()).sum()
    }

    /// `∫‖Θ̇‖²_{H¹}` for deterministic drifts.
    pub fn cost(&self) -> Option<f64> {
        self.is_deterministic()
            .then(|| self.theta.iter().map(|r| self.row_cost(r)).sum::<f64>() / self.theta.len() as f64)
    }

    pub fn n_params(&self) -> usize {
        2 * self.space.dim() * (self.theta.len() + self.gain.len())
    }

    /// Real parameters: offsets first, then gains, `[Re, Im]` per mode.
    pub fn to_params(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.gain).flat_map(|r| r.iter().flat_map(|c| [c.re, c.im])).collect()
    }

    pub fn set_params(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_params() {
            return Err(invalid(format!("expected {} parameters, got {}", self.n_params(), x.len())));
        }
        let mut it = x.chunks_exact(2).map(|c| Complex64::new(c[0], c[1]));
        for row in self.theta.iter_mut().chain(self.gain.iter_mut()) {
            for c in row.iter_mut() {
                *c = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Diagonal step preconditioner matching the curvature of the cost.
    fn preconditioner(&self) -> Vec<f64> {
        let rows = self.theta.len() as f64;
        let theta_row: Vec<f64> = self
            .space
            .frequencies()
            .flat_map(|n| {
                let v = rows / (2.0 * bracket_sq(n));
                [v, v]
            })
            .collect();
        let gain_row = vec![0.5 * rows; 2 * self.space.dim()];
        let mut out = Vec::with_capacity(self.n_params());
        for _ in &self.theta {
            out.extend_from_slice(&theta_row);
        }
        for _ in &self.gain {
            out.extend_from_slice(&gain_row);
        }
        out
    }

    fn rollout(&self, incs: &[Vec<Complex64>], keep: bool) -> Rollout {
        let dim = self.space.dim();
        let steps = incs.len();
        let mut y = vec![Complex64::new(0.0, 0.0); dim];
        if self.is_deterministic() {
            for inc in incs {
                for (a, b) in y.iter_mut().zip(inc) {
                    *a += b;
                }
            }
            let mut x = self.endpoint().expect("deterministic");
            for (a, b) in x.coeffs_mut().iter_mut().zip(&y) {
                *a += b;
            }
            return Rollout { endpoint: x, cost: self.cost().expect("deterministic"), states: Vec::new(), thetas: Vec::new() };
        }
        let dt = 1.0 / steps as f64;
        let mut big_theta = vec![Complex64::new(0.0, 0.0); dim];
        let mut cost = 0.0;
        let (mut states, mut thetas) = (Vec::new(), Vec::new());
        for k in 0..steps {
            let z: Vec<Complex64> = y.iter().zip(&big_theta).map(|(a, b)| a + b).collect();
            let th: Vec<Complex64> = z.iter().zip(&self.gain[k]).zip(&self.theta[k]).map(|((z, a), b)| a * z + b).collect();
            cost += self.row_cost(&th) * dt;
            for i in 0..dim {
                big_theta[i] += th[i] * dt;
                y[i] += incs[k][i];
            }
            if keep {
                states.push(z);
                thetas.push(th);
            }
        }
        let x: Vec<Complex64> = y.iter().zip(&big_theta).map(|(a, b)| a + b).collect();
        Rollout { endpoint: SpectralField::from_coeffs(&self.space, x).expect("same dimension"), cost, states, thetas }
    }

    /// `X = Y_1 + Θ(1)` along one noise path, with its drift cost.
    pub fn endpoint_along(&self, path_rng: &mut impl Rng) -> (SpectralField, f64) {
        let incs = increments(&self.space, self.grid, path_rng);
        let r = self.rollout(&incs, false);
        (r.endpoint, r.cost)
    }
}

#[derive(Clone)]
pub struct BdObjective {
    pub potential: Arc<dyn Potential>,
    pub space: SpectralSpace,
    pub grid: TimeGrid,
    pub n_mc: usize,
}

impl BdObjective {
    pub fn new(potential: Arc<dyn Potential>, space: &SpectralSpace, grid: TimeGrid, n_mc: usize) -> Self {
        Self { potential, space: space.clone(), grid, n_mc }
    }
}

struct Evaluation {
    value: f64,
    std_error: f64,
    mean_cost: f64,
    gradient: Option<Vec<f64>>,
}

/// Objective on the panel `panel.substream(0..n)`, optionally with its pathwise gradient.
fn evaluate(drift: &DriftPath, obj: &BdObjective, panel: &RngStream, n: usize, want_grad: bool) -> Evaluation {
    let np = drift.n_params();
    let parts = map_chunks(n, |range| {
        let mut vals = Vec::with_capacity(range.len());
        let mut cost = 0.0;
        let mut grad = if want_grad { vec![0.0; np] } else { Vec::new() };
        for i in range {
            let incs = increments(&drift.space, drift.grid, &mut panel.substream(i as u64));
            let r = drift.rollout(&incs, want_grad && !drift.is_deterministic());
            let v = obj.potential.value(&r.endpoint);
            vals.push(v - r.cost);
            cost += r.cost;
            if want_grad {
                let gv = obj.potential.gradient(&r.endpoint).expect("gradient available");
                accumulate_gradient(drift, &r, gv.coeffs(), &mut grad);
            }
        }
        (vals, cost, grad)
    });
    let mut vals = Vec::with_capacity(n);
    let mut cost = 0.0;
    let mut grad = if want_grad { Some(vec![0.0; np]) } else { None };
    for (v, c, g) in parts {
        vals.extend(v);
        cost += c;
        if let Some(total) = grad.as_mut() {
            for (a, b) in total.iter_mut().zip(&g) {
                *a += b;
            }
        }
    }
    let (value, var) = mean_var(&vals);
    if let Some(g) = grad.as_mut() {
        for x in g.iter_mut() {
            *x /= n as f64;
        }
        if drift.is_deterministic() {
            add_deterministic_cost_gradient(drift, g);
        }
    }
    Evaluation { value, std_error: (var / n as f64).sqrt(), mean_cost: cost / n as f64, gradient: grad }
}

fn push_complex(g: &mut [f64], slot: usize, c: Complex64) {
    g[2 * slot] += c.re;
    g[2 * slot + 1] += c.im;
}

/// Adds one sample's gradient of `V(X) - cost` (cost included only for feedback).
fn accumulate_gradient(drift: &DriftPath, r: &Rollout, grad_v: &[Complex64], grad: &mut [f64]) {
    let dim = drift.space.dim();
    let rows = drift.theta.len();
    if drift.is_deterministic() {
        // dX/dθ_k = 1/rows for every row.
        let w = 1.0 / rows as f64;
        for k in 0..rows {
            for i in 0..dim {
                push_complex(grad, k * dim + i, grad_v[i] * w);
            }
        }
        return;
    }
    let steps = rows;
    let dt = 1.0 / steps as f64;
    let mut lambda = grad_v.to_vec();
    for k in (0..steps).rev() {
        for i in 0..dim {
            let n = drift.space.frequency_at(i);
            let g_theta = lambda[i] * dt - r.thetas[k][i] * (2.0 * dt * bracket_sq(n));
            push_complex(grad, k * dim + i, g_theta);
            push_complex(grad, (steps + k) * dim + i, r.states[k][i].conj() * g_theta);
            lambda[i] += drift.gain[k][i].conj() * g_theta;
        }
    }
}

fn add_deterministic_cost_gradient(drift: &DriftPath, grad: &mut [f64]) {
    let dim = drift.space.dim();
    let rows = drift.theta.len() as f64;
    for (k, row) in drift.theta.iter().enumerate() {
        for (i, c) in row.iter().enumerate() {
            let n = drift.space.frequency_at(i);
            push_complex(grad, k * dim + i, -c * (2.0 * bracket_sq(n) / rows));
        }
    }
}

/// `E[V(Y_1 + Θ(1))] - E[∫‖Θ̇‖²_{H¹}]`.
pub fn bd_objective(drift: &DriftPath, obj: &BdObjective, stream: &RngStream) -> Result<McEstimate> {
    obj.space.check_same(drift.space())?;
    if obj.n_mc < 2 {
        return Err(invalid("need at least 2 samples"));
    }
    let e = evaluate(drift, obj, stream, obj.n_mc, false);
    Ok(McEstimate {
        value: e.value,
        std_error: e.std_error,
        ess: obj.n_mc as f64,
        n_samples: obj.n_mc,
        estimator: mc::Estimator::Importance,
    })
}

#[derive(Clone, Debug)]
pub struct OptConfig {
    pub epochs: usize,
    /// Initial step in preconditioned coordinates; 1 is a Newton step for the cost alone.
    pub step_size: f64,
    /// Perturbation size of the simultaneous-perturbation gradient used when `V` has no gradient.
    pub fd_width: f64,
    pub spsa_directions: usize,
    /// Samples for the final re-evaluation; defaults to `4 n_mc`.
    pub n_final: Option<usize>,
    pub init: Option<DriftPath>,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self { epochs: 40, step_size: 0.5, fd_width: 0.05, spsa_directions: 4, n_final: None, init: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch: usize,
    pub objective: f64,
    pub std_error: f64,
    pub cost: f64,
    pub step_size: f64,
}

#[derive(Clone, Debug)]
pub struct BdResult {
    pub drift: DriftPath,
    /// The best drift re-evaluated on a fresh noise panel.
    pub estimate: McEstimate,
    pub trace: Vec<TraceRecord>,
    /// Improvement over the last ten epochs plus two standard errors.
    pub epsilon_sq: f64,
}

fn check_finite(x: f64, epoch: usize, trace: &[TraceRecord]) -> Result<()> {
    if x.is_finite() {
        return Ok(());
    }
    let tail: Vec<String> = trace.iter().rev().take(5).map(|t| format!("{}:{}", t.epoch, t.objective)).collect();
    Err(Error::OptimizerFailure { epoch, reason: format!("objective {x}; recent trace {}", tail.join(", ")) })
}

/// Stochastic gradient ascent with common random numbers within each epoch.
///
/// A step is taken only if it does not lower the objective on the epoch's
/// noise panel; otherwise the step size halves.
pub fn bd_optimize(obj: &BdObjective, class: DriftClass, config: &OptConfig, stream: &RngStream) -> Result<BdResult> {
    let mut drift = match &config.init {
        Some(d) => {
            obj.space.check_same(d.space())?;
            d.clone()
        }
        None => DriftPath::zeros(class, &obj.space, obj.grid),
    };
    if obj.n_mc < 2 {
        return Err(invalid("need at least 2 samples"));
    }
    let pathwise = obj.potential.gradient(&SpectralField::zeros(&obj.space)).is_some();
    let precond = drift.preconditioner();
    let mut step = config.step_size;
    let mut params = drift.to_params();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let spsa_stream = stream.named("spsa");
    for epoch in 0..config.epochs {
        let panel = stream.child(epoch as u64);
        drift.set_params(&params)?;
        let here = evaluate(&drift, obj, &panel, obj.n_mc, pathwise);
        check_finite(here.value, epoch, &trace)?;
        let direction: Vec<f64> = if pathwise {
            here.gradient.as_ref().expect("requested").iter().zip(&precond).map(|(g, p)| g * p).collect()
        } else {
            let mut dir = vec![0.0; params.len()];
            let mut rng = spsa_stream.substream(epoch as u64);
            for _ in 0..config.spsa_directions.max(1) {
                let delta: Vec<f64> = precond
                    .iter()
                    .map(|p| if rng.random::<bool>() { p.sqrt() } else { -p.sqrt() })
                    .collect();
                let shifted = |sign: f64| -> Result<f64> {
                    let x: Vec<f64> = params.iter().zip(&delta).map(|(a, d)| a + sign * config.fd_width * d).collect();
                    let mut d = drift.clone();
                    d.set_params(&x)?;
                    Ok(evaluate(&d, obj, &panel, obj.n_mc, false).value)
                };
                let slope = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * config.fd_width);
                check_finite(slope, epoch, &trace)?;
                for (a, d) in dir.iter_mut().zip(&delta) {
                    *a += slope * d / config.spsa_directions.max(1) as f64;
                }
            }
            dir
        };
        let trial: Vec<f64> = params.iter().zip(&direction).map(|(a, d)| a + step * d).collect();
        let mut trial_drift = drift.clone();
        trial_drift.set_params(&trial)?;
        let there = evaluate(&trial_drift, obj, &panel, obj.n_mc, false);
        let (value, se, cost) = if there.value.is_finite() && there.value >= here.value {
            params = trial;
            step = (step * 1.25).min(1.0);
            (there.value, there.std_error, there.mean_cost)
        } else {
            step *= 0.5;
            (here.value, here.std_error, here.mean_cost)
        };
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, params.clone()));
        }
        trace.push(TraceRecord { epoch, objective: value, std_error: se, cost, step_size: step });
    }
    let (best_value, best_params) = best.unwrap_or_else(|| (f64::NEG_INFINITY, params.clone()));
    drift.set_params(&best_params)?;
    let n_final = config.n_final.unwrap_or(4 * obj.n_mc).max(2);
    let fin = evaluate(&drift, obj, &stream.named("final"), n_final, false);
    check_finite(fin.value, config.epochs, &trace)?;
    let estimate = McEstimate {
        value: fin.value,
        std_error: fin.std_error,
        ess: n_final as f64,
        n_samples: n_final,
        estimator: mc::Estimator::Importance,
    };
    let trailing = trace.len().checked_sub(11).map_or(f64::NEG_INFINITY, |i| trace[i].objective);
    let window = if trailing.is_finite() { (best_value - trailing).max(0.0) } else { best_value.abs() };
    Ok(BdResult { drift, estimate, trace, epsilon_sq: window + 2.0 * fin.std_error })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub lhs: McEstimate,
    pub rhs: McEstimate,
    pub bound: f64,
    pub holds: bool,
}

/// Compares the Gibbs expectation `E[F e^V]/E[e^V]` with `E[F(Y_1 + Θ(1))]`
/// against the bound `(1 + e/2) ε ‖F‖_∞`, allowing five joint standard errors.
pub fn epsilon_optimizer_transfer<F>(
    drift: &DriftPath,
    obj: &BdObjective,
    observable: F,
    f_sup: f64,
    epsilon: f64,
    stream: &RngStream,
) -> Result<TransferReport>
where
    F: Fn(&SpectralField) -> f64 + Sync,
{
    obj.space.check_same(drift.space())?;
    let potential = &obj.potential;
    let lhs = mc::estimate_reweighted(&obj.space, &observable, |u| potential.value(u), obj.n_mc, &stream.named("lhs"))?;
    let panel = stream.named("rhs");
    let vals: Vec<f64> = map_chunks(obj.n_mc, |range| {
        range
            .map(|i| {
                let (x, _) = drift.endpoint_along(&mut panel.substream(i as u64));
                observable(&x)
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let (value, var) = mean_var(&vals);
    let rhs = McEstimate {
        value,
        std_error: (var / obj.n_mc as f64).sqrt(),
        ess: obj.n_mc as f64,
        n_samples: obj.n_mc,
        estimator: mc::Estimator::Importance,
    };
    let bound = (1.0 + std::f64::consts::E / 2.0) * epsilon * f_sup;
    let holds = (lhs.value - rhs.value).abs() <= bound + 5.0 * lhs.joint_se(&rhs);
    Ok(TransferReport { lhs, rhs, bound, holds })
}
