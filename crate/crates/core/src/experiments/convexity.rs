//! Strong convexity of the regularized Hamiltonian on a battery of fields.

use num_complex::Complex64;
use serde::Serialize;

use super::{ExperimentReport, ScalingFamily};
use crate::error::{invalid, Result};
use crate::hessian::{
    bakry_emery_bound, chain_ratio, lambda_star, min_eigenvalue_of, sobolev_chain_constant_with, ChainSearch,
    EigenMethod, HessianOperator, RegularizedHamiltonianParams,
};
use crate::measures::sample_mu;
use crate::rng::RngStream;
use crate::spectral::{SpectralField, SpectralSpace};

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityConfig {
    pub p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub n_points: usize,
    pub n_adversarial: usize,
    pub descent_steps: usize,
    pub max_rounds: usize,
    pub oversampling: usize,
    #[serde(skip)]
    pub chain: ChainSearch,
}

impl Default for ConvexityConfig {
    fn default() -> Self {
        Self {
            p: 4.0,
            k: 1.0,
            r: 1.0,
            n: 8,
            n_points: 1000,
            n_adversarial: 8,
            descent_steps: 40,
            max_rounds: 3,
            oversampling: 4,
            chain: ChainSearch::default(),
        }
    }
}

const TOLERANCE: f64 = 1e-6;

fn battery(space: &SpectralSpace, k: f64, n_points: usize, stream: &RngStream) -> Result<Vec<SpectralField>> {
    let amps = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0];
    let mut out: Vec<SpectralField> =
        (0..n_points).map(|i| &sample_mu(space, &mut stream.substream(i as u64)) * amps[i % amps.len()]).collect();
    for a in amps {
        out.push(SpectralField::constant(space, Complex64::new(a, 0.0)));
    }
    let family = ScalingFamily::new(k)?;
    for m in [1, 2, 4] {
        let phi = family.field(m, space);
        for a in [0.5, 1.0, 1.5, 2.0, 3.0] {
            out.push(&phi * a);
        }
    }
    Ok(out)
}

fn min_eig(u: &SpectralField, params: &RegularizedHamiltonianParams) -> f64 {
    let op = HessianOperator::new(u, params);
    min_eigenvalue_of(&op, EigenMethod::auto(u.space())).expect("method fits dimension").min_eigenvalue
}

/// Descends `λ_min(Hess H(u))` in `u`, differentiating `<Hess H(u) v, v>` at
/// the current eigenvector by central differences along coordinates.
fn adversarial_descent(mut u: SpectralField, params: &RegularizedHamiltonianParams, steps: usize) -> (f64, SpectralField) {
    let space = u.space().clone();
    let mut step = 0.5;
    let mut report = min_eigenvalue_of(&HessianOperator::new(&u, params), EigenMethod::auto(&space)).expect("fits");
    for _ in 0..steps {
        let v = &report.attaining_direction;
        let x = u.to_real_vec();
        let h = 1e-6;
        let grad: Vec<f64> = (0..x.len())
            .map(|j| {
                let mut xp = x.clone();
                xp[j] += h;
                let mut xm = x.clone();
                xm[j] -= h;
                let up = SpectralField::from_real_vec(&space, &xp).expect("same dimension");
                let um = SpectralField::from_real_vec(&space, &xm).expect("same dimension");
                (HessianOperator::new(&up, params).form(v) - HessianOperator::new(&um, params).form(v)) / (2.0 * h)
            })
            .collect();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !(norm > 1e-12) {
            break;
        }
        let mut moved = false;
        while step > 1e-6 {
            let xt: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - step * g / norm).collect();
            let ut = SpectralField::from_real_vec(&space, &xt).expect("same dimension");
            let rt = min_eigenvalue_of(&HessianOperator::new(&ut, params), EigenMethod::auto(&space)).expect("fits");
            if rt.min_eigenvalue < report.min_eigenvalue {
                u = ut;
                report = rt;
                step *= 1.5;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (report.min_eigenvalue, u)
}

/// Searches the chain constant `C`, sets `Λ = (Λ_* + 1)/2`, and minimizes the
/// Hessian's smallest eigenvalue over a battery plus adversarial descent.
///
/// A violation enlarges `C` by the chain ratio at the violating fields and
/// starts another round.
pub fn convexity_scan(config: &ConvexityConfig, seed: u64) -> Result<ExperimentReport> {
    if !(2.0..=4.0).contains(&config.p) {
        return Err(invalid(format!("convexity scan needs 2 <= p <= 4, got {}", config.p)));
    }
    if !(config.r > 1.0 / 16.0) {
        return Err(invalid(format!("R must exceed 1/16, got {}", config.r)));
    }
    let root = RngStream::new(seed, 0).named("convexity-scan");
    let space = SpectralSpace::with_oversampling(config.n, config.oversampling)?;
    let mut report = ExperimentReport::new("convexity-scan", serde_json::to_value(config).expect("plain data"), seed);
    let chain = sobolev_chain_constant_with(&space, config.p, &ChainSearch { seed, ..config.chain })?;
    let mut c = chain.c.max(f64::MIN_POSITIVE);
    let fields = battery(&space, config.k, config.n_points, &root.named("battery"))?;
    let mut overall = f64::INFINITY;
    for round in 0..config.max_rounds.max(1) {
        let ls = lambda_star(config.k, c)?;
        let lambda = 0.5 * (ls + 1.0);
        let params = RegularizedHamiltonianParams { p: config.p, k: config.k, lambda, r: config.r };
        let mut scored: Vec<(f64, usize)> = fields.iter().enumerate().map(|(i, u)| (min_eig(u, &params), i)).collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let battery_min = scored[0].0;
        let mut adversarial_min = f64::INFINITY;
        let mut violators = Vec::new();
        for &(value, i) in scored.iter().take(config.n_adversarial) {
            let (v, u) = adversarial_descent(fields[i].clone(), &params, config.descent_steps);
            adversarial_min = adversarial_min.min(v);
            if value < 1.0 - TOLERANCE {
                violators.push(fields[i].clone());
            }
            if v < 1.0 - TOLERANCE {
                violators.push(u);
            }
        }
        let round_min = battery_min.min(adversarial_min);
        let pt = round as f64;
        report.push_exact("chain_constant", pt, c, 1);
        report.push_exact("lambda_star", pt, ls, 1);
        report.push_exact("Lambda", pt, lambda, 1);
        report.push_exact("min_eigenvalue_battery", pt, battery_min, fields.len());
        report.push_exact("min_eigenvalue_adversarial", pt, adversarial_min, config.n_adversarial);
        overall = round_min;
        if violators.is_empty() {
            break;
        }
        let enlarged = violators.iter().map(|u| chain_ratio(u, config.p, config.chain.allowance)).fold(c, f64::max);
        if enlarged <= c {
            break;
        }
        c = enlarged;
    }
    let ls_bound = bakry_emery_bound(overall).unwrap_or(f64::INFINITY);
    report.push_exact("min_eigenvalue", 0.0, overall, fields.len() + config.n_adversarial);
    report.push_exact("ls_bound", 0.0, ls_bound, 1);
    report.assert("min_eigenvalue_at_least_one", overall >= 1.0 - TOLERANCE, format!("min eigenvalue {overall}"));
    report.assert("ls_bound_at_most_two", ls_bound <= 2.0 + 1e-5, format!("LS bound {ls_bound}"));
    Ok(report)
}
