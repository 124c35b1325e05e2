//! Second derivative of the smoothed log-partition `V_R(φ) = log E_μ[e^{F(φ; u)}]`
//! with `F(φ; u) = (1/p)∫|u+φ|^p - R(‖u+φ‖² - K)_+^σ`.
//!
//! Two routes: central second differences of `V_R` on common samples, and
//! `E_ν[∇²F[w,w]] + Var_ν(∇F·w)` with `ν ∝ e^F dμ`. Both are compared with
//! `∫ E_{ρ_φ}[|u+φ|^{p-2}] |w|²` under the sharp-cutoff measure.

use num_complex::Complex64;
use serde::Serialize;

use super::ExperimentReport;
use crate::error::{invalid, Error, Result};
use crate::hessian::DELTA_REG;
use crate::mc::{map_chunks, mean_var, McEstimate, N_BATCHES};
use crate::measures::{log_weight_sharp, log_weight_smoothed, sample_mu, GibbsParams};
use crate::rng::RngStream;
use crate::spectral::SpectralField;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HessianVConfig {
    pub p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub sigma: f64,
    pub n_samples: usize,
    pub fd_eps: f64,
}

impl Default for HessianVConfig {
    fn default() -> Self {
        Self { p: 5.0, k: 1.0, r: 10.0, sigma: 5.0, n_samples: 200_000, fd_eps: 0.02 }
    }
}

impl HessianVConfig {
    fn gibbs(&self) -> GibbsParams {
        GibbsParams { p: self.p, k: self.k, r: self.r, sigma: self.sigma, ..GibbsParams::default() }
    }
}

/// Per-sample quantities.
#[derive(Clone, Copy)]
struct Sample {
    f_minus: f64,
    f0: f64,
    f_plus: f64,
    hess: f64,
    grad: f64,
    sharp: f64,
    lower: f64,
}

fn sample_terms(u: &SpectralField, phi: &SpectralField, w: &SpectralField, c: &HessianVConfig, g: &GibbsParams) -> Sample {
    let p = c.p;
    let v = u + phi;
    let vv = v.grid_values();
    let wv = w.grid_values();
    let len = vv.len() as f64;
    let (mut pw, mut cross, mut lin) = (0.0, 0.0, 0.0);
    for (a, b) in vv.iter().zip(&wv) {
        let s = a.norm_sqr();
        let re = (a.conj() * b).re;
        let pm2 = s.powf(0.5 * (p - 2.0));
        pw += pm2 * b.norm_sqr();
        let pm4 = if p >= 4.0 { s.powf(0.5 * (p - 4.0)) } else { (s + DELTA_REG * DELTA_REG).powf(0.5 * (p - 4.0)) };
        cross += (p - 2.0) * pm4 * re * re;
        lin += pm2 * re;
    }
    let (pw, cross, lin) = (pw / len, cross / len, lin / len);
    let m = v.mass();
    let e = (m - c.k).max(0.0);
    let vw = v.real_inner(w).expect("same space");
    let ww = w.mass();
    let s = c.sigma;
    let pen1 = if e > 0.0 { 2.0 * c.r * s * e.powf(s - 1.0) } else { 0.0 };
    let pen2 = if e > 0.0 { 4.0 * c.r * s * (s - 1.0) * e.powf(s - 2.0) } else { 0.0 };
    let shift = |t: f64| {
        let mut ph = phi.clone();
        ph.axpy(t, w);
        log_weight_smoothed(u, &ph, g)
    };
    let sharp = log_weight_sharp(u, phi, g);
    Sample {
        f_minus: shift(-c.fd_eps),
        f0: log_weight_smoothed(u, phi, g),
        f_plus: shift(c.fd_eps),
        hess: pw + cross - pen1 * ww - pen2 * vw * vw,
        grad: lin - pen1 * vw,
        sharp,
        lower: if sharp > f64::NEG_INFINITY { pw } else { 0.0 },
    }
}

fn log_mean_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    let n = xs.clone().count() as f64;
    m + (xs.map(|x| (x - m).exp()).sum::<f64>() / n).ln()
}

struct Routes {
    fd: f64,
    decomposition: f64,
    lower: f64,
    ess_nu: f64,
    ess_sharp: f64,
}

fn routes(samples: &[Sample], eps: f64) -> Result<Routes> {
    let vm = log_mean_exp(samples.iter().map(|s| s.f_minus));
    let v0 = log_mean_exp(samples.iter().map(|s| s.f0));
    let vp = log_mean_exp(samples.iter().map(|s| s.f_plus));
    let fd = (vp - 2.0 * v0 + vm) / (eps * eps);
    let m0 = samples.iter().map(|s| s.f0).fold(f64::NEG_INFINITY, f64::max);
    let (mut sw, mut sw2, mut sa, mut sb, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in samples {
        let w = (s.f0 - m0).exp();
        sw += w;
        sw2 += w * w;
        sa += w * s.hess;
        sb += w * s.grad;
        sbb += w * s.grad * s.grad;
    }
    let eb = sb / sw;
    let decomposition = sa / sw + (sbb / sw - eb * eb);
    let ms = samples.iter().map(|s| s.sharp).fold(f64::NEG_INFINITY, f64::max);
    if ms == f64::NEG_INFINITY {
        return Err(Error::DegenerateSample("no sample inside the mass cutoff".into()));
    }
    let (mut tw, mut tw2, mut tl) = (0.0, 0.0, 0.0);
    for s in samples {
        let w = (s.sharp - ms).exp();
        tw += w;
        tw2 += w * w;
        tl += w * s.lower;
    }
    Ok(Routes { fd, decomposition, lower: tl / tw, ess_nu: sw * sw / sw2, ess_sharp: tw * tw / tw2 })
}

/// Both routes to `∇²V_R(φ)[w, w]` and the candidate lower bounds, with
/// 32-batch-means standard errors.
pub fn hessian_of_v_check(
    phi: &SpectralField,
    w: &SpectralField,
    config: &HessianVConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    phi.real_inner(w)?;
    if config.n_samples < 2 * N_BATCHES {
        return Err(invalid(format!("need at least {} samples", 2 * N_BATCHES)));
    }
    if !(config.fd_eps > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let g = config.gibbs();
    g.validate()?;
    let space = phi.space();
    let stream = RngStream::new(seed, 0).named("hessian-of-v");
    let samples: Vec<Sample> = map_chunks(config.n_samples, |range| {
        range
            .map(|i| sample_terms(&sample_mu(space, &mut stream.substream(i as u64)), phi, w, config, &g))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let full = routes(&samples, config.fd_eps)?;
    let size = samples.len() / N_BATCHES;
    let batches: Vec<Routes> = samples.chunks_exact(size).take(N_BATCHES).map(|b| routes(b, config.fd_eps)).collect::<Result<_>>()?;
    let se = |get: fn(&Routes) -> f64| {
        let xs: Vec<f64> = batches.iter().map(get).collect();
        (mean_var(&xs).1 / N_BATCHES as f64).sqrt()
    };
    let n = samples.len();
    let est = |value: f64, std_error: f64, ess: f64| McEstimate {
        value,
        std_error,
        ess,
        n_samples: n,
        estimator: crate::mc::Estimator::Importance,
    };
    let fd = est(full.fd, se(|r| r.fd), full.ess_nu);
    let dec = est(full.decomposition, se(|r| r.decomposition), full.ess_nu);
    let lb1 = est(full.lower, se(|r| r.lower), full.ess_sharp);
    let lbp = est((config.p - 1.0) * full.lower, (config.p - 1.0) * lb1.std_error, full.ess_sharp);

    let mut report = ExperimentReport::new(
        "hessian-of-v",
        serde_json::json!({"config": config, "N": space.max_frequency(), "phi_mass": phi.mass(), "w_mass": w.mass()}),
        seed,
    );
    report.push_estimate("finite_difference", 0.0, &fd);
    report.push_estimate("decomposition", 0.0, &dec);
    report.push_estimate("lower_bound_const_1", 0.0, &lb1);
    report.push_estimate("lower_bound_const_p_minus_1", 0.0, &lbp);
    let reliable = full.ess_nu >= 100.0 && full.ess_sharp >= 100.0;
    report.check("reliable_ess", reliable, format!("ESS nu {:.1}, sharp {:.1}", full.ess_nu, full.ess_sharp));
    report.check(
        "routes_agree",
        fd.z_distance(&dec) <= 5.0,
        format!("|fd - decomposition| = {:.3} joint s.e.", fd.z_distance(&dec)),
    );
    for (name, e) in [("finite_difference", &fd), ("decomposition", &dec)] {
        report.check(
            &format!("{name}_above_const_1_bound"),
            e.value >= lb1.value - 5.0 * e.joint_se(&lb1),
            format!("{} vs {}", e.value, lb1.value),
        );
        report.check(
            &format!("{name}_above_const_p_minus_1_bound"),
            e.value >= lbp.value - 5.0 * e.joint_se(&lbp),
            format!("{} vs {}", e.value, lbp.value),
        );
    }
    Ok(report)
}

/// The constant direction `w ≡ 1`.
pub fn unit_direction(space: &crate::spectral::SpectralSpace) -> SpectralField {
    SpectralField::constant(space, Complex64::new(1.0, 0.0))
}
