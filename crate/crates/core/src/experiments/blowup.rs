//! Growth of `E[1{‖u+φ_M‖² ≤ K} ∫|u+φ_M|^{p-2}]` along the concentrating family.
//!
//! All levels `M` share one truncation and one set of `μ`-samples. A sample
//! is drawn mode by mode and abandoned as soon as its partial mass exceeds
//! `K` for every `φ_M`; only samples inside the ball for some `M` are
//! completed and transformed to the grid.

use num_complex::Complex64;
use serde::Serialize;

use super::{fit_log_slope, sample_mu_screened, ExperimentReport, ScalingFamily};
use crate::error::{invalid, Result};
use crate::mc::{chain_estimate, map_chunks, pcn_chain, ChainConfig, McEstimate, WeightedAccumulator};
use crate::measures::{log_weight_soft, sample_mu, GibbsParams};
use crate::rng::RngStream;
use crate::spectral::{grid_abs_pow_mean, SpectralField, SpectralSpace};

#[derive(Clone, Debug, Serialize)]
pub struct BlowupConfig {
    pub p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "M")]
    pub m_list: Vec<usize>,
    /// Truncation; `32 max(M)` capped at `n_cap` when absent.
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub n_cap: usize,
    pub n_samples: usize,
    pub eps0: f64,
    pub eps0_sensitivity: Vec<f64>,
    /// pCN steps per level for the cross-check; 0 skips it.
    pub chain_steps: usize,
    /// Quadrature nodes per mode.
    pub oversampling: usize,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            p: 5.0,
            k: 1.0,
            m_list: vec![1, 2, 4, 8, 16],
            n: None,
            n_cap: 512,
            n_samples: 20_000_000,
            eps0: 0.1,
            eps0_sensitivity: vec![0.05, 0.2],
            chain_steps: 20_000,
            oversampling: 4,
        }
    }
}

impl BlowupConfig {
    pub fn truncation(&self) -> usize {
        self.n.unwrap_or_else(|| (32 * self.m_list.iter().copied().max().unwrap_or(1)).min(self.n_cap))
    }
}

/// `‖u‖^p_{L^p} / (‖u‖_{H¹}^{4/p} ‖u‖_{L^{p-2}}^{(p²-4)/p})`, invariant under scaling `u`.
pub fn gn_ratio(u: &SpectralField, p: f64) -> f64 {
    let values = u.grid_values();
    let ip = grid_abs_pow_mean(&values, p);
    let ipm2 = grid_abs_pow_mean(&values, p - 2.0);
    ratio_from_parts(ip, ipm2, u.h1_sq(), p)
}

fn ratio_from_parts(ip: f64, ipm2: f64, h1_sq: f64, p: f64) -> f64 {
    let den = h1_sq.powf(2.0 / p) * ipm2.powf((p + 2.0) / p);
    if den > 0.0 {
        ip / den
    } else {
        0.0
    }
}

/// Largest [`gn_ratio`] over constants, concentrating bumps, Gaussian bumps
/// and `μ`-samples; returns the constant and the field attaining it.
pub fn gagliardo_nirenberg_constant(space: &SpectralSpace, p: f64, k: f64, seed: u64) -> Result<(f64, SpectralField)> {
    let mut battery = vec![SpectralField::constant(space, Complex64::new(1.0, 0.0))];
    let family = ScalingFamily::new(k)?;
    let mut m = 1;
    while 8 * m <= space.max_frequency().max(8) {
        battery.push(family.field(m, space));
        m *= 2;
    }
    let nodes = space.nodes();
    for width in [0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0] {
        let g: Vec<Complex64> = nodes
            .iter()
            .map(|x| {
                let d = (x + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
                Complex64::new((-(d / width).powi(2)).exp(), 0.0)
            })
            .collect();
        let f = SpectralField::from_grid(space, &g);
        battery.push(&SpectralField::constant(space, Complex64::new(0.3, 0.0)) + &f);
        battery.push(f);
    }
    let stream = RngStream::new(seed, 0).named("gn-battery");
    for i in 0..64 {
        battery.push(sample_mu(space, &mut stream.substream(i)));
    }
    let (c, best) = battery
        .into_iter()
        .map(|u| (gn_ratio(&u, p), u))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("battery is nonempty");
    Ok((c, best))
}

/// Per-chunk partial results; index `[level][eps0]`.
struct Partial {
    acc: Vec<Vec<WeightedAccumulator>>,
    outside: Vec<usize>,
    v_sum: Vec<f64>,
    v_sq: Vec<f64>,
    inside: Vec<usize>,
    gn_max: f64,
}

pub fn blowup_scan(config: &BlowupConfig, seed: u64) -> Result<ExperimentReport> {
    let p = config.p;
    if !(p > 4.0 && p < 6.0) {
        return Err(invalid(format!("blow-up scan needs 4 < p < 6, got {p}")));
    }
    if config.m_list.is_empty() || config.m_list.iter().any(|m| !m.is_power_of_two()) {
        return Err(invalid("levels M must be nonempty dyadic integers"));
    }
    if config.n_samples < 2 {
        return Err(invalid("need at least 2 samples"));
    }
    let n_trunc = config.truncation();
    let space = SpectralSpace::with_oversampling(n_trunc, config.oversampling)?;
    let family = ScalingFamily::new(config.k)?;
    let levels = &config.m_list;
    let phis: Vec<SpectralField> = levels.iter().map(|&m| family.field(m, &space)).collect();
    let mut eps: Vec<f64> = vec![config.eps0];
    eps.extend(config.eps0_sensitivity.iter().copied().filter(|e| *e != config.eps0));
    let growth = |m: usize| (m as f64).powf(0.5 * p - 1.0);
    let ls: Vec<Vec<f64>> = levels.iter().map(|&m| eps.iter().map(|e| e * growth(m)).collect()).collect();
    let (gn_c, _) = gagliardo_nirenberg_constant(&space, p, config.k, seed)?;

    let stream = RngStream::new(seed, 0).named("blowup-scan");
    let big_n = n_trunc as i64;
    let nl = levels.len();
    let parts = map_chunks(config.n_samples, |range| {
        let mut part = Partial {
            acc: vec![vec![WeightedAccumulator::new(); eps.len()]; nl],
            outside: vec![0; nl],
            v_sum: vec![0.0; nl],
            v_sq: vec![0.0; nl],
            inside: vec![0; nl],
            gn_max: 0.0,
        };
        let mut partial = vec![0.0; nl];
        for i in range {
            partial.iter_mut().for_each(|x| *x = 0.0);
            let drawn = sample_mu_screened(&space, &mut stream.substream(i as u64), |n, c| {
                let idx = (n + big_n) as usize;
                let mut any = false;
                for (j, phi) in phis.iter().enumerate() {
                    partial[j] += (c + phi.coeffs()[idx]).norm_sqr();
                    any |= partial[j] <= config.k;
                }
                any
            });
            let Some(u) = drawn else {
                for j in 0..nl {
                    part.outside[j] += 1;
                }
                continue;
            };
            for (j, phi) in phis.iter().enumerate() {
                let v = &u + phi;
                if v.mass() > config.k {
                    part.outside[j] += 1;
                    continue;
                }
                let values = v.grid_values();
                let ip = grid_abs_pow_mean(&values, p);
                let ipm2 = grid_abs_pow_mean(&values, p - 2.0);
                let lw = ip / p;
                for a in &mut part.acc[j] {
                    a.push(lw, ipm2);
                }
                part.v_sum[j] += lw;
                part.v_sq[j] += lw * lw;
                part.inside[j] += 1;
                part.gn_max = part.gn_max.max(ratio_from_parts(ip, ipm2, v.h1_sq(), p) / gn_c);
            }
        }
        for j in 0..nl {
            let out = part.outside[j];
            for (a, l) in part.acc[j].iter_mut().zip(&ls[j]) {
                a.push_many(-l, 0.0, out);
            }
            part.v_sum[j] -= out as f64 * ls[j][0];
            part.v_sq[j] += out as f64 * ls[j][0] * ls[j][0];
        }
        part
    });
    let mut acc = vec![vec![WeightedAccumulator::new(); eps.len()]; nl];
    let (mut v_sum, mut v_sq, mut inside) = (vec![0.0; nl], vec![0.0; nl], vec![0usize; nl]);
    let mut gn_max: f64 = 0.0;
    for part in &parts {
        for j in 0..nl {
            for (a, b) in acc[j].iter_mut().zip(&part.acc[j]) {
                a.merge(b);
            }
            v_sum[j] += part.v_sum[j];
            v_sq[j] += part.v_sq[j];
            inside[j] += part.inside[j];
        }
        gn_max = gn_max.max(part.gn_max);
    }

    let mut report = ExperimentReport::new(
        "blowup-scan",
        serde_json::json!({"config": config, "N": n_trunc, "gn_constant": gn_c}),
        seed,
    );
    let n = config.n_samples as f64;
    let mut main = Vec::with_capacity(nl);
    let points: Vec<f64> = levels.iter().map(|&m| m as f64).collect();
    for (j, &m) in levels.iter().enumerate() {
        let pt = m as f64;
        let check = family.check(m, &space, p);
        report.push_exact("scaling_l2_sq", pt, check.l2_sq, 0);
        report.push_exact("scaling_lp_p", pt, check.lp_p, 0);
        report.push_exact("scaling_lpm2", pt, check.lpm2, 0);
        report.push_exact("scaling_h1_over_m", pt, check.h1_over_m, 0);
        report.push_exact("scaling_projection_error", pt, check.projection_error, 0);
        report.check(
            &format!("scaling_invariants_M{m}"),
            check.max_relative_deviation() <= 1e-3,
            format!("max relative deviation {:.3e}", check.max_relative_deviation()),
        );
        for (k, e) in eps.iter().enumerate() {
            let est = acc[j][k].ratio()?;
            let q = if k == 0 { "estimate".to_string() } else { format!("estimate_eps0_{e}") };
            report.push_estimate(&q, pt, &est);
            if k == 0 {
                main.push(est);
                report.check(&format!("reliable_ess_M{m}"), est.ess >= 100.0, format!("ESS {:.1}", est.ess));
            }
        }
        let mean_v = v_sum[j] / n;
        let var_v = (v_sq[j] / n - mean_v * mean_v).max(0.0) * n / (n - 1.0);
        let theta0 = McEstimate {
            value: mean_v,
            std_error: (var_v / n).sqrt(),
            ess: n,
            n_samples: config.n_samples,
            estimator: crate::mc::Estimator::Importance,
        };
        report.push_estimate("log_z_theta0", pt, &theta0);
        report.push_exact("log_z_theta0_over_growth", pt, mean_v / growth(m), config.n_samples);
        report.push_exact("p_inside", pt, inside[j] as f64 / n, config.n_samples);
        if config.chain_steps > 0 {
            let params = GibbsParams { p, k: config.k, l: ls[j][0], n: n_trunc, ..GibbsParams::default() };
            let phi = &phis[j];
            let lw = |u: &SpectralField| log_weight_soft(u, phi, &params);
            let cfg = ChainConfig { beta: 0.3, burn_in: config.chain_steps / 5, thinning: 1, n_steps: config.chain_steps, tune: true };
            let chain = pcn_chain(lw, cfg, -phi, &stream.named("chain").child(m as u64))?;
            let ce = chain_estimate(chain, |u| {
                let v = u + phi;
                if v.mass() <= config.k {
                    v.lp_norm_p(p - 2.0).expect("p > 4")
                } else {
                    0.0
                }
            });
            report.push_estimate("chain_estimate", pt, &ce);
            report.push_exact("chain_z_distance", pt, ce.z_distance(&main[j]), ce.n_samples);
        }
    }
    report.check("estimate_finite_at_first_level", main[0].value.is_finite() && main[0].value >= 0.0, format!("{:?}", main[0]));
    for w in main.windows(2).zip(points.windows(2)) {
        let (a, b) = (&w.0[0], &w.0[1]);
        report.check(
            &format!("nondecreasing_M{}_to_M{}", w.1[0], w.1[1]),
            b.value >= a.value - 3.0 * a.joint_se(b),
            format!("{} -> {}", a.value, b.value),
        );
    }
    if nl >= 2 && main.iter().all(|e| e.value > 0.0) {
        let fit = fit_log_slope("estimate", &points, &main);
        report.check("slope_at_least_0.3", fit.slope >= 0.3, format!("slope {:.4} ± {:.4}", fit.slope, fit.std_error));
        report.fits.push(fit);
        for (k, e) in eps.iter().enumerate().skip(1) {
            let ests: Vec<McEstimate> = (0..nl).map(|j| acc[j][k].ratio()).collect::<Result<_>>()?;
            if ests.iter().all(|e| e.value > 0.0) {
                report.fits.push(fit_log_slope(&format!("estimate_eps0_{e}"), &points, &ests));
            }
        }
    }
    report.push_exact("gn_constant", 0.0, gn_c, 0);
    report.push_exact("gn_max_sample_ratio", 0.0, gn_max, config.n_samples);
    report.check("gagliardo_nirenberg_holds", gn_max <= 1.0, format!("max sample ratio / constant = {gn_max:.4}"));
    Ok(report)
}
