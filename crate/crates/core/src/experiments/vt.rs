//! `V_t(φ) = log E_{μ̄_t}[e^{(1/p)∫|u+φ|^p} 1{‖u+φ‖² ≤ K}]` along a heat-time grid.

use serde::Serialize;

use super::{ExperimentReport, ScalingFamily};
use crate::error::{invalid, Result};
use crate::mc::{map_chunks, McEstimate, Estimator, WeightedAccumulator};
use crate::measures::{log_weight_sharp, sample_mu, sample_mu_bar, GibbsParams};
use crate::rng::RngStream;
use crate::spectral::{SpectralField, SpectralSpace};

/// Importance estimate of `V_t(φ)`; `t = ∞` samples `μ` itself and `t = 0` is exact.
pub fn estimate_v_t(phi: &SpectralField, t: f64, params: &GibbsParams, n: usize, stream: &RngStream) -> Result<McEstimate> {
    if !(t >= 0.0) {
        return Err(invalid(format!("heat time must be >= 0, got {t}")));
    }
    let space = phi.space();
    let zero = SpectralField::zeros(space);
    if t == 0.0 {
        return Ok(McEstimate {
            value: log_weight_sharp(&zero, phi, params),
            std_error: 0.0,
            ess: n as f64,
            n_samples: n,
            estimator: Estimator::Importance,
        });
    }
    if n == 0 {
        return Err(invalid("need at least one sample"));
    }
    let parts = map_chunks(n, |range| {
        let mut acc = WeightedAccumulator::new();
        for i in range {
            let mut rng = stream.substream(i as u64);
            let u = if t.is_infinite() {
                sample_mu(space, &mut rng)
            } else {
                sample_mu_bar(space, t, &mut rng).expect("t checked")
            };
            acc.push(log_weight_sharp(&u, phi, params), 0.0);
        }
        acc
    });
    let mut acc = WeightedAccumulator::new();
    parts.iter().for_each(|p| acc.merge(p));
    acc.log_mean()
}

#[derive(Clone, Debug, Serialize)]
pub struct VtConfig {
    pub p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Level of the scaling-family profile `φ`; 0 for `φ = 0`.
    #[serde(rename = "M")]
    pub m: usize,
    pub t_list: Vec<f64>,
    pub n_samples: usize,
    pub oversampling: usize,
}

impl Default for VtConfig {
    fn default() -> Self {
        let t_list = (0..=24).map(|i| 1e-3 * 10f64.powf(i as f64 / 6.0)).collect();
        Self { p: 5.0, k: 1.0, n: 16, m: 1, t_list, n_samples: 100_000, oversampling: 4 }
    }
}

pub fn vt_scan(config: &VtConfig, seed: u64) -> Result<ExperimentReport> {
    if config.t_list.windows(2).any(|w| !(w[0] < w[1])) || config.t_list.is_empty() {
        return Err(invalid("t values must be nonempty and increasing"));
    }
    let params = GibbsParams { p: config.p, k: config.k, n: config.n, ..GibbsParams::default() };
    params.validate()?;
    let space = SpectralSpace::with_oversampling(config.n, config.oversampling)?;
    let phi = if config.m == 0 { SpectralField::zeros(&space) } else { ScalingFamily::new(config.k)?.field(config.m, &space) };
    let stream = RngStream::new(seed, 0).named("vt-scan");
    let mut report = ExperimentReport::new("vt-scan", serde_json::to_value(config).expect("serializable"), seed);
    let mut ests = Vec::with_capacity(config.t_list.len());
    for &t in &config.t_list {
        let e = estimate_v_t(&phi, t, &params, config.n_samples, &stream)?;
        report.push_estimate("v_t", t, &e);
        ests.push(e);
    }
    let limit = estimate_v_t(&phi, f64::INFINITY, &params, config.n_samples, &stream.named("limit"))?;
    report.push_estimate("v_infinity", 0.0, &limit);
    let worst = ests.windows(2).map(|w| w[0].z_distance(&w[1])).fold(0.0, f64::max);
    report.check("no_jump_above_5_joint_se", worst <= 5.0, format!("largest adjacent z = {worst:.2}"));
    let last = ests.last().expect("nonempty");
    report.check(
        "large_t_matches_v",
        last.z_distance(&limit) <= 3.0,
        format!("V_t = {} vs V = {} (z = {:.2})", last.value, limit.value, last.z_distance(&limit)),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn zero_time_is_exact() {
        let s = SpectralSpace::new(4);
        let params = GibbsParams { p: 4.0, k: 1.0, ..Default::default() };
        let st = RngStream::new(0, 0);
        let phi = SpectralField::constant(&s, Complex64::new(0.5, 0.0));
        let v = estimate_v_t(&phi, 0.0, &params, 10, &st).unwrap();
        assert!((v.value - 0.0625 / 4.0).abs() < 1e-14 && v.std_error == 0.0);
        let big = SpectralField::constant(&s, Complex64::new(2.0, 0.0));
        assert_eq!(estimate_v_t(&big, 0.0, &params, 10, &st).unwrap().value, f64::NEG_INFINITY);
        assert!(estimate_v_t(&phi, -1.0, &params, 10, &st).is_err());
    }

    #[test]
    fn large_t_recovers_v() {
        let cfg = VtConfig { n: 4, n_samples: 40_000, t_list: vec![1.0, 4.0, 30.0], ..Default::default() };
        let r = vt_scan(&cfg, 9).unwrap();
        assert!(r.check_named("large_t_matches_v").unwrap().passed, "{:?}", r.checks);
    }
}
