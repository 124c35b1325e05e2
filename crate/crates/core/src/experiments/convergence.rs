//! Convergence diagnostics for the regularized measures: total variation
//! against the sharp cutoff as `R` grows, and stability of a cutoff moment
//! in the truncation `N`.

use serde::Serialize;

use super::{ExperimentReport, ScalingFamily};
use crate::error::{invalid, Result};
use crate::mc::{map_chunks, tv_discrepancy, WeightedAccumulator};
use crate::measures::{log_weight_polynomial, log_weight_tilted, sample_mu, soft_weight_of_shifted, GibbsParams};
use crate::rng::RngStream;
use crate::spectral::{grid_abs_pow_mean, SpectralSpace};

#[derive(Clone, Debug, Serialize)]
pub struct TvScanConfig {
    pub p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "R")]
    pub r_list: Vec<f64>,
    pub n_samples: usize,
    pub oversampling: usize,
}

impl Default for TvScanConfig {
    fn default() -> Self {
        Self { p: 4.0, k: 1.0, lambda: 1.0, n: 8, r_list: vec![1.0, 10.0, 100.0, 1000.0], n_samples: 200_000, oversampling: 4 }
    }
}

/// `TV(ρ_{Λ,N,R}, ρ_Λ ∘ P_N)` for each `R`, all on the same `μ`-samples.
pub fn tv_r_scan(config: &TvScanConfig, seed: u64) -> Result<ExperimentReport> {
    if config.r_list.is_empty() || config.r_list.iter().any(|r| !(*r >= 0.0)) {
        return Err(invalid("R values must be nonempty and nonnegative"));
    }
    let base = GibbsParams { p: config.p, k: config.k, lambda: config.lambda, n: config.n, ..GibbsParams::default() };
    base.validate()?;
    let space = SpectralSpace::with_oversampling(config.n, config.oversampling)?;
    let stream = RngStream::new(seed, 0).named("tv-r-scan");
    let mut report = ExperimentReport::new("tv-r-scan", serde_json::to_value(config).expect("serializable"), seed);
    let mut ests = Vec::new();
    for &r in &config.r_list {
        let params = GibbsParams { r, ..base };
        let est = tv_discrepancy(
            &space,
            |u| log_weight_polynomial(u, &params),
            |u| log_weight_tilted(u, &base),
            config.n_samples,
            &stream,
        )?;
        report.push_estimate("tv_discrepancy", r, &est);
        ests.push(est);
    }
    for (w, rs) in ests.windows(2).zip(config.r_list.windows(2)) {
        report.check(
            &format!("nonincreasing_R{}_to_R{}", rs[0], rs[1]),
            w[1].value <= w[0].value + 2.0 * w[0].joint_se(&w[1]),
            format!("{} -> {}", w[0].value, w[1].value),
        );
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct NStabilityConfig {
    pub p: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// Moment exponent in `∫|u|^q`.
    pub q: f64,
    /// Level of the scaling-family shift; 0 for no shift.
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    pub n_samples: usize,
    pub oversampling: usize,
}

impl Default for NStabilityConfig {
    fn default() -> Self {
        Self { p: 5.0, k: 1.0, l: 1.0, q: 3.0, m: 1, n_list: vec![4, 8, 16, 32], n_samples: 400_000, oversampling: 4 }
    }
}

/// `E_{ρ_{N,L,φ}}[1{‖u‖² ≤ K} ∫|u|^q]` for each `N`.
///
/// Samples are drawn once at the largest truncation, which stands in for the
/// untruncated field: the observable is evaluated on the full sample and only
/// the density sees `P_N`. Consecutive levels are strongly correlated, so the
/// joint standard error treating them as independent is conservative.
pub fn n_stability_check(config: &NStabilityConfig, seed: u64) -> Result<ExperimentReport> {
    if config.n_list.is_empty() || config.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("N values must be nonempty and increasing"));
    }
    if !(config.q >= 1.0) {
        return Err(invalid(format!("q must be >= 1, got {}", config.q)));
    }
    let top = *config.n_list.last().expect("nonempty");
    let base = GibbsParams { p: config.p, k: config.k, l: config.l, n: top, ..GibbsParams::default() };
    base.validate()?;
    let space = SpectralSpace::with_oversampling(top, config.oversampling)?;
    let phi = if config.m == 0 {
        crate::spectral::SpectralField::zeros(&space)
    } else {
        ScalingFamily::new(config.k)?.field(config.m, &space)
    };
    let subspaces: Vec<SpectralSpace> = config.n_list.iter().map(|&n| SpectralSpace::with_oversampling(n, config.oversampling)).collect::<Result<_>>()?;
    let stream = RngStream::new(seed, 0).named("n-stability");
    let parts = map_chunks(config.n_samples, |range| {
        let mut acc = vec![WeightedAccumulator::new(); subspaces.len()];
        for i in range {
            let u = sample_mu(&space, &mut stream.substream(i as u64));
            let f = if u.mass() <= config.k { grid_abs_pow_mean(&u.grid_values(), config.q) } else { 0.0 };
            let v = &u + &phi;
            for (a, sub) in acc.iter_mut().zip(&subspaces) {
                let vn = v.project(sub.max_frequency()).expect("level below truncation");
                a.push(soft_weight_of_shifted(&vn, &base), f);
            }
        }
        acc
    });
    let mut acc = vec![WeightedAccumulator::new(); subspaces.len()];
    for part in &parts {
        for (a, b) in acc.iter_mut().zip(part) {
            a.merge(b);
        }
    }
    let mut report = ExperimentReport::new("n-stability", serde_json::to_value(config).expect("serializable"), seed);
    let ests: Vec<_> = acc.iter().map(|a| a.ratio()).collect::<Result<_>>()?;
    for (e, &n) in ests.iter().zip(&config.n_list) {
        report.push_estimate("moment", n as f64, e);
    }
    for (w, ns) in ests.windows(2).zip(config.n_list.windows(2)) {
        report.push_exact("z_distance", ns[1] as f64, w[0].z_distance(&w[1]), config.n_samples);
    }
    if ests.len() >= 2 {
        let (a, b) = (&ests[ests.len() - 2], &ests[ests.len() - 1]);
        report.check(
            "top_pair_within_5_joint_se",
            (a.value - b.value).abs() <= 5.0 * a.joint_se(b),
            format!("{} vs {} (z = {:.2})", a.value, b.value, a.z_distance(b)),
        );
    }
    Ok(report)
}
