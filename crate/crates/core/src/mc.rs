//! Importance-sampling and pCN estimators over the truncated Gaussian field.
//!
//! Sample `i` of an estimator always comes from `stream.substream(i)`, and
//! chunk partial sums are merged in chunk order, so results are bit-identical
//! for any size of the rayon pool.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::sample_mu;
use crate::rng::RngStream;
use crate::spectral::{SpectralField, SpectralSpace};

/// Samples per parallel work unit.
pub const CHUNK: usize = 2048;

/// Batches used for chain standard errors.
pub const N_BATCHES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Importance,
    Chain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub ess: f64,
    pub n_samples: usize,
    pub estimator: Estimator,
}

impl McEstimate {
    /// `sqrt(se_a² + se_b²)`, the standard error of a difference of independent estimates.
    pub fn joint_se(&self, other: &McEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }

    /// `|a - b| / joint_se`; zero when both are exact and equal.
    pub fn z_distance(&self, other: &McEstimate) -> f64 {
        let d = (self.value - other.value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.joint_se(other)
        }
    }
}

/// One JSON-lines output record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub experiment: String,
    pub params: serde_json::Value,
    pub value: f64,
    pub std_error: f64,
    pub ess: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl EstimateRecord {
    pub fn new(experiment: &str, params: serde_json::Value, est: &McEstimate, seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            params,
            value: est.value,
            std_error: est.std_error,
            ess: est.ess,
            n_samples: est.n_samples,
            seed,
        }
    }
}

/// Streaming sums of `w`, `w²`, `wf`, `w²f`, `w²f²` with `w = e^{W - max}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedAccumulator {
    max: f64,
    sw: f64,
    sw2: f64,
    swf: f64,
    sw2f: f64,
    sw2f2: f64,
    count: usize,
}

impl Default for WeightedAccumulator {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, sw: 0.0, sw2: 0.0, swf: 0.0, sw2f: 0.0, sw2f2: 0.0, count: 0 }
    }
}

impl WeightedAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    fn rescale(&mut self, new_max: f64) {
        if self.max == f64::NEG_INFINITY {
            self.max = new_max;
            return;
        }
        let s = (self.max - new_max).exp();
        let s2 = s * s;
        self.sw *= s;
        self.swf *= s;
        self.sw2 *= s2;
        self.sw2f *= s2;
        self.sw2f2 *= s2;
        self.max = new_max;
    }

    /// Adds a sample with log-weight `lw` (possibly `-∞`) and observable value `f`.
    pub fn push(&mut self, lw: f64, f: f64) {
        self.count += 1;
        if lw == f64::NEG_INFINITY {
            return;
        }
        if lw > self.max {
            self.rescale(lw);
        }
        let w = (lw - self.max).exp();
        let w2 = w * w;
        self.sw += w;
        self.sw2 += w2;
        self.swf += w * f;
        self.sw2f += w2 * f;
        self.sw2f2 += w2 * f * f;
    }

    /// `count` identical samples at once.
    pub fn push_many(&mut self, lw: f64, f: f64, count: usize) {
        self.count += count;
        if lw == f64::NEG_INFINITY || count == 0 {
            return;
        }
        if lw > self.max {
            self.rescale(lw);
        }
        let c = count as f64;
        let w = (lw - self.max).exp();
        let w2 = w * w;
        self.sw += c * w;
        self.sw2 += c * w2;
        self.swf += c * w * f;
        self.sw2f += c * w2 * f;
        self.sw2f2 += c * w2 * f * f;
    }

    pub fn merge(&mut self, other: &WeightedAccumulator) {
        self.count += other.count;
        if other.max == f64::NEG_INFINITY {
            return;
        }
        let mut o = *other;
        if o.max > self.max {
            self.rescale(o.max);
        } else {
            o.rescale(self.max);
        }
        self.sw += o.sw;
        self.sw2 += o.sw2;
        self.swf += o.swf;
        self.sw2f += o.sw2f;
        self.sw2f2 += o.sw2f2;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// At least one sample carries positive weight.
    pub fn has_mass(&self) -> bool {
        self.sw > 0.0
    }

    /// Self-normalized estimate of `E[f e^W] / E[e^W]` with delta-method error.
    pub fn ratio(&self) -> Result<McEstimate> {
        if !(self.sw > 0.0) {
            return Err(Error::DegenerateSample(format!("all {} weights vanish", self.count)));
        }
        let est = self.swf / self.sw;
        let var = (self.sw2f2 - 2.0 * est * self.sw2f + est * est * self.sw2).max(0.0);
        Ok(McEstimate {
            value: est,
            std_error: var.sqrt() / self.sw,
            ess: self.sw * self.sw / self.sw2,
            n_samples: self.count,
            estimator: Estimator::Importance,
        })
    }

    /// `log E[e^W]` with delta-method error `sd(w) / (sqrt(n) mean(w))`.
    pub fn log_mean(&self) -> Result<McEstimate> {
        if !(self.sw > 0.0) {
            return Err(Error::DegenerateSample(format!("all {} weights vanish", self.count)));
        }
        let n = self.count as f64;
        let mean = self.sw / n;
        let var = (self.sw2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        Ok(McEstimate {
            value: self.max + mean.ln(),
            std_error: var.sqrt() / (n.sqrt() * mean),
            ess: self.sw * self.sw / self.sw2,
            n_samples: self.count,
            estimator: Estimator::Importance,
        })
    }
}

/// Runs `body` on consecutive index ranges of length [`CHUNK`] in parallel and
/// returns the per-chunk results in index order.
pub fn map_chunks<A, F>(n: usize, body: F) -> Vec<A>
where
    A: Send,
    F: Fn(std::ops::Range<usize>) -> A + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks).into_par_iter().map(|c| body(c * CHUNK..((c + 1) * CHUNK).min(n))).collect()
}

/// Folds `WeightedAccumulator`s over μ-samples in parallel with a fixed merge order.
pub fn accumulate<F>(space: &SpectralSpace, n: usize, stream: &RngStream, per_sample: F) -> WeightedAccumulator
where
    F: Fn(&SpectralField) -> (f64, f64) + Sync,
{
    let parts = map_chunks(n, |range| {
        let mut acc = WeightedAccumulator::new();
        for i in range {
            let u = sample_mu(space, &mut stream.substream(i as u64));
            let (lw, f) = per_sample(&u);
            acc.push(lw, f);
        }
        acc
    });
    let mut total = WeightedAccumulator::new();
    for p in &parts {
        total.merge(p);
    }
    total
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("need at least 2 samples, got {n}")));
    }
    Ok(())
}

/// Self-normalized importance sampling with μ-samples as proposals.
pub fn estimate_reweighted<F, W>(
    space: &SpectralSpace,
    observable: F,
    log_weight: W,
    n: usize,
    stream: &RngStream,
) -> Result<McEstimate>
where
    F: Fn(&SpectralField) -> f64 + Sync,
    W: Fn(&SpectralField) -> f64 + Sync,
{
    check_n(n)?;
    accumulate(space, n, stream, |u| {
        let lw = log_weight(u);
        if lw == f64::NEG_INFINITY {
            (lw, 0.0)
        } else {
            (lw, observable(u))
        }
    })
    .ratio()
}

/// `log E_μ[e^W]`.
pub fn log_partition<W>(space: &SpectralSpace, log_weight: W, n: usize, stream: &RngStream) -> Result<McEstimate>
where
    W: Fn(&SpectralField) -> f64 + Sync,
{
    check_n(n)?;
    accumulate(space, n, stream, |u| (log_weight(u), 0.0)).log_mean()
}

/// `½ E_μ|e^{W_a}/Z_a - e^{W_b}/Z_b|` on shared μ-samples.
///
/// The error bar treats the normalizations as exact.
pub fn tv_discrepancy<A, B>(space: &SpectralSpace, log_weight_a: A, log_weight_b: B, n: usize, stream: &RngStream) -> Result<McEstimate>
where
    A: Fn(&SpectralField) -> f64 + Sync,
    B: Fn(&SpectralField) -> f64 + Sync,
{
    check_n(n)?;
    let parts = map_chunks(n, |range| {
        range
            .map(|i| {
                let u = sample_mu(space, &mut stream.substream(i as u64));
                (log_weight_a(&u), log_weight_b(&u))
            })
            .collect::<Vec<_>>()
    });
    let lw: Vec<(f64, f64)> = parts.into_iter().flatten().collect();
    let normalize = |get: &dyn Fn(&(f64, f64)) -> f64| -> Result<Vec<f64>> {
        let m = lw.iter().map(get).fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY || m.is_nan() {
            return Err(Error::DegenerateSample("normalization vanishes".into()));
        }
        let w: Vec<f64> = lw.iter().map(|x| (get(x) - m).exp()).collect();
        let mean = w.iter().sum::<f64>() / n as f64;
        Ok(w.into_iter().map(|x| x / mean).collect())
    };
    let a = normalize(&|x| x.0)?;
    let b = normalize(&|x| x.1)?;
    let g: Vec<f64> = a.iter().zip(&b).map(|(a, b)| 0.5 * (a - b).abs()).collect();
    let (value, var) = mean_var(&g);
    let ess = {
        let s: f64 = a.iter().sum();
        s * s / a.iter().map(|x| x * x).sum::<f64>()
    };
    Ok(McEstimate { value, std_error: (var / n as f64).sqrt(), ess, n_samples: n, estimator: Estimator::Importance })
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

/// Mean and nonoverlapping batch-means standard error; a trailing partial batch is dropped.
pub fn batch_means(xs: &[f64], n_batches: usize) -> (f64, f64) {
    let (mean, _) = mean_var(xs);
    let size = xs.len() / n_batches.max(1);
    if size == 0 || n_batches < 2 {
        return (mean, f64::NAN);
    }
    let batches: Vec<f64> = xs.chunks_exact(size).take(n_batches).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let (_, bvar) = mean_var(&batches);
    (mean, (bvar / n_batches as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub beta: f64,
    pub burn_in: usize,
    pub thinning: usize,
    pub n_steps: usize,
    /// Adapt `beta` during burn-in toward acceptance 0.25.
    pub tune: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { beta: 0.5, burn_in: 2000, thinning: 1, n_steps: 20_000, tune: true }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(invalid(format!("pCN step must lie in (0, 1], got {}", self.beta)));
        }
        if self.thinning == 0 {
            return Err(invalid("thinning must be positive"));
        }
        Ok(())
    }
}

/// Preconditioned Crank–Nicolson chain targeting `∝ e^W dμ`.
///
/// Iterating yields the retained states after burn-in and thinning.
pub struct PcnChain<W> {
    log_weight: W,
    config: ChainConfig,
    rng: rand_chacha::ChaCha8Rng,
    state: SpectralField,
    state_lw: f64,
    beta: f64,
    proposed: usize,
    accepted: usize,
    retained: usize,
}

pub fn pcn_chain<W>(log_weight: W, config: ChainConfig, init: SpectralField, stream: &RngStream) -> Result<PcnChain<W>>
where
    W: Fn(&SpectralField) -> f64,
{
    config.validate()?;
    let state_lw = log_weight(&init);
    if state_lw == f64::NEG_INFINITY || state_lw.is_nan() {
        return Err(invalid("chain must start where the log-weight is finite"));
    }
    let mut chain = PcnChain {
        log_weight,
        config,
        rng: stream.rng(),
        state: init,
        state_lw,
        beta: config.beta,
        proposed: 0,
        accepted: 0,
        retained: 0,
    };
    chain.burn_in();
    Ok(chain)
}

impl<W: Fn(&SpectralField) -> f64> PcnChain<W> {
    fn step(&mut self) -> bool {
        let xi = sample_mu(self.state.space(), &mut self.rng);
        let mut prop = &self.state * (1.0 - self.beta * self.beta).sqrt();
        prop.axpy(self.beta, &xi);
        let lw = (self.log_weight)(&prop);
        let log_u: f64 = self.rng.random::<f64>().ln();
        self.proposed += 1;
        if lw > f64::NEG_INFINITY && log_u < lw - self.state_lw {
            self.state = prop;
            self.state_lw = lw;
            self.accepted += 1;
            true
        } else {
            false
        }
    }

    fn burn_in(&mut self) {
        const WINDOW: usize = 100;
        let mut acc = 0;
        for i in 0..self.config.burn_in {
            acc += self.step() as usize;
            if self.config.tune && (i + 1) % WINDOW == 0 {
                let rate = acc as f64 / WINDOW as f64;
                if rate > 0.3 {
                    self.beta = (self.beta * 1.25).min(1.0);
                } else if rate < 0.2 {
                    self.beta *= 0.8;
                }
                acc = 0;
            }
        }
        self.proposed = 0;
        self.accepted = 0;
    }

    /// The frozen step after burn-in.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Acceptance rate since burn-in.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn state(&self) -> &SpectralField {
        &self.state
    }
}

impl<W: Fn(&SpectralField) -> f64> Iterator for PcnChain<W> {
    type Item = SpectralField;

    fn next(&mut self) -> Option<SpectralField> {
        if self.retained * self.config.thinning >= self.config.n_steps {
            return None;
        }
        for _ in 0..self.config.thinning {
            self.step();
        }
        self.retained += 1;
        Some(self.state.clone())
    }
}

/// Chain average of `observable` with a 32-batch-means error bar.
pub fn chain_estimate<W, F>(chain: PcnChain<W>, observable: F) -> McEstimate
where
    W: Fn(&SpectralField) -> f64,
    F: Fn(&SpectralField) -> f64,
{
    let xs: Vec<f64> = chain.map(|u| observable(&u)).collect();
    chain_estimate_of(&xs)
}

pub fn chain_estimate_of(xs: &[f64]) -> McEstimate {
    let (value, se) = batch_means(xs, N_BATCHES);
    let (_, var) = mean_var(xs);
    let n = xs.len();
    let ess = if se > 0.0 { (var / (se * se)).min(n as f64) } else { n as f64 };
    McEstimate { value, std_error: se, ess, n_samples: n, estimator: Estimator::Chain }
}
