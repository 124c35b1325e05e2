//! Experiment drivers and their reports.
//!
//! Every driver returns an [`ExperimentReport`]: a flat table of estimates
//! (one [`ReportRow`] per quantity and parameter point), fitted slopes, and
//! named pass/fail checks.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mc::McEstimate;
use crate::measures::variance_order;
use crate::rng::complex_gaussian;
use crate::spectral::{japanese_bracket, SpectralField, SpectralSpace};

mod blowup;
mod convergence;
mod convexity;
mod hessian_v;
mod lsi_dim2;
mod scaling;
mod vt;

pub use blowup::{blowup_scan, gagliardo_nirenberg_constant, gn_ratio, BlowupConfig};
pub use convergence::{n_stability_check, tv_r_scan, NStabilityConfig, TvScanConfig};
pub use convexity::{convexity_scan, ConvexityConfig};
pub use hessian_v::{hessian_of_v_check, unit_direction, HessianVConfig};
pub use lsi_dim2::{dim2_hessian_eigenvalues, lsi_bracket, lsi_bracket_dim2, Dim2Cutoff, Dim2Params, LsiBracket};
pub use scaling::{ScalingCheck, ScalingFamily};
pub use vt::{estimate_v_t, vt_scan, VtConfig};

/// Version of the CSV/JSON-lines layout described in `schema/report.md`.
pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "experiment,quantity,point,value,std_error,ess,n_samples,seed";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub quantity: String,
    /// The scanned parameter (`M`, `R`, `N`, `t`, ...) or 0 when there is none.
    pub point: f64,
    pub value: f64,
    pub std_error: f64,
    pub ess: f64,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub quantity: String,
    pub slope: f64,
    pub std_error: f64,
    pub intercept: f64,
    /// 95% interval `slope ± 1.96 s.e.`
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// A failed hard check is an assertion failure of the run.
    pub hard: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
    pub fits: Vec<SlopeFit>,
    pub checks: Vec<Check>,
}

/// One JSON-lines record per row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowRecord<'a> {
    pub experiment: &'a str,
    pub params: serde_json::Value,
    pub value: f64,
    pub std_error: f64,
    pub ess: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub schema_version: u32,
}

impl ExperimentReport {
    pub fn new(experiment: &str, params: serde_json::Value, seed: u64) -> Self {
        Self { experiment: experiment.into(), params, seed, rows: Vec::new(), fits: Vec::new(), checks: Vec::new() }
    }

    pub fn push_estimate(&mut self, quantity: &str, point: f64, est: &McEstimate) {
        self.rows.push(ReportRow {
            quantity: quantity.into(),
            point,
            value: est.value,
            std_error: est.std_error,
            ess: est.ess,
            n_samples: est.n_samples,
            seed: self.seed,
        });
    }

    /// A deterministic quantity: zero error, `n_samples` as given.
    pub fn push_exact(&mut self, quantity: &str, point: f64, value: f64, n_samples: usize) {
        self.rows.push(ReportRow {
            quantity: quantity.into(),
            point,
            value,
            std_error: 0.0,
            ess: n_samples as f64,
            n_samples,
            seed: self.seed,
        });
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into(), hard: false });
    }

    pub fn assert(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into(), hard: true });
    }

    pub fn rows_of<'a>(&'a self, quantity: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.quantity == quantity)
    }

    pub fn row(&self, quantity: &str, point: f64) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.quantity == quantity && r.point == point)
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// All hard checks passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.hard)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                self.experiment, r.quantity, r.point, r.value, r.std_error, r.ess, r.n_samples, r.seed
            )?;
        }
        for f in &self.fits {
            writeln!(w, "{},slope:{},0,{},{},0,0,{}", self.experiment, f.quantity, f.slope, f.std_error, self.seed)?;
        }
        Ok(())
    }

    /// One record per row, then one per fit and one per check.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.rows {
            let mut params = self.params.clone();
            if let serde_json::Value::Object(m) = &mut params {
                m.insert("quantity".into(), r.quantity.clone().into());
                m.insert("point".into(), r.point.into());
            }
            let rec = RowRecord {
                experiment: &self.experiment,
                params,
                value: r.value,
                std_error: r.std_error,
                ess: r.ess,
                n_samples: r.n_samples,
                seed: r.seed,
                schema_version: SCHEMA_VERSION,
            };
            crate::io::write_jsonl(&mut w, &rec)?;
        }
        for f in &self.fits {
            crate::io::write_jsonl(&mut w, &serde_json::json!({"experiment": self.experiment, "fit": f, "seed": self.seed, "schema_version": SCHEMA_VERSION}))?;
        }
        for c in &self.checks {
            crate::io::write_jsonl(&mut w, &serde_json::json!({"experiment": self.experiment, "check": c, "seed": self.seed, "schema_version": SCHEMA_VERSION}))?;
        }
        Ok(())
    }
}

/// Weighted least squares of `y` on `x` with weights `1/σ²`.
///
/// Returns `(slope, slope s.e., intercept)`; unit weights when any `σ` is zero.
pub fn fit_line(x: &[f64], y: &[f64], sigma: &[f64]) -> (f64, f64, f64) {
    let unit = sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite());
    let w: Vec<f64> = sigma.iter().map(|s| if unit { 1.0 } else { 1.0 / (s * s) }).collect();
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(&w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    let se = if unit {
        let n = x.len() as f64;
        let rss: f64 = x.iter().zip(y).map(|(a, c)| (c - my - slope * (a - mx)).powi(2)).sum();
        (rss / (n - 2.0).max(1.0) / sxx).sqrt()
    } else {
        (1.0 / sxx).sqrt()
    };
    (slope, se, my - slope * mx)
}

/// Ordinary least-squares slope of `log estimate` against `log point`.
///
/// Points are weighted equally; the standard error comes from the residuals.
pub fn fit_log_slope(quantity: &str, points: &[f64], estimates: &[McEstimate]) -> SlopeFit {
    let x: Vec<f64> = points.iter().map(|p| p.ln()).collect();
    let y: Vec<f64> = estimates.iter().map(|e| e.value.ln()).collect();
    let (slope, std_error, intercept) = fit_line(&x, &y, &vec![0.0; x.len()]);
    SlopeFit {
        quantity: quantity.into(),
        slope,
        std_error,
        intercept,
        ci_low: slope - 1.96 * std_error,
        ci_high: slope + 1.96 * std_error,
    }
}

/// Draws a `μ` sample mode by mode in the sampler's order, giving up as soon
/// as `keep_going` returns false after a mode.
///
/// Completed draws are identical to [`crate::measures::sample_mu`] on the same generator.
pub fn sample_mu_screened<R: Rng + ?Sized>(
    space: &SpectralSpace,
    rng: &mut R,
    mut keep_going: impl FnMut(i64, Complex64) -> bool,
) -> Option<SpectralField> {
    let mut u = SpectralField::zeros(space);
    let big_n = space.max_frequency() as i64;
    for n in variance_order(space.max_frequency()) {
        let c = complex_gaussian(rng) * (1.0 / japanese_bracket(n));
        u.coeffs_mut()[(n + big_n) as usize] = c;
        if !keep_going(n, c) {
            return None;
        }
    }
    Some(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::sample_mu;
    use crate::rng::RngStream;

    #[test]
    fn screened_draws_match_the_sampler() {
        let s = SpectralSpace::new(6);
        for i in 0..20 {
            let st = RngStream::new(1, i);
            let full = sample_mu_screened(&s, &mut st.rng(), |_, _| true).unwrap();
            assert_eq!(full, sample_mu(&s, &mut st.rng()));
            let mut seen = 0;
            assert!(sample_mu_screened(&s, &mut st.rng(), |_, _| {
                seen += 1;
                seen < 3
            })
            .is_none());
            assert_eq!(seen, 3);
        }
    }

    #[test]
    fn line_fit_recovers_slope() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + 2.0).collect();
        let (m, se, b) = fit_line(&x, &y, &[0.1; 4]);
        assert!((m - 0.5).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        assert!((se - 0.1 / 5f64.sqrt()).abs() < 1e-12);
        let (m, se, _) = fit_line(&x, &y, &[0.0; 4]);
        assert!((m - 0.5).abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn csv_is_deterministic_and_flat() {
        let mut r = ExperimentReport::new("demo", serde_json::json!({"p": 5.0}), 7);
        r.push_exact("x", 1.0, 0.1 + 0.2, 10);
        r.assert("ok", true, "");
        let mut a = Vec::new();
        r.write_csv(&mut a).unwrap();
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text, format!("{CSV_HEADER}\ndemo,x,1,0.30000000000000004,0,10,10,7\n"));
        let mut j = Vec::new();
        r.write_jsonl(&mut j).unwrap();
        let first: serde_json::Value = serde_json::from_str(std::str::from_utf8(&j).unwrap().lines().next().unwrap()).unwrap();
        assert_eq!(first["params"]["quantity"], "x");
        assert_eq!(first["seed"], 7);
        assert!(r.passed());
    }
}
