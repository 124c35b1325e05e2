//! Experiment dispatch and report output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::sync::Arc;

use gibbs_lsi::boue_dupuis::{
    bd_optimize, epsilon_optimizer_transfer, BdObjective, DriftClass, DriftPath, LinearPotential, OptConfig,
    Potential, SmoothedPotential, SoftCutoffPotential, TimeGrid,
};
use gibbs_lsi::experiments::{
    blowup_scan, convexity_scan, hessian_of_v_check, lsi_bracket_dim2, unit_direction, vt_scan, BlowupConfig,
    ConvexityConfig, Dim2Cutoff, Dim2Params, ExperimentReport, HessianVConfig, ScalingFamily, VtConfig,
};
use gibbs_lsi::hessian::{bakry_emery_bound, min_eigenvalue, EigenMethod, RegularizedHamiltonianParams};
use gibbs_lsi::io::field_to_csv_record;
use gibbs_lsi::mc::{log_partition, mean_var, McEstimate};
use gibbs_lsi::measures::{expected_mass, sample_mu};
use gibbs_lsi::{Error, RngStream, SpectralField, SpectralSpace};
use num_complex::Complex64;

use crate::config::RunConfig;

pub enum RunError {
    Config(String),
    Failed(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => RunError::Config(m),
            other => RunError::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Failed(e.to_string())
    }
}

/// Echoes the configuration, runs the experiment and writes its report.
pub fn run(c: &RunConfig) -> Result<ExperimentReport, RunError> {
    fs::create_dir_all(&c.out)?;
    fs::write(c.out.join("config.txt"), c.to_text())?;
    let report = dispatch(c)?;
    let stem = c.experiment.as_str();
    if c.format.csv() {
        let mut w = BufWriter::new(File::create(c.out.join(format!("{stem}.csv")))?);
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    if c.format.jsonl() {
        let mut w = BufWriter::new(File::create(c.out.join(format!("{stem}.jsonl")))?);
        report.write_jsonl(&mut w)?;
        w.flush()?;
    }
    Ok(report)
}

fn params_json(c: &RunConfig) -> serde_json::Value {
    serde_json::json!({
        "p": c.p, "K": c.k, "Lambda": c.lambda, "R": c.r, "L": c.l, "eps0": c.eps0, "sigma": c.sigma,
        "N": c.n, "oversampling": c.oversampling, "samples": c.samples,
    })
}

fn space(c: &RunConfig) -> Result<SpectralSpace, RunError> {
    Ok(SpectralSpace::with_oversampling(c.truncation(), c.oversampling)?)
}

fn dispatch(c: &RunConfig) -> Result<ExperimentReport, RunError> {
    let root = RngStream::new(c.seed, 0);
    match c.experiment.as_str() {
        "sample" => sample(c, root),
        "hessian" => hessian(c, root),
        "convexity-scan" => Ok(convexity_scan(
            &ConvexityConfig {
                p: c.p,
                k: c.k,
                r: c.r,
                n: c.truncation(),
                n_points: c.samples,
                oversampling: c.oversampling,
                ..ConvexityConfig::default()
            },
            c.seed,
        )?),
        "lsi-bracket" => {
            let cutoff = match c.cutoff.as_str() {
                "none" => Dim2Cutoff::None,
                "sharp" => Dim2Cutoff::Sharp { k: c.k },
                _ => Dim2Cutoff::Polynomial { r: c.r, k: c.k },
            };
            let params = Dim2Params { p: c.p, lambda: c.lambda, cutoff, focusing: c.focusing };
            Ok(lsi_bracket_dim2(&params, c.n_r, c.n_theta)?)
        }
        "bd-optimize" => bd(c, root),
        "bd-transfer" => transfer(c, root),
        "blowup-scan" => Ok(blowup_scan(
            &BlowupConfig {
                p: c.p,
                k: c.k,
                m_list: c.m.clone(),
                n: c.n,
                n_samples: c.samples,
                eps0: c.eps0,
                chain_steps: c.chain_steps,
                oversampling: c.oversampling,
                ..BlowupConfig::default()
            },
            c.seed,
        )?),
        "hessian-of-v" => hessian_of_v(c),
        "vt-scan" => Ok(vt_scan(
            &VtConfig {
                p: c.p,
                k: c.k,
                n: c.truncation(),
                m: c.m[0],
                t_list: c.t.clone(),
                n_samples: c.samples,
                oversampling: c.oversampling,
            },
            c.seed,
        )?),
        other => Err(RunError::Config(format!("unknown experiment {other:?}"))),
    }
}

fn sample(c: &RunConfig, root: RngStream) -> Result<ExperimentReport, RunError> {
    let s = space(c)?;
    let stream = root.named("sample");
    let mut w = BufWriter::new(File::create(c.out.join("samples.csv"))?);
    let mut masses = Vec::with_capacity(c.samples);
    for i in 0..c.samples {
        let u = sample_mu(&s, &mut stream.substream(i as u64));
        writeln!(w, "{}", field_to_csv_record(&u))?;
        masses.push(u.mass());
    }
    w.flush()?;
    let (mean, var) = mean_var(&masses);
    let est = McEstimate {
        value: mean,
        std_error: (var / c.samples as f64).sqrt(),
        ess: c.samples as f64,
        n_samples: c.samples,
        estimator: gibbs_lsi::mc::Estimator::Importance,
    };
    let mut r = ExperimentReport::new("sample", params_json(c), c.seed);
    let target = expected_mass(s.max_frequency());
    r.push_estimate("mass", s.max_frequency() as f64, &est);
    r.push_exact("expected_mass", s.max_frequency() as f64, target, 0);
    r.check("mass_within_3_se", (mean - target).abs() <= 3.0 * est.std_error, format!("{mean} vs {target}"));
    Ok(r)
}

fn hessian(c: &RunConfig, root: RngStream) -> Result<ExperimentReport, RunError> {
    let s = space(c)?;
    let u = sample_mu(&s, &mut root.named("hessian").rng());
    let params = RegularizedHamiltonianParams { p: c.p, k: c.k, lambda: c.lambda, r: c.r };
    let h = min_eigenvalue(&u, &params, EigenMethod::auto(&s))?;
    let mut r = ExperimentReport::new("hessian", params_json(c), c.seed);
    r.params["method"] = serde_json::to_value(h.method).expect("plain enum");
    r.push_exact("min_eigenvalue", 0.0, h.min_eigenvalue, 1);
    r.push_exact("residual", 0.0, h.residual, 1);
    r.push_exact("iterations", 0.0, h.iterations as f64, 1);
    r.push_exact("sample_mass", 0.0, u.mass(), 1);
    if let Some(b) = bakry_emery_bound(h.min_eigenvalue) {
        r.push_exact("ls_bound_at_sample", 0.0, b, 1);
    }
    Ok(r)
}

fn drift_class(name: &str) -> Result<DriftClass, RunError> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| RunError::Config(format!("unknown drift class {name:?}")))
}

fn bd(c: &RunConfig, root: RngStream) -> Result<ExperimentReport, RunError> {
    let s = space(c)?;
    let zero = SpectralField::zeros(&s);
    let potential: Arc<dyn Potential> = match c.potential.as_str() {
        "linear" => Arc::new(LinearPotential { a: c.a }),
        "soft" => Arc::new(SoftCutoffPotential { phi: zero, params: c.gibbs() }),
        _ => Arc::new(SmoothedPotential { phi: zero, params: c.gibbs() }),
    };
    let obj = BdObjective::new(potential, &s, TimeGrid::default(), c.samples);
    let config = OptConfig { epochs: c.epochs, ..OptConfig::default() };
    let result = bd_optimize(&obj, drift_class(&c.drift)?, &config, &root.named("bd-optimize"))?;
    let lp = log_partition(&s, |u| obj.potential.value(u), 10 * c.samples, &root.named("log-partition"))?;
    let mut r = ExperimentReport::new("bd-optimize", params_json(c), c.seed);
    r.params["potential"] = c.potential.clone().into();
    r.params["drift"] = c.drift.clone().into();
    r.params["a"] = c.a.into();
    for t in &result.trace {
        let e = McEstimate {
            value: t.objective,
            std_error: t.std_error,
            ess: c.samples as f64,
            n_samples: c.samples,
            estimator: gibbs_lsi::mc::Estimator::Importance,
        };
        r.push_estimate("trace_objective", t.epoch as f64, &e);
    }
    r.push_estimate("objective", 0.0, &result.estimate);
    if let Some(cost) = result.drift.cost() {
        r.push_exact("cost", 0.0, cost, 0);
    }
    r.push_exact("epsilon_sq", 0.0, result.epsilon_sq, result.estimate.n_samples);
    r.push_estimate("log_partition", 0.0, &lp);
    r.check(
        "objective_below_log_partition",
        result.estimate.value <= lp.value + 5.0 * result.estimate.joint_se(&lp),
        format!("{} vs {}", result.estimate.value, lp.value),
    );
    Ok(r)
}

type Observable = (&'static str, fn(&SpectralField) -> f64);

const INDICATORS: [Observable; 5] = [
    ("re_u0_le_0", |u| (u.coeff(0).re <= 0.0) as u8 as f64),
    ("re_u0_le_half", |u| (u.coeff(0).re <= 0.5) as u8 as f64),
    ("mass_le_1", |u| (u.mass() <= 1.0) as u8 as f64),
    ("mass_le_2", |u| (u.mass() <= 2.0) as u8 as f64),
    ("im_u1_gt_0", |u| (u.coeff(1).im > 0.0) as u8 as f64),
];

fn transfer(c: &RunConfig, root: RngStream) -> Result<ExperimentReport, RunError> {
    let s = space(c)?;
    if s.max_frequency() < 1 {
        return Err(RunError::Config("bd-transfer needs N >= 1".into()));
    }
    let obj = BdObjective::new(Arc::new(LinearPotential { a: c.a }), &s, TimeGrid::default(), c.samples);
    let theta = SpectralField::from_modes(&s, &[(0, Complex64::new(0.5 * c.a, 0.0))])?;
    let drift = DriftPath::constant(&theta, obj.grid);
    let mut r = ExperimentReport::new("bd-transfer", params_json(c), c.seed);
    r.params["a"] = c.a.into();
    for (k, (name, f)) in INDICATORS.iter().enumerate() {
        let t = epsilon_optimizer_transfer(&drift, &obj, f, 1.0, 0.0, &root.named("bd-transfer").child(k as u64))?;
        r.push_estimate(&format!("lhs_{name}"), k as f64, &t.lhs);
        r.push_estimate(&format!("rhs_{name}"), k as f64, &t.rhs);
        r.push_exact(&format!("bound_{name}"), k as f64, t.bound, 0);
        r.assert(&format!("transfer_{name}"), t.holds, format!("|{} - {}| vs {}", t.lhs.value, t.rhs.value, t.bound));
    }
    Ok(r)
}

fn hessian_of_v(c: &RunConfig) -> Result<ExperimentReport, RunError> {
    let s = space(c)?;
    let family = ScalingFamily::new(c.k)?;
    let config = HessianVConfig { p: c.p, k: c.k, r: c.r, sigma: c.sigma, n_samples: c.samples, ..HessianVConfig::default() };
    let mut merged = ExperimentReport::new("hessian-of-v", params_json(c), c.seed);
    let w = unit_direction(&s);
    for &m in &c.m {
        let phi = if m == 0 { SpectralField::zeros(&s) } else { family.field(m, &s) };
        let one = hessian_of_v_check(&phi, &w, &config, c.seed)?;
        for mut row in one.rows {
            row.point = m as f64;
            merged.rows.push(row);
        }
        for mut check in one.checks {
            check.name = format!("{}_M{m}", check.name);
            merged.checks.push(check);
        }
    }
    Ok(merged)
}
