//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! (visible with `--nocapture`) and then asserts it.

use std::sync::Arc;
use std::time::Instant;

use gibbs_lsi::boue_dupuis::{
    bd_objective, bd_optimize, epsilon_optimizer_transfer, BdObjective, DriftClass, DriftPath, LinearPotential,
    OptConfig, TimeGrid,
};
use gibbs_lsi::experiments::{
    blowup_scan, convexity_scan, hessian_of_v_check, lsi_bracket, n_stability_check, tv_r_scan, unit_direction,
    BlowupConfig, ConvexityConfig, Dim2Cutoff, Dim2Params, ExperimentReport, HessianVConfig, NStabilityConfig,
    ScalingFamily, TvScanConfig,
};
use gibbs_lsi::hessian::{hessian_apply_exact, regularized_hamiltonian, RegularizedHamiltonianParams};
use gibbs_lsi::mc::log_partition;
use gibbs_lsi::measures::{expected_mass, sample_mu};
use gibbs_lsi::spectral::japanese_bracket;
use gibbs_lsi::{RngStream, SpectralField, SpectralSpace};
use num_complex::Complex64;

fn verdict(id: u32, name: &str, passed: bool, detail: &str, started: Instant) -> bool {
    println!(
        "criterion {id} [{name}]: {} ({detail}; {:.1}s)",
        if passed { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    passed
}

fn failing_checks(r: &ExperimentReport) -> Vec<String> {
    r.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect()
}

#[test]
fn criterion_1_gaussian_base_measure() {
    let t = Instant::now();
    let s = SpectralSpace::new(16);
    let n = 100_000;
    let stream = RngStream::new(1, 0).named("acceptance-1");
    let d = s.dim();
    // Running sums of products and their squares, real and imaginary parts.
    let mut sum = vec![Complex64::new(0.0, 0.0); d * d];
    let mut sq_re = vec![0.0; d * d];
    let mut sq_im = vec![0.0; d * d];
    let mut masses = Vec::with_capacity(n);
    for i in 0..n {
        let u = sample_mu(&s, &mut stream.substream(i as u64));
        let c = u.coeffs();
        for a in 0..d {
            for b in 0..d {
                let x = c[a] * c[b].conj();
                sum[a * d + b] += x;
                sq_re[a * d + b] += x.re * x.re;
                sq_im[a * d + b] += x.im * x.im;
            }
        }
        masses.push(u.mass());
    }
    let nf = n as f64;
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let k = a * d + b;
            let mean = sum[k] / nf;
            let target = if a == b { 1.0 / japanese_bracket(s.frequency_at(a)).powi(2) } else { 0.0 };
            let se_re = ((sq_re[k] / nf - mean.re * mean.re) / nf).sqrt();
            let se_im = ((sq_im[k] / nf - mean.im * mean.im) / nf).sqrt();
            worst = worst.max((mean.re - target).abs() / se_re);
            if se_im > 0.0 {
                worst = worst.max(mean.im.abs() / se_im);
            }
        }
    }
    let m_mean = masses.iter().sum::<f64>() / nf;
    let m_var = masses.iter().map(|m| (m - m_mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let m_z = (m_mean - expected_mass(16)).abs() / (m_var / nf).sqrt();
    let ok = worst <= 5.0 && m_z <= 3.0;
    let detail = format!("max covariance z = {worst:.2}, mass z = {m_z:.2}");
    assert!(verdict(1, "gaussian base measure", ok, &detail, t), "{detail}");
}

#[test]
fn criterion_2_hessian_correctness() {
    let t = Instant::now();
    let s = SpectralSpace::new(8);
    let stream = RngStream::new(2, 0).named("acceptance-2");
    let (mut pairs, mut worst_fd, mut worst_sym) = (0, 0.0f64, 0.0f64);
    let mut k = 0u64;
    while pairs < 100 {
        let p = [2.0, 3.0, 4.0, 5.0][(k % 4) as usize];
        let pr = RegularizedHamiltonianParams { p, k: 1.0, lambda: 0.7, r: 1.0 };
        let u = &sample_mu(&s, &mut stream.substream(3 * k)) * (0.3 + 0.2 * (k % 6) as f64);
        let w = sample_mu(&s, &mut stream.substream(3 * k + 1));
        let v = sample_mu(&s, &mut stream.substream(3 * k + 2));
        k += 1;
        let eps = 1e-4;
        // Away from the kink of the penalty along the whole stencil.
        let reach = 2.0 * u.mass().sqrt() * w.mass().sqrt() * eps + w.mass() * eps * eps;
        if (u.mass() - pr.k).abs() <= 10.0 * reach {
            continue;
        }
        let h = |x: &SpectralField| regularized_hamiltonian(x, &pr);
        let fd = (h(&(&u + &(&w * eps))) - 2.0 * h(&u) + h(&(&u - &(&w * eps)))) / (eps * eps);
        let hw = hessian_apply_exact(&u, &w, &pr).unwrap();
        let form = hw.real_inner(&w).unwrap();
        worst_fd = worst_fd.max((fd - form).abs() / form.abs());
        let hv = hessian_apply_exact(&u, &v, &pr).unwrap();
        let (a, b) = (hw.real_inner(&v).unwrap(), hv.real_inner(&w).unwrap());
        worst_sym = worst_sym.max((a - b).abs() / (1.0 + a.abs()));
        pairs += 1;
    }
    let ok = worst_fd <= 1e-4 && worst_sym <= 1e-10;
    let detail = format!("{pairs} pairs, max FD relative error {worst_fd:.2e}, max asymmetry {worst_sym:.2e}");
    assert!(verdict(2, "hessian correctness", ok, &detail, t), "{detail}");
}

#[test]
fn criterion_3_convexity_surrogate() {
    let t = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for p in [2.0, 3.0, 4.0] {
        let cfg = ConvexityConfig { p, k: 1.0, r: 1.0, n: 8, ..ConvexityConfig::default() };
        let r = convexity_scan(&cfg, 3).unwrap();
        let eig = r.row("min_eigenvalue", 0.0).unwrap().value;
        let ls = r.row("ls_bound", 0.0).unwrap().value;
        ok &= eig >= 1.0 - 1e-6 && ls <= 2.0 + 1e-5 && r.passed();
        detail.push(format!("p={p}: min eigenvalue {eig:.4}, LS <= {ls:.4}"));
    }
    let detail = detail.join("; ");
    assert!(verdict(3, "convexity surrogate", ok, &detail, t), "{detail}");
}

#[test]
fn criterion_4_boue_dupuis_benchmark() {
    let t = Instant::now();
    let s = SpectralSpace::new(2);
    let grid = TimeGrid::new(16).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, a) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let obj = BdObjective::new(Arc::new(LinearPotential { a }), &s, grid, 2000);
        let stream = RngStream::new(4, k as u64);
        let r = bd_optimize(&obj, DriftClass::DeterministicConstant, &OptConfig::default(), &stream.named("optimize")).unwrap();
        let lp = log_partition(&s, |u| obj.potential.value(u), 200_000, &stream.named("partition")).unwrap();
        let target = a * a / 4.0;
        let opt_ok = (r.estimate.value - target).abs() <= 3.0 * r.estimate.std_error + 1e-3;
        let lp_ok = (lp.value - target).abs() <= 3.0 * lp.std_error + 1e-3;
        ok &= opt_ok && lp_ok;
        detail.push(format!("a={a}: J={:.4}±{:.4}, log Z={:.4}±{:.4}, exact {target}", r.estimate.value, r.estimate.std_error, lp.value, lp.std_error));
    }
    let a = 1.0;
    let obj = BdObjective::new(Arc::new(LinearPotential { a }), &s, grid, 2000);
    let stream = RngStream::new(4, 9);
    let lp = log_partition(&s, |u| obj.potential.value(u), 200_000, &stream.named("partition")).unwrap();
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..20u64 {
        let rng_field = |j: u64, scale: f64| &sample_mu(&s, &mut stream.named("drift").child(i).substream(j)) * scale;
        let scale = 0.2 + 0.1 * (i % 7) as f64;
        let drift = match i % 3 {
            0 => DriftPath::constant(&rng_field(0, scale), grid),
            1 => DriftPath::time_dependent(&(0..grid.steps()).map(|j| rng_field(j as u64, scale)).collect::<Vec<_>>()).unwrap(),
            _ => {
                let gains: Vec<Vec<Complex64>> =
                    (0..grid.steps()).map(|j| rng_field(100 + j as u64, 0.3 * scale).coeffs().to_vec()).collect();
                let offsets: Vec<SpectralField> = (0..grid.steps()).map(|j| rng_field(j as u64, scale)).collect();
                DriftPath::linear_feedback(&gains, &offsets).unwrap()
            }
        };
        let j = bd_objective(&drift, &obj, &stream.named("objective").child(i)).unwrap();
        worst = worst.max((j.value - lp.value) / j.joint_se(&lp));
        ok &= j.value <= lp.value + 5.0 * j.joint_se(&lp);
    }
    detail.push(format!("20 random drifts: max (J - log Z)/joint s.e. = {worst:.2}"));
    let detail = detail.join("; ");
    assert!(verdict(4, "boue-dupuis benchmark", ok, &detail, t), "{detail}");
}

#[test]
fn criterion_5_epsilon_optimizer_transfer() {
    let t = Instant::now();
    let s = SpectralSpace::new(2);
    let a = 1.0;
    let obj = BdObjective::new(Arc::new(LinearPotential { a }), &s, TimeGrid::new(16).unwrap(), 100_000);
    let theta = SpectralField::from_modes(&s, &[(0, Complex64::new(0.5 * a, 0.0))]).unwrap();
    let drift = DriftPath::constant(&theta, obj.grid);
    let observables: [(&str, Box<dyn Fn(&SpectralField) -> f64 + Sync>); 5] = [
        ("Re u(0) <= 0", Box::new(|u| (u.coeff(0).re <= 0.0) as u8 as f64)),
        ("Re u(0) <= 0.5", Box::new(|u| (u.coeff(0).re <= 0.5) as u8 as f64)),
        ("mass <= 1", Box::new(|u| (u.mass() <= 1.0) as u8 as f64)),
        ("mass <= 2", Box::new(|u| (u.mass() <= 2.0) as u8 as f64)),
        ("Im u(1) > 0", Box::new(|u| (u.coeff(1).im > 0.0) as u8 as f64)),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, (name, f)) in observables.iter().enumerate() {
        let r = epsilon_optimizer_transfer(&drift, &obj, f, 1.0, 0.0, &RngStream::new(5, k as u64)).unwrap();
        ok &= r.holds;
        detail.push(format!("{name}: {:.4} vs {:.4}", r.lhs.value, r.rhs.value));
    }
    let detail = detail.join("; ");
    assert!(verdict(5, "epsilon-optimizer transfer", ok, &detail, t), "{detail}");
}

#[test]
fn criterion_6_blowup_scan() {
    let t = Instant::now();
    let cfg = BlowupConfig { p: 5.0, k: 1.0, m_list: vec![1, 2, 4, 8, 16], ..BlowupConfig::default() };
    let r = blowup_scan(&cfg, 6).unwrap();
    let slope = r.fits.iter().find(|f| f.quantity == "estimate").map(|f| f.slope).unwrap_or(f64::NAN);
    let required = |name: &str| name.starts_with("nondecreasing") || name.starts_with("reliable_ess") || name == "slope_at_least_0.3";
    let failed: Vec<String> = failing_checks(&r).into_iter().filter(|c| required(c.split(':').next().unwrap())).collect();
    let ok = failed.is_empty() && slope >= 0.3;
    let values: Vec<String> = r.rows_of("estimate").map(|x| format!("M={}: {:.3e}±{:.1e}", x.point, x.value, x.std_error)).collect();
    let detail = format!("slope {slope:.3}; {}; failed: [{}]", values.join(", "), failed.join("; "));
    assert!(verdict(6, "blow-up scan", ok, &detail, t), "{detail}");
}

#[test]
fn criterion_7_hessian_of_v() {
    let t = Instant::now();
    let s = SpectralSpace::new(16);
    let family = ScalingFamily::new(1.0).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for m in [0, 2, 4] {
        let phi = if m == 0 { SpectralField::zeros(&s) } else { family.field(m, &s) };
        let r = hessian_of_v_check(&phi, &unit_direction(&s), &HessianVConfig::default(), 7).unwrap();
        let passed = |n: &str| r.check_named(n).unwrap().passed;
        ok &= passed("routes_agree") && passed("finite_difference_above_const_1_bound") && passed("decomposition_above_const_1_bound");
        let v = |q: &str| r.row(q, 0.0).unwrap().value;
        let se = |q: &str| r.row(q, 0.0).unwrap().std_error;
        detail.push(format!(
            "phi_{m}: fd {:.3}±{:.3}, decomposition {:.3}±{:.3}, bound(1) {:.3}, bound(p-1) {:.3}, (p-1) comparison {}",
            v("finite_difference"),
            se("finite_difference"),
            v("decomposition"),
            se("decomposition"),
            v("lower_bound_const_1"),
            v("lower_bound_const_p_minus_1"),
            if passed("finite_difference_above_const_p_minus_1_bound") { "holds" } else { "fails" }
        ));
    }
    let detail = detail.join("; ");
    assert!(verdict(7, "hessian of V", ok, &detail, t), "{detail}");
}

#[test]
fn criterion_8_convergence_structure() {
    let t = Instant::now();
    let tv = tv_r_scan(&TvScanConfig::default(), 8).unwrap();
    let ns = n_stability_check(&NStabilityConfig::default(), 8).unwrap();
    let ok = tv.passed() && tv.checks.iter().all(|c| c.passed) && ns.check_named("top_pair_within_5_joint_se").unwrap().passed;
    let tvs: Vec<String> = tv.rows_of("tv_discrepancy").map(|x| format!("R={}: {:.4}", x.point, x.value)).collect();
    let moments: Vec<String> = ns.rows_of("moment").map(|x| format!("N={}: {:.4e}", x.point, x.value)).collect();
    let detail = format!("TV {}; moments {}; failed {:?}", tvs.join(", "), moments.join(", "), [failing_checks(&tv), failing_checks(&ns)].concat());
    assert!(verdict(8, "convergence structure", ok, &detail, t), "{detail}");
}

#[test]
fn criterion_9_lsi_bracket() {
    let t = Instant::now();
    let g = lsi_bracket(&Dim2Params::gaussian(), 400, 128).unwrap();
    let gauss_ok = (g.lower - 2.0).abs() <= 0.1 && (g.upper - 2.0).abs() <= 0.1;
    let (k, lambda) = (1.0, 2.0);
    let rho = lsi_bracket(&Dim2Params { p: 4.0, lambda: 0.0, cutoff: Dim2Cutoff::Sharp { k }, focusing: true }, 400, 128).unwrap();
    let tilted = lsi_bracket(&Dim2Params { p: 4.0, lambda, cutoff: Dim2Cutoff::Sharp { k }, focusing: true }, 400, 128).unwrap();
    let ordered = rho.lower <= rho.upper && tilted.lower <= tilted.upper;
    // Some LS(ρ) in its bracket and LS(ρ_Λ) in its bracket satisfy both inequalities.
    let f = (lambda * k).exp();
    let equivalence = rho.lower / f <= tilted.upper && tilted.lower <= f * rho.upper;
    let ok = gauss_ok && ordered && equivalence;
    let detail = format!(
        "gaussian [{:.4}, {:.4}]; rho [{:.4}, {}]; rho_Lambda [{:.4}, {:.4}]",
        g.lower, g.upper, rho.lower, rho.upper, tilted.lower, tilted.upper
    );
    assert!(verdict(9, "lsi bracket", ok, &detail, t), "{detail}");
}
