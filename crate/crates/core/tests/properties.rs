use gibbs_lsi::experiments::{lsi_bracket, Dim2Cutoff, Dim2Params};
use gibbs_lsi::hessian::{HessianOperator, RegularizedHamiltonianParams};
use gibbs_lsi::measures::{
    log_weight_polynomial, log_weight_sharp, log_weight_smoothed, log_weight_soft, sample_mu, GibbsParams,
};
use gibbs_lsi::mc::estimate_reweighted;
use gibbs_lsi::spectral::japanese_bracket;
use gibbs_lsi::{RngStream, SpectralField, SpectralSpace};
use proptest::prelude::*;

fn field(n: usize, seed: u64, scale: f64) -> SpectralField {
    let s = SpectralSpace::new(n);
    &sample_mu(&s, &mut RngStream::new(seed, 0).rng()) * scale
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_even_and_at_least_one(n in -10_000i64..10_000) {
        prop_assert_eq!(japanese_bracket(n), japanese_bracket(-n));
        prop_assert!(japanese_bracket(n) >= 1.0);
    }

    #[test]
    fn parseval_and_p2_quadrature(n in 0usize..40, seed in any::<u64>(), scale in 0.01f64..10.0) {
        let u = field(n, seed, scale);
        let grid: f64 = u.grid_values().iter().map(|z| z.norm_sqr()).sum::<f64>() / u.space().grid_size() as f64;
        prop_assert!((grid - u.mass()).abs() <= 1e-10 * u.mass().max(1e-300));
        prop_assert!(close(u.lp_norm_p(2.0).unwrap(), u.mass(), 1e-10));
    }

    #[test]
    fn projection_is_an_orthogonal_idempotent(n in 1usize..30, m in 0usize..30, a in any::<u64>(), b in any::<u64>()) {
        let m = m.min(n);
        let (u, v) = (field(n, a, 1.0), field(n, b, 1.0));
        let pu = u.project(m).unwrap();
        prop_assert_eq!(pu.project(m).unwrap(), pu.clone());
        let resid = &u - &pu.embed(u.space());
        let pv = v.project(m).unwrap().embed(v.space());
        prop_assert_eq!(resid.real_inner(&pv).unwrap(), 0.0);
    }

    #[test]
    fn holder_monotonicity(n in 0usize..24, seed in any::<u64>(), p in 2.0f64..8.0) {
        let u = field(n, seed, 1.0);
        let l2 = u.mass().sqrt();
        let lp = u.lp_norm_p(p).unwrap().powf(1.0 / p);
        prop_assert!(l2 <= lp * (1.0 + 1e-10));
    }

    #[test]
    fn log_weights_are_phase_and_translation_invariant(
        seed in any::<u64>(),
        theta in -3.2f64..3.2,
        shift in 0i32..64,
        p in 2.0f64..6.0,
    ) {
        let u = field(6, seed, 0.4);
        let s = u.space().clone();
        let zero = SpectralField::zeros(&s);
        let a = std::f64::consts::TAU * shift as f64 / s.grid_size() as f64;
        let params = GibbsParams { p, k: 1.0, n: 6, ..Default::default() };
        let weights: [&dyn Fn(&SpectralField) -> f64; 4] = [
            &|v| log_weight_sharp(v, &zero, &params),
            &|v| log_weight_soft(v, &zero, &params),
            &|v| log_weight_polynomial(v, &params),
            &|v| log_weight_smoothed(v, &zero, &params),
        ];
        for w in weights {
            let base = w(&u);
            for moved in [u.rotate_phase(theta), u.translate(a)] {
                let x = w(&moved);
                prop_assert!(base == x || close(base, x, 1e-9), "{base} vs {x}");
            }
        }
    }

    #[test]
    fn hessian_is_symmetric_and_dominated_by_majorant(
        a in any::<u64>(),
        b in any::<u64>(),
        c in any::<u64>(),
        p in 2.0f64..6.0,
        scale in 0.1f64..2.0,
    ) {
        let u = field(5, a, scale);
        let (v, w) = (field(5, b, 1.0), field(5, c, 1.0));
        let params = RegularizedHamiltonianParams { p, k: 1.0, lambda: 0.5, r: 10.0 };
        let op = HessianOperator::new(&u, &params);
        let x = op.apply(&v).real_inner(&w).unwrap();
        let y = op.apply(&w).real_inner(&v).unwrap();
        prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(y.abs()).max(1.0));
        let exact = op.focusing_form(&w);
        let majorant = op.focusing_majorant(&w);
        prop_assert!(exact <= majorant + 1e-10 * majorant.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn self_normalized_constant_is_exactly_one(seed in any::<u64>(), n in 0usize..6, k in 0.5f64..4.0) {
        let s = SpectralSpace::new(n);
        let zero = SpectralField::zeros(&s);
        let params = GibbsParams { p: 4.0, k, n, ..Default::default() };
        let est = estimate_reweighted(&s, |_| 1.0, |u| log_weight_soft(u, &zero, &params), 256, &RngStream::new(seed, 3)).unwrap();
        prop_assert_eq!(est.value, 1.0);
        prop_assert!(est.ess <= 256.0 * (1.0 + 1e-12));
        prop_assert!(est.std_error >= 0.0);
    }

    #[test]
    fn identical_streams_give_identical_estimates(seed in any::<u64>(), id in any::<u64>()) {
        let s = SpectralSpace::new(3);
        let run = || estimate_reweighted(&s, |u| u.mass(), |u| -u.mass(), 200, &RngStream::new(seed, id)).unwrap();
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn lsi_bracket_is_ordered(p in 2.0f64..5.5, lambda in 0.0f64..3.0, k in 0.5f64..3.0, sharp in any::<bool>()) {
        let cutoff = if sharp { Dim2Cutoff::Sharp { k } } else { Dim2Cutoff::Polynomial { r: 10.0, k } };
        let params = Dim2Params { p, lambda, cutoff, focusing: true };
        let b = lsi_bracket(&params, 80, 32).unwrap();
        prop_assert!(b.lower > 0.0);
        prop_assert!(b.lower <= b.upper * (1.0 + 1e-3), "{b:?}");
    }
}
