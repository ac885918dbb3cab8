use plaplab::bubble::{pde_residual, transform};
use plaplab::extraction::{lambda_from_p_bar, Schedule};
use plaplab::kappa::induced_kappa;
use plaplab::lab::loglog_slope;
use plaplab::optimize::golden_section;
use plaplab::pfunction::{c_of_rho, matrix_inequality_check, p_function, v_of_u};
use plaplab::{KappaField, Params, RadialField};
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = Params> {
    (3usize..10, 0.0f64..1.0).prop_map(|(n, s)| {
        let p = 1.2 + s * (n as f64 - 1.4);
        Params::new(n, p).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bubbles_solve_the_equation(params in params_strategy(), lambda in 0.1f64..10.0, r in 1e-2f64..1e2) {
        let u = RadialField::bubble(&params, lambda);
        prop_assert!(pde_residual(&u, &params, r).unwrap() < 1e-8);
    }

    #[test]
    fn p_function_is_constant_on_bubbles(params in params_strategy(), lambda in 0.2f64..5.0, r in 1e-2f64..1e2) {
        let v = v_of_u(&RadialField::bubble(&params, lambda), &params).unwrap();
        let p_here = p_function(&v, &params, r).unwrap();
        let p_ref = p_function(&v, &params, 1.0).unwrap();
        prop_assert!((p_here - p_ref).abs() < 1e-9 * p_ref);
        // The scale is read back from the constant.
        prop_assert!((lambda_from_p_bar(p_ref, &params) - lambda).abs() < 1e-9 * lambda);
    }

    #[test]
    fn induced_kappa_follows_the_scaling(lambda in 0.3f64..3.0, eps in 0.0f64..0.05, r in 0.05f64..5.0) {
        let params = Params::new(4, 2.0).unwrap();
        let u = RadialField::bubble(&params, 1.0).add(&RadialField::bump(1.0).scale(eps));
        let kappa = induced_kappa(&u, &params).unwrap();
        let scaled = transform(&u, &params, &[], lambda).unwrap();
        let direct = induced_kappa(&scaled, &params).unwrap();
        let pushed = kappa.transform(&params, lambda);
        let (a, b) = (direct.value(r).unwrap(), pushed.value(r).unwrap());
        prop_assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        prop_assert!((kappa.value(lambda * r).unwrap() - b).abs() < 1e-10 * b.abs().max(1.0));
    }

    #[test]
    fn constant_kappa_is_scale_invariant(c in 0.1f64..10.0, lambda in 0.1f64..10.0) {
        let params = Params::new(5, 2.5).unwrap();
        let k = KappaField::constant(c).transform(&params, lambda);
        prop_assert_eq!(k.value(0.7).unwrap(), c);
    }

    #[test]
    fn c_decreases_in_rho(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(c_of_rho(hi) <= c_of_rho(lo));
        prop_assert!((0.0..=1.0).contains(&c_of_rho(lo)));
    }

    #[test]
    fn schedule_tightens_as_the_deficit_shrinks(params in params_strategy(), d in 1e-8f64..0.5, shrink in 1e-3f64..0.9) {
        let big = Schedule::new(d, &params, 0.5, 0.0, 1e300).unwrap();
        let small = Schedule::new(d * shrink, &params, 0.5, 0.0, 1e300).unwrap();
        prop_assert!(small.t_raw < big.t_raw);
        prop_assert!(small.r_big > big.r_big);
        prop_assert!(big.m_exp > 0.0);
    }

    #[test]
    fn golden_section_finds_parabola_minima(c in -3.0f64..3.0, w in 0.1f64..10.0) {
        let m = golden_section(|x| Ok(w * (x - c).powi(2)), -5.0, 5.0, 1e-10, 200).unwrap();
        prop_assert!((m.x - c).abs() < 1e-8);
    }

    #[test]
    fn power_laws_have_exact_slopes(k in -3.0f64..3.0, amp in 1e-3f64..1e3) {
        let x: [f64; 5] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
        let y: Vec<f64> = x.iter().map(|e| amp * e.powf(k)).collect();
        let fit = loglog_slope("power law", &x, &y).unwrap();
        prop_assert!((fit.slope - k).abs() < 1e-9);
        prop_assert!(fit.dropped.is_none());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn matrix_inequalities_hold_for_any_seed(seed in any::<u64>(), dim in 2usize..7) {
        let rep = matrix_inequality_check(dim, 200, seed, 1e-10);
        prop_assert!(rep.passed(), "{:?}", rep);
    }
}
