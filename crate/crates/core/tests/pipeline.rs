use plaplab::bubble::{pde_residual, sobolev_level};
use plaplab::deficit::{deficit_report, normalize};
use plaplab::extraction::{extract, ExtractionConfig};
use plaplab::lab::{make_perturbed, sweep, SweepConfig};
use plaplab::norms::{norm, NormKind};
use plaplab::{KappaField, Params, QuadConfig, RadialField};

fn standard() -> (Params, QuadConfig) {
    (Params::new(4, 2.0).unwrap(), QuadConfig::default())
}

#[test]
fn perturbed_bubble_is_recovered() {
    let (params, quad) = standard();
    let eps = 1e-3;
    let pert = make_perturbed(&params, 1.0, eps, 1.0).unwrap();
    let rep = extract(
        &pert.u,
        &pert.kappa,
        &params,
        &quad,
        &ExtractionConfig::default(),
    )
    .unwrap();
    assert!(!rep.schedule_fallback && !rep.peak_off_origin);
    assert!((rep.lambda - 1.0).abs() < 0.05);
    let grad_phi = norm(&pert.phi, &NormKind::GradLp, &params, &quad).unwrap();
    assert!(rep.err_total <= 10.0 * eps * grad_phi, "{rep:?}");
    // The recovered profile is itself an exact solution.
    let ubar = rep.bubble.field(&params);
    for r in [0.1, 1.0, 10.0] {
        assert!(pde_residual(&ubar, &params, r).unwrap() < 1e-8);
    }
}

#[test]
fn deficits_of_a_scaled_bubble() {
    let (params, quad) = standard();
    let level = sobolev_level(&params, &quad).unwrap();
    let u = RadialField::bubble(&params, 1.0).scale(2.0);
    let rep = deficit_report(&u, &KappaField::constant(0.25), &level, &params, &quad).unwrap();
    assert!(rep.deficit_cfm < 1e-12);
    assert!((rep.kappa0 - 0.25).abs() < 1e-12);
    assert!(rep.sobolev_deficit.abs() < 1e-9);
    let normalized = normalize(&u, &KappaField::constant(0.25), &params, &quad).unwrap();
    let w = normalized.w.value(0.0).unwrap();
    assert!((w - RadialField::bubble(&params, 1.0).value(0.0).unwrap()).abs() < 1e-10);
}

#[test]
fn short_sweep_is_deterministic() {
    let (params, _) = standard();
    let cfg = SweepConfig::standard(params, vec![1e-2, 1e-3]);
    let a = sweep(&cfg).unwrap();
    let b = sweep(&cfg).unwrap();
    assert!(a.failures.is_empty());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(format!("{x:?}"), format!("{y:?}"));
    }
    for r in &a.records {
        assert!((r.lhs_norm / (r.epsilon * a.phi_grad_norm) - 1.0).abs() < 1e-8);
        assert!(r.dual_lower_bound <= r.dual_upper_bound);
        assert!(r.projection_distance <= r.lhs_norm * (1.0 + 1e-12));
    }
    assert!(a.c_fit.unwrap() > 0.0);
}
