use std::sync::Arc;

use flagkop::connection::DerivativeEngine;
use flagkop::exterior::{Family, GradedElement, Monomial};
use flagkop::linalg::{c, C64};
use flagkop::quadrature::{Domain, QuadratureSpec};
use flagkop::solver::{FormTag, Solver, TestForm};

/// `e^{−|b|²} dz̄`, whose Cauchy-type solution is `(1 − e^{−|z|²})/z`.
fn gaussian_01() -> TestForm {
    let field = Arc::new(|b: &[C64]| Ok(vec![GradedElement::gen(1, Family::Zanti, 1).scale(c((-b[0].norm_sqr()).exp(), 0.0))]));
    TestForm::new(1, (0, 1), "O", 1, FormTag::RandomBump, field)
}

fn solution(z: C64) -> C64 {
    (1.0 - (-z.norm_sqr()).exp()) / z
}

fn u_at(order: usize, z: C64) -> (C64, f64) {
    let s = Solver::new(&"1,2:2".parse().unwrap(), DerivativeEngine::default(), QuadratureSpec::default().with_order(order));
    let est = s.integrate_k(&[z], Domain::Whole, &gaussian_01()).unwrap();
    (est.value[0].coefficient(Monomial::ONE), est.error)
}

#[test]
fn radial_cauchy_transform() {
    for z in [c(0.3, -0.2), c(-1.1, 0.7), c(2.5, 0.4), c(0.01, 0.02)] {
        let (u, _) = u_at(32, z);
        assert!((u - solution(z)).norm() < 1e-6 * solution(z).norm().max(1.0), "{z}: {u} vs {}", solution(z));
    }
}

#[test]
fn refinement_reduces_the_error() {
    let z = c(0.7, 0.4);
    let errs: Vec<f64> = [8, 16, 32].iter().map(|&o| (u_at(o, z).0 - solution(z)).norm()).collect();
    assert!(errs[2] < errs[0], "{errs:?}");
    let (u, est) = u_at(16, z);
    assert!((u - solution(z)).norm() <= est.max(1e-12));
}
