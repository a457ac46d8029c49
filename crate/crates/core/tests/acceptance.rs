use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use flagkop::cli::{self, RunConfig};
use flagkop::connection::{DerivativeEngine, Directions, FdScheme};
use flagkop::diagonal::DiagonalModel;
use flagkop::exterior::{Family, GradedElement};
use flagkop::flagspace::{sample_coords, FlagType};
use flagkop::kernels::{dzeta_coefficient, Kernels};
use flagkop::linalg::{c, C64, ONE};
use flagkop::quadrature::{integrate_mc, CompensatedSum, Domain, QuadMethod, QuadratureSpec};
use flagkop::solver::{ExperimentReport, Solver, TestForm};
use flagkop::weights::{check_axioms, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn flag(s: &str) -> FlagType {
    s.parse().unwrap()
}

fn config(flag: &str, points: usize, order: usize) -> RunConfig {
    let mut cfg = RunConfig { flag: flag.into(), points, ..Default::default() };
    cfg.quadrature.order = order;
    cfg
}

fn worst(report: &ExperimentReport, quantity: &str) -> f64 {
    report.records.iter().filter(|r| r.quantity == quantity).map(|r| r.residual).fold(0.0, f64::max)
}

fn diagonal_property() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for f in ["1,2:2", "1,2,3:3", "2,4:4"] {
        let mut cfg = config(f, 1, 2);
        cfg.pairs = 1000;
        cfg.seed = 42;
        let report = cli::verify_diagonal(&cfg).unwrap();
        let diag = report
            .records
            .iter()
            .flat_map(|r| r.terms.iter().filter(|t| t.term == "eta_diag").map(|t| t.re))
            .fold(0.0, f64::max);
        let nullity_checks = report.records.iter().filter(|r| r.terms.iter().any(|t| t.term == "nullity")).count();
        let min_norm = report.records.iter().map(|r| r.value[0]).fold(f64::INFINITY, f64::min);
        ok &= report.passed() && report.records.len() == 1000 && nullity_checks == 100 && diag < 1e-12 && min_norm > 0.0;
        notes.push(format!("{f}: diag {diag:.1e}, min|eta| {min_norm:.2e}, ratio dev {:.1e}", report.max_residual()));
    }
    outcome(ok, notes.join("; "))
}

fn omega(fam: (Family, Family), w: C64) -> GradedElement {
    let g = &GradedElement::gen(1, fam.0, 1) * &GradedElement::gen(1, fam.1, 1);
    g.scale(c(0.0, 1.0 / (2.0 * PI)) / (1.0 + w.norm_sqr()).powi(2))
}

fn chern_form() -> Outcome {
    let engine = DerivativeEngine::default();
    let p1 = flag("1,2:2");
    let k1 = Kernels::new(&p1, engine);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut closed = 0.0f64;
    for _ in 0..100 {
        let z = sample_coords(&p1, &mut rng);
        let w = sample_coords(&p1, &mut rng);
        let p = k1.kernel_p(&z, &w, Directions::BOTH).unwrap();
        let expect = &omega((Family::Zhol, Family::Zanti), z[0]) + &omega((Family::Whol, Family::Wanti), w[0]);
        closed = closed.max(p.scalar().distance(&expect) / expect.max_abs());
    }
    let p2 = flag("1,3:3");
    let k2 = Kernels::new(&p2, engine);
    let mut det = 0.0f64;
    for _ in 0..20 {
        let z = sample_coords(&p2, &mut rng);
        let w = sample_coords(&p2, &mut rng);
        let p = k2.kernel_p(&z, &w, Directions::BOTH).unwrap();
        let d = k2.p_det(&z, &w, Directions::BOTH).unwrap();
        det = det.max(p.scalar().distance(&d) / d.max_abs());
    }
    let one = |n| TestForm::constant(n, ONE);
    let gauss = QuadratureSpec { method: QuadMethod::Gauss, order: 64, ..Default::default() };
    let i1 = Solver::new(&p1, engine, gauss).integrate_p(&[c(0.4, -0.7)], Domain::Whole, &one(1)).unwrap().scalar();
    let mc = QuadratureSpec { method: QuadMethod::Mc, samples: 4000, seed: 1, ..Default::default() };
    let i2 = Solver::new(&p2, engine, mc).integrate_p(&[c(0.4, -0.7), c(-0.2, 0.3)], Domain::Whole, &one(2)).unwrap().scalar();
    let ok = closed < 1e-6 && det < 1e-8 && (i1 - 1.0).norm() < 1e-3 && (i2 - 1.0).norm() < 1e-2;
    outcome(ok, format!("closed form {closed:.1e}, det vs E-top {det:.1e}, int P on P1 {:.2e} off, on P2 {:.2e} off", (i1 - 1.0).norm(), (i2 - 1.0).norm()))
}

fn cauchy_recovery() -> Outcome {
    let k = Kernels::new(&flag("1,2:2"), DerivativeEngine::default());
    let target = ONE / c(0.0, 2.0 * PI);
    let limit = |z: C64, d: C64| {
        let s = k.kernel_k(&[z], &[z + d], Directions::BOTH).unwrap();
        d * dzeta_coefficient(s.scalar(), 1)
    };
    // at the chart origin the regular part of K vanishes to second order
    let mut at_origin = 0.0f64;
    for j in 0..16 {
        let d = C64::from_polar(1e-3, 2.0 * PI * j as f64 / 16.0);
        at_origin = at_origin.max(((limit(c(0.0, 0.0), d) - target) / target).norm());
    }
    // elsewhere the deviation is first order in the distance
    let z = c(0.6, -0.8);
    let d = c(1e-3, 0.0);
    let (e1, e2) = (((limit(z, d) - target) / target).norm(), ((limit(z, d * 0.5) - target) / target).norm());
    let slope = e1 / e2;
    let ok = at_origin < 1e-6 && (slope - 2.0).abs() < 1e-2;
    outcome(ok, format!("rel. err at distance 1e-3 from the origin {at_origin:.6e}, halving ratio elsewhere {slope:.4}"))
}

fn koppelman_identity() -> Outcome {
    let mut cfg = config("1,2:2", 10, 16);
    cfg.seed = 7;
    let on_x = cli::koppelman_check(&cfg).unwrap();
    cfg.domain = "disk".into();
    cfg.points = 3;
    let disk = cli::koppelman_check(&cfg).unwrap();
    let by_form = |name: &str| {
        on_x.records.iter().filter(|r| r.bundle.ends_with(name)).map(|r| r.residual).fold(0.0, f64::max)
    };
    let ok = on_x.passed() && disk.passed() && on_x.records.len() == 30 && on_x.max_residual() < 1e-2 && disk.max_residual() < 1e-2;
    outcome(
        ok,
        format!(
            "X: one {:.1e}, omega {:.1e}, dbar psi {:.1e}; unit disk {:.1e}",
            by_form(":one"),
            by_form(":omega"),
            by_form(":dbar_psi"),
            disk.max_residual()
        ),
    )
}

fn weight_axioms() -> Outcome {
    let engine = DerivativeEngine::default();
    let mut cases: Vec<(String, FlagType, Weight)> = Vec::new();
    for f in ["1,2:2", "2,4:4", "1,2,3:3"] {
        let ft = flag(f);
        for i in 1..ft.levels() {
            cases.push((format!("{f} H:{i}"), ft.clone(), Weight::tautological(&ft, i).unwrap()));
        }
    }
    for (f, d) in [("1,2:2", 1), ("2,4:4", 2)] {
        let ft = flag(f);
        let h = Weight::tautological(&ft, 1).unwrap();
        let line = h.exterior_power(d).unwrap();
        cases.push((format!("{f} wedge^{d}"), ft.clone(), line.clone()));
        cases.push((format!("{f} dual"), ft.clone(), h.dual().unwrap()));
        cases.push((format!("{f} tensor"), ft.clone(), h.tensor(&h.dual().unwrap())));
        cases.push((format!("{f} power -2"), ft.clone(), line.power(-2).unwrap()));
        cases.push((format!("{f} power 3"), ft.clone(), line.power(3).unwrap()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut nabla, mut diag) = (0.0f64, 0.0f64);
    let mut worst_case = String::new();
    for (name, ft, w) in &cases {
        let model = DiagonalModel::big_cell(ft);
        for _ in 0..3 {
            let z = sample_coords(ft, &mut rng);
            let zeta = sample_coords(ft, &mut rng);
            let rep = check_axioms(w, &model, &engine, &z, &zeta).unwrap();
            if rep.max_residual() > nabla {
                nabla = rep.max_residual();
                worst_case = name.clone();
            }
            diag = diag.max(rep.diagonal);
        }
    }
    outcome(nabla < 1e-6 && diag < 1e-10, format!("{} weights, nabla_eta g {nabla:.1e} (worst {worst_case}), g00 - Id {diag:.1e}", cases.len()))
}

fn vanishing() -> Outcome {
    let engine = DerivativeEngine::default();
    let quad = QuadratureSpec { order: 16, ..Default::default() };
    let p1 = flag("1,2:2");
    let points = flagkop::solver::sample_points(1, 4, 1.5, 3);
    let mut notes = Vec::new();
    let mut ok = true;
    for r in [0, -1, -2, 2] {
        let ctx = flagkop::solver::RecordContext {
            instance: "1,2:2".into(),
            command: "vanishing".into(),
            bundle: format!("L:1^{r}"),
            seed: 3,
            tolerance: 1e-2,
        };
        let rep = flagkop::solver::vanishing_experiment(&p1, 1, r, engine, quad.clone(), &points, &ctx).unwrap();
        ok &= rep.passed();
        if r >= 2 {
            let obstruction = rep.records.iter().map(|x| x.value[0]).fold(f64::INFINITY, f64::min);
            ok &= obstruction >= 0.1;
            notes.push(format!("r={r} obstruction {obstruction:.3}"));
        } else {
            notes.push(format!("r={r} {:.1e}", rep.max_residual()));
        }
    }
    outcome(ok, notes.join(", "))
}

fn harmonic_projector() -> Outcome {
    let mut cfg = config("1,2:2", 4, 16);
    cfg.seed = 11;
    let rep = cli::harmonic_check(&cfg).unwrap();
    let ok = rep.passed() && ["reproduce_omega", "annihilate_exact", "idempotence", "range_rank"].iter().all(|q| rep.records.iter().any(|r| r.quantity == *q));
    outcome(
        ok,
        format!(
            "reproduce {:.1e}, annihilate {:.1e}, idempotence {:.1e}, second/first singular value {:.1e}",
            worst(&rep, "reproduce_omega"),
            worst(&rep, "annihilate_exact"),
            worst(&rep, "idempotence"),
            worst(&rep, "range_rank")
        ),
    )
}

/// Observed order for `∂̄[e^{2w̄}(1 + |w|²)]`, which is neither holomorphic
/// nor antiholomorphic, so no error terms cancel by symmetry.
fn fd_order(scheme: FdScheme) -> f64 {
    let w = c(0.3, -0.2);
    let f = |x: C64| (x.conj() * 2.0).exp() * (1.0 + x.norm_sqr());
    let exact = (w.conj() * 2.0).exp() * (2.0 * (1.0 + w.norm_sqr()) + w);
    let err = |h: f64| {
        let e = DerivativeEngine::new(h, scheme).unwrap();
        (e.holo_partial(f, w).1 - exact).norm()
    };
    (err(1e-2) / err(5e-3)).log2()
}

fn numerics_hygiene() -> Outcome {
    let (o2, o4) = (fd_order(FdScheme::Central2), fd_order(FdScheme::Richardson4));
    let spec = QuadratureSpec { method: QuadMethod::Mc, samples: 2000, seed: 99, ..Default::default() };
    let f = |b: &[C64]| -> flagkop::Result<Vec<GradedElement>> {
        let g = &GradedElement::gen(1, Family::Whol, 1) * &GradedElement::gen(1, Family::Wanti, 1);
        Ok(vec![g.scale(c((-b[0].norm_sqr()).exp(), 0.0))])
    };
    let a = integrate_mc(1, &spec, f).unwrap();
    let b = integrate_mc(1, &spec, f).unwrap();
    let other = integrate_mc(1, &QuadratureSpec { seed: 100, ..spec.clone() }, f).unwrap();
    let deterministic = a == b && a.value != other.value;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let eps = f64::EPSILON / 2.0;
    let mut bound_ok = true;
    let mut worst_ratio = 0.0f64;
    for _ in 0..20 {
        let n = 10_000;
        let xs: Vec<C64> = (0..n)
            .map(|_| {
                let mag = 10f64.powf(rng.random_range(-8.0..8.0));
                c(if rng.random::<bool>() { mag } else { -mag }, 0.0)
            })
            .collect();
        let s1: CompensatedSum = xs.iter().cloned().collect();
        let mut shuffled = xs.clone();
        for i in (1..n).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let s2: CompensatedSum = shuffled.into_iter().collect();
        let abs_sum: f64 = xs.iter().map(|x| x.norm()).sum();
        let bound = 4.0 * eps * s1.value().norm() + 4.0 * n as f64 * eps * eps * abs_sum;
        let diff = (s1.value() - s2.value()).norm();
        bound_ok &= diff <= bound;
        worst_ratio = worst_ratio.max(diff / bound);
    }
    let ok = o2 >= 1.8 && o4 >= 3.5 && deterministic && bound_ok;
    outcome(ok, format!("FD orders central2 {o2:.2}, richardson4 {o4:.2}; MC deterministic {deterministic}; reassociation within bound {bound_ok} (worst {worst_ratio:.2} of bound)"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("diagonal property", diagonal_property),
        ("chern form", chern_form),
        ("cauchy kernel recovery", cauchy_recovery),
        ("koppelman identity", koppelman_identity),
        ("weight axioms", weight_axioms),
        ("vanishing", vanishing),
        ("harmonic projector", harmonic_projector),
        ("numerics hygiene", numerics_hygiene),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = run();
        let took: Duration = t0.elapsed();
        failed += usize::from(!o.passed);
        println!("criterion {} {name}: {} ({}) [{:.1} s]", k + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail, took.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
