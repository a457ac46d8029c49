//! End-to-end experiments: the Koppelman identity, explicit solutions of
//! `∂̄u = φ`, and the vanishing of twisted cohomology on `P¹`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::connection::{dwbar, DerivativeEngine, Directions};
use crate::error::{Error, Result};
use crate::exterior::{Family, GradedElement, GradedMatrix, Monomial};
use crate::flagspace::FlagType;
use crate::kernels::Kernels;
use crate::linalg::{c, C64, ZERO};
use crate::quadrature::{
    boundary_integral, dbar_of_integral, integrate_kernel_mc, integrate_kernel_p1, integrate_over_x, integrate_smooth_p1, Domain, Estimate,
    QuadratureSpec,
};
use crate::weights::{BundleDescriptor, Weight};

/// Frame coefficients of a bundle-valued form field in chart coordinates.
pub type Field = Arc<dyn Fn(&[C64]) -> Result<Vec<GradedElement>> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormTag {
    RandomBump,
    DbarOfPotential,
    Invariant,
}

/// A smooth test form on `X` valued in a bundle.
#[derive(Clone)]
pub struct TestForm {
    pub n: usize,
    pub bidegree: (u32, u32),
    pub bundle: String,
    pub rank: usize,
    pub tag: FormTag,
    field: Field,
}

impl fmt::Debug for TestForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestForm")
            .field("n", &self.n)
            .field("bidegree", &self.bidegree)
            .field("bundle", &self.bundle)
            .field("tag", &self.tag)
            .finish()
    }
}

fn fs_weight(b: &[C64]) -> f64 {
    1.0 + b.iter().map(|x| x.norm_sqr()).sum::<f64>()
}

impl TestForm {
    pub fn new(n: usize, bidegree: (u32, u32), bundle: &str, rank: usize, tag: FormTag, field: Field) -> Self {
        TestForm { n, bidegree, bundle: bundle.to_string(), rank, tag, field }
    }

    pub fn eval(&self, z: &[C64]) -> Result<Vec<GradedElement>> {
        (self.field)(z)
    }

    /// Scalar function as a 0-form with values in the trivial bundle.
    pub fn scalar(n: usize, tag: FormTag, f: impl Fn(&[C64]) -> C64 + Send + Sync + 'static) -> Self {
        TestForm::new(n, (0, 0), "O", 1, tag, Arc::new(move |z| Ok(vec![GradedElement::scalar(n, f(z))])))
    }

    pub fn constant(n: usize, value: C64) -> Self {
        TestForm::scalar(n, FormTag::Invariant, move |_| value)
    }

    /// `ω_FS = (i/2π) ∂∂̄ log(1 + |b|²)`, with `∫ ω_FS^n = 1`.
    pub fn fubini_study(n: usize) -> Self {
        let field: Field = Arc::new(move |b| {
            let s = fs_weight(b);
            let mut out = GradedElement::zero(n);
            for j in 0..n {
                for k in 0..n {
                    let delta = if j == k { s } else { 0.0 };
                    let coef = (C64::new(delta, 0.0) - b[j].conj() * b[k]) * c(0.0, 1.0 / (2.0 * PI)) / (s * s);
                    let g = &GradedElement::gen(n, Family::Zhol, j + 1) * &GradedElement::gen(n, Family::Zanti, k + 1);
                    out.axpy(coef, &g);
                }
            }
            Ok(vec![out])
        });
        TestForm::new(n, (1, 1), "O", 1, FormTag::Invariant, field)
    }

    /// `∂̄` of the form, by finite differences in every chart direction.
    pub fn dbar(&self, engine: DerivativeEngine) -> Self {
        let inner = self.field.clone();
        let n = self.n;
        let field: Field = Arc::new(move |z| {
            let mut out: Vec<GradedElement> = Vec::new();
            for nu in 0..n {
                let (_, db) = engine.wirtinger(|q: &[C64]| inner(q), z, nu)?;
                if out.is_empty() {
                    out = vec![GradedElement::zero(n); db.len()];
                }
                let form = dwbar(n, nu);
                for (o, d) in out.iter_mut().zip(&db) {
                    *o += &(&form * d);
                }
            }
            Ok(out)
        });
        TestForm {
            bidegree: (self.bidegree.0, self.bidegree.1 + 1),
            tag: FormTag::DbarOfPotential,
            field,
            ..self.clone()
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: C64, other: &TestForm, b: C64) -> Self {
        let (f, g) = (self.field.clone(), other.field.clone());
        let field: Field = Arc::new(move |z| {
            let (x, y) = (f(z)?, g(z)?);
            Ok(x.iter().zip(&y).map(|(p, q)| &p.scale(a) + &q.scale(b)).collect())
        });
        TestForm { field, ..self.clone() }
    }

    /// Smooth section of `O(m)` on `P¹` in the frame of `L_1^{−m}`, with
    /// coefficient `Σ c b^p b̄^q / (1 + |b|²)^j`; smoothness at infinity
    /// needs `p ≤ j + m` and `q ≤ j`.
    pub fn p1_section(m: i32, terms: Vec<(u32, u32, u32, C64)>) -> Result<Self> {
        for &(p, q, j, _) in &terms {
            if p as i32 > j as i32 + m || q > j {
                return Err(Error::Invalid(format!("b^{p} b̄^{q} / (1+|b|²)^{j} is not a smooth section of O({m})")));
            }
        }
        let bundle = if m == 0 { "O".to_string() } else { format!("L:1^{}", -m) };
        let field: Field = Arc::new(move |b| {
            let x = b[0];
            let s = fs_weight(b);
            let v: C64 = terms.iter().map(|&(p, q, j, cf)| cf * x.powu(p) * x.conj().powu(q) / s.powi(j as i32)).sum();
            Ok(vec![GradedElement::scalar(1, v)])
        });
        Ok(TestForm::new(1, (0, 0), &bundle, 1, FormTag::RandomBump, field))
    }

    /// Random smooth section of `O(m)` on `P¹`.
    pub fn random_p1_section(m: i32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = 1.max(-m) as u32;
        let terms = (0..3)
            .map(|_| {
                let j = base + rng.random_range(0..2u32);
                let p = rng.random_range(0..=(j as i32 + m) as u32);
                let q = rng.random_range(0..=j);
                let cf = c(rng.sample(StandardNormal), rng.sample(StandardNormal)) * 0.5;
                (p, q, j, cf)
            })
            .collect();
        TestForm::p1_section(m, terms).expect("terms chosen within the smoothness bounds")
    }

    /// `b̄^k dz̄ / (1 + |b|²)^r` in the frame of `L_1^r = O(−r)`, a class in
    /// `H^{0,1}(P¹, O(−r))` for `0 ≤ k ≤ r − 2`.
    pub fn p1_h1_representative(r: u32, k: u32) -> Result<Self> {
        if r < 2 || k > r - 2 {
            return Err(Error::Invalid(format!("no representative b̄^{k} for O(-{r})")));
        }
        let field: Field = Arc::new(move |b| {
            let v = b[0].conj().powu(k) / fs_weight(b).powi(r as i32);
            Ok(vec![GradedElement::gen(1, Family::Zanti, 1).scale(v)])
        });
        Ok(TestForm::new(1, (0, 1), &format!("L:1^{r}"), 1, FormTag::Invariant, field))
    }
}

/// One value per `(term, monomial)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermValue {
    pub term: String,
    pub component: usize,
    pub monomial: String,
    pub re: f64,
    pub im: f64,
}

/// One experiment sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub instance: String,
    pub command: String,
    pub bundle: String,
    pub sample: usize,
    pub point: Vec<[f64; 2]>,
    pub quantity: String,
    pub value: [f64; 2],
    pub terms: Vec<TermValue>,
    pub residual: f64,
    pub error_estimate: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: u64,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ExperimentReport {
    pub records: Vec<SampleRecord>,
}

impl ExperimentReport {
    pub fn max_residual(&self) -> f64 {
        self.records.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.passed)
    }

    pub fn extend(&mut self, other: ExperimentReport) {
        self.records.extend(other.records);
    }
}

/// Readable label of a monomial, e.g. `dz1^dzb1^dw1`.
pub fn monomial_label(m: Monomial) -> String {
    if m == Monomial::ONE {
        return "1".into();
    }
    let parts: Vec<String> = m
        .generators()
        .iter()
        .map(|g| {
            let name = match g.family {
                Family::Zhol => "dz",
                Family::Zanti => "dzb",
                Family::Whol => "dw",
                Family::Wanti => "dwb",
                Family::Evec => "e",
                Family::Ecovec => "es",
            };
            format!("{name}{}", g.index)
        })
        .collect();
    parts.join("^")
}

pub fn term_values(term: &str, forms: &[GradedElement]) -> Vec<TermValue> {
    forms
        .iter()
        .enumerate()
        .flat_map(|(k, f)| {
            f.terms().map(move |(m, v)| TermValue {
                term: term.to_string(),
                component: k,
                monomial: monomial_label(*m),
                re: v.re,
                im: v.im,
            })
        })
        .collect()
}

pub fn forms_distance(a: &[GradedElement], b: &[GradedElement]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| match (a.get(k), b.get(k)) {
            (Some(x), Some(y)) => x.distance(y),
            (Some(x), None) | (None, Some(x)) => x.max_abs(),
            _ => 0.0,
        })
        .fold(0.0, f64::max)
}

pub fn forms_norm(a: &[GradedElement]) -> f64 {
    a.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
}

fn sum_forms(parts: &[&[GradedElement]]) -> Vec<GradedElement> {
    let len = parts.iter().map(|p| p.len()).max().unwrap_or(0);
    let n = parts.iter().flat_map(|p| p.first()).map(|f| f.dim()).next().unwrap_or(1);
    let mut out = vec![GradedElement::zero(n); len];
    for p in parts {
        for (o, x) in out.iter_mut().zip(p.iter()) {
            *o += x;
        }
    }
    out
}

/// Principal value of a form family: its largest coefficient.
pub fn principal(forms: &[GradedElement]) -> C64 {
    forms
        .iter()
        .flat_map(|f| f.terms().map(|(_, v)| *v))
        .fold(ZERO, |acc, v| if v.norm() > acc.norm() { v } else { acc })
}

/// The four terms of the Koppelman formula at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct KoppelmanTerms {
    pub phi: Vec<GradedElement>,
    pub boundary: Vec<GradedElement>,
    pub k_dbar_phi: Vec<GradedElement>,
    pub dbar_k_phi: Vec<GradedElement>,
    pub p_phi: Vec<GradedElement>,
    pub residual: f64,
    pub error_estimate: f64,
}

impl KoppelmanTerms {
    pub fn term_values(&self) -> Vec<TermValue> {
        let mut out = term_values("phi", &self.phi);
        out.extend(term_values("boundary", &self.boundary));
        out.extend(term_values("k_dbar_phi", &self.k_dbar_phi));
        out.extend(term_values("dbar_k_phi", &self.dbar_k_phi));
        out.extend(term_values("p_phi", &self.p_phi));
        out
    }
}

/// Result of `u = ∫ K_g ∧ φ` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveSample {
    pub u: Vec<GradedElement>,
    pub dbar_u: Vec<GradedElement>,
    pub phi: Vec<GradedElement>,
    pub p_term: Vec<GradedElement>,
    /// `‖∂̄u − φ + ∫P_g∧φ‖`.
    pub identity_residual: f64,
    /// `‖∂̄u − φ‖`.
    pub solve_residual: f64,
    pub error_estimate: f64,
}

/// Kernels, weight and numerical parameters for the integral operators.
#[derive(Debug, Clone)]
pub struct Solver {
    pub kernels: Kernels,
    pub weight: Weight,
    pub quad: QuadratureSpec,
    /// Step of the outer `∂̄_z` of integrals.
    pub outer_step: f64,
    pub boundary_points: usize,
}

impl Solver {
    pub fn new(flag: &FlagType, engine: DerivativeEngine, quad: QuadratureSpec) -> Self {
        Solver { kernels: Kernels::new(flag, engine), weight: Weight::trivial(), quad, outer_step: 1e-2, boundary_points: 256 }
    }

    pub fn with_weight(mut self, weight: Weight) -> Self {
        self.weight = weight;
        self
    }

    pub fn dim(&self) -> usize {
        self.kernels.dim()
    }

    fn is_trivial_weight(&self) -> bool {
        self.weight.descriptor() == "O"
    }

    /// `(K_g, P_g)` wedged with `ψ(ζ)`, given as `ζ`-forms.
    fn wedge_kernels(&self, z: &[C64], zeta: &[C64], psi: &[GradedElement], want_k: bool, want_p: bool) -> Result<(Vec<GradedElement>, Vec<GradedElement>)> {
        let n = self.dim();
        let need_curv = want_p || n > 1;
        let data = self.kernels.connection(z, zeta, Directions::BOTH, need_curv)?;
        let apply = |m: &GradedMatrix| -> Vec<GradedElement> {
            (0..m.rows())
                .map(|r| {
                    let mut acc = GradedElement::zero(n);
                    for (cidx, p) in psi.iter().enumerate().take(m.cols()) {
                        acc += &(m.get(r, cidx) * p);
                    }
                    acc
                })
                .collect()
        };
        if self.is_trivial_weight() {
            let k = if want_k { apply(&self.kernels.kernel_k_from(&data, z, zeta)?.value) } else { Vec::new() };
            let p = if want_p { apply(&self.kernels.kernel_p_from(&data, z, zeta).value) } else { Vec::new() };
            return Ok((k, p));
        }
        let g = self.weight.evaluate(self.kernels.model(), &self.kernels.engine, z, zeta)?;
        if want_k {
            let (kg, pg) = self.kernels.kernel_weighted_from(&data, &g, z, zeta)?;
            Ok((apply(&kg.value), if want_p { apply(&pg.value) } else { Vec::new() }))
        } else {
            Ok((Vec::new(), apply(&self.kernels.kernel_pg_from(&data, &g, z, zeta).value)))
        }
    }

    /// `∫_Ω K_g ∧ ψ` for a `z`-form field `ψ`.
    pub fn integrate_k(&self, z: &[C64], domain: Domain, psi: &TestForm) -> Result<Estimate> {
        let n = self.dim();
        let integrand = |zeta: &[C64]| -> Result<Vec<GradedElement>> {
            let f: Vec<GradedElement> = psi.eval(zeta)?.iter().map(|x| x.to_zeta()).collect();
            Ok(self.wedge_kernels(z, zeta, &f, true, false)?.0)
        };
        if n == 1 {
            integrate_kernel_p1(z[0], domain, &self.quad, integrand)
        } else if domain == Domain::Whole {
            integrate_kernel_mc(n, z, &self.quad, integrand)
        } else {
            Err(Error::Unsupported("chart disks are available on P¹ only".into()))
        }
    }

    /// `∫_Ω P_g ∧ ψ`.
    pub fn integrate_p(&self, z: &[C64], domain: Domain, psi: &TestForm) -> Result<Estimate> {
        let integrand = |zeta: &[C64]| -> Result<Vec<GradedElement>> {
            let f: Vec<GradedElement> = psi.eval(zeta)?.iter().map(|x| x.to_zeta()).collect();
            Ok(self.wedge_kernels(z, zeta, &f, false, true)?.1)
        };
        match domain {
            Domain::Whole => integrate_over_x(self.dim(), &self.quad, integrand),
            Domain::Disk { .. } if self.dim() == 1 => integrate_smooth_p1(z[0], domain, &self.quad, integrand),
            _ => Err(Error::Unsupported("chart disks are available on P¹ only".into())),
        }
    }

    /// `∫_{∂Ω} K_g ∧ ψ` over a chart circle.
    pub fn boundary_term(&self, z: &[C64], center: C64, radius: f64, psi: &TestForm) -> Result<Vec<GradedElement>> {
        boundary_integral(center, radius, self.boundary_points, |zeta| {
            let f: Vec<GradedElement> = psi.eval(zeta)?.iter().map(|x| x.to_zeta()).collect();
            Ok(self.wedge_kernels(z, zeta, &f, true, false)?.0)
        })
    }

    /// `∂̄_z ∫_Ω K_g ∧ ψ` with an error estimate combining the step-halving
    /// change and the propagated quadrature error.
    pub fn dbar_integral_k(&self, z: &[C64], domain: Domain, psi: &TestForm) -> Result<(Vec<GradedElement>, f64)> {
        let n = self.dim();
        let mut quad_err = 0.0f64;
        let dirs: Vec<usize> = (0..n).collect();
        let (value, instability) = dbar_of_integral(
            |q| {
                let est = self.integrate_k(q, domain, psi)?;
                quad_err = quad_err.max(est.error);
                Ok(est.value)
            },
            z,
            &dirs,
            n,
            self.outer_step,
        )?;
        let h = self.outer_step * z.iter().map(|x| x.norm()).fold(1.0, f64::max);
        Ok((value, instability + 2.0 * quad_err / h))
    }

    fn check_domain(&self, z: &[C64], domain: Domain) -> Result<()> {
        if let Domain::Disk { center, radius } = domain {
            if self.dim() != 1 {
                return Err(Error::Unsupported("chart disks are available on P¹ only".into()));
            }
            let gap = radius - (z[0] - center).norm();
            if gap <= 10.0 * self.outer_step * z[0].norm().max(1.0) {
                return Err(crate::quadrature::QuadError::NearBoundary(format!("{}", z[0])).into());
            }
        }
        Ok(())
    }

    /// All terms of the Koppelman formula for `φ` at `z`.
    pub fn koppelman_terms(&self, phi: &TestForm, domain: Domain, z: &[C64]) -> Result<KoppelmanTerms> {
        self.check_domain(z, domain)?;
        let value = phi.eval(z)?;
        let dphi = phi.dbar(self.kernels.engine);
        let boundary = match domain {
            Domain::Whole => Vec::new(),
            Domain::Disk { center, radius } => self.boundary_term(z, center, radius, phi).map_err(|e| e.in_term("boundary"))?,
        };
        let kd = self.integrate_k(z, domain, &dphi).map_err(|e| e.in_term("k_dbar_phi"))?;
        let (dk, dk_err) = self.dbar_integral_k(z, domain, phi).map_err(|e| e.in_term("dbar_k_phi"))?;
        let pp = self.integrate_p(z, domain, phi).map_err(|e| e.in_term("p_phi"))?;
        let total = sum_forms(&[&boundary, &kd.value, &dk, &pp.value]);
        Ok(KoppelmanTerms {
            residual: forms_distance(&value, &total),
            error_estimate: kd.error + dk_err + pp.error,
            phi: value,
            boundary,
            k_dbar_phi: kd.value,
            dbar_k_phi: dk,
            p_phi: pp.value,
        })
    }

    /// `u = ∫ K_g ∧ φ` at `z` with the residuals of `∂̄u = φ − ∫P_g∧φ`.
    pub fn solve_at(&self, phi: &TestForm, z: &[C64]) -> Result<SolveSample> {
        let u = self.integrate_k(z, Domain::Whole, phi).map_err(|e| e.in_term("u"))?;
        let (dbar_u, du_err) = self.dbar_integral_k(z, Domain::Whole, phi).map_err(|e| e.in_term("dbar_u"))?;
        let p = self.integrate_p(z, Domain::Whole, phi).map_err(|e| e.in_term("p_term"))?;
        let value = phi.eval(z)?;
        let lhs = sum_forms(&[&dbar_u, &p.value]);
        Ok(SolveSample {
            identity_residual: forms_distance(&lhs, &value),
            solve_residual: forms_distance(&dbar_u, &value),
            error_estimate: u.error + du_err + p.error,
            u: u.value,
            dbar_u,
            phi: value,
            p_term: p.value,
        })
    }

    /// FD check that `φ` is `∂̄`-closed at the given points.
    pub fn closedness_residual(&self, phi: &TestForm, points: &[Vec<C64>]) -> Result<f64> {
        let d = phi.dbar(self.kernels.engine);
        let mut worst = 0.0f64;
        for z in points {
            worst = worst.max(forms_norm(&d.eval(z)?));
        }
        Ok(worst)
    }
}

/// Points in the chart with `|z_j| ≤ radius`, deterministic per seed.
pub fn sample_points(n: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let r = radius * rng.random::<f64>().sqrt();
                    C64::from_polar(r, 2.0 * PI * rng.random::<f64>())
                })
                .collect()
        })
        .collect()
}

/// Common header fields of the records of one experiment.
#[derive(Debug, Clone)]
pub struct RecordContext {
    pub instance: String,
    pub command: String,
    pub bundle: String,
    pub seed: u64,
    pub tolerance: f64,
}

impl RecordContext {
    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &self,
        sample: usize,
        point: &[C64],
        quantity: &str,
        value: C64,
        terms: Vec<TermValue>,
        residual: f64,
        error_estimate: f64,
        passed: bool,
        started: Instant,
    ) -> SampleRecord {
        SampleRecord {
            instance: self.instance.clone(),
            command: self.command.clone(),
            bundle: self.bundle.clone(),
            sample,
            point: point.iter().map(|x| [x.re, x.im]).collect(),
            quantity: quantity.to_string(),
            value: [value.re, value.im],
            terms,
            residual,
            error_estimate,
            tolerance: self.tolerance,
            passed,
            seed: self.seed,
            runtime_ms: started.elapsed().as_millis() as u64,
        }
    }
}

/// Koppelman identity at each of `points`.
pub fn koppelman_verify(solver: &Solver, phi: &TestForm, domain: Domain, points: &[Vec<C64>], ctx: &RecordContext) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::default();
    for (k, z) in points.iter().enumerate() {
        let t0 = Instant::now();
        let terms = solver.koppelman_terms(phi, domain, z)?;
        let ok = terms.residual <= ctx.tolerance;
        report.records.push(ctx.record(
            k,
            z,
            "phi",
            principal(&terms.phi),
            terms.term_values(),
            terms.residual,
            terms.error_estimate,
            ok,
            t0,
        ));
    }
    Ok(report)
}

/// Solves `∂̄u = φ` with the solver's weight and reports both residuals.
pub fn solve_dbar(solver: &Solver, phi: &TestForm, points: &[Vec<C64>], ctx: &RecordContext) -> Result<ExperimentReport> {
    let closed = solver.closedness_residual(phi, points)?;
    if closed > 1e-6 {
        return Err(Error::Invalid(format!("form is not ∂̄-closed (residual {closed:.2e})")));
    }
    let mut report = ExperimentReport::default();
    for (k, z) in points.iter().enumerate() {
        let t0 = Instant::now();
        let s = solver.solve_at(phi, z)?;
        let mut terms = term_values("u", &s.u);
        terms.extend(term_values("dbar_u", &s.dbar_u));
        terms.extend(term_values("phi", &s.phi));
        terms.extend(term_values("p_term", &s.p_term));
        let ok = s.identity_residual <= ctx.tolerance;
        report.records.push(ctx.record(k, z, "u", principal(&s.u), terms, s.identity_residual, s.error_estimate, ok, t0));
    }
    Ok(report)
}

/// Twisted `∂̄`-problems on `P¹` with values in `L_1^r = O(−r)`: for
/// `r ≤ 0` random `∂̄`-exact forms must be solved exactly; for `r ≥ 2` the
/// standard representative of `H^{0,1}` must keep `|∫P_g∧φ| / |φ|` away from zero.
pub fn vanishing_experiment(
    flag: &FlagType,
    level: usize,
    r: i32,
    engine: DerivativeEngine,
    quad: QuadratureSpec,
    points: &[Vec<C64>],
    ctx: &RecordContext,
) -> Result<ExperimentReport> {
    if !flag.is_projective() || flag.dimension() != 1 || level != 1 {
        return Err(Error::Unsupported(format!("vanishing experiments run on P¹ with i = 1, not {flag} i = {level}")));
    }
    let bundle: BundleDescriptor = format!("L:{level}^{r}").parse()?;
    let weight = Weight::from_descriptor(flag, &bundle)?;
    let solver = Solver::new(flag, engine, quad).with_weight(weight);
    let control = r >= 2;
    let phi = if control {
        TestForm::p1_h1_representative(r as u32, 0)?
    } else {
        TestForm::random_p1_section(-r, ctx.seed).dbar(engine)
    };
    let mut report = ExperimentReport::default();
    for (k, z) in points.iter().enumerate() {
        let t0 = Instant::now();
        let s = solver.solve_at(&phi, z)?;
        let p_norm = forms_norm(&s.p_term);
        let obstruction = p_norm / forms_norm(&s.phi).max(f64::MIN_POSITIVE);
        let mut terms = term_values("dbar_u", &s.dbar_u);
        terms.extend(term_values("phi", &s.phi));
        terms.extend(term_values("p_term", &s.p_term));
        let (quantity, value, residual, ok) = if control {
            ("obstruction", c(obstruction, 0.0), s.identity_residual, s.identity_residual <= ctx.tolerance && obstruction >= 0.1)
        } else if r > 0 {
            // outside the vanishing range: only the identity itself is checked
            ("p_term", c(p_norm, 0.0), s.identity_residual, s.identity_residual <= ctx.tolerance)
        } else {
            ("p_term", c(p_norm, 0.0), s.solve_residual, s.solve_residual <= ctx.tolerance)
        };
        report.records.push(ctx.record(k, z, quantity, value, terms, residual, s.error_estimate, ok, t0));
    }
    Ok(report)
}

/// `∂̄ψ` for `ψ = 1/(1 + |b|²)` on `P¹`, a manufactured `∂̄`-exact form.
pub fn manufactured_p1(engine: DerivativeEngine) -> (TestForm, TestForm) {
    let psi = TestForm::scalar(1, FormTag::RandomBump, |b| c(1.0 / fs_weight(b), 0.0));
    let phi = psi.dbar(engine);
    (psi, phi)
}

/// `b̄ e^{−|b − b₀|²/2}` with `b₀ = 0.3 − 0.2i`, used on chart disks.
pub fn disk_test_form() -> TestForm {
    TestForm::scalar(1, FormTag::RandomBump, |b| b[0].conj() * (-(b[0] - c(0.3, -0.2)).norm_sqr() / 2.0).exp())
}
