//! Invariant metric, Hodge star and harmonic projection on `P¹` and `P²`.
//!
//! The metric is the Fubini–Study metric scaled to unit total volume.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exterior::{Family, GradedElement, Monomial};
use crate::flagspace::FlagType;
use crate::kernels::Kernels;
use crate::linalg::{self, CMat, C64, ZERO};
use crate::connection::Directions;
use crate::quadrature::{integrate_over_x, top_factor, Estimate, QuadratureSpec};

/// Metric data on a projective space of dimension one or two.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricData {
    n: usize,
    scale: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl MetricData {
    pub fn new(flag: &FlagType) -> Result<Self> {
        let n = flag.dimension();
        if !flag.is_projective() || n > 2 {
            return Err(Error::Unsupported(format!("Hodge theory is implemented on P¹ and P², not {flag}")));
        }
        Ok(MetricData { n, scale: factorial(n).powf(1.0 / n as f64) / PI })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `h` with Kähler form `(i/2) Σ h_{jk} dz_j ∧ dz̄_k`.
    pub fn metric(&self, b: &[C64]) -> CMat {
        let s = 1.0 + b.iter().map(|x| x.norm_sqr()).sum::<f64>();
        CMat::from_fn(self.n, self.n, |j, k| {
            let delta = if j == k { s } else { 0.0 };
            (C64::new(delta, 0.0) - b[j].conj() * b[k]) * (self.scale / (s * s))
        })
    }

    /// Density of the volume form with respect to Lebesgue measure.
    pub fn volume_density(&self, b: &[C64]) -> f64 {
        let s = 1.0 + b.iter().map(|x| x.norm_sqr()).sum::<f64>();
        factorial(self.n) / (PI.powi(self.n as i32) * s.powi(self.n as i32 + 1))
    }

    pub fn volume_form(&self, b: &[C64]) -> GradedElement {
        let n = self.n;
        let top = Monomial(0).with_family_bits(Family::Zhol, (1 << n) - 1).with_family_bits(Family::Zanti, (1 << n) - 1);
        GradedElement::term(n, top, C64::new(self.volume_density(b), 0.0) / top_factor(n))
    }

    /// Inner products of the cotangent generators in canonical order
    /// `dz_1 … dz_n dz̄_1 … dz̄_n`.
    fn cotangent_gram(&self, b: &[C64]) -> Result<CMat> {
        let n = self.n;
        let hinv = linalg::inverse(&self.metric(b)).ok_or_else(|| Error::Invalid("degenerate metric".into()))?;
        let mut g = CMat::zeros(2 * n, 2 * n);
        for k in 0..n {
            for l in 0..n {
                g[(k, l)] = hinv[(l, k)] * 2.0;
                g[(n + k, n + l)] = hinv[(k, l)] * 2.0;
            }
        }
        Ok(g)
    }

    /// Pointwise `⟨φ, ψ⟩`, linear in `φ` and antilinear in `ψ`.
    pub fn inner(&self, b: &[C64], phi: &GradedElement, psi: &GradedElement) -> Result<C64> {
        let g = self.cotangent_gram(b)?;
        let mut acc = ZERO;
        for (m, x) in phi.terms() {
            let gi = generator_slots(*m, self.n);
            for (m2, y) in psi.terms() {
                if m.degree() != m2.degree() {
                    continue;
                }
                let gj = generator_slots(*m2, self.n);
                let sub = CMat::from_fn(gi.len(), gj.len(), |r, c| g[(gi[r], gj[c])]);
                let det = if gi.is_empty() { C64::new(1.0, 0.0) } else { sub.determinant() };
                acc += x * y.conj() * det;
            }
        }
        Ok(acc)
    }

    /// Antilinear star with `φ ∧ *ψ = ⟨φ, ψ⟩ dV`.
    pub fn hodge_star(&self, b: &[C64], psi: &GradedElement) -> Result<GradedElement> {
        let n = self.n;
        let full = (1u64 << n) - 1;
        let tau = top_factor(n);
        let rho = self.volume_density(b);
        let mut out = GradedElement::zero(n);
        for bits in 0..(1u64 << (2 * n)) {
            let m = Monomial(0).with_family_bits(Family::Zhol, bits & full).with_family_bits(Family::Zanti, bits >> n);
            let comp = Monomial(0)
                .with_family_bits(Family::Zhol, !bits & full)
                .with_family_bits(Family::Zanti, (!bits >> n) & full);
            let (_, sign) = m.wedge(comp).expect("complementary monomials");
            let ip = self.inner(b, &GradedElement::term(n, m, C64::new(1.0, 0.0)), psi)?;
            if ip != ZERO {
                out.add_term(comp, ip * rho / (tau * sign));
            }
        }
        Ok(out)
    }

    /// `∫_X ⟨φ, ψ⟩ dV`.
    pub fn l2_inner<F, G>(&self, spec: &QuadratureSpec, mut phi: F, mut psi: G) -> Result<Estimate>
    where
        F: FnMut(&[C64]) -> Result<GradedElement>,
        G: FnMut(&[C64]) -> Result<GradedElement>,
    {
        integrate_over_x(self.n, spec, |b| {
            let v = self.inner(b, &phi(b)?, &psi(b)?)?;
            Ok(vec![self.volume_form(b).scale(v).to_zeta()])
        })
    }
}

/// Positions of the generators of `m` in the cotangent order.
fn generator_slots(m: Monomial, n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for j in 0..n {
        if m.family_bits(Family::Zhol) & (1 << j) != 0 {
            out.push(j);
        }
    }
    for j in 0..n {
        if m.family_bits(Family::Zanti) & (1 << j) != 0 {
            out.push(n + j);
        }
    }
    out
}

/// `Π(φ)(z) = ∫_ζ φ(ζ) ∧ P(z, ζ)`; `φ` is given as a `z`-form field.
pub fn harmonic_project<F>(kernels: &Kernels, spec: &QuadratureSpec, z: &[C64], mut phi: F) -> Result<Estimate>
where
    F: FnMut(&[C64]) -> Result<GradedElement>,
{
    let n = kernels.dim();
    if !kernels.model().flag().is_grassmannian() {
        return Err(Error::Unsupported("harmonic projection needs a Grassmannian".into()));
    }
    integrate_over_x(n, spec, |zeta| {
        let p = kernels.kernel_p(z, zeta, Directions::BOTH)?;
        let f = phi(zeta)?.to_zeta();
        Ok(vec![&f * p.scalar()])
    })
}
