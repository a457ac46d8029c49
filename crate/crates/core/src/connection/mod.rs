//! Chern connection and curvature of `E` in its holomorphic frame, together
//! with `σ` and `u`.
//!
//! Points of `X × X` are handled as one coordinate vector `(z, ζ)` of length
//! `2n`; direction `μ < n` is `z_{μ+1}` and `μ ≥ n` is `ζ_{μ−n+1}`.

mod derivative;

pub use derivative::{DerivativeEngine, FdScheme, FdValue};

use thiserror::Error;

use crate::diagonal::{DiagonalError, DiagonalModel};
use crate::exterior::{Family, GeneratorIndex, GradedElement};
use crate::linalg::{self, CMat, CVec, C64, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConnectionError {
    #[error(transparent)]
    Diagonal(#[from] DiagonalError),
    #[error("finite-difference step {0} outside [1e-8, 1e-2]")]
    InvalidStep(f64),
    #[error("evaluation on the diagonal (|η| = {0:.3e})")]
    OnDiagonal(f64),
    #[error("Gram matrix is singular")]
    SingularGram,
}

/// `dw_μ` as a generator.
pub fn dw_gen(n: usize, mu: usize) -> GeneratorIndex {
    if mu < n {
        GeneratorIndex::new(Family::Zhol, mu + 1)
    } else {
        GeneratorIndex::new(Family::Whol, mu - n + 1)
    }
}

/// `dw̄_μ` as a generator.
pub fn dwbar_gen(n: usize, mu: usize) -> GeneratorIndex {
    if mu < n {
        GeneratorIndex::new(Family::Zanti, mu + 1)
    } else {
        GeneratorIndex::new(Family::Wanti, mu - n + 1)
    }
}

pub fn dw(n: usize, mu: usize) -> GradedElement {
    let g = dw_gen(n, mu);
    GradedElement::gen(n, g.family, g.index)
}

pub fn dwbar(n: usize, mu: usize) -> GradedElement {
    let g = dwbar_gen(n, mu);
    GradedElement::gen(n, g.family, g.index)
}

/// Which factors of `X × X` carry live differentials. Restricting to one
/// factor computes the pullback of every form to the slice where the other
/// point is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Directions {
    pub z: bool,
    pub zeta: bool,
}

impl Directions {
    pub const BOTH: Directions = Directions { z: true, zeta: true };
    pub const ZETA: Directions = Directions { z: false, zeta: true };
    pub const Z: Directions = Directions { z: true, zeta: false };

    pub fn indices(&self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * n);
        if self.z {
            out.extend(0..n);
        }
        if self.zeta {
            out.extend(n..2 * n);
        }
        out
    }
}

/// Connection data at one point pair.
#[derive(Debug, Clone)]
pub struct ConnectionData {
    pub n: usize,
    pub dirs: Vec<usize>,
    /// `η` in the holomorphic `E`-frame.
    pub a: CVec,
    pub gram: CMat,
    pub gram_inv: CMat,
    /// `∂_μ a` for `μ ∈ dirs`.
    pub da: Vec<CVec>,
    pub dgram: Vec<CMat>,
    pub dbar_gram: Vec<CMat>,
    /// `θ_μ = G⁻¹ ∂_μ G`.
    pub theta: Vec<CMat>,
    /// `curvature[μ][ν] = ∂̄_ν θ_μ`, the coefficient of `dw̄_ν ∧ dw_μ` in `Θ`.
    pub curvature: Option<Vec<Vec<CMat>>>,
}

fn split(p: &[C64], n: usize) -> (&[C64], &[C64]) {
    (&p[..n], &p[n..])
}

fn joined(z: &[C64], zeta: &[C64]) -> Vec<C64> {
    let mut p = z.to_vec();
    p.extend_from_slice(zeta);
    p
}

/// `(a, G)` at a stencil point.
fn a_gram(model: &DiagonalModel, p: &[C64]) -> Result<(CVec, CMat), ConnectionError> {
    let n = model.flag().dimension();
    let (z, zeta) = split(p, n);
    Ok(model.a_and_gram(z, zeta)?)
}

struct FirstOrder {
    a: CVec,
    gram: CMat,
    gram_inv: CMat,
    da: Vec<CVec>,
    dgram: Vec<CMat>,
    dbar_gram: Vec<CMat>,
}

fn first_order(
    model: &DiagonalModel,
    engine: &DerivativeEngine,
    p: &[C64],
    dirs: &[usize],
) -> Result<FirstOrder, ConnectionError> {
    let (a, gram) = a_gram(model, p)?;
    let gram_inv = linalg::inverse(&gram).ok_or(ConnectionError::SingularGram)?;
    let mut da = Vec::with_capacity(dirs.len());
    let mut dgram = Vec::with_capacity(dirs.len());
    let mut dbar_gram = Vec::with_capacity(dirs.len());
    for &mu in dirs {
        let ((d_a, d_g), (_, db_g)) = engine.wirtinger(|q: &[C64]| a_gram(model, q), p, mu)?;
        da.push(d_a);
        dgram.push(d_g);
        dbar_gram.push(db_g);
    }
    Ok(FirstOrder { a, gram, gram_inv, da, dgram, dbar_gram })
}

fn thetas(fo: &FirstOrder) -> Vec<CMat> {
    fo.dgram.iter().map(|dg| &fo.gram_inv * dg).collect()
}

/// `θ = G⁻¹∂G` along `dirs` (no curvature).
pub fn chern_connection(
    model: &DiagonalModel,
    engine: &DerivativeEngine,
    z: &[C64],
    zeta: &[C64],
    dirs: Directions,
) -> Result<ConnectionData, ConnectionError> {
    let n = model.flag().dimension();
    let p = joined(z, zeta);
    let d = dirs.indices(n);
    let fo = first_order(model, engine, &p, &d)?;
    let theta = thetas(&fo);
    Ok(ConnectionData {
        n,
        dirs: d,
        a: fo.a,
        gram: fo.gram,
        gram_inv: fo.gram_inv,
        da: fo.da,
        dgram: fo.dgram,
        dbar_gram: fo.dbar_gram,
        theta,
        curvature: None,
    })
}

/// Connection plus `Θ = ∂̄θ`, by nested finite differences.
pub fn curvature(
    model: &DiagonalModel,
    engine: &DerivativeEngine,
    z: &[C64],
    zeta: &[C64],
    dirs: Directions,
) -> Result<ConnectionData, ConnectionError> {
    let mut data = chern_connection(model, engine, z, zeta, dirs)?;
    let p = joined(z, zeta);
    let d = data.dirs.clone();
    let theta_at = |q: &[C64]| -> Result<Vec<CMat>, ConnectionError> {
        Ok(thetas(&first_order(model, engine, q, &d)?))
    };
    let mut curv = vec![Vec::with_capacity(d.len()); d.len()];
    for &nu in &d {
        let (_, dbar_theta) = engine.wirtinger(theta_at, &p, nu)?;
        for (mu_idx, m) in dbar_theta.into_iter().enumerate() {
            curv[mu_idx].push(m);
        }
    }
    data.curvature = Some(curv);
    Ok(data)
}

impl ConnectionData {
    /// `θ^a_b` as a `(1,0)`-form.
    pub fn theta_form(&self, a: usize, b: usize) -> GradedElement {
        let mut out = GradedElement::zero(self.n);
        for (k, &mu) in self.dirs.iter().enumerate() {
            out.axpy(self.theta[k][(a, b)], &dw(self.n, mu));
        }
        out
    }

    /// `Θ^a_b` as a `(1,1)`-form.
    pub fn curvature_form(&self, a: usize, b: usize) -> GradedElement {
        let curv = self.curvature.as_ref().expect("curvature not computed");
        let mut out = GradedElement::zero(self.n);
        for (i, &mu) in self.dirs.iter().enumerate() {
            for (j, &nu) in self.dirs.iter().enumerate() {
                let basis = &dwbar(self.n, nu) * &dw(self.n, mu);
                out.axpy(curv[i][j][(a, b)], &basis);
            }
        }
        out
    }

    /// Form-valued matrix `Θ` with `(1,1)` entries.
    pub fn curvature_matrix(&self) -> Vec<Vec<GradedElement>> {
        let r = self.a.len();
        (0..r).map(|a| (0..r).map(|b| self.curvature_form(a, b)).collect()).collect()
    }

    /// `|η|²_E`.
    pub fn eta_norm_sqr(&self) -> f64 {
        (self.a.adjoint() * &self.gram * &self.a)[(0, 0)].re
    }

    /// `(Dη)^a = ∂a + θ a` as `(1,0)`-forms.
    pub fn d_eta(&self) -> Vec<GradedElement> {
        let r = self.a.len();
        (0..r)
            .map(|a| {
                let mut out = GradedElement::zero(self.n);
                for (k, &mu) in self.dirs.iter().enumerate() {
                    let coef = self.da[k][a] + (self.theta[k].row(a) * &self.a)[(0, 0)];
                    out.axpy(coef, &dw(self.n, mu));
                }
                out
            })
            .collect()
    }

    /// `D̃η = Σ_a (Dη)^a ∧ e_a`.
    pub fn d_eta_lift(&self) -> GradedElement {
        let mut out = GradedElement::zero(self.n);
        for (a, form) in self.d_eta().iter().enumerate() {
            out += &(form * &GradedElement::gen(self.n, Family::Evec, a + 1));
        }
        out
    }

    /// `Θ̃ = Σ_{a,b} Θ^a_b ∧ e_a ∧ e^b`.
    pub fn curvature_lift(&self) -> GradedElement {
        let r = self.a.len();
        let mut out = GradedElement::zero(self.n);
        for a in 0..r {
            for b in 0..r {
                let ee = &GradedElement::gen(self.n, Family::Evec, a + 1)
                    * &GradedElement::gen(self.n, Family::Ecovec, b + 1);
                out += &(&self.curvature_form(a, b) * &ee);
            }
        }
        out
    }

    fn check_off_diagonal(&self) -> Result<f64, ConnectionError> {
        let nrm = self.eta_norm_sqr();
        let scale = linalg::max_abs(&self.gram);
        if !(nrm > 1e-28 * scale.max(1e-300)) {
            return Err(ConnectionError::OnDiagonal(nrm.max(0.0).sqrt()));
        }
        Ok(nrm)
    }

    /// Components `σ_b = (a†G)_b / (a†Ga)`.
    pub fn sigma_components(&self) -> Result<CVec, ConnectionError> {
        let denom = self.check_off_diagonal()?;
        Ok((self.a.adjoint() * &self.gram).transpose() / C64::new(denom, 0.0))
    }

    /// `σ = Σ σ_b e^b`.
    pub fn sigma(&self) -> Result<GradedElement, ConnectionError> {
        let s = self.sigma_components()?;
        let mut out = GradedElement::zero(self.n);
        for (b, v) in s.iter().enumerate() {
            out.axpy(*v, &GradedElement::gen(self.n, Family::Ecovec, b + 1));
        }
        Ok(out)
    }

    /// `∂̄σ` by the chain rule from `∂a` and `∂̄G`, with `a` holomorphic.
    pub fn dbar_sigma(&self) -> Result<GradedElement, ConnectionError> {
        let denom = self.check_off_diagonal()?;
        let num = (self.a.adjoint() * &self.gram).transpose();
        let mut out = GradedElement::zero(self.n);
        for (k, &nu) in self.dirs.iter().enumerate() {
            // ∂̄_ν conj(a) = conj(∂_ν a)
            let dnum = (self.da[k].adjoint() * &self.gram + self.a.adjoint() * &self.dbar_gram[k]).transpose();
            let ddenom = (dnum.transpose() * &self.a)[(0, 0)];
            let d = C64::new(denom, 0.0);
            for b in 0..self.a.len() {
                let v = (dnum[b] * d - num[b] * ddenom) / (d * d);
                if v != ZERO {
                    let term = &dwbar(self.n, nu) * &GradedElement::gen(self.n, Family::Ecovec, b + 1);
                    out.axpy(v, &term);
                }
            }
        }
        Ok(out)
    }

    /// `u = Σ_{k=1}^{n} σ ∧ (∂̄σ)^{k−1}`.
    pub fn u_section(&self) -> Result<GradedElement, ConnectionError> {
        let sigma = self.sigma()?;
        let ds = self.dbar_sigma()?;
        let mut out = GradedElement::zero(self.n);
        let mut power = GradedElement::one(self.n);
        for _ in 0..self.n {
            out += &(&sigma * &power);
            power = &power * &ds;
        }
        Ok(out)
    }
}

/// Evaluates `σ` at a point pair.
pub fn sigma(
    model: &DiagonalModel,
    engine: &DerivativeEngine,
    z: &[C64],
    zeta: &[C64],
    dirs: Directions,
) -> Result<GradedElement, ConnectionError> {
    chern_connection(model, engine, z, zeta, dirs)?.sigma()
}

/// Evaluates `u` at a point pair.
pub fn u_section(
    model: &DiagonalModel,
    engine: &DerivativeEngine,
    z: &[C64],
    zeta: &[C64],
    dirs: Directions,
) -> Result<GradedElement, ConnectionError> {
    chern_connection(model, engine, z, zeta, dirs)?.u_section()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flagspace::{sample_point, FlagType};
    use crate::linalg::{c, ONE};

    fn p1() -> FlagType {
        "1,2:2".parse().unwrap()
    }

    /// `∂̄∂ log G` for `G = 1/((1+|z|²)(1+|ζ|²))`: coefficient of
    /// `dw̄ ∧ dw` in each factor is `1/(1+|w|²)²`.
    #[test]
    fn p1_curvature_closed_form() {
        let m = DiagonalModel::big_cell(&p1());
        let e = DerivativeEngine::default();
        for (bz, bw) in [(c(0.0, 0.0), c(0.0, 0.0)), (c(0.4, -0.3), c(-1.2, 2.0))] {
            let d = curvature(&m, &e, &[bz], &[bw], Directions::BOTH).unwrap();
            let curv = d.curvature.as_ref().unwrap();
            let expect = [1.0 / (1.0 + bz.norm_sqr()).powi(2), 1.0 / (1.0 + bw.norm_sqr()).powi(2)];
            for i in 0..2 {
                for j in 0..2 {
                    let want = if i == j { expect[i] } else { 0.0 };
                    // Θ = ∂̄∂ log G = −∂̄∂ log((1+|z|²)(1+|ζ|²)); ∂̄_ν θ_μ = −∂_μ∂̄_ν log(...)
                    assert!((curv[i][j][(0, 0)] + want).norm() < 1e-7, "{i}{j}: {}", curv[i][j][(0, 0)]);
                }
            }
        }
    }

    #[test]
    fn curvature_is_hermitian_wrt_gram() {
        for s in ["1,2:2", "1,3:3", "1,2,3:3"] {
            let f: FlagType = s.parse().unwrap();
            let m = DiagonalModel::big_cell(&f);
            let e = DerivativeEngine::default();
            let z = sample_point(&f, 1);
            let w = sample_point(&f, 2);
            let d = curvature(&m, &e, &z.coords, &w.coords, Directions::ZETA).unwrap();
            let curv = d.curvature.as_ref().unwrap();
            for i in 0..d.dirs.len() {
                for j in 0..d.dirs.len() {
                    let lhs = (&d.gram * &curv[i][j]).adjoint();
                    let rhs = &d.gram * &curv[j][i];
                    let scale = 1.0 + linalg::max_abs(&rhs);
                    assert!(linalg::max_abs(&(lhs - rhs)) < 1e-6 * scale);
                }
            }
        }
    }

    #[test]
    fn theta_is_type_10_and_curvature_11() {
        let f = FlagType::projective(2);
        let m = DiagonalModel::big_cell(&f);
        let d = curvature(&m, &DerivativeEngine::default(), &[c(0.1, 0.2), c(-0.3, 0.0)], &[c(0.5, 0.5), c(1.0, -1.0)], Directions::BOTH).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for (mono, _) in d.theta_form(a, b).terms() {
                    assert_eq!(mono.family_degree(Family::Zanti) + mono.family_degree(Family::Wanti), 0);
                }
                for (mono, _) in d.curvature_form(a, b).terms() {
                    assert_eq!(mono.family_degree(Family::Zanti) + mono.family_degree(Family::Wanti), 1);
                    assert_eq!(mono.family_degree(Family::Zhol) + mono.family_degree(Family::Whol), 1);
                }
            }
        }
    }

    #[test]
    fn sigma_p1_closed_form_and_contraction() {
        let m = DiagonalModel::big_cell(&p1());
        let e = DerivativeEngine::default();
        let w = c(0.6, -1.4);
        let s = sigma(&m, &e, &[ZERO], &[w], Directions::ZETA).unwrap();
        let expect = GradedElement::gen(1, Family::Ecovec, 1).scale(ONE / w);
        assert!(s.distance(&expect) < 1e-12);
        assert!(sigma(&m, &e, &[w], &[w], Directions::ZETA).is_err());
    }

    #[test]
    fn delta_eta_sigma_is_one() {
        for s in ["1,2:2", "1,2,3:3", "2,4:4"] {
            let f: FlagType = s.parse().unwrap();
            let m = DiagonalModel::big_cell(&f);
            let e = DerivativeEngine::default();
            for seed in 0..20 {
                let z = sample_point(&f, 2 * seed + 100);
                let w = sample_point(&f, 2 * seed + 101);
                let d = chern_connection(&m, &e, &z.coords, &w.coords, Directions::ZETA).unwrap();
                let a: Vec<C64> = d.a.iter().cloned().collect();
                let one = d.sigma().unwrap().interior(&a);
                assert!(one.distance(&GradedElement::one(f.dimension())) < 1e-10);
            }
        }
    }

    #[test]
    fn dbar_sigma_matches_direct_difference() {
        let f = FlagType::projective(2);
        let m = DiagonalModel::big_cell(&f);
        let e = DerivativeEngine::default();
        let z = [c(0.2, -0.1), c(0.7, 0.3)];
        let w = [c(-0.4, 0.9), c(0.1, 0.1)];
        let d = chern_connection(&m, &e, &z, &w, Directions::BOTH).unwrap();
        let chain = d.dbar_sigma().unwrap();
        let p = joined(&z, &w);
        let direct = e
            .dbar_element(
                |q: &[C64]| chern_connection(&m, &e, &q[..2], &q[2..], Directions::BOTH)?.sigma(),
                &p,
                &[0, 1, 2, 3],
                2,
            )
            .unwrap();
        assert!(chain.distance(&direct) < 1e-8);
    }

    #[test]
    fn u_degrees() {
        let m = DiagonalModel::big_cell(&p1());
        let d = chern_connection(&m, &DerivativeEngine::default(), &[c(0.1, 0.0)], &[c(0.3, 0.2)], Directions::BOTH).unwrap();
        assert_eq!(d.u_section().unwrap(), d.sigma().unwrap());
        let f = FlagType::projective(2);
        let m = DiagonalModel::big_cell(&f);
        let d = chern_connection(&m, &DerivativeEngine::default(), &[c(0.1, 0.0), ZERO], &[c(0.3, 0.2), ONE], Directions::BOTH).unwrap();
        let u = d.u_section().unwrap();
        assert!(!u.ecovec_part(1).is_zero());
        assert!(!u.ecovec_part(2).is_zero());
        // ∇_η u = 1 in degree (0): δ_η of the σ term; in E*-degree 1, δ_η(σ∧∂̄σ) = ∂̄σ since δ_η∂̄σ = −∂̄(δ_ησ) = 0.
        let a: Vec<C64> = d.a.iter().cloned().collect();
        let resid = &u.ecovec_part(2).interior(&a) - &d.dbar_sigma().unwrap();
        assert!(resid.max_abs() < 1e-6 * (1.0 + d.dbar_sigma().unwrap().max_abs()));
    }
}
