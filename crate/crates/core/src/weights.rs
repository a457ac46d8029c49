//! Weights for tautological bundles and line bundles built from them.
//!
//! A weight is a matrix of graded elements `g = Σ_k g_{k,k}` with `g_{k,k}`
//! of `E*`-degree `k` and antiholomorphic degree `k`, mapping the fibre at
//! `ζ` to the fibre at `z`. Entries are even, so exterior powers and tensor
//! products reduce to compound matrices and Kronecker products.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::connection::{dwbar, DerivativeEngine, Directions};
use crate::diagonal::{DiagonalError, DiagonalModel};
use crate::exterior::{Family, GeneratorIndex, GradedElement, GradedMatrix};
use crate::flagspace::{projector_of, FlagType};
use crate::linalg::{self, CMat, C64, ONE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("cannot parse bundle '{0}'")]
    Parse(String),
    #[error("level {level} is not a tautological level of a flag with {levels} levels")]
    Level { level: usize, levels: usize },
    #[error("exterior power {d} of a rank {rank} weight")]
    RankMismatch { rank: usize, d: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("weight for {expected} evaluated on {found}")]
    FlagMismatch { expected: String, found: String },
    #[error(transparent)]
    Diagonal(#[from] DiagonalError),
}

/// One factor of a bundle descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleFactor {
    /// Tautological bundle `H_i`.
    Tautological(usize),
    /// `L_i^m` with `L_i = Λ^{d_i} H_i`.
    Line { level: usize, power: i32 },
}

/// Tensor product of factors; empty means the trivial bundle.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BundleDescriptor {
    pub factors: Vec<BundleFactor>,
}

impl fmt::Display for BundleDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "O");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|x| match x {
                BundleFactor::Tautological(i) => format!("H:{i}"),
                BundleFactor::Line { level, power } => format!("L:{level}^{power}"),
            })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

impl FromStr for BundleDescriptor {
    type Err = WeightError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "O" || s == "1" {
            return Ok(BundleDescriptor::default());
        }
        let bad = || WeightError::Parse(s.to_string());
        let mut factors = Vec::new();
        for part in s.split('*') {
            let part = part.trim();
            let (kind, rest) = part.split_once(':').ok_or_else(bad)?;
            match kind.trim() {
                "H" => factors.push(BundleFactor::Tautological(rest.trim().parse().map_err(|_| bad())?)),
                "L" => {
                    let (level, power) = match rest.split_once('^') {
                        Some((l, p)) => (l, p.trim().parse::<i32>().map_err(|_| bad())?),
                        None => (rest, 1),
                    };
                    factors.push(BundleFactor::Line { level: level.trim().parse().map_err(|_| bad())?, power });
                }
                _ => return Err(bad()),
            }
        }
        Ok(BundleDescriptor { factors })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Trivial,
    Tautological(usize),
    ExteriorPower(Box<Expr>, usize),
    Dual(Box<Expr>),
    Tensor(Box<Expr>, Box<Expr>),
}

/// A weight together with the bundle it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    flag: Option<FlagType>,
    descriptor: String,
    expr: Expr,
    rank: usize,
}

impl Weight {
    /// Weight `1` of the trivial line bundle.
    pub fn trivial() -> Self {
        Weight { flag: None, descriptor: "O".into(), expr: Expr::Trivial, rank: 1 }
    }

    /// `G_i = γ_{0,i} + γ_{1,i}` for the tautological bundle `H_i`.
    pub fn tautological(flag: &FlagType, i: usize) -> Result<Self, WeightError> {
        if i == 0 || i >= flag.levels() {
            return Err(WeightError::Level { level: i, levels: flag.levels() });
        }
        Ok(Weight { flag: Some(flag.clone()), descriptor: format!("H:{i}"), expr: Expr::Tautological(i), rank: flag.d(i) })
    }

    pub fn from_descriptor(flag: &FlagType, bundle: &BundleDescriptor) -> Result<Self, WeightError> {
        let mut w = Weight::trivial();
        for f in &bundle.factors {
            let next = match *f {
                BundleFactor::Tautological(i) => Weight::tautological(flag, i)?,
                BundleFactor::Line { level, power } => {
                    let h = Weight::tautological(flag, level)?;
                    h.exterior_power(h.rank)?.power(power)?
                }
            };
            w = w.tensor(&next);
        }
        w.descriptor = bundle.to_string();
        Ok(w)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn exterior_power(&self, d: usize) -> Result<Self, WeightError> {
        if d == 0 || d > self.rank {
            return Err(WeightError::RankMismatch { rank: self.rank, d });
        }
        if d == 1 {
            return Ok(self.clone());
        }
        Ok(Weight {
            flag: self.flag.clone(),
            descriptor: format!("L({})^{d}", self.descriptor),
            expr: Expr::ExteriorPower(Box::new(self.expr.clone()), d),
            rank: linalg::subsets(self.rank, d).len(),
        })
    }

    /// Weight for the dual bundle; available on Grassmannians, where the
    /// diagonal section changes sign under exchange of the two points.
    pub fn dual(&self) -> Result<Self, WeightError> {
        if let Some(flag) = &self.flag {
            if !flag.is_grassmannian() {
                return Err(WeightError::Unsupported(format!("dual weights on {flag}")));
            }
        }
        let expr = match &self.expr {
            Expr::Trivial => Expr::Trivial,
            e => Expr::Dual(Box::new(e.clone())),
        };
        Ok(Weight { flag: self.flag.clone(), descriptor: format!("({})*", self.descriptor), expr, rank: self.rank })
    }

    pub fn tensor(&self, other: &Weight) -> Self {
        let expr = match (&self.expr, &other.expr) {
            (Expr::Trivial, e) | (e, Expr::Trivial) => e.clone(),
            (a, b) => Expr::Tensor(Box::new(a.clone()), Box::new(b.clone())),
        };
        Weight {
            flag: self.flag.clone().or_else(|| other.flag.clone()),
            descriptor: format!("{}*{}", self.descriptor, other.descriptor),
            expr,
            rank: self.rank * other.rank,
        }
    }

    /// Integer tensor power; negative powers dualise first.
    pub fn power(&self, m: i32) -> Result<Self, WeightError> {
        let base = if m < 0 { self.dual()? } else { self.clone() };
        let mut out = Weight::trivial();
        for _ in 0..m.unsigned_abs() {
            out = out.tensor(&base);
        }
        out.flag = out.flag.or_else(|| self.flag.clone());
        out.descriptor = format!("({})^{m}", self.descriptor);
        Ok(out)
    }

    fn check_flag(&self, model: &DiagonalModel) -> Result<(), WeightError> {
        match &self.flag {
            Some(f) if f != model.flag() => Err(WeightError::FlagMismatch { expected: f.to_string(), found: model.flag().to_string() }),
            _ => Ok(()),
        }
    }

    /// `g(z, ζ)` as a matrix of graded elements.
    pub fn evaluate(&self, model: &DiagonalModel, engine: &DerivativeEngine, z: &[C64], zeta: &[C64]) -> Result<GradedMatrix, WeightError> {
        self.check_flag(model)?;
        eval_expr(&self.expr, model, engine, z, zeta)
    }

    /// Components `g_{k,k}`, `k = 0..=n`.
    pub fn components(&self, model: &DiagonalModel, engine: &DerivativeEngine, z: &[C64], zeta: &[C64]) -> Result<Vec<GradedMatrix>, WeightError> {
        let g = self.evaluate(model, engine, z, zeta)?;
        let n = model.flag().dimension();
        Ok((0..=n as u32).map(|k| g.map(|x| x.ecovec_part(k))).collect())
    }
}

fn eval_expr(expr: &Expr, model: &DiagonalModel, engine: &DerivativeEngine, z: &[C64], zeta: &[C64]) -> Result<GradedMatrix, WeightError> {
    let n = model.flag().dimension();
    match expr {
        Expr::Trivial => Ok(GradedMatrix::identity(n, 1)),
        Expr::Tautological(i) => tautological_weight(model, engine, *i, z, zeta),
        Expr::ExteriorPower(inner, d) => Ok(eval_expr(inner, model, engine, z, zeta)?.compound(*d)),
        Expr::Tensor(a, b) => Ok(eval_expr(a, model, engine, z, zeta)?.kron(&eval_expr(b, model, engine, z, zeta)?)),
        Expr::Dual(inner) => {
            if model.chart_z() != model.chart_zeta() {
                return Err(WeightError::Unsupported("dual weights need both points in one chart".into()));
            }
            let g = eval_expr(inner, model, engine, zeta, z)?;
            Ok(g.map(exchange_points).transpose())
        }
    }
}

/// Exchanges the two points: `z ↔ ζ` differentials and `e^a ↦ −e^a`.
fn exchange_points(x: &GradedElement) -> GradedElement {
    x.relabel(|g| {
        let (sign, family) = match g.family {
            Family::Zhol => (1.0, Family::Whol),
            Family::Zanti => (1.0, Family::Wanti),
            Family::Whol => (1.0, Family::Zhol),
            Family::Wanti => (1.0, Family::Zanti),
            Family::Ecovec => (-1.0, Family::Ecovec),
            Family::Evec => (-1.0, Family::Evec),
        };
        (sign, GeneratorIndex::new(family, g.index))
    })
}

/// `γ_{0,i}(z, ζ)`: `π_{H_{i,z}}` restricted to `H_{i,ζ}`, frame to frame.
pub fn gamma0(model: &DiagonalModel, i: usize, z: &[C64], zeta: &[C64]) -> Result<CMat, WeightError> {
    let hz = model.chart_z().h_matrix(z, i);
    let hzeta = model.chart_zeta().h_matrix(zeta, i);
    let left = left_inverse(&hz)?;
    Ok(left * hzeta)
}

/// `(h*h)⁻¹h*`, the frame coordinates of `π_H`.
fn left_inverse(h: &CMat) -> Result<CMat, WeightError> {
    let g = linalg::inverse(&(h.adjoint() * h)).ok_or(DiagonalError::SingularSolve)?;
    Ok(g * h.adjoint())
}

/// Blocks `M_{a,i}(z)` of the kernel frame, `(N − d_i) × d_i` each.
fn frame_blocks(model: &DiagonalModel, i: usize, z: &[C64]) -> Result<Vec<CMat>, WeightError> {
    let flag = model.flag();
    let basis = model.kernel_basis(z)?;
    let off: usize = (1..i).map(|j| flag.d(j) * (flag.ambient() - flag.d(j))).sum();
    let (rows, cols) = (flag.ambient() - flag.d(i), flag.d(i));
    Ok((0..basis.ncols())
        .map(|a| CMat::from_fn(rows, cols, |r, c| basis[(off + r * cols + c, a)]))
        .collect())
}

/// `(I − π_{H_{i,z}}) E_i M(z)` for each frame block, the representative map
/// applied to `ξ_a`.
fn represented_frame(model: &DiagonalModel, i: usize, z: &[C64], scale: &dyn Fn(&[C64]) -> C64) -> Result<Vec<CMat>, WeightError> {
    let h = model.chart_z().h_matrix(z, i);
    let perp = CMat::identity(h.nrows(), h.nrows()) - projector_of(&h);
    let e = model.chart_z().f_representatives(i);
    let s = scale(z);
    Ok(frame_blocks(model, i, z)?.into_iter().map(|m| &perp * &e * m * s).collect())
}

/// Coefficients `ω[a][ν]` of `γ_{1,i}(ξ_a) = Σ_ν ω[a][ν] dz̄_ν`, each a
/// `d_i × d_i` matrix in the `H_i` frames.
pub fn gamma1_coefficients(model: &DiagonalModel, engine: &DerivativeEngine, i: usize, z: &[C64]) -> Result<Vec<Vec<CMat>>, WeightError> {
    gamma1_scaled(model, engine, i, z, &|_| ONE)
}

/// As [`gamma1_coefficients`] with every frame vector multiplied by `f(z)`.
pub fn gamma1_scaled(
    model: &DiagonalModel,
    engine: &DerivativeEngine,
    i: usize,
    z: &[C64],
    f: &dyn Fn(&[C64]) -> C64,
) -> Result<Vec<Vec<CMat>>, WeightError> {
    let n = model.flag().dimension();
    let left = left_inverse(&model.chart_z().h_matrix(z, i))?;
    let mut out = vec![Vec::with_capacity(n); n];
    for nu in 0..n {
        let (_, db) = engine.wirtinger(|q: &[C64]| represented_frame(model, i, q, f), z, nu)?;
        for (a, d) in db.iter().enumerate() {
            out[a].push(-(&left * d));
        }
    }
    Ok(out)
}

/// `δ_{η_i} γ_{1,i}`: the representative of `η_i` differentiated directly.
pub fn gamma1_on_eta_direct(model: &DiagonalModel, engine: &DerivativeEngine, i: usize, z: &[C64], zeta: &[C64]) -> Result<Vec<CMat>, WeightError> {
    let n = model.flag().dimension();
    let left = left_inverse(&model.chart_z().h_matrix(z, i))?;
    let hz = model.chart_zeta().h_matrix(zeta, i);
    let mut out = Vec::with_capacity(n);
    for nu in 0..n {
        let (_, db) = engine.wirtinger(
            |q: &[C64]| -> Result<CMat, WeightError> {
                let h = model.chart_z().h_matrix(q, i);
                let perp = CMat::identity(h.nrows(), h.nrows()) - projector_of(&h);
                let e = model.chart_z().f_representatives(i);
                Ok(perp * e * model.chart_z().q_coords(q, i, &hz))
            },
            z,
            nu,
        )?;
        out.push(-(&left * db));
    }
    Ok(out)
}

fn tautological_weight(model: &DiagonalModel, engine: &DerivativeEngine, i: usize, z: &[C64], zeta: &[C64]) -> Result<GradedMatrix, WeightError> {
    let n = model.flag().dimension();
    let g0 = gamma0(model, i, z, zeta)?;
    let omega = gamma1_coefficients(model, engine, i, z)?;
    let d = g0.nrows();
    let basis: Vec<Vec<GradedElement>> = (0..n)
        .map(|a| (0..n).map(|nu| &GradedElement::gen(n, Family::Ecovec, a + 1) * &dwbar(n, nu)).collect())
        .collect();
    Ok(GradedMatrix::from_fn(d, d, |r, c| {
        let mut x = GradedElement::scalar(n, g0[(r, c)]);
        for a in 0..n {
            for nu in 0..n {
                x.axpy(omega[a][nu][(r, c)], &basis[a][nu]);
            }
        }
        x
    }))
}

/// Residuals of `∇_η g = 0` sorted by `E*`-degree of the defect, and of
/// `g_{0,0} = Id` on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub by_degree: Vec<f64>,
    pub diagonal: f64,
}

impl AxiomReport {
    pub fn max_residual(&self) -> f64 {
        self.by_degree.iter().cloned().fold(0.0, f64::max)
    }
}

/// `(δ_η − ∂̄) g` at `(z, ζ)`, with `∂̄` taken in both points.
pub fn nabla_eta(weight: &Weight, model: &DiagonalModel, engine: &DerivativeEngine, z: &[C64], zeta: &[C64]) -> Result<GradedMatrix, WeightError> {
    let n = model.flag().dimension();
    let g = weight.evaluate(model, engine, z, zeta)?;
    let eta = model.eta(z, zeta);
    let a = model.eta_coords_unchecked(&eta);
    let a: Vec<C64> = a.iter().cloned().collect();
    let contracted = g.interior(&a);
    let mut p = z.to_vec();
    p.extend_from_slice(zeta);
    let mut dbar = GradedMatrix::zeros(n, g.rows(), g.cols());
    for nu in Directions::BOTH.indices(n) {
        let (_, db) = engine.wirtinger(
            |q: &[C64]| -> Result<Vec<GradedElement>, WeightError> {
                Ok(weight.evaluate(model, engine, &q[..n], &q[n..])?.entries().to_vec())
            },
            &p,
            nu,
        )?;
        let form = dwbar(n, nu);
        let term = GradedMatrix::from_fn(g.rows(), g.cols(), |r, c| &form * &db[r * g.cols() + c]);
        dbar = dbar.add(&term);
    }
    Ok(contracted.add(&dbar.scale(-ONE)))
}

pub fn check_axioms(weight: &Weight, model: &DiagonalModel, engine: &DerivativeEngine, z: &[C64], zeta: &[C64]) -> Result<AxiomReport, WeightError> {
    let n = model.flag().dimension();
    let r = nabla_eta(weight, model, engine, z, zeta)?;
    let by_degree = (0..=n as u32).map(|k| r.map(|x| x.ecovec_part(k)).max_abs()).collect();
    let on_diag = weight.evaluate(model, engine, z, z)?;
    let id = GradedMatrix::identity(n, weight.rank());
    let diagonal = on_diag.map(|x| x.ecovec_part(0)).distance(&id);
    Ok(AxiomReport { by_degree, diagonal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flagspace::sample_coords;
    use crate::linalg::c;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(flag: &str) -> (DiagonalModel, DerivativeEngine) {
        let f: FlagType = flag.parse().unwrap();
        (DiagonalModel::big_cell(&f), DerivativeEngine::default())
    }

    #[test]
    fn parse_descriptors() {
        let b: BundleDescriptor = "L:1^-2*L:2^1".parse().unwrap();
        assert_eq!(b.factors, vec![BundleFactor::Line { level: 1, power: -2 }, BundleFactor::Line { level: 2, power: 1 }]);
        assert_eq!(b.to_string(), "L:1^-2*L:2^1");
        let h: BundleDescriptor = "H:2".parse().unwrap();
        assert_eq!(h.factors, vec![BundleFactor::Tautological(2)]);
        assert!("X:1".parse::<BundleDescriptor>().is_err());
        assert!("L:a^2".parse::<BundleDescriptor>().is_err());
    }

    #[test]
    fn gamma0_examples() {
        let (m, _) = setup("1,2:2");
        let g = gamma0(&m, 1, &[c(0.0, 0.0)], &[c(0.7, -0.2)]).unwrap();
        assert!((g[(0, 0)] - 1.0).norm() < 1e-15);
        let g = gamma0(&m, 1, &[c(0.3, 0.1)], &[c(0.3, 0.1)]).unwrap();
        assert!((g[(0, 0)] - 1.0).norm() < 1e-14);
    }

    #[test]
    fn gamma0_of_orthogonal_lines() {
        let f = FlagType::projective(1);
        let other = crate::flagspace::Chart::new(&f, vec![1, 0]).unwrap();
        let m = DiagonalModel::new(crate::flagspace::Chart::big_cell(&f), other).unwrap();
        // ζ = 0 in the swapped chart is the line spanned by e₂
        let g = gamma0(&m, 1, &[c(0.0, 0.0)], &[c(0.0, 0.0)]).unwrap();
        assert!(g[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn gamma1_at_center_of_p1() {
        // ∂̄[(I − π)e₂] = −e₁ at b = 0, so γ₁(ξ) = dz̄
        let (m, e) = setup("1,2:2");
        let w = gamma1_coefficients(&m, &e, 1, &[c(0.0, 0.0)]).unwrap();
        assert!((w[0][0][(0, 0)] - 1.0).norm() < 1e-9, "{}", w[0][0][(0, 0)]);
    }

    #[test]
    fn gamma1_is_c_infinity_linear() {
        let (m, e) = setup("1,2,3:3");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = sample_coords(m.flag(), &mut rng);
        let f = |q: &[C64]| c(1.0, 0.0) + q[0] * q[1].conj() + c(0.0, 0.5) * q[2].norm_sqr();
        for i in 1..3 {
            let plain = gamma1_coefficients(&m, &e, i, &z).unwrap();
            let scaled = gamma1_scaled(&m, &e, i, &z, &f).unwrap();
            let fz = f(&z);
            for (pa, sa) in plain.iter().zip(&scaled) {
                for (p, s) in pa.iter().zip(sa) {
                    assert!((p * fz - s).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn contraction_equals_level_contraction() {
        let (m, e) = setup("1,2,3:3");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = sample_coords(m.flag(), &mut rng);
        let zeta = sample_coords(m.flag(), &mut rng);
        let a = m.eta_coords_unchecked(&m.eta(&z, &zeta));
        for i in 1..3 {
            let w = gamma1_coefficients(&m, &e, i, &z).unwrap();
            let direct = gamma1_on_eta_direct(&m, &e, i, &z, &zeta).unwrap();
            for nu in 0..3 {
                let mut contracted = CMat::zeros(direct[nu].nrows(), direct[nu].ncols());
                for (k, wa) in w.iter().enumerate() {
                    contracted += &wa[nu] * a[k];
                }
                assert!((contracted - &direct[nu]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn tautological_axioms() {
        for flag in ["1,2:2", "1,2,3:3", "2,4:4"] {
            let (m, e) = setup(flag);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for i in 1..m.flag().levels() {
                let w = Weight::tautological(m.flag(), i).unwrap();
                for _ in 0..3 {
                    let z = sample_coords(m.flag(), &mut rng);
                    let zeta = sample_coords(m.flag(), &mut rng);
                    let rep = check_axioms(&w, &m, &e, &z, &zeta).unwrap();
                    assert!(rep.max_residual() < 1e-6, "{flag} H:{i} {rep:?}");
                    assert!(rep.diagonal < 1e-10);
                }
            }
        }
    }

    #[test]
    fn derived_weights_satisfy_axioms() {
        let (m, e) = setup("2,4:4");
        let h = Weight::tautological(m.flag(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = sample_coords(m.flag(), &mut rng);
        let zeta = sample_coords(m.flag(), &mut rng);
        for w in [h.exterior_power(2).unwrap(), h.dual().unwrap(), h.exterior_power(2).unwrap().power(-2).unwrap(), h.tensor(&h.dual().unwrap())] {
            let rep = check_axioms(&w, &m, &e, &z, &zeta).unwrap();
            assert!(rep.max_residual() < 1e-6, "{} {rep:?}", w.descriptor());
            assert!(rep.diagonal < 1e-10);
        }
    }

    #[test]
    fn compound_of_gamma0() {
        let (m, e) = setup("2,4:4");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = sample_coords(m.flag(), &mut rng);
        let zeta = sample_coords(m.flag(), &mut rng);
        let w = Weight::tautological(m.flag(), 1).unwrap().exterior_power(2).unwrap();
        let g = w.components(&m, &e, &z, &zeta).unwrap();
        let det = gamma0(&m, 1, &z, &zeta).unwrap().determinant();
        assert!((g[0].get(0, 0).coefficient(crate::exterior::Monomial::ONE) - det).norm() < 1e-12);
    }

    #[test]
    fn dual_is_an_involution_and_trivial_is_neutral() {
        let (m, e) = setup("1,3:3");
        let h = Weight::tautological(m.flag(), 1).unwrap();
        let z = [c(0.2, 0.1), c(-0.3, 0.4)];
        let zeta = [c(0.5, -0.1), c(0.1, 0.2)];
        let g = h.evaluate(&m, &e, &z, &zeta).unwrap();
        let gg = h.dual().unwrap().dual().unwrap().evaluate(&m, &e, &z, &zeta).unwrap();
        assert_eq!(g, gg);
        let t = h.tensor(&Weight::trivial()).evaluate(&m, &e, &z, &zeta).unwrap();
        assert_eq!(g, t);
        assert_eq!(h.exterior_power(1).unwrap(), h);
    }

    #[test]
    fn dual_on_flags_is_unsupported() {
        let f: FlagType = "1,2,3:3".parse().unwrap();
        let h = Weight::tautological(&f, 1).unwrap();
        assert!(matches!(h.dual(), Err(WeightError::Unsupported(_))));
        assert!(matches!(h.exterior_power(2), Err(WeightError::RankMismatch { .. })));
    }
}
