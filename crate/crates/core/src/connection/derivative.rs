//! Finite-difference Wirtinger derivatives.

use serde::{Deserialize, Serialize};

use crate::exterior::GradedElement;
use crate::linalg::{c, CMat, CVec, C64, I};

use super::ConnectionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FdScheme {
    Central2,
    #[default]
    Richardson4,
}

impl std::str::FromStr for FdScheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "central2" => Ok(FdScheme::Central2),
            "richardson4" => Ok(FdScheme::Richardson4),
            other => Err(format!("unknown FD scheme '{other}' (central2 | richardson4)")),
        }
    }
}

impl std::fmt::Display for FdScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FdScheme::Central2 => "central2",
            FdScheme::Richardson4 => "richardson4",
        })
    }
}

/// Values that finite differences can be taken of.
pub trait FdValue: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, k: C64, other: &Self);
}

impl FdValue for C64 {
    fn zero_like(&self) -> Self {
        C64::default()
    }
    fn add_scaled(&mut self, k: C64, other: &Self) {
        *self += k * other;
    }
}

impl FdValue for Vec<C64> {
    fn zero_like(&self) -> Self {
        vec![C64::default(); self.len()]
    }
    fn add_scaled(&mut self, k: C64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += k * b;
        }
    }
}

impl FdValue for CMat {
    fn zero_like(&self) -> Self {
        CMat::zeros(self.nrows(), self.ncols())
    }
    fn add_scaled(&mut self, k: C64, other: &Self) {
        self.zip_apply(other, |a, b| *a += k * b);
    }
}

impl FdValue for CVec {
    fn zero_like(&self) -> Self {
        CVec::zeros(self.len())
    }
    fn add_scaled(&mut self, k: C64, other: &Self) {
        self.zip_apply(other, |a, b| *a += k * b);
    }
}

impl FdValue for GradedElement {
    fn zero_like(&self) -> Self {
        GradedElement::zero(self.dim()).with_prune(self.prune_epsilon())
    }
    fn add_scaled(&mut self, k: C64, other: &Self) {
        self.axpy(k, other);
    }
}

impl<A: FdValue, B: FdValue> FdValue for (A, B) {
    fn zero_like(&self) -> Self {
        (self.0.zero_like(), self.1.zero_like())
    }
    fn add_scaled(&mut self, k: C64, other: &Self) {
        self.0.add_scaled(k, &other.0);
        self.1.add_scaled(k, &other.1);
    }
}

impl<T: FdValue> FdValue for Vec<T>
where
    T: NotScalar,
{
    fn zero_like(&self) -> Self {
        self.iter().map(|t| t.zero_like()).collect()
    }
    fn add_scaled(&mut self, k: C64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            a.add_scaled(k, b);
        }
    }
}

/// Marker keeping `Vec<C64>` distinct from `Vec<T>` for composite values.
pub trait NotScalar {}
impl NotScalar for CMat {}
impl NotScalar for CVec {}
impl NotScalar for GradedElement {}

/// Finite-difference settings shared by every derivative in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEngine {
    pub step: f64,
    pub scheme: FdScheme,
}

impl Default for DerivativeEngine {
    fn default() -> Self {
        DerivativeEngine { step: 1e-3, scheme: FdScheme::Richardson4 }
    }
}

impl DerivativeEngine {
    pub fn new(step: f64, scheme: FdScheme) -> Result<Self, ConnectionError> {
        if !(1e-8..=1e-2).contains(&step) {
            return Err(ConnectionError::InvalidStep(step));
        }
        Ok(DerivativeEngine { step, scheme })
    }

    /// Absolute step at coordinate value `w`.
    pub fn step_at(&self, w: C64) -> f64 {
        self.step * w.norm().max(1.0)
    }

    /// `(offset, weight for ∂, weight for ∂̄)`.
    pub fn stencil(&self, h: f64) -> Vec<(C64, C64, C64)> {
        fn central(h: f64, scale: f64, out: &mut Vec<(C64, C64, C64)>) {
            let w = scale / (4.0 * h);
            out.push((c(h, 0.0), c(w, 0.0), c(w, 0.0)));
            out.push((c(-h, 0.0), c(-w, 0.0), c(-w, 0.0)));
            out.push((c(0.0, h), -I * w, I * w));
            out.push((c(0.0, -h), I * w, -I * w));
        }
        let mut out = Vec::with_capacity(8);
        match self.scheme {
            FdScheme::Central2 => central(h, 1.0, &mut out),
            FdScheme::Richardson4 => {
                central(0.5 * h, 4.0 / 3.0, &mut out);
                central(h, -1.0 / 3.0, &mut out);
            }
        }
        out
    }

    /// `(∂f/∂w_dir, ∂f/∂w̄_dir)` at `p`.
    pub fn wirtinger<T, E, F>(&self, mut f: F, p: &[C64], dir: usize) -> Result<(T, T), E>
    where
        T: FdValue,
        F: FnMut(&[C64]) -> Result<T, E>,
    {
        let h = self.step_at(p[dir]);
        let mut q = p.to_vec();
        let mut acc: Option<(T, T)> = None;
        for (off, wd, wdb) in self.stencil(h) {
            q[dir] = p[dir] + off;
            let v = f(&q)?;
            let (d, db) = acc.get_or_insert_with(|| (v.zero_like(), v.zero_like()));
            d.add_scaled(wd, &v);
            db.add_scaled(wdb, &v);
        }
        Ok(acc.expect("non-empty stencil"))
    }

    /// Scalar convenience: `(∂f, ∂̄f)` of a field of one complex variable.
    pub fn holo_partial(&self, f: impl Fn(C64) -> C64, w: C64) -> (C64, C64) {
        self.wirtinger(|q: &[C64]| Ok::<_, ()>(f(q[0])), &[w], 0).expect("infallible")
    }

    /// `∂̄` of a form-valued field along `dirs`, with `dw̄_ν` placed on the left.
    pub fn dbar_element<E, F>(&self, mut f: F, p: &[C64], dirs: &[usize], n: usize) -> Result<GradedElement, E>
    where
        F: FnMut(&[C64]) -> Result<GradedElement, E>,
    {
        let mut out = GradedElement::zero(n);
        for &nu in dirs {
            let (_, db) = self.wirtinger(&mut f, p, nu)?;
            out += &(&super::dwbar(n, nu) * &db);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_fields() {
        let e = DerivativeEngine::default();
        let w0 = c(0.4, -0.2);
        let (d, db) = e.holo_partial(|w| w, w0);
        assert!((d - 1.0).norm() < 1e-12 && db.norm() < 1e-12);
        let (d, _) = e.holo_partial(|w| w * w.conj(), w0);
        assert!((d - w0.conj()).norm() < 1e-10);
    }

    #[test]
    fn exp_matches_to_1e8() {
        let e = DerivativeEngine::new(1e-3, FdScheme::Richardson4).unwrap();
        let w0 = c(0.3, 0.1);
        let (d, db) = e.holo_partial(|w| w.exp(), w0);
        assert!((d - w0.exp()).norm() < 1e-8);
        assert!(db.norm() < 1e-8);
    }

    #[test]
    fn step_bounds() {
        assert!(DerivativeEngine::new(1e-1, FdScheme::Central2).is_err());
        assert!(DerivativeEngine::new(1e-9, FdScheme::Central2).is_err());
    }

    #[test]
    fn scheme_parse() {
        assert_eq!("central2".parse::<FdScheme>().unwrap(), FdScheme::Central2);
        assert!("forward".parse::<FdScheme>().is_err());
    }
}
