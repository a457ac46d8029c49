//! Small complex dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Solves `a x = b`, refusing (numerically) singular systems.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    let lu = a.clone().lu();
    if !well_conditioned(&lu.u(), a) {
        return None;
    }
    lu.solve(b)
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    solve(a, &CMat::identity(a.nrows(), a.ncols()))
}

fn well_conditioned(u: &CMat, a: &CMat) -> bool {
    let scale = a.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300);
    (0..u.nrows()).all(|i| u[(i, i)].norm() > 1e-13 * scale)
}

/// Operator 2-norm estimate via singular values.
pub fn op_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Largest entry magnitude.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn det(a: &CMat) -> C64 {
    if a.nrows() == 0 {
        return ONE;
    }
    a.clone().determinant()
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Sorted `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Number of singular values above `tol · σ_max`.
pub fn numerical_rank(a: &CMat, tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > tol * smax.max(1e-300)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_count() {
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(subsets(2, 3).len(), 0);
    }

    #[test]
    fn singular_solve_is_refused() {
        let a = CMat::from_element(2, 2, ONE);
        assert!(solve(&a, &CMat::identity(2, 2)).is_none());
    }
}
