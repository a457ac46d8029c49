//! Flag types, big-cell charts and the tautological frames `H_i`, `F_i`.
//!
//! A chart is a permutation `w` of the standard basis; a point in it is the
//! matrix `U = P_w (I + B)` with `B` strictly block lower triangular. Column
//! spans of the leading `d_i` columns of `U` give the flag.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{self, c, CMat, CVec, C64, ONE, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlagError {
    #[error("invalid flag type: {0}")]
    InvalidFlag(String),
    #[error("cannot parse flag type '{0}' (expected \"d1,..,dk:N\")")]
    Parse(String),
    #[error("level {level} out of range 1..={max}")]
    Level { level: usize, max: usize },
    #[error("invalid permutation {0:?}")]
    Permutation(Vec<usize>),
    #[error("point lies outside the target chart (singular pivot minor at level {0})")]
    SingularPivot(usize),
    #[error("coordinate vector has length {got}, expected {expected}")]
    CoordinateLength { got: usize, expected: usize },
    #[error("points belong to different flag types")]
    FlagMismatch,
}

/// Combinatorial type `(d_1 < … < d_k = N)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlagType {
    ambient: usize,
    dims: Vec<usize>,
}

impl FlagType {
    pub fn new(dims: Vec<usize>, ambient: usize) -> Result<Self, FlagError> {
        if dims.is_empty() {
            return Err(FlagError::InvalidFlag("empty dimension list".into()));
        }
        if dims[0] == 0 {
            return Err(FlagError::InvalidFlag("d_1 must be positive".into()));
        }
        if dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FlagError::InvalidFlag(format!("{dims:?} is not strictly increasing")));
        }
        if *dims.last().unwrap() != ambient {
            return Err(FlagError::InvalidFlag(format!("d_k = {} differs from N = {ambient}", dims.last().unwrap())));
        }
        Ok(FlagType { ambient, dims })
    }

    /// Complex projective space `P^m` as the flag type `(1, m+1)`.
    pub fn projective(m: usize) -> Self {
        FlagType::new(vec![1, m + 1], m + 1).expect("valid projective space")
    }

    /// Grassmannian of `d`-planes in `ℂ^N`.
    pub fn grassmannian(d: usize, ambient: usize) -> Result<Self, FlagError> {
        FlagType::new(vec![d, ambient], ambient)
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of levels `k`.
    pub fn levels(&self) -> usize {
        self.dims.len()
    }

    /// `d_i` for `i ∈ 0..=k`, with `d_0 = 0`.
    pub fn d(&self, i: usize) -> usize {
        if i == 0 {
            0
        } else {
            self.dims[i - 1]
        }
    }

    /// Complex dimension `Σ_{j<k} d_j (d_{j+1} − d_j)`.
    pub fn dimension(&self) -> usize {
        (1..self.levels()).map(|j| self.d(j) * (self.d(j + 1) - self.d(j))).sum()
    }

    pub fn is_grassmannian(&self) -> bool {
        self.levels() == 2
    }

    pub fn is_projective(&self) -> bool {
        self.is_grassmannian() && self.dims[0] == 1
    }

    /// `(row, col)` in `U` of each chart coordinate, in the fixed block layout:
    /// block column, then block row below it, then row, then column.
    pub fn layout(&self) -> Vec<(usize, usize)> {
        let k = self.levels();
        let mut out = Vec::with_capacity(self.dimension());
        for cseg in 0..k - 1 {
            for rseg in cseg + 1..k {
                for row in self.d(rseg)..self.d(rseg + 1) {
                    for col in self.d(cseg)..self.d(cseg + 1) {
                        out.push((row, col));
                    }
                }
            }
        }
        out
    }

    /// Total length `Σ_{i<k} d_i (N − d_i)` of the Hom coordinates.
    pub fn hom_length(&self) -> usize {
        (1..self.levels()).map(|i| self.d(i) * (self.ambient - self.d(i))).sum()
    }

    pub fn check_level(&self, i: usize) -> Result<(), FlagError> {
        if i == 0 || i > self.levels() {
            Err(FlagError::Level { level: i, max: self.levels() })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for FlagType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ds: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}:{}", ds.join(","), self.ambient)
    }
}

impl FromStr for FlagType {
    type Err = FlagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FlagError::Parse(s.to_string());
        let (ds, n) = s.trim().split_once(':').ok_or_else(bad)?;
        let ambient: usize = n.trim().parse().map_err(|_| bad())?;
        let dims = ds
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        FlagType::new(dims, ambient)
    }
}

/// A permutation-translated big cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chart {
    flag: FlagType,
    perm: Vec<usize>,
}

impl Chart {
    pub fn big_cell(flag: &FlagType) -> Arc<Chart> {
        Arc::new(Chart { flag: flag.clone(), perm: (0..flag.ambient()).collect() })
    }

    /// `perm[j]` is the 0-based image of basis vector `j`.
    pub fn new(flag: &FlagType, perm: Vec<usize>) -> Result<Arc<Chart>, FlagError> {
        let mut seen = vec![false; flag.ambient()];
        if perm.len() != flag.ambient() {
            return Err(FlagError::Permutation(perm));
        }
        for &p in &perm {
            if p >= flag.ambient() || seen[p] {
                return Err(FlagError::Permutation(perm));
            }
            seen[p] = true;
        }
        Ok(Arc::new(Chart { flag: flag.clone(), perm }))
    }

    pub fn flag(&self) -> &FlagType {
        &self.flag
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(j, &p)| j == p)
    }

    /// `P_w X`.
    fn permute_rows(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(x.nrows(), x.ncols());
        for j in 0..x.nrows() {
            out.set_row(self.perm[j], &x.row(j));
        }
        out
    }

    /// `P_wᵀ X`.
    fn unpermute_rows(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(x.nrows(), x.ncols());
        for j in 0..x.nrows() {
            out.set_row(j, &x.row(self.perm[j]));
        }
        out
    }

    /// Chart matrix `U = P_w(I + B)` for raw coordinates.
    pub fn point_matrix(&self, coords: &[C64]) -> CMat {
        let n = self.flag.ambient();
        let mut u = CMat::identity(n, n);
        for (&(r, col), &v) in self.flag.layout().iter().zip(coords) {
            u[(r, col)] = v;
        }
        self.permute_rows(&u)
    }

    /// Frame of `H_i`: leading `d_i` columns of `U`.
    pub fn h_matrix(&self, coords: &[C64], i: usize) -> CMat {
        let u = self.point_matrix(coords);
        u.columns(0, self.flag.d(i)).into_owned()
    }

    /// Representatives `e_{w(d_i+1)}, …, e_{w(N)}` of the `F_i` frame.
    pub fn f_representatives(&self, i: usize) -> CMat {
        let n = self.flag.ambient();
        let di = self.flag.d(i);
        let mut e = CMat::zeros(n, n - di);
        for (col, j) in (di..n).enumerate() {
            e[(self.perm[j], col)] = ONE;
        }
        e
    }

    /// `F_i`-frame (quotient) coordinates of `v`, i.e. the lower block of
    /// `[H_i | E_i]^{-1} v`. The leading block of `I + B` is unit lower
    /// triangular, so no general solve is needed.
    pub fn q_coords(&self, coords: &[C64], i: usize, v: &CMat) -> CMat {
        let n = self.flag.ambient();
        let di = self.flag.d(i);
        let mut ib = CMat::identity(n, n);
        for (&(r, col), &val) in self.flag.layout().iter().zip(coords) {
            ib[(r, col)] = val;
        }
        let x = self.unpermute_rows(v);
        let top = x.rows(0, di).into_owned();
        let low = x.rows(di, n - di).into_owned();
        let t = ib.view((0, 0), (di, di)).into_owned();
        let t = t
            .solve_lower_triangular(&top)
            .expect("unit lower triangular block");
        let blow = ib.view((di, 0), (n - di, di)).into_owned();
        low - blow * t
    }
}

/// A point of `X` in a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub chart: Arc<Chart>,
    pub coords: Vec<C64>,
}

/// Frame and Gram matrix of `H_i` or `F_i` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub level: usize,
    pub frame: CMat,
    pub gram: CMat,
}

impl ChartPoint {
    pub fn new(chart: Arc<Chart>, coords: Vec<C64>) -> Result<Self, FlagError> {
        let expected = chart.flag().dimension();
        if coords.len() != expected {
            return Err(FlagError::CoordinateLength { got: coords.len(), expected });
        }
        Ok(ChartPoint { chart, coords })
    }

    /// Big-cell point with the given coordinates.
    pub fn big_cell(flag: &FlagType, coords: Vec<C64>) -> Result<Self, FlagError> {
        ChartPoint::new(Chart::big_cell(flag), coords)
    }

    pub fn center(chart: Arc<Chart>) -> Self {
        let n = chart.flag().dimension();
        ChartPoint { chart, coords: vec![ZERO; n] }
    }

    pub fn flag(&self) -> &FlagType {
        self.chart.flag()
    }

    pub fn matrix(&self) -> CMat {
        self.chart.point_matrix(&self.coords)
    }

    pub fn h_frame(&self, i: usize) -> Result<FrameBundle, FlagError> {
        self.flag().check_level(i)?;
        let frame = self.chart.h_matrix(&self.coords, i);
        let gram = frame.adjoint() * &frame;
        Ok(FrameBundle { level: i, frame, gram })
    }

    /// Representatives of the `F_i` frame; the Gram matrix is taken through
    /// the identification of `F_i` with `H_i^⊥`.
    pub fn f_frame(&self, i: usize) -> Result<FrameBundle, FlagError> {
        if i == 0 || i >= self.flag().levels() {
            return Err(FlagError::Level { level: i, max: self.flag().levels() - 1 });
        }
        let e = self.chart.f_representatives(i);
        let perp = self.complement_projector(i)?;
        let gram = e.adjoint() * perp * &e;
        Ok(FrameBundle { level: i, frame: e, gram })
    }

    /// Orthogonal projector onto `V_i`.
    pub fn projector(&self, i: usize) -> Result<CMat, FlagError> {
        self.flag().check_level(i)?;
        Ok(projector_of(&self.chart.h_matrix(&self.coords, i)))
    }

    pub fn complement_projector(&self, i: usize) -> Result<CMat, FlagError> {
        let p = self.projector(i)?;
        let n = p.nrows();
        Ok(CMat::identity(n, n) - p)
    }

    pub fn project_h(&self, i: usize, v: &CVec) -> Result<CVec, FlagError> {
        Ok(self.projector(i)? * v)
    }

    /// All `π_{H_i}`, used to compare flags across charts.
    pub fn flag_projectors(&self) -> Vec<CMat> {
        (1..=self.flag().levels()).map(|i| self.projector(i).expect("valid level")).collect()
    }

    /// `s_v(p)` evaluated on the frame determinant of `H_i`; `v` is given by
    /// its Plücker coefficients over sorted `d_i`-subsets of `0..N`.
    pub fn section_s_v(&self, i: usize, v: &[C64]) -> Result<C64, FlagError> {
        self.flag().check_level(i)?;
        let h = self.chart.h_matrix(&self.coords, i);
        Ok(plucker(&h).iter().zip(v).map(|(u, vv)| u * vv.conj()).sum())
    }

    /// The same flag expressed in chart `perm`.
    pub fn transition(&self, perm: Vec<usize>) -> Result<ChartPoint, FlagError> {
        let chart = Chart::new(self.flag(), perm)?;
        from_matrix(chart, &self.matrix())
    }

    /// Applies `R ∈ U(N)` to the flag and re-expresses it in the big cell.
    pub fn rotate(&self, r: &CMat) -> Result<ChartPoint, FlagError> {
        from_matrix(Chart::big_cell(self.flag()), &(r * self.matrix()))
    }
}

/// `h (h* h)^{-1} h*`.
pub fn projector_of(h: &CMat) -> CMat {
    let g = h.adjoint() * h;
    let gi = linalg::inverse(&g).expect("frame has full rank");
    h * gi * h.adjoint()
}

/// Plücker coordinates (maximal minors) of an `N × d` matrix.
pub fn plucker(h: &CMat) -> Vec<C64> {
    let d = h.ncols();
    linalg::subsets(h.nrows(), d)
        .iter()
        .map(|rows| {
            let sub = DMatrix::from_fn(d, d, |a, b| h[(rows[a], b)]);
            linalg::det(&sub)
        })
        .collect()
}

/// The point of chart `chart` whose leading column spans agree with those of `m`.
pub fn from_matrix(chart: Arc<Chart>, m: &CMat) -> Result<ChartPoint, FlagError> {
    let flag = chart.flag().clone();
    let n = flag.ambient();
    let x = chart.unpermute_rows(m);
    let mut l = CMat::identity(n, n);
    for seg in 0..flag.levels() - 1 {
        let di = flag.d(seg + 1);
        let xi = x.columns(0, di).into_owned();
        let top = xi.rows(0, di).into_owned();
        let inv = linalg::inverse(&top).ok_or(FlagError::SingularPivot(seg + 1))?;
        let yi = xi * inv;
        let lo = flag.d(seg);
        for col in lo..di {
            for row in di..n {
                l[(row, col)] = yi[(row, col)];
            }
        }
    }
    let coords = flag.layout().iter().map(|&(r, col)| l[(r, col)]).collect();
    Ok(ChartPoint { chart, coords })
}

fn complex_gaussian<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Heavy-tailed big-cell coordinates: ratios of complex Gaussians.
pub fn sample_coords<R: Rng>(flag: &FlagType, rng: &mut R) -> Vec<C64> {
    (0..flag.dimension())
        .map(|_| complex_gaussian(rng) / complex_gaussian(rng))
        .collect()
}

/// Deterministic big-cell sample for `seed`.
pub fn sample_point(flag: &FlagType, seed: u64) -> ChartPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ChartPoint { chart: Chart::big_cell(flag), coords: sample_coords(flag, &mut rng) }
}

/// Haar-random unitary via QR of a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut out = q;
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            out[(i, j)] *= ph;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> FlagType {
        "1,2:2".parse().unwrap()
    }

    #[test]
    fn dimensions() {
        assert_eq!(p1().dimension(), 1);
        assert_eq!("1,2,3:3".parse::<FlagType>().unwrap().dimension(), 3);
        assert_eq!("2,4:4".parse::<FlagType>().unwrap().dimension(), 4);
        assert_eq!(FlagType::projective(2).dimension(), 2);
        // oracle: first form of the sum, Σ (N − d_j)(d_j − d_{j−1})
        for s in ["1,3:3", "2,5:5", "1,3,5:5", "1,2,4:4", "2,3,6:6"] {
            let f: FlagType = s.parse().unwrap();
            let alt: usize = (1..f.levels()).map(|j| (f.ambient() - f.d(j)) * (f.d(j) - f.d(j - 1))).sum();
            assert_eq!(f.dimension(), alt);
            assert_eq!(f.layout().len(), alt);
        }
    }

    #[test]
    fn parse_errors() {
        assert!("1,1:2".parse::<FlagType>().is_err());
        assert!("1,2:3".parse::<FlagType>().is_err());
        assert!("0,2:2".parse::<FlagType>().is_err());
        assert!("1,2".parse::<FlagType>().is_err());
        assert_eq!(p1().to_string(), "1,2:2");
    }

    #[test]
    fn p1_frames_closed_form() {
        let b = c(0.7, -1.3);
        let p = ChartPoint::big_cell(&p1(), vec![b]).unwrap();
        let h = p.h_frame(1).unwrap();
        assert_eq!(h.frame[(0, 0)], ONE);
        assert_eq!(h.frame[(1, 0)], b);
        let f = p.f_frame(1).unwrap();
        assert!((f.gram[(0, 0)] - 1.0 / (1.0 + b.norm_sqr())).norm() < 1e-14);
        let center = ChartPoint::big_cell(&p1(), vec![ZERO]).unwrap();
        assert!((center.f_frame(1).unwrap().gram[(0, 0)] - ONE).norm() < 1e-15);
    }

    #[test]
    fn p1_projection_closed_form() {
        let b = c(-0.4, 2.1);
        let p = ChartPoint::big_cell(&p1(), vec![b]).unwrap();
        let v = CVec::from_vec(vec![ZERO, ONE]);
        let got = p.project_h(1, &v).unwrap();
        let s = b.conj() / (1.0 + b.norm_sqr());
        assert!((got[0] - s).norm() < 1e-14);
        assert!((got[1] - s * b).norm() < 1e-14);
        let center = ChartPoint::big_cell(&p1(), vec![ZERO]).unwrap();
        assert!(center.project_h(1, &v).unwrap().norm() < 1e-15);
    }

    #[test]
    fn projectors_are_hermitian_idempotent_and_nested() {
        for s in ["1,2:2", "1,2,3:3", "2,4:4", "1,3,4:4"] {
            let f: FlagType = s.parse().unwrap();
            for seed in 0..20 {
                let p = sample_point(&f, seed);
                for i in 1..=f.levels() {
                    let pi = p.projector(i).unwrap();
                    assert!(linalg::op_norm(&(&pi * &pi - &pi)) < 1e-10 * (1.0 + linalg::op_norm(&pi)));
                    assert!(linalg::op_norm(&(pi.adjoint() - &pi)) < 1e-10);
                    if i < f.levels() {
                        let hi = p.h_frame(i).unwrap().frame;
                        let hn = p.h_frame(i + 1).unwrap().frame;
                        assert_eq!(hn.columns(0, f.d(i)).into_owned(), hi);
                        let g = p.f_frame(i).unwrap().gram;
                        let ev = g.symmetric_eigenvalues();
                        assert!(ev.iter().all(|e| *e > 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn s_v_values() {
        let b = c(0.2, 0.9);
        let p = ChartPoint::big_cell(&p1(), vec![b]).unwrap();
        assert_eq!(p.section_s_v(1, &[ONE, ZERO]).unwrap(), ONE);
        assert_eq!(p.section_s_v(1, &[ZERO, ONE]).unwrap(), b);
        assert_eq!(p.section_s_v(1, &[ZERO, ZERO]).unwrap(), ZERO);
    }

    #[test]
    fn s_v_span_has_full_rank_on_gr24() {
        let f: FlagType = "2,4:4".parse().unwrap();
        let basis = linalg::subsets(4, 2);
        let m = CMat::from_fn(12, basis.len(), |row, col| {
            let mut v = vec![ZERO; basis.len()];
            v[col] = ONE;
            sample_point(&f, 100 + row as u64).section_s_v(1, &v).unwrap()
        });
        assert_eq!(linalg::numerical_rank(&m, 1e-10), 6);
    }

    #[test]
    fn sampler_is_deterministic() {
        let f: FlagType = "1,2,3:3".parse().unwrap();
        assert_eq!(sample_point(&f, 9), sample_point(&f, 9));
        assert_ne!(sample_point(&f, 9), sample_point(&f, 10));
    }

    #[test]
    fn transitions_preserve_the_flag() {
        for s in ["1,2:2", "1,2,3:3", "2,4:4"] {
            let f: FlagType = s.parse().unwrap();
            let p = sample_point(&f, 3);
            let same = p.transition((0..f.ambient()).collect()).unwrap();
            for (a, b) in same.coords.iter().zip(&p.coords) {
                assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()));
            }
            let mut perm: Vec<usize> = (0..f.ambient()).collect();
            perm.reverse();
            let q = p.transition(perm).unwrap();
            for (a, b) in p.flag_projectors().iter().zip(q.flag_projectors()) {
                assert!(linalg::op_norm(&(a - b)) < 1e-10);
            }
        }
    }

    #[test]
    fn transition_out_of_chart_fails() {
        let p = ChartPoint::big_cell(&p1(), vec![ZERO]).unwrap();
        assert_eq!(p.transition(vec![1, 0]), Err(FlagError::SingularPivot(1)));
    }

    #[test]
    fn unitary_rotation_preserves_projector_relation() {
        let f: FlagType = "1,2,3:3".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = random_unitary(3, &mut rng);
        assert!(linalg::op_norm(&(r.adjoint() * &r - CMat::identity(3, 3))) < 1e-12);
        let p = sample_point(&f, 11);
        let q = p.rotate(&r).unwrap();
        for (a, b) in p.flag_projectors().iter().zip(q.flag_projectors()) {
            assert!(linalg::op_norm(&(&r * a * r.adjoint() - b)) < 1e-9);
        }
    }
}
