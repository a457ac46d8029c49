//! Sparse graded-commutative algebra over the cotangent generators of
//! `X × X` together with the frame generators of `E` and `E*`.
//!
//! Every generator is odd. A monomial is stored as a bitmask whose bit order
//! is the canonical generator order
//! `dz < dz̄ < dζ < dζ̄ < e_a < e^a`, each family indexed `1..=n`.
//! A term `c · m` always means `c` times the wedge of the generators of `m`
//! taken in canonical order.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Width of one family inside a monomial bitmask.
const FAMILY_BITS: u32 = 10;

/// Largest ambient dimension the bitmask layout can hold.
pub const MAX_DIM: usize = FAMILY_BITS as usize;

/// Default magnitude below which coefficients are dropped.
pub const DEFAULT_PRUNE: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExteriorError {
    #[error("ambient dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("generator index {index} out of range for ambient dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("ambient dimension {0} exceeds the supported maximum {MAX_DIM}")]
    DimensionTooLarge(usize),
}

/// Generator families in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    /// `dz_j`
    Zhol = 0,
    /// `dz̄_j`
    Zanti = 1,
    /// `dζ_j`
    Whol = 2,
    /// `dζ̄_j`
    Wanti = 3,
    /// `e_a`, frame of `E`
    Evec = 4,
    /// `e^a`, dual frame of `E*`
    Ecovec = 5,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Zhol,
        Family::Zanti,
        Family::Whol,
        Family::Wanti,
        Family::Evec,
        Family::Ecovec,
    ];

    pub const COTANGENT: [Family; 4] = [Family::Zhol, Family::Zanti, Family::Whol, Family::Wanti];

    fn shift(self) -> u32 {
        self as u32 * FAMILY_BITS
    }

    fn symbol(self) -> &'static str {
        match self {
            Family::Zhol => "dz",
            Family::Zanti => "dz̄",
            Family::Whol => "dζ",
            Family::Wanti => "dζ̄",
            Family::Evec => "e_",
            Family::Ecovec => "e^",
        }
    }
}

/// A single generator; `index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GeneratorIndex {
    pub family: Family,
    pub index: usize,
}

impl GeneratorIndex {
    pub fn new(family: Family, index: usize) -> Self {
        GeneratorIndex { family, index }
    }

    fn bit(self) -> u32 {
        self.family.shift() + (self.index as u32 - 1)
    }
}

/// Canonically ordered wedge of distinct generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(pub u64);

const FAMILY_MASK: u64 = (1u64 << FAMILY_BITS) - 1;

impl Monomial {
    pub const ONE: Monomial = Monomial(0);

    pub fn generator(g: GeneratorIndex) -> Self {
        Monomial(1u64 << g.bit())
    }

    /// Total number of generators.
    pub fn degree(self) -> u32 {
        self.0.count_ones()
    }

    pub fn family_bits(self, f: Family) -> u64 {
        (self.0 >> f.shift()) & FAMILY_MASK
    }

    pub fn family_degree(self, f: Family) -> u32 {
        self.family_bits(f).count_ones()
    }

    /// Indices (1-based) of the generators of family `f` present in `self`.
    pub fn family_indices(self, f: Family) -> Vec<usize> {
        let bits = self.family_bits(f);
        (0..FAMILY_BITS as usize)
            .filter(|j| bits & (1 << j) != 0)
            .map(|j| j + 1)
            .collect()
    }

    pub fn with_family_bits(self, f: Family, bits: u64) -> Self {
        let cleared = self.0 & !(FAMILY_MASK << f.shift());
        Monomial(cleared | ((bits & FAMILY_MASK) << f.shift()))
    }

    pub fn cotangent_part(self) -> Monomial {
        Monomial(self.0 & ((1u64 << (4 * FAMILY_BITS)) - 1))
    }

    /// Generators in canonical order.
    pub fn generators(self) -> Vec<GeneratorIndex> {
        let mut out = Vec::with_capacity(self.degree() as usize);
        for f in Family::ALL {
            for j in self.family_indices(f) {
                out.push(GeneratorIndex::new(f, j));
            }
        }
        out
    }

    /// `self ∧ other = sign · (self | other)`; `None` when they share a generator.
    pub fn wedge(self, other: Monomial) -> Option<(Monomial, f64)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        let mut swaps = 0u32;
        let mut b = other.0;
        while b != 0 {
            let p = b.trailing_zeros();
            b &= b - 1;
            // generators of `self` that sit after position p must hop over it
            swaps += if p == 63 { 0 } else { (self.0 >> (p + 1)).count_ones() };
        }
        let sign = if swaps.is_multiple_of(2) { 1.0 } else { -1.0 };
        Some((Monomial(self.0 | other.0), sign))
    }
}

/// Orientation used when reading off the coefficient of the top `E ⊗ E*` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ETopOrientation {
    /// Coefficient of `e_1∧…∧e_n∧e^1∧…∧e^n`.
    EFirst,
    /// Coefficient of `e_1∧e^1∧e_2∧e^2∧…∧e_n∧e^n`.
    #[default]
    Interleaved,
}

impl ETopOrientation {
    /// Sign relating this convention's top element to the canonical
    /// (E-first) storage order.
    pub fn sign(self, n: usize) -> f64 {
        match self {
            ETopOrientation::EFirst => 1.0,
            ETopOrientation::Interleaved => {
                if (n * n.saturating_sub(1) / 2).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Sparse element of the graded algebra with complex coefficients.
#[derive(Clone, PartialEq)]
pub struct GradedElement {
    n: usize,
    terms: BTreeMap<Monomial, Complex64>,
    prune: f64,
}

impl fmt::Debug for GradedElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GradedElement(n={}, {})", self.n, self)
    }
}

impl fmt::Display for GradedElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6e}{:+.6e}i)", c.re, c.im)?;
            for g in m.generators() {
                write!(f, "·{}{}", g.family.symbol(), g.index)?;
            }
        }
        Ok(())
    }
}

impl GradedElement {
    pub fn zero(n: usize) -> Self {
        assert!(n <= MAX_DIM, "ambient dimension {n} exceeds {MAX_DIM}");
        GradedElement {
            n,
            terms: BTreeMap::new(),
            prune: DEFAULT_PRUNE,
        }
    }

    pub fn scalar(n: usize, c: Complex64) -> Self {
        Self::term(n, Monomial::ONE, c)
    }

    pub fn one(n: usize) -> Self {
        Self::scalar(n, Complex64::new(1.0, 0.0))
    }

    pub fn term(n: usize, m: Monomial, c: Complex64) -> Self {
        let mut out = Self::zero(n);
        out.add_term(m, c);
        out.prune_small();
        out
    }

    /// The generator `g` as an element, checked against `n`.
    pub fn generator(n: usize, g: GeneratorIndex) -> Result<Self, ExteriorError> {
        if n > MAX_DIM {
            return Err(ExteriorError::DimensionTooLarge(n));
        }
        if g.index == 0 || g.index > n {
            return Err(ExteriorError::IndexOutOfRange { index: g.index, n });
        }
        Ok(Self::term(n, Monomial::generator(g), Complex64::new(1.0, 0.0)))
    }

    /// Shorthand for `generator` when the index is known to be valid.
    pub fn gen(n: usize, family: Family, index: usize) -> Self {
        Self::generator(n, GeneratorIndex::new(family, index)).expect("valid generator")
    }

    pub fn with_prune(mut self, eps: f64) -> Self {
        self.prune = eps;
        self.prune_small();
        self
    }

    pub fn prune_epsilon(&self) -> f64 {
        self.prune
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: Monomial) -> Complex64 {
        self.terms.get(&m).copied().unwrap_or_default()
    }

    /// Adds `c·m` without pruning (callers prune once at the end).
    pub fn add_term(&mut self, m: Monomial, c: Complex64) {
        if c == Complex64::default() {
            return;
        }
        *self.terms.entry(m).or_default() += c;
    }

    fn prune_small(&mut self) {
        let eps = self.prune;
        self.terms.retain(|_, c| c.norm() >= eps);
    }

    fn check_dim(&self, other: &Self) -> Result<(), ExteriorError> {
        if self.n != other.n {
            Err(ExteriorError::DimensionMismatch(self.n, other.n))
        } else {
            Ok(())
        }
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.n);
        out.prune = self.prune;
        for (m, v) in &self.terms {
            out.add_term(*m, v * c);
        }
        out.prune_small();
        out
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    /// `self + c·other`.
    pub fn axpy(&mut self, c: Complex64, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        for (m, v) in &other.terms {
            self.add_term(*m, v * c);
        }
        self.prune_small();
    }

    /// Checked wedge product.
    pub fn wedge(&self, other: &Self) -> Result<Self, ExteriorError> {
        self.check_dim(other)?;
        let mut out = Self::zero(self.n);
        out.prune = self.prune.min(other.prune);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if let Some((m, s)) = ma.wedge(*mb) {
                    out.add_term(m, ca * cb * s);
                }
            }
        }
        out.prune_small();
        Ok(out)
    }

    /// `self^k / k!`, the divided power.
    pub fn divided_power(&self, k: usize) -> Self {
        let mut acc = Self::one(self.n);
        for j in 1..=k {
            acc = (&acc * self).scale_real(1.0 / j as f64);
        }
        acc
    }

    /// Contraction `δ_η`: each `e^j` is replaced by `η_j`, with the Koszul
    /// sign of moving `e^j` to the front of its monomial.
    pub fn interior(&self, eta: &[Complex64]) -> Self {
        let mut out = Self::zero(self.n);
        out.prune = self.prune;
        for (m, c) in &self.terms {
            let cov = m.family_bits(Family::Ecovec);
            if cov == 0 {
                continue;
            }
            for j in 0..self.n.min(eta.len()) {
                if cov & (1 << j) == 0 {
                    continue;
                }
                let p = Family::Ecovec.shift() + j as u32;
                let before = (m.0 & ((1u64 << p) - 1)).count_ones();
                let sign = if before.is_multiple_of(2) { 1.0 } else { -1.0 };
                out.add_term(Monomial(m.0 ^ (1u64 << p)), c * eta[j] * sign);
            }
        }
        out.prune_small();
        out
    }

    /// Coefficient of the top `E ⊗ E*` term, a purely cotangent element.
    pub fn extract_e_top(&self, orientation: ETopOrientation) -> Self {
        let full = (1u64 << self.n) - 1;
        let sign = orientation.sign(self.n);
        let mut out = Self::zero(self.n);
        out.prune = self.prune;
        for (m, c) in &self.terms {
            if m.family_bits(Family::Evec) == full && m.family_bits(Family::Ecovec) == full {
                out.add_term(m.cotangent_part(), c * sign);
            }
        }
        out.prune_small();
        out
    }

    /// Terms satisfying `keep`.
    pub fn filter(&self, keep: impl Fn(Monomial) -> bool) -> Self {
        let mut out = Self::zero(self.n);
        out.prune = self.prune;
        for (m, c) in &self.terms {
            if keep(*m) {
                out.terms.insert(*m, *c);
            }
        }
        out
    }

    /// Part of `E*`-degree exactly `k`.
    pub fn ecovec_part(&self, k: u32) -> Self {
        self.filter(|m| m.family_degree(Family::Ecovec) == k)
    }

    /// Applies a generator relabelling `m ↦ (sign, m')`, reordering into
    /// canonical position. The relabelling must be injective on generators.
    pub fn relabel(&self, map: impl Fn(GeneratorIndex) -> (f64, GeneratorIndex)) -> Self {
        let mut out = Self::zero(self.n);
        out.prune = self.prune;
        for (m, c) in &self.terms {
            let mut acc = Monomial::ONE;
            let mut coef = *c;
            let mut dead = false;
            for g in m.generators() {
                let (s, g2) = map(g);
                match acc.wedge(Monomial::generator(g2)) {
                    Some((next, sign)) => {
                        acc = next;
                        coef *= s * sign;
                    }
                    None => {
                        dead = true;
                        break;
                    }
                }
            }
            if !dead {
                out.add_term(acc, coef);
            }
        }
        out.prune_small();
        out
    }

    /// Swaps the roles of the `z` and `ζ` cotangent families.
    pub fn swap_points(&self) -> Self {
        self.relabel(|g| {
            let family = match g.family {
                Family::Zhol => Family::Whol,
                Family::Zanti => Family::Wanti,
                Family::Whol => Family::Zhol,
                Family::Wanti => Family::Zanti,
                other => other,
            };
            (1.0, GeneratorIndex::new(family, g.index))
        })
    }

    /// Moves single-point forms written in the `z` families to the `ζ` families.
    pub fn to_zeta(&self) -> Self {
        self.relabel(|g| {
            let family = match g.family {
                Family::Zhol => Family::Whol,
                Family::Zanti => Family::Wanti,
                other => other,
            };
            (1.0, GeneratorIndex::new(family, g.index))
        })
    }

    /// Conjugate coefficients in place of a full antilinear map on generators.
    pub fn conj_coefficients(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.conj();
        }
        out
    }

    /// Parity of a homogeneous element (`None` when mixed or zero).
    pub fn parity(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(|m| m.degree() % 2);
        let first = it.next()?;
        it.all(|p| p == first).then_some(first)
    }

    /// Total degree when homogeneous.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut it = self.terms.keys().map(|m| m.degree());
        let first = it.next()?;
        it.all(|p| p == first).then_some(first)
    }

    pub fn max_family_degree(&self, f: Family) -> u32 {
        self.terms.keys().map(|m| m.family_degree(f)).max().unwrap_or(0)
    }

    /// Max abs difference of coefficients.
    pub fn distance(&self, other: &Self) -> f64 {
        (self - other).max_abs()
    }
}

impl Add for &GradedElement {
    type Output = GradedElement;
    fn add(self, rhs: &GradedElement) -> GradedElement {
        assert_eq!(self.n, rhs.n, "ambient dimension mismatch");
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), rhs);
        out
    }
}

impl Sub for &GradedElement {
    type Output = GradedElement;
    fn sub(self, rhs: &GradedElement) -> GradedElement {
        assert_eq!(self.n, rhs.n, "ambient dimension mismatch");
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), rhs);
        out
    }
}

impl AddAssign<&GradedElement> for GradedElement {
    fn add_assign(&mut self, rhs: &GradedElement) {
        assert_eq!(self.n, rhs.n, "ambient dimension mismatch");
        self.axpy(Complex64::new(1.0, 0.0), rhs);
    }
}

impl Neg for &GradedElement {
    type Output = GradedElement;
    fn neg(self) -> GradedElement {
        self.scale_real(-1.0)
    }
}

/// Wedge product; panics on an ambient-dimension mismatch (use
/// [`GradedElement::wedge`] for the checked form).
impl Mul for &GradedElement {
    type Output = GradedElement;
    fn mul(self, rhs: &GradedElement) -> GradedElement {
        self.wedge(rhs).expect("ambient dimension mismatch")
    }
}

/// Matrix with entries in the graded algebra, used for `Hom`-valued forms.
/// Products wedge entries in the order written.
#[derive(Clone, PartialEq, Debug)]
pub struct GradedMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<GradedElement>,
}

impl GradedMatrix {
    pub fn zeros(n: usize, rows: usize, cols: usize) -> Self {
        GradedMatrix { rows, cols, entries: vec![GradedElement::zero(n); rows * cols] }
    }

    pub fn identity(n: usize, r: usize) -> Self {
        let mut m = Self::zeros(n, r, r);
        for i in 0..r {
            m.set(i, i, GradedElement::one(n));
        }
        m
    }

    /// A `1 × 1` matrix.
    pub fn scalar(x: GradedElement) -> Self {
        GradedMatrix { rows: 1, cols: 1, entries: vec![x] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> GradedElement) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        GradedMatrix { rows, cols, entries }
    }

    /// Degree-zero matrix from complex entries.
    pub fn from_complex(n: usize, rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        Self::from_fn(rows, cols, |i, j| GradedElement::scalar(n, f(i, j)))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &GradedElement {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: GradedElement) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[GradedElement] {
        &self.entries
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(&GradedElement) -> GradedElement) -> Self {
        GradedMatrix { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(f).collect() }
    }

    /// The only entry of a `1 × 1` matrix.
    pub fn as_scalar(&self) -> Option<&GradedElement> {
        (self.rows == 1 && self.cols == 1).then(|| &self.entries[0])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, ExteriorError> {
        if self.cols != other.rows {
            return Err(ExteriorError::DimensionMismatch(self.cols, other.rows));
        }
        let n = self.entries.first().or(other.entries.first()).map(|e| e.dim()).unwrap_or(0);
        let mut out = Self::zeros(n, self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = GradedElement::zero(n);
                for k in 0..self.cols {
                    acc += &self.get(i, k).wedge(other.get(k, j))?;
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// `x ∧ M` entrywise.
    pub fn wedge_left(&self, x: &GradedElement) -> Self {
        self.map(|e| x * e)
    }

    /// `M ∧ x` entrywise.
    pub fn wedge_right(&self, x: &GradedElement) -> Self {
        self.map(|e| e * x)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    /// Kronecker product with entries wedged left-to-right.
    pub fn kron(&self, other: &Self) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |i, j| {
            self.get(i / other.rows, j / other.cols) * other.get(i % other.rows, j % other.cols)
        })
    }

    /// Matrix of `d × d` minors over sorted row/column subsets, by Leibniz
    /// expansion; entries must be even so that they commute.
    pub fn compound(&self, d: usize) -> Self {
        let rs = crate::linalg::subsets(self.rows, d);
        let cs = crate::linalg::subsets(self.cols, d);
        Self::from_fn(rs.len(), cs.len(), |i, j| {
            let sub = Self::from_fn(d, d, |a, b| self.get(rs[i][a], cs[j][b]).clone());
            sub.determinant()
        })
    }

    /// Leibniz determinant of a square matrix with commuting entries.
    pub fn determinant(&self) -> GradedElement {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let d = self.rows;
        let n = self.entries.first().map(|e| e.dim()).unwrap_or(0);
        let mut total = GradedElement::zero(n);
        if d == 0 {
            return GradedElement::one(n);
        }
        let mut perm: Vec<usize> = (0..d).collect();
        let mut c = vec![0usize; d];
        let mut sign = 1.0;
        let add = |perm: &[usize], sign: f64, total: &mut GradedElement| {
            let mut prod = GradedElement::one(n);
            for (r, &col) in perm.iter().enumerate() {
                prod = &prod * self.get(r, col);
                if prod.is_zero() {
                    return;
                }
            }
            total.axpy(Complex64::new(sign, 0.0), &prod);
        };
        add(&perm, sign, &mut total);
        // Heap's algorithm; every swap flips the sign
        let mut i = 0;
        while i < d {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                sign = -sign;
                add(&perm, sign, &mut total);
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        total
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        GradedMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, k: Complex64) -> Self {
        self.map(|e| e.scale(k))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.max_abs()).fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| a.distance(b)).fold(0.0, f64::max)
    }

    pub fn interior(&self, eta: &[Complex64]) -> Self {
        self.map(|e| e.interior(eta))
    }

    pub fn extract_e_top(&self, orientation: ETopOrientation) -> Self {
        self.map(|e| e.extract_e_top(orientation))
    }

    pub fn filter(&self, keep: impl Fn(Monomial) -> bool + Copy) -> Self {
        self.map(|e| e.filter(keep))
    }

    /// Applies the matrix to a vector of forms: `Σ_j M_ij ∧ v_j`.
    pub fn apply(&self, v: &[GradedElement]) -> Vec<GradedElement> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = GradedElement::zero(v.first().map(|x| x.dim()).unwrap_or(0));
                for (j, vj) in v.iter().enumerate() {
                    acc += &(self.get(i, j) * vj);
                }
                acc
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Sign of sorting a generator word into canonical order by explicit
    /// adjacent transpositions; `None` if a generator repeats.
    fn parity_oracle(word: &[GeneratorIndex]) -> Option<(Monomial, f64)> {
        let mut w: Vec<GeneratorIndex> = word.to_vec();
        let mut sign = 1.0;
        for i in 0..w.len() {
            for j in 0..w.len() - 1 - i {
                if w[j] > w[j + 1] {
                    w.swap(j, j + 1);
                    sign = -sign;
                } else if w[j] == w[j + 1] {
                    return None;
                }
            }
        }
        if w.windows(2).any(|p| p[0] == p[1]) {
            return None;
        }
        let m = w.iter().fold(Monomial::ONE, |acc, g| Monomial(acc.0 | Monomial::generator(*g).0));
        Some((m, sign))
    }

    fn all_generators(n: usize) -> Vec<GeneratorIndex> {
        Family::ALL
            .iter()
            .flat_map(|f| (1..=n).map(move |j| GeneratorIndex::new(*f, j)))
            .collect()
    }

    #[test]
    fn square_zero() {
        let a = GradedElement::gen(1, Family::Zanti, 1);
        assert!((&a * &a).is_zero());
    }

    #[test]
    fn odd_generators_anticommute() {
        let a = GradedElement::gen(1, Family::Zanti, 1);
        let b = GradedElement::gen(1, Family::Wanti, 1);
        let ab = &a * &b;
        let ba = &b * &a;
        assert_eq!(ab, -&ba);
        // dz̄₁ ∧ dζ̄₁ is already canonical
        let m = Monomial(Monomial::generator(GeneratorIndex::new(Family::Zanti, 1)).0
            | Monomial::generator(GeneratorIndex::new(Family::Wanti, 1)).0);
        assert_eq!(ab.coefficient(m), c(1.0, 0.0));
        assert_eq!(ba.coefficient(m), c(-1.0, 0.0));
    }

    #[test]
    fn mixed_e_products_match_parity_oracle() {
        // (e¹·dz̄₁) ∧ (e₁·dζ̄₁)
        let n = 1;
        let left = &GradedElement::gen(n, Family::Ecovec, 1) * &GradedElement::gen(n, Family::Zanti, 1);
        let right = &GradedElement::gen(n, Family::Evec, 1) * &GradedElement::gen(n, Family::Wanti, 1);
        let got = &left * &right;
        let word = [
            GeneratorIndex::new(Family::Ecovec, 1),
            GeneratorIndex::new(Family::Zanti, 1),
            GeneratorIndex::new(Family::Evec, 1),
            GeneratorIndex::new(Family::Wanti, 1),
        ];
        let (m, s) = parity_oracle(&word).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got.coefficient(m), c(s, 0.0));
    }

    #[test]
    fn exhaustive_pairs_agree_with_oracle_small_n() {
        for n in 1..=3 {
            let gens = all_generators(n);
            for &g1 in &gens {
                for &g2 in &gens {
                    for &g3 in gens.iter().step_by(5) {
                        let word = [g1, g2, g3];
                        let prod = &(&GradedElement::gen(n, g1.family, g1.index)
                            * &GradedElement::gen(n, g2.family, g2.index))
                            * &GradedElement::gen(n, g3.family, g3.index);
                        match parity_oracle(&word) {
                            None => assert!(prod.is_zero()),
                            Some((m, s)) => {
                                assert_eq!(prod.len(), 1);
                                assert_eq!(prod.coefficient(m), c(s, 0.0));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn interior_rank_one() {
        let e = GradedElement::gen(1, Family::Ecovec, 1);
        let got = e.interior(&[c(2.0, -1.0)]);
        assert_eq!(got, GradedElement::scalar(1, c(2.0, -1.0)));
        assert!(GradedElement::scalar(1, c(3.0, 0.0)).interior(&[c(1.0, 0.0)]).is_zero());
    }

    #[test]
    fn interior_two_generators() {
        let n = 2;
        let (a, b) = (c(0.3, 1.0), c(-2.0, 0.5));
        let e1 = GradedElement::gen(n, Family::Ecovec, 1);
        let e2 = GradedElement::gen(n, Family::Ecovec, 2);
        let got = (&e1 * &e2).interior(&[a, b]);
        // odd derivation: δ(e¹∧e²) = δ(e¹)e² − e¹δ(e²) = a·e² − b·e¹
        let expected = &e2.scale(a) - &e1.scale(b);
        assert!(got.distance(&expected) < 1e-15);
    }

    #[test]
    fn e_top_conventions() {
        let alpha = GradedElement::gen(1, Family::Zanti, 1).scale(c(0.7, 0.2));
        let top = &GradedElement::gen(1, Family::Evec, 1) * &GradedElement::gen(1, Family::Ecovec, 1);
        let el = &top * &alpha;
        for o in [ETopOrientation::EFirst, ETopOrientation::Interleaved] {
            assert_eq!(el.extract_e_top(o), alpha);
        }
        assert!(alpha.extract_e_top(ETopOrientation::EFirst).is_zero());
    }

    #[test]
    fn e_top_n2_scrambled_order() {
        let n = 2;
        let dz = GradedElement::gen(n, Family::Zhol, 2);
        let word = [
            GeneratorIndex::new(Family::Ecovec, 2),
            GeneratorIndex::new(Family::Evec, 1),
            GeneratorIndex::new(Family::Zhol, 2),
            GeneratorIndex::new(Family::Ecovec, 1),
            GeneratorIndex::new(Family::Evec, 2),
        ];
        let prod = word
            .iter()
            .fold(GradedElement::one(n), |acc, g| &acc * &GradedElement::gen(n, g.family, g.index));
        let (_, s) = parity_oracle(&word).unwrap();
        // canonical storage is dz₂ ∧ e₁ ∧ e₂ ∧ e¹ ∧ e²
        assert!(prod.extract_e_top(ETopOrientation::EFirst).distance(&dz.scale_real(s)) < 1e-15);
        // the interleaved top e₁e¹e₂e² is minus the E-first top at n = 2
        assert!(prod.extract_e_top(ETopOrientation::Interleaved).distance(&dz.scale_real(-s)) < 1e-15);
    }

    #[test]
    fn divided_power_matches_square() {
        let n = 2;
        let a = &(&GradedElement::gen(n, Family::Zhol, 1) * &GradedElement::gen(n, Family::Evec, 1))
            + &(&GradedElement::gen(n, Family::Wanti, 2) * &GradedElement::gen(n, Family::Evec, 2));
        let sq = (&a * &a).scale_real(0.5);
        assert!(a.divided_power(2).distance(&sq) < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = GradedElement::one(1);
        let b = GradedElement::one(2);
        assert_eq!(a.wedge(&b), Err(ExteriorError::DimensionMismatch(1, 2)));
        assert!(GradedElement::generator(2, GeneratorIndex::new(Family::Evec, 3)).is_err());
    }

    #[test]
    fn swap_points_is_involution() {
        let n = 2;
        let x = &(&GradedElement::gen(n, Family::Zhol, 1) * &GradedElement::gen(n, Family::Wanti, 2))
            * &GradedElement::gen(n, Family::Ecovec, 1);
        assert_eq!(x.swap_points().swap_points(), x);
    }

    #[test]
    fn determinant_and_compound_of_scalars() {
        let m = GradedMatrix::from_complex(1, 3, 3, |i, j| c((i * 3 + j) as f64 + if i == j { 2.0 } else { 0.0 }, 0.5 * i as f64));
        let dense = nalgebra::DMatrix::from_fn(3, 3, |i, j| m.get(i, j).coefficient(Monomial::ONE));
        let det = m.determinant().coefficient(Monomial::ONE);
        assert!((det - dense.determinant()).norm() < 1e-12);
        let c2 = m.compound(2);
        assert_eq!((c2.rows(), c2.cols()), (3, 3));
        let minor = dense[(0, 0)] * dense[(1, 2)] - dense[(0, 2)] * dense[(1, 0)];
        assert!((c2.get(0, 1).coefficient(Monomial::ONE) - minor).norm() < 1e-12);
        assert_eq!(m.compound(1), m);
    }

    #[test]
    fn kron_with_identity_is_block_diagonal() {
        let a = GradedMatrix::from_complex(1, 2, 2, |i, j| c(i as f64, j as f64));
        let k = GradedMatrix::identity(1, 1).kron(&a);
        assert_eq!(k, a);
    }

    fn arb_element(n: usize) -> impl Strategy<Value = GradedElement> {
        let gens = all_generators(n);
        let ng = gens.len();
        proptest::collection::vec(
            (proptest::collection::vec(0..ng, 0..4), -2.0f64..2.0, -2.0f64..2.0),
            1..5,
        )
        .prop_map(move |raw| {
            let mut el = GradedElement::zero(n);
            for (idx, re, im) in raw {
                let word: Vec<_> = idx.iter().map(|&i| gens[i]).collect();
                if let Some((m, s)) = parity_oracle(&word) {
                    el.add_term(m, c(re * s, im * s));
                }
            }
            el
        })
    }

    fn homogeneous_parts(x: &GradedElement) -> Vec<(u32, GradedElement)> {
        (0..=6 * x.dim() as u32)
            .map(|d| (d, x.filter(|m| m.degree() == d)))
            .filter(|(_, p)| !p.is_zero())
            .collect()
    }

    proptest! {
        #[test]
        fn graded_commutativity(a in arb_element(2), b in arb_element(2)) {
            for (da, pa) in homogeneous_parts(&a) {
                for (db, pb) in homogeneous_parts(&b) {
                    let s = if (da * db) % 2 == 0 { 1.0 } else { -1.0 };
                    let lhs = &pa * &pb;
                    let rhs = (&pb * &pa).scale_real(s);
                    prop_assert!(lhs.distance(&rhs) < 1e-12);
                }
            }
        }

        #[test]
        fn associativity(a in arb_element(2), b in arb_element(2), d in arb_element(2)) {
            let l = &(&a * &b) * &d;
            let r = &a * &(&b * &d);
            prop_assert!(l.distance(&r) < 1e-10);
        }

        #[test]
        fn interior_squares_to_zero(a in arb_element(2), e0 in -2.0f64..2.0, e1 in -2.0f64..2.0) {
            let eta = [c(e0, 0.3), c(e1, -0.7)];
            prop_assert!(a.interior(&eta).interior(&eta).max_abs() < 1e-12);
        }

        #[test]
        fn interior_is_odd_derivation(a in arb_element(2), b in arb_element(2)) {
            let eta = [c(0.4, 1.1), c(-0.9, 0.2)];
            for (da, pa) in homogeneous_parts(&a) {
                let s = if da % 2 == 0 { 1.0 } else { -1.0 };
                let lhs = (&pa * &b).interior(&eta);
                let rhs = &(&pa.interior(&eta) * &b) + &(&pa * &b.interior(&eta)).scale_real(s);
                prop_assert!(lhs.distance(&rhs) < 1e-10);
            }
        }
    }
}
