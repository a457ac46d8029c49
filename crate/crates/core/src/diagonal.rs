//! The section `η`, the bundle map `Φ`, and a holomorphic frame of `E = ker Φ`
//! with its induced Hermitian metric.

use std::sync::Arc;

use thiserror::Error;

use crate::flagspace::{Chart, ChartPoint, FlagError, FlagType};
use crate::linalg::{self, CMat, CVec, C64, ONE, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagonalError {
    #[error(transparent)]
    Flag(#[from] FlagError),
    #[error("frame solve is singular for this point pair")]
    SingularSolve,
    #[error("pivot minor of the Φ-matrix degenerates; evaluate in another chart pair")]
    PivotDegeneracy,
    #[error("η is not in the span of the E-frame (residual {0:.3e})")]
    Reconstruction(f64),
}

/// Per-level blocks `M_i`, of shape `(N − d_i) × d_i`, for `i = 1..k−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomCoords {
    pub blocks: Vec<CMat>,
}

impl HomCoords {
    /// Row-major concatenation of the blocks.
    pub fn flatten(&self) -> CVec {
        let mut v = Vec::new();
        for b in &self.blocks {
            for r in 0..b.nrows() {
                for col in 0..b.ncols() {
                    v.push(b[(r, col)]);
                }
            }
        }
        CVec::from_vec(v)
    }

    pub fn from_flat(flag: &FlagType, v: &[C64]) -> Self {
        let mut blocks = Vec::new();
        let mut off = 0;
        for i in 1..flag.levels() {
            let (rows, cols) = (flag.ambient() - flag.d(i), flag.d(i));
            blocks.push(CMat::from_fn(rows, cols, |r, col| v[off + r * cols + col]));
            off += rows * cols;
        }
        HomCoords { blocks }
    }

    pub fn norm(&self) -> f64 {
        self.flatten().norm()
    }
}

/// Holomorphic frame of `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct EFrame {
    /// `n` columns in flattened Hom coordinates.
    pub basis: CMat,
    pub pivots: Vec<usize>,
    pub free: Vec<usize>,
    /// `gram[(a, b)] = ⟨ξ_b, ξ_a⟩`, so `|Σ v_a ξ_a|² = v† gram v`.
    pub gram: CMat,
}

/// Everything a kernel evaluation needs at one pair `(z, ζ)`.
#[derive(Debug, Clone)]
pub struct PairData {
    pub eta: HomCoords,
    /// `η` in the `E`-frame.
    pub a: CVec,
    pub frame: EFrame,
}

impl PairData {
    /// `|η|²_E`.
    pub fn eta_norm_sqr(&self) -> f64 {
        (self.a.adjoint() * &self.frame.gram * &self.a)[(0, 0)].re
    }
}

/// Diagonal data for a fixed pair of charts, with the kernel pivots frozen
/// at the chart centers.
#[derive(Debug, Clone)]
pub struct DiagonalModel {
    flag: FlagType,
    chart_z: Arc<Chart>,
    chart_zeta: Arc<Chart>,
    pivots: Vec<usize>,
    free: Vec<usize>,
}

impl DiagonalModel {
    pub fn new(chart_z: Arc<Chart>, chart_zeta: Arc<Chart>) -> Result<Self, DiagonalError> {
        if chart_z.flag() != chart_zeta.flag() {
            return Err(FlagError::FlagMismatch.into());
        }
        let flag = chart_z.flag().clone();
        let center = vec![ZERO; flag.dimension()];
        let phi = phi_matrix(&chart_z, &center);
        let pivots = pivot_columns(&phi);
        let free = (0..flag.hom_length()).filter(|j| !pivots.contains(j)).collect();
        Ok(DiagonalModel { flag, chart_z, chart_zeta, pivots, free })
    }

    pub fn big_cell(flag: &FlagType) -> Self {
        let ch = Chart::big_cell(flag);
        DiagonalModel::new(ch.clone(), ch).expect("same flag type")
    }

    pub fn flag(&self) -> &FlagType {
        &self.flag
    }

    pub fn chart_z(&self) -> &Arc<Chart> {
        &self.chart_z
    }

    pub fn chart_zeta(&self) -> &Arc<Chart> {
        &self.chart_zeta
    }

    /// `η(z, ζ)`: column `m` of `M_i` holds the `F_{i,z}`-coordinates of the
    /// `m`-th `H_{i,ζ}` frame vector.
    pub fn eta(&self, z: &[C64], zeta: &[C64]) -> HomCoords {
        let blocks = (1..self.flag.levels())
            .map(|i| {
                let h = self.chart_zeta.h_matrix(zeta, i);
                self.chart_z.q_coords(z, i, &h)
            })
            .collect();
        HomCoords { blocks }
    }

    /// Matrix of `Φ` at `z` in flattened Hom coordinates.
    pub fn phi_matrix(&self, z: &[C64]) -> CMat {
        phi_matrix(&self.chart_z, z)
    }

    /// `Φ(f)` in flattened target coordinates.
    pub fn phi(&self, z: &[C64], f: &HomCoords) -> CVec {
        self.phi_matrix(z) * f.flatten()
    }

    /// Kernel basis with frozen pivots; depends on `z` only.
    pub fn kernel_basis(&self, z: &[C64]) -> Result<CMat, DiagonalError> {
        let len = self.flag.hom_length();
        let n = self.free.len();
        let mut basis = CMat::zeros(len, n);
        for (j, &f) in self.free.iter().enumerate() {
            basis[(f, j)] = ONE;
        }
        if self.pivots.is_empty() {
            return Ok(basis);
        }
        let a = self.phi_matrix(z);
        let ap = CMat::from_fn(a.nrows(), self.pivots.len(), |r, col| a[(r, self.pivots[col])]);
        let af = CMat::from_fn(a.nrows(), n, |r, col| a[(r, self.free[col])]);
        let xp = linalg::solve(&ap, &(-af)).ok_or(DiagonalError::PivotDegeneracy)?;
        for (row, &p) in self.pivots.iter().enumerate() {
            for j in 0..n {
                basis[(p, j)] = xp[(row, j)];
            }
        }
        Ok(basis)
    }

    /// Gram matrix `⟨ξ_b, ξ_a⟩ = Σ_i tr(M_{a,i}* G_F M_{b,i} G_H⁻¹)`.
    pub fn gram(&self, z: &[C64], zeta: &[C64], basis: &CMat) -> Result<CMat, DiagonalError> {
        let n = basis.ncols();
        let mut gram = CMat::zeros(n, n);
        let mut off = 0;
        for i in 1..self.flag.levels() {
            let (rows, cols) = (self.flag.ambient() - self.flag.d(i), self.flag.d(i));
            let e = self.chart_z.f_representatives(i);
            let h = self.chart_z.h_matrix(z, i);
            let perp = CMat::identity(h.nrows(), h.nrows()) - crate::flagspace::projector_of(&h);
            let gf = e.adjoint() * perp * &e;
            let hz = self.chart_zeta.h_matrix(zeta, i);
            let gh_inv = linalg::inverse(&(hz.adjoint() * &hz)).ok_or(DiagonalError::SingularSolve)?;
            let blocks: Vec<CMat> = (0..n)
                .map(|a| CMat::from_fn(rows, cols, |r, col| basis[(off + r * cols + col, a)]))
                .collect();
            let left: Vec<CMat> = blocks.iter().map(|m| &gf * m * &gh_inv).collect();
            for a in 0..n {
                let ma_adj = blocks[a].adjoint();
                for b in 0..n {
                    gram[(a, b)] += (&ma_adj * &left[b]).trace();
                }
            }
            off += rows * cols;
        }
        Ok(gram)
    }

    pub fn e_frame(&self, z: &[C64], zeta: &[C64]) -> Result<EFrame, DiagonalError> {
        let basis = self.kernel_basis(z)?;
        let gram = self.gram(z, zeta, &basis)?;
        Ok(EFrame { basis, pivots: self.pivots.clone(), free: self.free.clone(), gram })
    }

    /// Frame coordinates `a` with `basis · a = η`; since `η ∈ ker Φ` these are
    /// its free entries.
    pub fn eta_in_e(&self, eta: &HomCoords, frame: &EFrame) -> Result<CVec, DiagonalError> {
        let flat = eta.flatten();
        let a = CVec::from_iterator(frame.free.len(), frame.free.iter().map(|&f| flat[f]));
        let res = (&frame.basis * &a - &flat).norm();
        if res > 1e-10 * (1.0 + flat.norm()) {
            return Err(DiagonalError::Reconstruction(res));
        }
        Ok(a)
    }

    /// Free-entry coordinates without the reconstruction check.
    pub fn eta_coords_unchecked(&self, eta: &HomCoords) -> CVec {
        let flat = eta.flatten();
        CVec::from_iterator(self.free.len(), self.free.iter().map(|&f| flat[f]))
    }

    pub fn evaluate(&self, z: &[C64], zeta: &[C64]) -> Result<PairData, DiagonalError> {
        let eta = self.eta(z, zeta);
        let frame = self.e_frame(z, zeta)?;
        let a = self.eta_in_e(&eta, &frame)?;
        Ok(PairData { eta, a, frame })
    }

    /// `(a, gram)` only; the hot path of the derivative stencils.
    pub fn a_and_gram(&self, z: &[C64], zeta: &[C64]) -> Result<(CVec, CMat), DiagonalError> {
        let eta = self.eta(z, zeta);
        let basis = self.kernel_basis(z)?;
        let gram = self.gram(z, zeta, &basis)?;
        Ok((self.eta_coords_unchecked(&eta), gram))
    }

    pub fn evaluate_points(&self, z: &ChartPoint, zeta: &ChartPoint) -> Result<PairData, DiagonalError> {
        if z.chart != self.chart_z || zeta.chart != self.chart_zeta {
            return Err(FlagError::FlagMismatch.into());
        }
        self.evaluate(&z.coords, &zeta.coords)
    }

    /// `|η(z, ζ)|_E`.
    pub fn eta_norm(&self, z: &[C64], zeta: &[C64]) -> Result<f64, DiagonalError> {
        Ok(self.evaluate(z, zeta)?.eta_norm_sqr().max(0.0).sqrt())
    }
}

fn level_offsets(flag: &FlagType) -> Vec<usize> {
    let mut offs = vec![0];
    for i in 1..flag.levels() {
        let last = *offs.last().unwrap();
        offs.push(last + flag.d(i) * (flag.ambient() - flag.d(i)));
    }
    offs
}

fn phi_matrix(chart: &Chart, z: &[C64]) -> CMat {
    let flag = chart.flag();
    let k = flag.levels();
    let nn = flag.ambient();
    let offs = level_offsets(flag);
    let rows: usize = (1..k.saturating_sub(1)).map(|i| (nn - flag.d(i + 1)) * flag.d(i)).sum();
    let mut a = CMat::zeros(rows, flag.hom_length());
    let mut row_off = 0;
    for i in 1..k.saturating_sub(1) {
        let di = flag.d(i);
        let dn = flag.d(i + 1);
        let (trows, tcols) = (nn - dn, di);
        // Q_i: q_{i+1}-coordinates of the F_i representatives
        let q = chart.q_coords(z, i + 1, &chart.f_representatives(i));
        for r in 0..trows {
            for col in 0..tcols {
                let row = row_off + r * tcols + col;
                // f_{i+1} restricted to H_{i,ζ}: leading d_i columns of M_{i+1}
                a[(row, offs[i] + r * dn + col)] += ONE;
                // − Q_i M_i
                for s in 0..nn - di {
                    a[(row, offs[i - 1] + s * di + col)] -= q[(r, s)];
                }
            }
        }
        row_off += trows * tcols;
    }
    a
}

/// Columns selected by Gaussian elimination with full pivoting.
fn pivot_columns(a: &CMat) -> Vec<usize> {
    let mut m = a.clone();
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut used_rows = vec![false; rows];
    let mut used_cols = vec![false; cols];
    let mut pivots = Vec::new();
    for _ in 0..rows {
        let mut best = (0.0, 0, 0);
        for r in (0..rows).filter(|r| !used_rows[*r]) {
            for col in (0..cols).filter(|c| !used_cols[*c]) {
                let v = m[(r, col)].norm();
                if v > best.0 {
                    best = (v, r, col);
                }
            }
        }
        let (v, pr, pc) = best;
        if v < 1e-12 {
            break;
        }
        used_rows[pr] = true;
        used_cols[pc] = true;
        pivots.push(pc);
        let prow = m.row(pr).into_owned();
        for r in (0..rows).filter(|r| !used_rows[*r]) {
            let f = m[(r, pc)] / prow[pc];
            for col in 0..cols {
                let sub = f * prow[col];
                m[(r, col)] -= sub;
            }
        }
    }
    pivots.sort_unstable();
    pivots
}
