//! The kernels `K`, `P` and their weighted versions `K_g`, `P_g`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::connection::{self, ConnectionData, ConnectionError, DerivativeEngine, Directions};
use crate::diagonal::DiagonalModel;
use crate::exterior::{ETopOrientation, Family, GradedElement, GradedMatrix};
use crate::flagspace::FlagType;
use crate::linalg::{c, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error("weight of rank {weight} does not match bundle rank {bundle}")]
    RankMismatch { weight: usize, bundle: usize },
    #[error(transparent)]
    Exterior(#[from] crate::exterior::ExteriorError),
}

/// A kernel value at `(z, ζ)`; unweighted kernels are `1 × 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSample {
    pub value: GradedMatrix,
    pub z: Vec<C64>,
    pub zeta: Vec<C64>,
}

impl KernelSample {
    pub fn scalar(&self) -> &GradedElement {
        self.value.as_scalar().expect("scalar kernel")
    }
}

/// Kernel builder for one flag type (big-cell chart pair).
#[derive(Debug, Clone)]
pub struct Kernels {
    model: DiagonalModel,
    pub engine: DerivativeEngine,
    pub orientation: ETopOrientation,
}

impl Kernels {
    pub fn new(flag: &FlagType, engine: DerivativeEngine) -> Self {
        Kernels { model: DiagonalModel::big_cell(flag), engine, orientation: ETopOrientation::default() }
    }

    pub fn with_model(model: DiagonalModel, engine: DerivativeEngine) -> Self {
        Kernels { model, engine, orientation: ETopOrientation::default() }
    }

    pub fn with_orientation(mut self, o: ETopOrientation) -> Self {
        self.orientation = o;
        self
    }

    pub fn model(&self) -> &DiagonalModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.flag().dimension()
    }

    pub fn connection(&self, z: &[C64], zeta: &[C64], dirs: Directions, with_curvature: bool) -> Result<ConnectionData, KernelError> {
        Ok(if with_curvature {
            connection::curvature(&self.model, &self.engine, z, zeta, dirs)?
        } else {
            connection::chern_connection(&self.model, &self.engine, z, zeta, dirs)?
        })
    }

    /// `D̃η/2πi + iΘ̃/2π`; the curvature part is dropped when `data` has none.
    pub fn bm(&self, data: &ConnectionData) -> GradedElement {
        let mut out = data.d_eta_lift().scale(C64::new(1.0, 0.0) / c(0.0, 2.0 * PI));
        if data.curvature.is_some() {
            out += &data.curvature_lift().scale(c(0.0, 1.0 / (2.0 * PI)));
        }
        out
    }

    /// `(D̃η/2πi + iΘ̃/2π)_n`.
    pub fn bm_factor(&self, data: &ConnectionData) -> GradedElement {
        self.bm(data).divided_power(data.n)
    }

    fn sample(&self, z: &[C64], zeta: &[C64], value: GradedMatrix) -> KernelSample {
        KernelSample { value, z: z.to_vec(), zeta: zeta.to_vec() }
    }

    /// `K = ∫_E u ∧ (…)_n`.
    pub fn kernel_k(&self, z: &[C64], zeta: &[C64], dirs: Directions) -> Result<KernelSample, KernelError> {
        let data = self.connection(z, zeta, dirs, self.dim() > 1)?;
        self.kernel_k_from(&data, z, zeta)
    }

    pub fn kernel_k_from(&self, data: &ConnectionData, z: &[C64], zeta: &[C64]) -> Result<KernelSample, KernelError> {
        let u = data.u_section()?;
        let k = (&u * &self.bm_factor(data)).extract_e_top(self.orientation);
        Ok(self.sample(z, zeta, GradedMatrix::scalar(k)))
    }

    /// `P = ∫_E (…)_n`; only the curvature term survives the extraction.
    pub fn kernel_p(&self, z: &[C64], zeta: &[C64], dirs: Directions) -> Result<KernelSample, KernelError> {
        let data = self.connection(z, zeta, dirs, true)?;
        Ok(self.kernel_p_from(&data, z, zeta))
    }

    pub fn kernel_p_from(&self, data: &ConnectionData, z: &[C64], zeta: &[C64]) -> KernelSample {
        let lift = data.curvature_lift().scale(c(0.0, 1.0 / (2.0 * PI)));
        let p = lift.divided_power(data.n).extract_e_top(self.orientation);
        self.sample(z, zeta, GradedMatrix::scalar(p))
    }

    /// `K` and `P` from one connection evaluation.
    pub fn kernel_pair(&self, z: &[C64], zeta: &[C64], dirs: Directions) -> Result<(KernelSample, KernelSample), KernelError> {
        let data = self.connection(z, zeta, dirs, true)?;
        Ok((self.kernel_k_from(&data, z, zeta)?, self.kernel_p_from(&data, z, zeta)))
    }

    /// `det(iΘ/2π)` as a form determinant, independent of `∫_E`.
    pub fn p_det(&self, z: &[C64], zeta: &[C64], dirs: Directions) -> Result<GradedElement, KernelError> {
        let data = self.connection(z, zeta, dirs, true)?;
        let r = data.a.len();
        let k = c(0.0, 1.0 / (2.0 * PI));
        let m = GradedMatrix::from_fn(r, r, |a, b| data.curvature_form(a, b).scale(k));
        Ok(m.determinant())
    }

    /// `(K_g, P_g) = (∫_E g∧u∧(…)_n, ∫_E g∧(…)_n)` for an evaluated weight.
    pub fn kernel_weighted_from(
        &self,
        data: &ConnectionData,
        g: &GradedMatrix,
        z: &[C64],
        zeta: &[C64],
    ) -> Result<(KernelSample, KernelSample), KernelError> {
        let bmn = self.bm_factor(data);
        let u = data.u_section()?;
        let ub = &u * &bmn;
        let kg = g.wedge_right(&ub).extract_e_top(self.orientation);
        let pg = g.wedge_right(&bmn).extract_e_top(self.orientation);
        Ok((self.sample(z, zeta, kg), self.sample(z, zeta, pg)))
    }

    /// `P_g` alone, defined on the diagonal as well.
    pub fn kernel_pg_from(&self, data: &ConnectionData, g: &GradedMatrix, z: &[C64], zeta: &[C64]) -> KernelSample {
        let pg = g.wedge_right(&self.bm_factor(data)).extract_e_top(self.orientation);
        self.sample(z, zeta, pg)
    }
}

/// The part of a `ζ`-form coefficient along `dζ_j` (no other generators).
pub fn dzeta_coefficient(form: &GradedElement, j: usize) -> C64 {
    let n = form.dim();
    let g = GradedElement::gen(n, Family::Whol, j);
    let m = *g.terms().next().expect("generator").0;
    form.coefficient(m)
}
