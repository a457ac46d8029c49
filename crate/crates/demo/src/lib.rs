//! Browser bindings: heat maps of `|η|` and of the Cauchy part of `K` on the
//! projective line, and a live evaluation of the Koppelman terms.

use flagkop::connection::{DerivativeEngine, Directions};
use flagkop::diagonal::DiagonalModel;
use flagkop::exterior::{Family, Monomial};
use flagkop::flagspace::FlagType;
use flagkop::kernels::{dzeta_coefficient, Kernels};
use flagkop::linalg::{c, C64};
use flagkop::quadrature::{Domain, QuadratureSpec};
use flagkop::solver::{Solver, TestForm};
use wasm_bindgen::prelude::*;

fn p1() -> FlagType {
    FlagType::projective(1)
}

/// Chart points of a `size × size` grid over `[−extent, extent]²`, row major
/// with the imaginary axis pointing up.
fn grid(size: usize, extent: f64) -> impl Iterator<Item = C64> {
    let step = 2.0 * extent / (size.max(2) - 1) as f64;
    (0..size).flat_map(move |row| (0..size).map(move |col| c(-extent + col as f64 * step, extent - row as f64 * step)))
}

/// `|η(z, ζ)|` for fixed `z` and `ζ` on the grid; zero exactly at `ζ = z`.
#[wasm_bindgen]
pub fn eta_grid(z_re: f64, z_im: f64, size: usize, extent: f64) -> Vec<f64> {
    let model = DiagonalModel::big_cell(&p1());
    let z = [c(z_re, z_im)];
    grid(size, extent).map(|w| model.eta_norm(&z, &[w]).unwrap_or(f64::NAN)).collect()
}

/// `log₁₀ |K_{dζ}(z, ζ)|`, which blows up like the Cauchy kernel at `ζ = z`.
#[wasm_bindgen]
pub fn kernel_grid(z_re: f64, z_im: f64, size: usize, extent: f64) -> Vec<f64> {
    let kernels = Kernels::new(&p1(), DerivativeEngine::default());
    let z = [c(z_re, z_im)];
    grid(size, extent)
        .map(|w| match kernels.kernel_k(&z, &[w], Directions::BOTH) {
            Ok(k) => dzeta_coefficient(k.scalar(), 1).norm().log10(),
            Err(_) => f64::NAN,
        })
        .collect()
}

/// Terms of the Koppelman formula for `ω_FS` at `z`, as
/// `[φ, ∫K∧∂̄φ, ∂̄∫K∧φ, ∫P∧φ, residual]` (coefficients of `dz∧dz̄`, re/im pairs,
/// then the residual).
#[wasm_bindgen]
pub fn koppelman_terms(z_re: f64, z_im: f64, order: usize) -> Result<Vec<f64>, JsError> {
    let quad = QuadratureSpec::default().with_order(order.clamp(4, 32));
    let solver = Solver::new(&p1(), DerivativeEngine::default(), quad);
    let t = solver
        .koppelman_terms(&TestForm::fubini_study(1), Domain::Whole, &[c(z_re, z_im)])
        .map_err(|e| JsError::new(&e.to_string()))?;
    let dzdzb = Monomial(0).with_family_bits(Family::Zhol, 1).with_family_bits(Family::Zanti, 1);
    let mut out = Vec::new();
    for part in [&t.phi, &t.k_dbar_phi, &t.dbar_k_phi, &t.p_phi] {
        let v = part.first().map(|f| f.coefficient(dzdzb)).unwrap_or_default();
        out.extend([v.re, v.im]);
    }
    out.push(t.residual);
    Ok(out)
}
