//! Integration of forms over `X`, singular integration of kernels near the
//! diagonal, boundary integrals over chart circles, and finite-difference
//! `∂̄` of numerically defined forms.
//!
//! Integrands are closures returning forms in both point families; the
//! integrators keep the terms carrying the full `ζ`-top monomial and return
//! the remaining `z`-parts, so `∫_ζ α(z) ∧ γ(ζ) = α · ∫ γ`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use gauss_quad::legendre::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connection::dwbar;
use crate::error::Result;
use crate::exterior::{Family, GradedElement, Monomial};
use crate::linalg::{c, C64, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge: error estimate {error:.3e} above {threshold:.3e}")]
    NonConvergence { error: f64, threshold: f64 },
    #[error("shell refinement did not converge after {0} shells")]
    ShellDivergence(usize),
    #[error("evaluation point {0} is too close to the boundary")]
    NearBoundary(String),
    #[error("derivative is noise dominated (step-halving change {0:.3e})")]
    NoisyDerivative(f64),
    #[error("invalid quadrature parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QuadMethod {
    /// Gauss on `P¹`, Monte Carlo in higher dimension.
    #[default]
    Auto,
    Gauss,
    Mc,
}

impl QuadMethod {
    pub fn resolve(self, n: usize) -> QuadMethod {
        match self {
            QuadMethod::Auto if n == 1 => QuadMethod::Gauss,
            QuadMethod::Auto => QuadMethod::Mc,
            other => other,
        }
    }
}

impl std::str::FromStr for QuadMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auto" => Ok(QuadMethod::Auto),
            "gauss" => Ok(QuadMethod::Gauss),
            "mc" => Ok(QuadMethod::Mc),
            other => Err(format!("unknown quadrature '{other}' (auto | gauss | mc)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    pub method: QuadMethod,
    /// Gauss points in each radial variable; the angular rule uses twice as many.
    pub order: usize,
    pub samples: usize,
    pub batches: usize,
    pub seed: u64,
    /// Ratio between consecutive shell radii around the singularity.
    pub shell_factor: f64,
    /// Stop refining once a shell contributes less than this fraction.
    pub shell_tol: f64,
    /// Radius of the region treated as singular, relative to `max(1, |z|)`.
    pub inner_radius: f64,
    pub max_shells: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            method: QuadMethod::Auto,
            order: 32,
            samples: 4000,
            batches: 20,
            seed: 0,
            shell_factor: 0.5,
            shell_tol: 1e-4,
            inner_radius: 0.5,
            max_shells: 60,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadError> {
        if self.order < 2 {
            return Err(QuadError::Invalid("order must be at least 2".into()));
        }
        if self.samples == 0 || self.batches == 0 || self.samples < self.batches {
            return Err(QuadError::Invalid("samples must be positive and at least the batch count".into()));
        }
        if !(self.shell_factor > 0.0 && self.shell_factor < 1.0) {
            return Err(QuadError::Invalid("shell factor must lie in (0, 1)".into()));
        }
        if !(self.shell_tol > 0.0) || !(self.inner_radius > 0.0) {
            return Err(QuadError::Invalid("shell tolerance and inner radius must be positive".into()));
        }
        Ok(())
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }
}

/// Neumaier-compensated complex sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

fn neumaier(acc: &mut (f64, f64), x: f64) {
    let (s, comp) = *acc;
    let t = s + x;
    let c = if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
    *acc = (t, comp + c);
}

impl CompensatedSum {
    pub fn add(&mut self, x: C64) {
        neumaier(&mut self.re, x.re);
        neumaier(&mut self.im, x.im);
    }

    pub fn value(&self) -> C64 {
        c(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

impl FromIterator<C64> for CompensatedSum {
    fn from_iter<T: IntoIterator<Item = C64>>(iter: T) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Value with an error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: Vec<GradedElement>,
    pub error: f64,
    pub evaluations: usize,
}

impl Estimate {
    pub fn scalar(&self) -> C64 {
        self.value.first().map(|f| f.coefficient(Monomial::ONE)).unwrap_or(ZERO)
    }
}

/// `dζ_1…dζ_n dζ̄_1…dζ̄_n = τ_n dV` with `τ_n = (−1)^{n(n−1)/2}(−2i)^n`.
pub fn top_factor(n: usize) -> C64 {
    let sign = if (n * n.saturating_sub(1) / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    c(0.0, -2.0).powu(n as u32) * sign
}

fn zeta_top_mask(n: usize) -> (u64, u64) {
    ((1u64 << n) - 1, (1u64 << n) - 1)
}

/// Accumulates `z`-parts of the `ζ`-top terms with compensated sums.
#[derive(Debug, Default)]
struct FormAccumulator {
    sums: BTreeMap<(usize, Monomial), CompensatedSum>,
    outputs: usize,
    n: usize,
}

impl FormAccumulator {
    fn new(n: usize) -> Self {
        FormAccumulator { sums: BTreeMap::new(), outputs: 0, n }
    }

    fn add(&mut self, forms: &[GradedElement], weight: f64) {
        let (hol, anti) = zeta_top_mask(self.n);
        let tau = top_factor(self.n);
        self.outputs = self.outputs.max(forms.len());
        for (k, f) in forms.iter().enumerate() {
            for (m, v) in f.terms() {
                if m.family_bits(Family::Whol) == hol && m.family_bits(Family::Wanti) == anti {
                    self.sums.entry((k, m.cotangent_part().with_family_bits(Family::Whol, 0).with_family_bits(Family::Wanti, 0)))
                        .or_default()
                        .add(v * tau * weight);
                }
            }
        }
    }

    fn finish(&self) -> Vec<GradedElement> {
        let mut out = vec![GradedElement::zero(self.n); self.outputs];
        for ((k, m), s) in &self.sums {
            out[*k].add_term(*m, s.value());
        }
        out.into_iter().map(|f| f.with_prune(crate::exterior::DEFAULT_PRUNE)).collect()
    }
}

fn max_dist(a: &[GradedElement], b: &[GradedElement]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| match (a.get(k), b.get(k)) {
            (Some(x), Some(y)) => x.distance(y),
            (Some(x), None) | (None, Some(x)) => x.max_abs(),
            _ => 0.0,
        })
        .fold(0.0, f64::max)
}

fn max_norm(a: &[GradedElement]) -> f64 {
    a.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
}

fn add_forms(a: &mut Vec<GradedElement>, b: &[GradedElement]) {
    if a.len() < b.len() {
        let n = b.first().map(|f| f.dim()).unwrap_or(0);
        a.resize(b.len(), GradedElement::zero(n));
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_unit(order: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(order.max(2))
        .expect("order at least 2")
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// Product rule on one chart coordinate: `b = tan(α) e^{iθ}`, Gauss in `α`
/// and the periodic trapezoid rule in `θ`. Weights include the area element.
pub fn polar_tan_rule(order: usize) -> Vec<(C64, f64)> {
    let m = 2 * order;
    let mut out = Vec::with_capacity(order * m);
    for (t, w) in gauss_unit(order) {
        let alpha = 0.5 * PI * t;
        let (s, co) = alpha.sin_cos();
        let rho = s / co;
        let jac = 0.5 * PI * w * rho / (co * co);
        for j in 0..m {
            let theta = 2.0 * PI * (j as f64 + 0.5) / m as f64;
            out.push((C64::from_polar(rho, theta), jac * 2.0 * PI / m as f64));
        }
    }
    out
}

/// Tensor Gauss integral over the big cell of `X` (`n` chart coordinates).
pub fn integrate_gauss<F>(n: usize, order: usize, mut f: F) -> Result<Vec<GradedElement>>
where
    F: FnMut(&[C64]) -> Result<Vec<GradedElement>>,
{
    let rule = polar_tan_rule(order);
    let mut acc = FormAccumulator::new(n);
    let mut idx = vec![0usize; n];
    let mut p = vec![ZERO; n];
    'outer: loop {
        let mut w = 1.0;
        for k in 0..n {
            p[k] = rule[idx[k]].0;
            w *= rule[idx[k]].1;
        }
        acc.add(&f(&p)?, w);
        for k in 0..n {
            idx[k] += 1;
            if idx[k] < rule.len() {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    Ok(acc.finish())
}

/// Fubini–Study sampling density on one coordinate, `1/(π(1+|b|²)²)`.
pub fn fs_density(b: C64) -> f64 {
    1.0 / (PI * (1.0 + b.norm_sqr()).powi(2))
}

fn fs_from_uniform(u: f64, v: f64) -> C64 {
    C64::from_polar((u / (1.0 - u)).sqrt(), 2.0 * PI * v)
}

/// Latin-hypercube uniforms: `batch` rows of `dims` coordinates.
fn latin_hypercube<R: Rng>(rng: &mut R, batch: usize, dims: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dims);
    for _ in 0..dims {
        let mut perm: Vec<usize> = (0..batch).collect();
        for i in (1..batch).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        cols.push(perm.iter().map(|&k| (k as f64 + rng.random::<f64>()) / batch as f64).collect());
    }
    (0..batch).map(|r| cols.iter().map(|col| col[r]).collect()).collect()
}

/// Mean and batch standard error from per-batch results.
fn batch_statistics(batches: &[Vec<GradedElement>]) -> (Vec<GradedElement>, f64) {
    let m = batches.len() as f64;
    let mut mean: Vec<GradedElement> = Vec::new();
    for b in batches {
        add_forms(&mut mean, b);
    }
    let mean: Vec<GradedElement> = mean.iter().map(|f| f.scale_real(1.0 / m)).collect();
    if batches.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let mut var = 0.0f64;
    let mut keys: BTreeMap<(usize, Monomial), Vec<C64>> = BTreeMap::new();
    for b in batches {
        for (k, f) in mean.iter().enumerate() {
            for (mono, _) in f.terms() {
                let v = b.get(k).map(|x| x.coefficient(*mono)).unwrap_or(ZERO);
                keys.entry((k, *mono)).or_default().push(v);
            }
        }
    }
    for ((k, mono), vals) in keys {
        let mu = mean[k].coefficient(mono);
        let s: f64 = vals.iter().map(|v| (v - mu).norm_sqr()).sum::<f64>() / (m - 1.0);
        var = var.max(s / m);
    }
    (mean, var.sqrt())
}

/// Density of the invariant volume of `P^n` in the chart, `n!/(π^n(1+|b|²)^{n+1})`.
pub fn projective_density(b: &[C64]) -> f64 {
    let n = b.len() as i32;
    let s = 1.0 + b.iter().map(|x| x.norm_sqr()).sum::<f64>();
    (1..=n).map(f64::from).product::<f64>() / (PI.powi(n) * s.powi(n + 1))
}

/// Point with density [`projective_density`] from `2n + 1` uniforms:
/// `|g_j|²` of a uniform point on the sphere are normalised exponentials.
fn projective_from_uniform(u: &[f64], p: &mut [C64]) {
    let n = p.len();
    let e0 = -(1.0 - u[0]).ln();
    for k in 0..n {
        let ek = -(1.0 - u[1 + k]).ln();
        p[k] = C64::from_polar((ek / e0).sqrt(), 2.0 * PI * u[1 + n + k]);
    }
}

/// Stratified Monte Carlo over the big cell, sampling the invariant volume
/// of `P^n`.
pub fn integrate_mc<F>(n: usize, spec: &QuadratureSpec, mut f: F) -> Result<Estimate>
where
    F: FnMut(&[C64]) -> Result<Vec<GradedElement>>,
{
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let per = spec.samples / spec.batches;
    let mut results = Vec::with_capacity(spec.batches);
    let mut p = vec![ZERO; n];
    for _ in 0..spec.batches {
        let mut acc = FormAccumulator::new(n);
        for row in latin_hypercube(&mut rng, per, 2 * n + 1) {
            projective_from_uniform(&row, &mut p);
            acc.add(&f(&p)?, 1.0 / (projective_density(&p) * per as f64));
        }
        results.push(acc.finish());
    }
    let (value, error) = batch_statistics(&results);
    Ok(Estimate { value, error, evaluations: per * spec.batches })
}

/// `∫_X` of the `ζ`-top part of `f`, by tensor Gauss (error from halving
/// the order) or stratified Monte Carlo.
pub fn integrate_over_x<F>(n: usize, spec: &QuadratureSpec, mut f: F) -> Result<Estimate>
where
    F: FnMut(&[C64]) -> Result<Vec<GradedElement>>,
{
    spec.validate()?;
    match spec.method.resolve(n) {
        QuadMethod::Gauss | QuadMethod::Auto => {
            let full = integrate_gauss(n, spec.order, &mut f)?;
            let half = integrate_gauss(n, (spec.order / 2).max(2), &mut f)?;
            let per_coord = spec.order * 2 * spec.order;
            let evals = per_coord.pow(n as u32) + (per_coord / 4).pow(n as u32);
            Ok(Estimate { error: max_dist(&full, &half), value: full, evaluations: evals })
        }
        QuadMethod::Mc => integrate_mc(n, spec, f),
    }
}

/// Integration domain in the `P¹` chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Whole,
    Disk { center: C64, radius: f64 },
}

impl Domain {
    pub fn contains(&self, z: C64) -> bool {
        match *self {
            Domain::Whole => true,
            Domain::Disk { center, radius } => (z - center).norm() < radius,
        }
    }
}

/// One polar region `ζ = z + r(t, θ) e^{iθ}`, `t ∈ [t0, t1]`, where
/// `map(t, θ) = (r, ∂(area)/∂t∂θ)`.
fn polar_region<F, M>(n: usize, z: C64, t0: f64, t1: f64, order: usize, map: &M, f: &mut F) -> Result<Vec<GradedElement>>
where
    F: FnMut(&[C64]) -> Result<Vec<GradedElement>>,
    M: Fn(f64, f64) -> (f64, f64),
{
    let m = 2 * order;
    let mut acc = FormAccumulator::new(n);
    for (x, w) in gauss_unit(order) {
        let t = t0 + (t1 - t0) * x;
        for j in 0..m {
            let theta = 2.0 * PI * (j as f64 + 0.5) / m as f64;
            let (r, jac) = map(t, theta);
            let zeta = z + C64::from_polar(r, theta);
            acc.add(&f(&[zeta])?, w * (t1 - t0) * jac * 2.0 * PI / m as f64);
        }
    }
    Ok(acc.finish())
}

/// Region integral at the given order together with a half-order estimate.
fn polar_region_est<F, M>(n: usize, z: C64, t0: f64, t1: f64, order: usize, map: &M, f: &mut F) -> Result<(Vec<GradedElement>, f64)>
where
    F: FnMut(&[C64]) -> Result<Vec<GradedElement>>,
    M: Fn(f64, f64) -> (f64, f64),
{
    let full = polar_region(n, z, t0, t1, order, map, f)?;
    let half = polar_region(n, z, t0, t1, (order / 2).max(2), map, f)?;
    let err = max_dist(&full, &half);
    Ok((full, err))
}

/// Singular integral on `P¹` of a form with an integrable singularity at
/// `ζ = z`: polar coordinates around `z`, geometric shells refined until a
/// shell contributes less than `shell_tol` of the total, then the remaining
/// inner disk (regular in polar coordinates).
pub fn integrate_kernel_p1<F>(z: C64, domain: Domain, spec: &QuadratureSpec, mut f: F) -> Result<Estimate>
where
    F: FnMut(&[C64]) -> Result<Vec<GradedElement>>,
{
    spec.validate()?;
    let n = 1;
    let q = spec.order;
    let mut total: Vec<GradedElement> = Vec::new();
    let mut error = 0.0;
    let mut regions = 0usize;

    // radial map for the part of the domain near z, parametrised by t ∈ [0, 1]
    let (near, far_radius): (Box<dyn Fn(f64, f64) -> (f64, f64)>, Option<f64>) = match domain {
        Domain::Whole => {
            let r0 = spec.inner_radius * z.norm().max(1.0);
            (Box::new(move |t: f64, _th: f64| (r0 * t, r0 * r0 * t)), Some(r0))
        }
        Domain::Disk { center, radius } => {
            let w = z - center;
            let dist = radius - w.norm();
            if dist <= 1e-6 * radius {
                return Err(QuadError::NearBoundary(format!("{z}")).into());
            }
            (
                Box::new(move |t: f64, th: f64| {
                    let proj = (w.conj() * C64::from_polar(1.0, th)).re;
                    let rmax = -proj + (proj * proj + radius * radius - w.norm_sqr()).sqrt();
                    (t * rmax, rmax * rmax * t)
                }),
                None,
            )
        }
    };

    let mut hi = 1.0;
    let mut converged = false;
    for _ in 0..spec.max_shells {
        let lo = hi * spec.shell_factor;
        let (part, err) = polar_region_est(n, z, lo, hi, q, &near, &mut f)?;
        regions += 1;
        error += err;
        add_forms(&mut total, &part);
        hi = lo;
        if max_norm(&part) <= spec.shell_tol * max_norm(&total) || max_norm(&total) == 0.0 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(QuadError::ShellDivergence(spec.max_shells).into());
    }
    let (inner, err) = polar_region_est(n, z, 0.0, hi, q, &near, &mut f)?;
    error += err;
    regions += 1;
    add_forms(&mut total, &inner);

    if let Some(r0) = far_radius {
        // |ζ − z| > r0 through r = r0/s, s ∈ (0, 1]
        let far = move |s: f64, _th: f64| (r0 / s, r0 * r0 / (s * s * s));
        let (outer, err) = polar_region_est(n, z, 0.0, 1.0, q, &far, &mut f)?;
        error += err;
        regions += 1;
        add_forms(&mut total, &outer);
    }
    let per = q * 2 * q + (q / 2).max(2) * 2 * (q / 2).max(2);
    Ok(Estimate { value: total, error, evaluations: regions * per })
}

/// Integral of a smooth form over a `P¹` domain: the tensor rule on the
/// whole chart, or a single polar patch centred at `z` on a disk.
pub fn integrate_smooth_p1<F>(z: C64, domain: Domain, spec: &QuadratureSpec, mut f: F) -> Result<Estimate>
where
    F: FnMut(&[C64]) -> Result<Vec<GradedElement>>,
{
    match domain {
        Domain::Whole => integrate_over_x(1, spec, f),
        Domain::Disk { center, radius } => {
            spec.validate()?;
            let w = z - center;
            if radius - w.norm() <= 1e-6 * radius {
                return Err(QuadError::NearBoundary(format!("{z}")).into());
            }
            let map = move |t: f64, th: f64| {
                let proj = (w.conj() * C64::from_polar(1.0, th)).re;
                let rmax = -proj + (proj * proj + radius * radius - w.norm_sqr()).sqrt();
                (t * rmax, rmax * rmax * t)
            };
            let (value, error) = polar_region_est(1, z, 0.0, 1.0, spec.order, &map, &mut f)?;
            let q = spec.order;
            Ok(Estimate { value, error, evaluations: 2 * q * q + 2 * (q / 2).max(2).pow(2) })
        }
    }
}

/// Shell-importance Monte Carlo for kernels in any dimension: a mixture of
/// the Fubini–Study density and a density `∝ |ζ − z|^{1−2n}` near `z`.
pub fn integrate_kernel_mc<F>(n: usize, z: &[C64], spec: &QuadratureSpec, mut f: F) -> Result<Estimate>
where
    F: FnMut(&[C64]) -> Result<Vec<GradedElement>>,
{
    spec.validate()?;
    let dim = 2 * n;
    let sphere = 2.0 * PI.powf(dim as f64 / 2.0) / gamma_half_int(dim);
    let r0 = spec.inner_radius * z.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let shell_pdf = |r: f64| r0 / ((r0 + r) * (r0 + r)) / (sphere * r.powi(dim as i32 - 1));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let per = spec.samples / spec.batches;
    let mut results = Vec::with_capacity(spec.batches);
    let mut p = vec![ZERO; n];
    for _ in 0..spec.batches {
        let mut acc = FormAccumulator::new(n);
        for row in latin_hypercube(&mut rng, per, dim + 1) {
            if row[dim] < 0.5 {
                for k in 0..n {
                    p[k] = fs_from_uniform(row[2 * k], row[2 * k + 1]);
                }
            } else {
                let u = row[0];
                let r = r0 * u / (1.0 - u);
                let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                for k in 0..n {
                    p[k] = z[k] + c(g[2 * k], g[2 * k + 1]) * (r / gn);
                }
            }
            let fs: f64 = p.iter().map(|b| fs_density(*b)).product();
            let r = p.iter().zip(z).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let pdf = 0.5 * fs + 0.5 * shell_pdf(r);
            acc.add(&f(&p)?, 1.0 / (pdf * per as f64));
        }
        results.push(acc.finish());
    }
    let (value, error) = batch_statistics(&results);
    Ok(Estimate { value, error, evaluations: per * spec.batches })
}

/// `Γ(d/2)` for positive integers `d`.
fn gamma_half_int(d: usize) -> f64 {
    if d.is_multiple_of(2) {
        (1..d / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < d as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// `∫_{∂Ω}` over the circle `|ζ − center| = radius` on `P¹` with the
/// periodic trapezoid rule. Terms `α(z) ∧ β(ζ)` contribute
/// `(−1)^{|α|} α ∮ β`, matching `∫_Ω d_ζ(α∧β)`.
pub fn boundary_integral<F>(center: C64, radius: f64, points: usize, mut f: F) -> Result<Vec<GradedElement>>
where
    F: FnMut(&[C64]) -> Result<Vec<GradedElement>>,
{
    let n = 1;
    let mut sums: BTreeMap<(usize, Monomial), CompensatedSum> = BTreeMap::new();
    let mut outputs = 0;
    for j in 0..points {
        let t = 2.0 * PI * j as f64 / points as f64;
        let e = C64::from_polar(1.0, t);
        let zeta = center + e * radius;
        let dzeta = c(0.0, 1.0) * e * radius;
        let dzetabar = dzeta.conj();
        let forms = f(&[zeta])?;
        outputs = outputs.max(forms.len());
        for (k, form) in forms.iter().enumerate() {
            for (m, v) in form.terms() {
                let hol = m.family_degree(Family::Whol);
                let anti = m.family_degree(Family::Wanti);
                if hol + anti != 1 {
                    continue;
                }
                let zpart = m.with_family_bits(Family::Whol, 0).with_family_bits(Family::Wanti, 0);
                let sign = if zpart.degree() % 2 == 0 { 1.0 } else { -1.0 };
                let dt = if hol == 1 { dzeta } else { dzetabar };
                sums.entry((k, zpart)).or_default().add(v * dt * sign * (2.0 * PI / points as f64));
            }
        }
    }
    let mut out = vec![GradedElement::zero(n); outputs];
    for ((k, m), s) in sums {
        out[k].add_term(m, s.value());
    }
    Ok(out)
}

/// `∂̄_z` of a numerically computed family of forms: central differences
/// at `h` and `h/2` combined by Richardson extrapolation. Also returns the
/// largest change between the two step sizes, which flags noise-dominated
/// results.
pub fn dbar_of_integral<F>(mut f: F, p: &[C64], dirs: &[usize], n: usize, step: f64) -> Result<(Vec<GradedElement>, f64)>
where
    F: FnMut(&[C64]) -> Result<Vec<GradedElement>>,
{
    let mut out: Vec<GradedElement> = Vec::new();
    let mut instability = 0.0f64;
    for &nu in dirs {
        let h = step * p[nu].norm().max(1.0);
        let mut dbar_at = |h: f64| -> Result<Vec<GradedElement>> {
            let mut q = p.to_vec();
            let mut acc: Vec<GradedElement> = Vec::new();
            let w = 1.0 / (4.0 * h);
            for (off, k) in [(c(h, 0.0), c(w, 0.0)), (c(-h, 0.0), c(-w, 0.0)), (c(0.0, h), c(0.0, w)), (c(0.0, -h), c(0.0, -w))] {
                q[nu] = p[nu] + off;
                let v = f(&q)?;
                if acc.len() < v.len() {
                    acc.resize(v.len(), GradedElement::zero(n));
                }
                for (a, x) in acc.iter_mut().zip(&v) {
                    a.axpy(k, x);
                }
            }
            Ok(acc)
        };
        let d1 = dbar_at(h)?;
        let d2 = dbar_at(0.5 * h)?;
        instability = instability.max(max_dist(&d1, &d2));
        let form = dwbar(n, nu);
        let rich: Vec<GradedElement> = d1
            .iter()
            .zip(&d2)
            .map(|(a, b)| &form * &(&b.scale_real(4.0 / 3.0) - &a.scale_real(1.0 / 3.0)))
            .collect();
        add_forms(&mut out, &rich);
    }
    Ok((out, instability))
}
