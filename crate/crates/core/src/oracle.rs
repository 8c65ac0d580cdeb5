//! Deterministic quadrature references for the smoothed values and gradients
//! in dimensions 1 to 3.
//!
//! Integration runs in standardized coordinates `z` over `[-T, T]^d`, with
//! `x = theta + sqrt(gamma) z`. Each axis is covered by composite
//! Gauss-Legendre panels; panel edges are placed at the integrand's declared
//! axis-aligned discontinuities so that every panel sees a smooth integrand.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objectives::{Noise, NoisyObjective};

const PANEL_ORDER: usize = 16;
pub const MAX_ORACLE_DIM: usize = 3;

/// A deterministic scalar function on `R^d`.
pub trait ScalarField: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> f64;

    /// Axis-aligned discontinuities `x[axis] = c` with `lo < c < hi`.
    fn breakpoints(&self, _axis: usize, _lo: f64, _hi: f64) -> Vec<f64> {
        Vec::new()
    }
}

/// A noisy objective frozen at one noise value.
pub struct AtNoise<'a> {
    pub objective: &'a dyn NoisyObjective,
    pub noise: &'a Noise,
}

impl<'a> AtNoise<'a> {
    pub fn new(objective: &'a dyn NoisyObjective, noise: &'a Noise) -> Self {
        AtNoise { objective, noise }
    }
}

impl ScalarField for AtNoise<'_> {
    fn dim(&self) -> usize {
        self.objective.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.objective.evaluate(x, self.noise)
    }
    fn breakpoints(&self, axis: usize, lo: f64, hi: f64) -> Vec<f64> {
        self.objective.breakpoints(axis, lo, hi)
    }
}

/// A closure on `R^d` with no declared discontinuities.
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> ScalarField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Approximate number of nodes per axis (rounded up to whole panels).
    pub n_nodes: usize,
    /// Half-width of the integration box in standardized coordinates.
    pub truncation: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            n_nodes: 512,
            truncation: 8.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < PANEL_ORDER {
            return Err(Error::domain(format!(
                "quadrature needs at least {PANEL_ORDER} nodes per axis"
            )));
        }
        if !(self.truncation > 0.0 && self.truncation.is_finite()) {
            return Err(Error::domain("truncation must be positive"));
        }
        Ok(())
    }
}

fn reference_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(PANEL_ORDER).expect("non-zero"))
            .as_node_weight_pairs()
            .to_vec()
    })
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Nodes `z` and weights `w * phi(z)` along one axis.
fn axis_rule(
    field: &dyn ScalarField,
    axis: usize,
    center: f64,
    sd: f64,
    spec: &QuadratureSpec,
) -> Vec<(f64, f64)> {
    let t = spec.truncation;
    let n_panels = spec.n_nodes.div_ceil(PANEL_ORDER);
    let mut edges: Vec<f64> = (0..=n_panels)
        .map(|k| -t + 2.0 * t * k as f64 / n_panels as f64)
        .collect();
    for c in field.breakpoints(axis, center - t * sd, center + t * sd) {
        let z = (c - center) / sd;
        if z > -t && z < t {
            edges.push(z);
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let rule = reference_rule();
    let mut out = Vec::with_capacity((edges.len() - 1) * PANEL_ORDER);
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for &(node, weight) in rule {
            let z = mid + half * node;
            out.push((z, half * weight * std_normal_pdf(z)));
        }
    }
    out
}

/// Gaussian-weighted integrals of a field around `theta`, from one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMoments {
    /// `E[f(x)]`.
    pub mean_value: f64,
    /// `gamma^{-1/2} E[(f(x) - f(theta)) z]`.
    pub mean_grad: Vec<f64>,
    /// `-log E[exp(-f(x))]`.
    pub exp_value: f64,
    /// `(theta - E_pi[x]) / gamma` under `pi ∝ exp(-f) N(theta, gamma I)`.
    pub exp_grad: Vec<f64>,
    /// `E_pi[x]`.
    pub posterior_mean: Vec<f64>,
    /// `E_pi[f(x)]`.
    pub posterior_mean_loss: f64,
    /// Per-sample standard deviation of the centered mean-smoothing gradient
    /// terms; the Monte-Carlo standard error is this over `sqrt(N)`.
    pub mean_grad_sd: Vec<f64>,
    /// Asymptotic per-sample standard deviation of the self-normalised
    /// exponential-smoothing gradient.
    pub exp_grad_sd: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Partial {
    sum_f: f64,
    sum_cz: Vec<f64>,
    sum_c2z2: Vec<f64>,
    // exponential moments, scaled by exp(-shift); the squared-weight ones by exp(-2 shift)
    shift: f64,
    s0: f64,
    s_f: f64,
    s_z: Vec<f64>,
    q0: f64,
    q_z: Vec<f64>,
    q_zz: Vec<f64>,
}

impl Partial {
    fn new(dim: usize) -> Self {
        Partial {
            sum_f: 0.0,
            sum_cz: vec![0.0; dim],
            sum_c2z2: vec![0.0; dim],
            shift: f64::NEG_INFINITY,
            s0: 0.0,
            s_f: 0.0,
            s_z: vec![0.0; dim],
            q0: 0.0,
            q_z: vec![0.0; dim],
            q_zz: vec![0.0; dim],
        }
    }

    fn rescale(&mut self, new_shift: f64) {
        if new_shift > self.shift {
            let r = if self.shift == f64::NEG_INFINITY {
                0.0
            } else {
                (self.shift - new_shift).exp()
            };
            self.s0 *= r;
            self.s_f *= r;
            self.s_z.iter_mut().for_each(|s| *s *= r);
            let r2 = r * r;
            self.q0 *= r2;
            self.q_z.iter_mut().for_each(|s| *s *= r2);
            self.q_zz.iter_mut().for_each(|s| *s *= r2);
            self.shift = new_shift;
        }
    }

    fn add(&mut self, z: &[f64], w: f64, f: f64, f0: f64) {
        self.sum_f += w * f;
        let c = w * (f - f0);
        for (i, zi) in z.iter().enumerate() {
            self.sum_cz[i] += c * zi;
            self.sum_c2z2[i] += c * (f - f0) * zi * zi;
        }
        self.rescale(-f);
        let d = (-f - self.shift).exp();
        let e = w * d;
        let q = e * d;
        self.s0 += e;
        self.s_f += e * f;
        self.q0 += q;
        for (i, zi) in z.iter().enumerate() {
            self.s_z[i] += e * zi;
            self.q_z[i] += q * zi;
            self.q_zz[i] += q * zi * zi;
        }
    }

    fn merge(&mut self, other: &Partial) {
        self.sum_f += other.sum_f;
        for (a, b) in self.sum_cz.iter_mut().zip(&other.sum_cz) {
            *a += b;
        }
        for (a, b) in self.sum_c2z2.iter_mut().zip(&other.sum_c2z2) {
            *a += b;
        }
        if other.shift == f64::NEG_INFINITY {
            return;
        }
        self.rescale(other.shift);
        let r = (other.shift - self.shift).exp();
        self.s0 += r * other.s0;
        self.s_f += r * other.s_f;
        for (a, b) in self.s_z.iter_mut().zip(&other.s_z) {
            *a += r * b;
        }
        let r2 = r * r;
        self.q0 += r2 * other.q0;
        for (a, b) in self.q_z.iter_mut().zip(&other.q_z) {
            *a += r2 * b;
        }
        for (a, b) in self.q_zz.iter_mut().zip(&other.q_zz) {
            *a += r2 * b;
        }
    }
}

/// Compute every smoothed quantity of `field` at `(theta, gamma)`.
pub fn oracle_moments(
    field: &dyn ScalarField,
    theta: &[f64],
    gamma: f64,
    spec: &QuadratureSpec,
) -> Result<OracleMoments> {
    let dim = field.dim();
    if dim == 0 || dim > MAX_ORACLE_DIM {
        return Err(Error::UnsupportedDimension(dim));
    }
    if theta.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: theta.len(),
        });
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::domain(format!("gamma must be > 0, got {gamma}")));
    }
    spec.validate()?;

    let sd = gamma.sqrt();
    let rules: Vec<Vec<(f64, f64)>> = (0..dim)
        .map(|axis| axis_rule(field, axis, theta[axis], sd, spec))
        .collect();
    let f0 = field.eval(theta);

    let partials: Vec<Partial> = rules[0]
        .par_iter()
        .map(|&(z0, w0)| {
            let mut p = Partial::new(dim);
            let mut z = vec![0.0; dim];
            let mut x = vec![0.0; dim];
            z[0] = z0;
            x[0] = theta[0] + sd * z0;
            sweep(field, &rules, theta, sd, 1, w0, &mut z, &mut x, f0, &mut p);
            p
        })
        .collect();
    let mut total = Partial::new(dim);
    for p in &partials {
        total.merge(p);
    }
    if !(total.s0 > 0.0 && total.s0.is_finite()) {
        return Err(Error::DegenerateWeights);
    }

    let inv_sd = 1.0 / sd;
    let post_z: Vec<f64> = total.s_z.iter().map(|s| s / total.s0).collect();
    let mean_grad: Vec<f64> = total.sum_cz.iter().map(|s| s * inv_sd).collect();
    let mean_grad_sd = total
        .sum_c2z2
        .iter()
        .zip(&mean_grad)
        .map(|(m2, g)| (m2 / gamma - g * g).max(0.0).sqrt())
        .collect();
    // E[e^{-2f} (z - mu)^2] / E[e^{-f}]^2, with both shifts cancelling
    let exp_grad_sd = post_z
        .iter()
        .enumerate()
        .map(|(i, mu)| {
            let centered = total.q_zz[i] - 2.0 * mu * total.q_z[i] + mu * mu * total.q0;
            (centered.max(0.0) / (total.s0 * total.s0)).sqrt() * inv_sd
        })
        .collect();
    Ok(OracleMoments {
        mean_value: total.sum_f,
        mean_grad,
        mean_grad_sd,
        exp_grad_sd,
        exp_value: -(total.shift + total.s0.ln()),
        exp_grad: post_z.iter().map(|m| -m * inv_sd).collect(),
        posterior_mean: theta.iter().zip(&post_z).map(|(t, m)| t + sd * m).collect(),
        posterior_mean_loss: total.s_f / total.s0,
    })
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    field: &dyn ScalarField,
    rules: &[Vec<(f64, f64)>],
    theta: &[f64],
    sd: f64,
    axis: usize,
    weight: f64,
    z: &mut [f64],
    x: &mut [f64],
    f0: f64,
    acc: &mut Partial,
) {
    if axis == rules.len() {
        let f = field.eval(x);
        acc.add(z, weight, f, f0);
        return;
    }
    for &(zi, wi) in &rules[axis] {
        z[axis] = zi;
        x[axis] = theta[axis] + sd * zi;
        sweep(
            field,
            rules,
            theta,
            sd,
            axis + 1,
            weight * wi,
            z,
            x,
            f0,
            acc,
        );
    }
}

/// `Lbar_gamma(theta) = E[f(theta + sqrt(gamma) z)]`.
pub fn oracle_mean_value(
    field: &dyn ScalarField,
    theta: &[f64],
    gamma: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(oracle_moments(field, theta, gamma, spec)?.mean_value)
}

/// Gradient of `Lbar_gamma`, from the centered integrand.
pub fn oracle_mean_grad(
    field: &dyn ScalarField,
    theta: &[f64],
    gamma: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    Ok(oracle_moments(field, theta, gamma, spec)?.mean_grad)
}

/// `l_gamma(theta) = -log E[exp(-f(theta + sqrt(gamma) z))]`.
pub fn oracle_exp_value(
    field: &dyn ScalarField,
    theta: &[f64],
    gamma: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(oracle_moments(field, theta, gamma, spec)?.exp_value)
}

/// Gradient of `l_gamma`: `(theta - posterior mean) / gamma`.
pub fn oracle_exp_grad(
    field: &dyn ScalarField,
    theta: &[f64],
    gamma: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    Ok(oracle_moments(field, theta, gamma, spec)?.exp_grad)
}
