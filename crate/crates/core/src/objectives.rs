//! Test objectives with declared regularity metadata.
//!
//! Each objective evaluates a noisy loss `l(theta, u)`, samples its own noise
//! tokens, and declares the Hölder-type profile and lower bound it satisfies.
//! Noise tokens are opaque to the optimizer; [`Noise::None`] always means the
//! noise-free evaluation (the mean objective for additive noise, the full pair
//! set for mini-batch AUC).

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::auc::PairBatch;
use crate::convergence::RegularityProfile;
use crate::error::{Error, Result};

/// Declared Hölder constants are valid for pairs of points with `||theta|| <= HOLDER_CHECK_RADIUS`
/// and `||theta - theta'|| <= 1`. Quadratic growth admits no global constant.
pub const HOLDER_CHECK_RADIUS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
#[non_exhaustive]
pub enum Noise {
    None,
    Vector(Vec<f64>),
    Additive { base: Box<Noise>, draw: f64 },
    Pairs(PairBatch),
}

pub trait NoisyObjective: Send + Sync {
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    fn evaluate(&self, theta: &[f64], u: &Noise) -> f64;

    fn sample_noise(&self, rng: &mut dyn RngCore) -> Noise;

    fn profile(&self) -> RegularityProfile;

    /// Constant `c` with `l(theta, u) >= c` (in expectation over `u` for unbounded noise).
    fn lower_bound(&self) -> f64;

    /// Declared `J(u)` of the Hölder bound.
    fn holder_constant(&self, u: &Noise) -> f64;

    /// Locations of axis-aligned discontinuities `x[axis] = c` inside `[lo, hi]`.
    fn breakpoints(&self, _axis: usize, _lo: f64, _hi: f64) -> Vec<f64> {
        Vec::new()
    }
}

impl fmt::Debug for dyn NoisyObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NoisyObjective")
            .field("name", &self.name())
            .field("dim", &self.dim())
            .finish()
    }
}

fn half_sq_norm(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

fn deterministic(alpha: f64, beta: f64) -> RegularityProfile {
    RegularityProfile {
        alpha,
        beta_upper: beta,
        eta: f64::INFINITY,
        deterministic: true,
    }
}

/// `||x||^2 / 2`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub dim: usize,
}

impl NoisyObjective for Quadratic {
    fn name(&self) -> String {
        format!("quadratic:{}", self.dim)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, theta: &[f64], _u: &Noise) -> f64 {
        half_sq_norm(theta)
    }
    fn sample_noise(&self, _rng: &mut dyn RngCore) -> Noise {
        Noise::None
    }
    fn profile(&self) -> RegularityProfile {
        deterministic(1.0, 2.0)
    }
    fn lower_bound(&self) -> f64 {
        0.0
    }
    fn holder_constant(&self, _u: &Noise) -> f64 {
        // |f(a) - f(b)| <= |a - b| (|a| + |b|) / 2 <= 3.5 |a - b| on the check region.
        HOLDER_CHECK_RADIUS + 0.5
    }
}

/// `1{x < 0}` in one dimension.
#[derive(Debug, Clone, Default)]
pub struct Step;

impl NoisyObjective for Step {
    fn name(&self) -> String {
        "step".into()
    }
    fn dim(&self) -> usize {
        1
    }
    fn evaluate(&self, theta: &[f64], _u: &Noise) -> f64 {
        if theta[0] < 0.0 {
            1.0
        } else {
            0.0
        }
    }
    fn sample_noise(&self, _rng: &mut dyn RngCore) -> Noise {
        Noise::None
    }
    fn profile(&self) -> RegularityProfile {
        deterministic(0.0, 0.0)
    }
    fn lower_bound(&self) -> f64 {
        0.0
    }
    fn holder_constant(&self, _u: &Noise) -> f64 {
        0.5
    }
    fn breakpoints(&self, _axis: usize, lo: f64, hi: f64) -> Vec<f64> {
        if lo < 0.0 && 0.0 < hi {
            vec![0.0]
        } else {
            Vec::new()
        }
    }
}

/// `1{x < 0} + weight * x^2` in one dimension.
#[derive(Debug, Clone)]
pub struct StepPlusQuadratic {
    pub weight: f64,
}

impl Default for StepPlusQuadratic {
    fn default() -> Self {
        StepPlusQuadratic { weight: 0.05 }
    }
}

impl NoisyObjective for StepPlusQuadratic {
    fn name(&self) -> String {
        "step-quadratic".into()
    }
    fn dim(&self) -> usize {
        1
    }
    fn evaluate(&self, theta: &[f64], u: &Noise) -> f64 {
        Step.evaluate(theta, u) + self.weight * theta[0] * theta[0]
    }
    fn sample_noise(&self, _rng: &mut dyn RngCore) -> Noise {
        Noise::None
    }
    fn profile(&self) -> RegularityProfile {
        deterministic(0.0, 1.0)
    }
    fn lower_bound(&self) -> f64 {
        0.0
    }
    fn holder_constant(&self, _u: &Noise) -> f64 {
        // 1 + weight |a + b| |a - b| <= 1 + 7 weight |a - b|
        1.0_f64.max(self.weight * (2.0 * HOLDER_CHECK_RADIUS + 1.0))
    }
    fn breakpoints(&self, axis: usize, lo: f64, hi: f64) -> Vec<f64> {
        Step.breakpoints(axis, lo, hi)
    }
}

/// `||theta||^2 / 2 + u . theta` with `u ~ N(0, variance I)`.
#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    pub dim: usize,
    pub variance: f64,
}

impl NoisyQuadratic {
    pub fn new(dim: usize) -> Self {
        NoisyQuadratic { dim, variance: 0.1 }
    }
}

impl NoisyObjective for NoisyQuadratic {
    fn name(&self) -> String {
        format!("noisy-quadratic:{}", self.dim)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, theta: &[f64], u: &Noise) -> f64 {
        let shift = match u {
            Noise::Vector(v) => crate::point::dot(v, theta),
            _ => 0.0,
        };
        half_sq_norm(theta) + shift
    }
    fn sample_noise(&self, rng: &mut dyn RngCore) -> Noise {
        let sd = self.variance.sqrt();
        Noise::Vector(
            (0..self.dim)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(rng);
                    sd * g
                })
                .collect(),
        )
    }
    fn profile(&self) -> RegularityProfile {
        // J(u) = 3.5 + |u| has Gaussian tails, so every moment order is available.
        RegularityProfile {
            alpha: 1.0,
            beta_upper: 2.0,
            eta: f64::INFINITY,
            deterministic: false,
        }
    }
    fn lower_bound(&self) -> f64 {
        0.0
    }
    fn holder_constant(&self, u: &Noise) -> f64 {
        let extra = match u {
            Noise::Vector(v) => crate::point::norm(v),
            _ => 0.0,
        };
        HOLDER_CHECK_RADIUS + 0.5 + extra
    }
}

/// `sum_i floor(|x_i|)`: piecewise constant with jumps at the non-zero integers.
#[derive(Debug, Clone)]
pub struct Staircase {
    pub dim: usize,
}

impl NoisyObjective for Staircase {
    fn name(&self) -> String {
        format!("staircase:{}", self.dim)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, theta: &[f64], _u: &Noise) -> f64 {
        theta.iter().map(|x| x.abs().floor()).sum()
    }
    fn sample_noise(&self, _rng: &mut dyn RngCore) -> Noise {
        Noise::None
    }
    fn profile(&self) -> RegularityProfile {
        deterministic(0.0, 1.0)
    }
    fn lower_bound(&self) -> f64 {
        0.0
    }
    fn holder_constant(&self, _u: &Noise) -> f64 {
        // sum_i (|d_i| + 1) <= sqrt(d) |d| + d
        self.dim as f64
    }
    fn breakpoints(&self, _axis: usize, lo: f64, hi: f64) -> Vec<f64> {
        let first = lo.floor() as i64 + 1;
        let last = hi.ceil() as i64 - 1;
        (first..=last)
            .filter(|&k| k != 0)
            .map(|k| k as f64)
            .filter(|&k| k > lo && k < hi)
            .collect()
    }
}

/// Constant loss.
#[derive(Debug, Clone)]
pub struct Constant {
    pub dim: usize,
    pub value: f64,
}

impl NoisyObjective for Constant {
    fn name(&self) -> String {
        format!("constant:{}", self.dim)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, _theta: &[f64], _u: &Noise) -> f64 {
        self.value
    }
    fn sample_noise(&self, _rng: &mut dyn RngCore) -> Noise {
        Noise::None
    }
    fn profile(&self) -> RegularityProfile {
        deterministic(1.0, 1.0)
    }
    fn lower_bound(&self) -> f64 {
        self.value
    }
    fn holder_constant(&self, _u: &Noise) -> f64 {
        0.0
    }
}

/// `slope . x`. Not bounded below; used for estimator checks only.
#[derive(Debug, Clone)]
pub struct Linear {
    pub slope: Vec<f64>,
}

impl NoisyObjective for Linear {
    fn name(&self) -> String {
        format!("linear:{}", self.slope.len())
    }
    fn dim(&self) -> usize {
        self.slope.len()
    }
    fn evaluate(&self, theta: &[f64], _u: &Noise) -> f64 {
        crate::point::dot(&self.slope, theta)
    }
    fn sample_noise(&self, _rng: &mut dyn RngCore) -> Noise {
        Noise::None
    }
    fn profile(&self) -> RegularityProfile {
        deterministic(1.0, 1.0)
    }
    fn lower_bound(&self) -> f64 {
        f64::NEG_INFINITY
    }
    fn holder_constant(&self, _u: &Noise) -> f64 {
        crate::point::norm(&self.slope) / 2.0
    }
}

/// `base(theta, u) + sigma * g` with `g ~ N(0, 1)`.
#[derive(Clone)]
pub struct AdditiveGaussianNoise {
    base: Arc<dyn NoisyObjective>,
    sigma: f64,
}

impl AdditiveGaussianNoise {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Wrap `base` with additive standard-normal noise of scale `sigma`.
///
/// The additive term cancels in Hölder differences, so the wrapped profile
/// keeps `alpha`, `beta` and `eta` of the base and only drops the
/// deterministic flag.
pub fn with_gaussian_noise(
    base: Arc<dyn NoisyObjective>,
    sigma: f64,
) -> Result<AdditiveGaussianNoise> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::domain(format!(
            "noise sigma must be > 0, got {sigma}"
        )));
    }
    Ok(AdditiveGaussianNoise { base, sigma })
}

impl NoisyObjective for AdditiveGaussianNoise {
    fn name(&self) -> String {
        format!("{}+noise={}", self.base.name(), self.sigma)
    }
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn evaluate(&self, theta: &[f64], u: &Noise) -> f64 {
        match u {
            Noise::Additive { base, draw } => self.base.evaluate(theta, base) + self.sigma * draw,
            other => self.base.evaluate(theta, other),
        }
    }
    fn sample_noise(&self, rng: &mut dyn RngCore) -> Noise {
        let base = self.base.sample_noise(rng);
        let draw: f64 = StandardNormal.sample(rng);
        Noise::Additive {
            base: Box::new(base),
            draw,
        }
    }
    fn profile(&self) -> RegularityProfile {
        RegularityProfile {
            deterministic: false,
            ..self.base.profile()
        }
    }
    fn lower_bound(&self) -> f64 {
        self.base.lower_bound()
    }
    fn holder_constant(&self, u: &Noise) -> f64 {
        match u {
            Noise::Additive { base, .. } => self.base.holder_constant(base),
            other => self.base.holder_constant(other),
        }
    }
    fn breakpoints(&self, axis: usize, lo: f64, hi: f64) -> Vec<f64> {
        self.base.breakpoints(axis, lo, hi)
    }
}

/// The built-in objectives, in a fixed order.
pub fn builtin_corpus() -> Vec<Arc<dyn NoisyObjective>> {
    vec![
        Arc::new(Quadratic { dim: 2 }),
        Arc::new(Step),
        Arc::new(StepPlusQuadratic::default()),
        Arc::new(NoisyQuadratic::new(2)),
        Arc::new(Staircase { dim: 2 }),
    ]
}

/// Resolve a descriptor `name[:dim][+noise=sigma]`.
///
/// Names: `quadratic`, `step`, `step-quadratic`, `noisy-quadratic`,
/// `staircase`, `constant`, `linear`.
pub fn objective_by_descriptor(descriptor: &str) -> Result<Arc<dyn NoisyObjective>> {
    let (head, sigma) = match descriptor.split_once("+noise=") {
        Some((head, s)) => {
            let sigma = s
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::domain(format!("bad noise level in '{descriptor}'")))?;
            (head.trim(), Some(sigma))
        }
        None => (descriptor.trim(), None),
    };
    let (name, dim) = match head.split_once(':') {
        Some((name, d)) => {
            let d = d
                .parse::<usize>()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::domain(format!("bad dimension in '{descriptor}'")))?;
            (name, Some(d))
        }
        None => (head, None),
    };
    let fixed_1d = |d: Option<usize>| match d {
        None | Some(1) => Ok(()),
        Some(d) => Err(Error::domain(format!(
            "'{name}' is one-dimensional, got dimension {d}"
        ))),
    };
    let base: Arc<dyn NoisyObjective> = match name {
        "quadratic" => Arc::new(Quadratic {
            dim: dim.unwrap_or(2),
        }),
        "step" => {
            fixed_1d(dim)?;
            Arc::new(Step)
        }
        "step-quadratic" => {
            fixed_1d(dim)?;
            Arc::new(StepPlusQuadratic::default())
        }
        "noisy-quadratic" => Arc::new(NoisyQuadratic::new(dim.unwrap_or(2))),
        "staircase" => Arc::new(Staircase {
            dim: dim.unwrap_or(2),
        }),
        "constant" => Arc::new(Constant {
            dim: dim.unwrap_or(1),
            value: 1.0,
        }),
        "linear" => Arc::new(Linear {
            slope: vec![1.0; dim.unwrap_or(1)],
        }),
        other => return Err(Error::domain(format!("unknown objective '{other}'"))),
    };
    match sigma {
        Some(s) => Ok(Arc::new(with_gaussian_noise(base, s)?)),
        None => Ok(base),
    }
}
