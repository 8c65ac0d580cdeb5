//! Monte-Carlo estimators for the two Gaussian smoothings of a loss.
//!
//! With `x = theta + sqrt(gamma) z`, `z ~ N(0, I_d)`:
//!
//! - mean smoothing: `Lbar_gamma(theta) = E[l(x)]`, gradient
//!   `gamma^{-1/2} E[(l(x) - l(theta)) z]`;
//! - exponential smoothing: `l_gamma(theta) = -log E[exp(-l(x))]`, gradient
//!   `(theta - E_pi[x]) / gamma` where `pi(x) ∝ exp(-l(x)) N(x; theta, gamma I)`.
//!
//! The exponential gradient is estimated by self-normalised importance
//! sampling with the Gaussian proposal. Optionally the loss is multiplied by
//! a factor `lambda` chosen so that the weights keep a target effective
//! sample size; `lambda` enters the weights only.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objectives::{Noise, NoisyObjective};
use crate::rng::Substream;

pub const DEFAULT_SAMPLES: usize = 1024;

/// Absolute tolerance, in samples, for ESS-targeted rescaling inside the estimator.
pub const DEFAULT_ESS_TOL: f64 = 1e-3;

/// Bisection bracket for `log2(lambda)`.
const LOG2_LAMBDA_RANGE: (f64, f64) = (-40.0, 40.0);
const MAX_BISECTIONS: usize = 60;

/// Multiplier used when the ESS target lies below the tie multiplicity of the
/// minimum loss: the top of the bisection bracket.
pub const SATURATED_LAMBDA: f64 = 1_099_511_627_776.0; // 2^40

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SmootherKind {
    /// `psi(x) = x`.
    MeanSmooth,
    /// `psi(x) = exp(-x)`.
    ExpSmooth,
}

impl std::fmt::Display for SmootherKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SmootherKind::MeanSmooth => "mean",
            SmootherKind::ExpSmooth => "exp",
        })
    }
}

impl std::str::FromStr for SmootherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" | "meansmooth" | "mean-smooth" => Ok(SmootherKind::MeanSmooth),
            "exp" | "expsmooth" | "exp-smooth" => Ok(SmootherKind::ExpSmooth),
            other => Err(Error::domain(format!("unknown smoother '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate {
    pub gradient: Vec<f64>,
    pub value_estimate: f64,
    pub ess: f64,
    pub std_error: Vec<f64>,
    pub rescale_lambda: f64,
    pub n_samples: usize,
    /// Weighted sample mean `sum_k w_k x_k` (exponential smoothing only).
    pub posterior_mean: Option<Vec<f64>>,
}

impl GradEstimate {
    pub fn grad_norm(&self) -> f64 {
        crate::point::norm(&self.gradient)
    }
}

/// Perturbations `z_k`, the points `x_k = theta + sqrt(gamma) z_k` and their losses.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    dim: usize,
    z: Vec<f64>,
    x: Vec<f64>,
    pub losses: Vec<f64>,
    pub base_loss: f64,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn z(&self, k: usize) -> &[f64] {
        &self.z[k * self.dim..(k + 1) * self.dim]
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.x[k * self.dim..(k + 1) * self.dim]
    }
}

fn check_inputs(
    obj: &dyn NoisyObjective,
    theta: &[f64],
    gamma: f64,
    n_samples: usize,
) -> Result<()> {
    if theta.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            actual: theta.len(),
        });
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::domain(format!("gamma must be > 0, got {gamma}")));
    }
    if n_samples < 2 {
        return Err(Error::domain(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    Ok(())
}

/// Draw `n_samples` perturbed evaluations. Sample `k` uses substream index `k`,
/// so the batch is identical however the work is split across threads.
pub fn draw_batch(
    obj: &dyn NoisyObjective,
    theta: &[f64],
    gamma: f64,
    u: &Noise,
    n_samples: usize,
    stream: &Substream,
) -> Result<SampleBatch> {
    check_inputs(obj, theta, gamma, n_samples)?;
    let dim = theta.len();
    let sd = gamma.sqrt();
    let samples: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..n_samples)
        .into_par_iter()
        .with_min_len(64)
        .map(|k| {
            let mut rng = stream.sample_rng(k as u64);
            let z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let x: Vec<f64> = theta.iter().zip(&z).map(|(t, zi)| t + sd * zi).collect();
            let loss = obj.evaluate(&x, u);
            (z, x, loss)
        })
        .collect();

    let mut batch = SampleBatch {
        dim,
        z: Vec::with_capacity(n_samples * dim),
        x: Vec::with_capacity(n_samples * dim),
        losses: Vec::with_capacity(n_samples),
        base_loss: obj.evaluate(theta, u),
    };
    for (k, (z, x, loss)) in samples.into_iter().enumerate() {
        if !loss.is_finite() {
            return Err(Error::Evaluation {
                sample: k,
                value: loss,
            });
        }
        batch.z.extend_from_slice(&z);
        batch.x.extend_from_slice(&x);
        batch.losses.push(loss);
    }
    if !batch.base_loss.is_finite() {
        return Err(Error::Evaluation {
            sample: n_samples,
            value: batch.base_loss,
        });
    }
    Ok(batch)
}

/// Centered Monte-Carlo gradient of the mean smoothing.
///
/// Exactly zero on constant losses for every draw.
pub fn grad_mean_smooth(
    obj: &dyn NoisyObjective,
    theta: &[f64],
    gamma: f64,
    u: &Noise,
    n_samples: usize,
    stream: &Substream,
) -> Result<GradEstimate> {
    let batch = draw_batch(obj, theta, gamma, u, n_samples, stream)?;
    Ok(mean_smooth_from_batch(&batch, gamma))
}

pub fn mean_smooth_from_batch(batch: &SampleBatch, gamma: f64) -> GradEstimate {
    let n = batch.len();
    let dim = batch.dim;
    let inv_sd = 1.0 / gamma.sqrt();
    let mut sum = vec![0.0; dim];
    let mut sum_sq = vec![0.0; dim];
    for k in 0..n {
        let centered = inv_sd * (batch.losses[k] - batch.base_loss);
        for (i, zi) in batch.z(k).iter().enumerate() {
            let term = centered * zi;
            sum[i] += term;
            sum_sq[i] += term * term;
        }
    }
    let nf = n as f64;
    let gradient: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let std_error = sum_sq
        .iter()
        .zip(&gradient)
        .map(|(sq, mean)| {
            let var = ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
            (var / nf).sqrt()
        })
        .collect();
    GradEstimate {
        gradient,
        value_estimate: running_mean(&batch.losses),
        ess: nf,
        std_error,
        rescale_lambda: 1.0,
        n_samples: n,
        posterior_mean: None,
    }
}

/// Self-normalised importance-sampling gradient of the exponential smoothing.
///
/// `target_ess`, when given, picks the loss multiplier `lambda` used in the
/// weights; the reported value estimate always uses `lambda = 1`. When more
/// samples tie at the minimum loss than the target allows, `lambda` saturates
/// at [`SATURATED_LAMBDA`] and the weights spread evenly over the tied samples.
pub fn grad_exp_smooth(
    obj: &dyn NoisyObjective,
    theta: &[f64],
    gamma: f64,
    u: &Noise,
    n_samples: usize,
    target_ess: Option<f64>,
    stream: &Substream,
) -> Result<GradEstimate> {
    if let Some(t) = target_ess {
        if !(t > 1.0 && t < n_samples as f64) {
            return Err(Error::domain(format!(
                "target ESS must lie in (1, {n_samples}), got {t}"
            )));
        }
    }
    let batch = draw_batch(obj, theta, gamma, u, n_samples, stream)?;
    exp_smooth_from_batch(&batch, theta, gamma, target_ess)
}

pub fn exp_smooth_from_batch(
    batch: &SampleBatch,
    theta: &[f64],
    gamma: f64,
    target_ess: Option<f64>,
) -> Result<GradEstimate> {
    let n = batch.len();
    let dim = batch.dim;
    let lambda = match target_ess {
        Some(t) => match rescale_to_target_ess(&batch.losses, t, DEFAULT_ESS_TOL) {
            // more samples tie at the minimum than the target allows
            Err(Error::InfeasibleTarget { lower, .. }) if t < lower => SATURATED_LAMBDA,
            other => other?,
        },
        None => 1.0,
    };
    let weights = normalized_weights(&batch.losses, lambda)?;

    let mut mean = vec![0.0; dim];
    for (k, w) in weights.iter().enumerate() {
        for (m, x) in mean.iter_mut().zip(batch.point(k)) {
            *m += w * x;
        }
    }
    let mut spread = vec![0.0; dim];
    let mut sum_w2 = 0.0;
    for (k, w) in weights.iter().enumerate() {
        sum_w2 += w * w;
        for ((s, x), m) in spread.iter_mut().zip(batch.point(k)).zip(&mean) {
            *s += w * w * (x - m) * (x - m);
        }
    }
    let gradient = theta
        .iter()
        .zip(&mean)
        .map(|(t, m)| (t - m) / gamma)
        .collect();
    let std_error = spread.iter().map(|s| s.sqrt() / gamma).collect();
    Ok(GradEstimate {
        gradient,
        value_estimate: neg_log_mean_exp(&batch.losses),
        ess: (1.0 / sum_w2).clamp(1.0, n as f64),
        std_error,
        rescale_lambda: lambda,
        n_samples: n,
        posterior_mean: Some(mean),
    })
}

/// Weights `∝ exp(-lambda * loss)` normalised to sum to one, computed after
/// shifting by the minimum loss. Adding a constant to every loss leaves the
/// result bit-for-bit unchanged whenever the shifted losses are unchanged.
pub fn normalized_weights(losses: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let mut w: Vec<f64> = losses.iter().map(|l| (-lambda * (l - min)).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Incremental mean; exact when every value is equal.
fn running_mean(values: &[f64]) -> f64 {
    values
        .iter()
        .enumerate()
        .fold(0.0, |m, (k, v)| m + (v - m) / (k + 1) as f64)
}

/// `-log((1/N) sum_k exp(-l_k))`, shift-stable.
pub fn neg_log_mean_exp(losses: &[f64]) -> f64 {
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = losses.iter().map(|l| (-(l - min)).exp()).sum::<f64>() / losses.len() as f64;
    min - mean.ln()
}

/// Effective sample size `(sum w)^2 / sum w^2`.
pub fn ess(weights: &[f64]) -> Result<f64> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::domain("weights must be finite and non-negative"));
    }
    // Scale by the largest weight so tiny or huge weights do not under/overflow.
    let max = weights.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::domain("at least one weight must be positive"));
    }
    let (s, s2) = weights.iter().fold((0.0, 0.0), |(s, s2), w| {
        let r = w / max;
        (s + r, s2 + r * r)
    });
    Ok(s * s / s2)
}

fn ess_at(losses: &[f64], min: f64, lambda: f64) -> f64 {
    let (s, s2) = losses.iter().fold((0.0, 0.0), |(s, s2), l| {
        let w = (-lambda * (l - min)).exp();
        (s + w, s2 + w * w)
    });
    s * s / s2
}

/// Find `lambda > 0` such that weights `∝ exp(-lambda * loss)` have ESS within
/// `tol` of `target_ess`. ESS decreases in `lambda`, from `N` at zero to the
/// multiplicity of the minimum loss at infinity; bisection runs on
/// `log2(lambda)` over `[-40, 40]`. All-equal losses return `lambda = 1`.
pub fn rescale_to_target_ess(losses: &[f64], target_ess: f64, tol: f64) -> Result<f64> {
    let n = losses.len();
    if n == 0 {
        return Err(Error::domain("no losses to rescale"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be > 0, got {tol}")));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::domain("losses must be finite"));
    }
    let nf = n as f64;
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let multiplicity = losses.iter().filter(|&&l| l == min).count() as f64;
    if !(target_ess <= nf) {
        return Err(Error::InfeasibleTarget {
            target: target_ess,
            lower: multiplicity,
            upper: nf,
        });
    }
    if multiplicity == nf {
        return Ok(1.0);
    }
    if target_ess < multiplicity {
        return Err(Error::InfeasibleTarget {
            target: target_ess,
            lower: multiplicity,
            upper: nf,
        });
    }

    let (mut lo, mut hi) = LOG2_LAMBDA_RANGE;
    let ess_lo = ess_at(losses, min, lo.exp2());
    let ess_hi = ess_at(losses, min, hi.exp2());
    if target_ess > ess_lo + tol || target_ess < ess_hi - tol {
        return Err(Error::InfeasibleTarget {
            target: target_ess,
            lower: ess_hi,
            upper: ess_lo,
        });
    }
    let mut best = (f64::INFINITY, 1.0);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let lambda = mid.exp2();
        let e = ess_at(losses, min, lambda);
        let gap = (e - target_ess).abs();
        if gap < best.0 {
            best = (gap, lambda);
        }
        if gap <= tol {
            return Ok(lambda);
        }
        if e > target_ess {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.1)
}

/// Monte-Carlo estimate of the mean smoothing `Lbar_gamma(theta, u)`.
pub fn smooth_value_mean(
    obj: &dyn NoisyObjective,
    theta: &[f64],
    gamma: f64,
    u: &Noise,
    n_samples: usize,
    stream: &Substream,
) -> Result<f64> {
    let batch = draw_batch(obj, theta, gamma, u, n_samples, stream)?;
    Ok(running_mean(&batch.losses))
}

/// Dispatch on the smoother kind. `target_ess` is ignored by the mean smoother.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gradient(
    kind: SmootherKind,
    obj: &dyn NoisyObjective,
    theta: &[f64],
    gamma: f64,
    u: &Noise,
    n_samples: usize,
    target_ess: Option<f64>,
    stream: &Substream,
) -> Result<GradEstimate> {
    match kind {
        SmootherKind::MeanSmooth => grad_mean_smooth(obj, theta, gamma, u, n_samples, stream),
        SmootherKind::ExpSmooth => {
            grad_exp_smooth(obj, theta, gamma, u, n_samples, target_ess, stream)
        }
    }
}
