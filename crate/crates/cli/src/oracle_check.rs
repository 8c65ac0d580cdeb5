//! Monte-Carlo estimates against the quadrature oracle.

use std::fmt;

use mollify::oracle::{oracle_moments, AtNoise, OracleMoments, QuadratureSpec};
use mollify::rng::{MONTE_CARLO, NOISE};
use mollify::smoothers::{draw_batch, exp_smooth_from_batch, mean_smooth_from_batch};
use mollify::{Error, Noise, NoisyObjective, Result, SmootherKind, Substream};

/// Differences at or below this (relative to `max(1, |oracle|)`) count as
/// exact agreement, which matters when every sample agrees and the standard
/// error is zero.
pub const EXACT_TOL: f64 = 1e-12;

/// Default acceptance threshold in standard-error units.
pub const SE_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct Comparison {
    pub kind: SmootherKind,
    pub gamma: f64,
    pub theta: Vec<f64>,
    pub mc_value: f64,
    pub value_se: f64,
    pub oracle_value: f64,
    pub mc_grad: Vec<f64>,
    /// Standard error reported by the estimator.
    pub grad_se: Vec<f64>,
    /// Exact standard error of the estimator, from quadrature.
    pub grad_se_exact: Vec<f64>,
    pub oracle_grad: Vec<f64>,
}

/// `|estimate - reference| / se`, with exact agreement mapped to zero.
pub fn se_units(estimate: f64, se: f64, reference: f64) -> f64 {
    let diff = (estimate - reference).abs();
    if diff <= EXACT_TOL * reference.abs().max(1.0) {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        f64::INFINITY
    }
}

impl Comparison {
    pub fn value_units(&self) -> f64 {
        se_units(self.mc_value, self.value_se, self.oracle_value)
    }

    /// Largest gradient deviation in exact standard errors.
    pub fn grad_units(&self) -> f64 {
        self.mc_grad
            .iter()
            .zip(&self.grad_se_exact)
            .zip(&self.oracle_grad)
            .map(|((m, s), o)| se_units(*m, *s, *o))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<4} gamma={:<8} theta={:?} value: {:.6e} vs {:.6e} ({:.2} se)  grad: {:?} vs {:?} ({:.2} se)",
            self.kind,
            self.gamma,
            self.theta,
            self.mc_value,
            self.oracle_value,
            self.value_units(),
            self.mc_grad,
            self.oracle_grad,
            self.grad_units()
        )
    }
}

/// The noise draw used for every comparison under `seed`.
pub fn fixed_noise(obj: &dyn NoisyObjective, seed: u64) -> Noise {
    obj.sample_noise(&mut Substream::new(seed, 0, NOISE).rng())
}

fn value_with_se(kind: SmootherKind, losses: &[f64]) -> (f64, f64) {
    let n = losses.len() as f64;
    match kind {
        SmootherKind::MeanSmooth => {
            let mean = losses.iter().sum::<f64>() / n;
            let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        }
        SmootherKind::ExpSmooth => {
            // delta method on -log of the sample mean of exp(-loss)
            let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
            let e: Vec<f64> = losses.iter().map(|l| (-(l - min)).exp()).collect();
            let mean = e.iter().sum::<f64>() / n;
            let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (min - mean.ln(), (var / n).sqrt() / mean)
        }
    }
}

/// One Monte-Carlo estimate (with `lambda = 1`) next to the oracle at the same point.
#[allow(clippy::too_many_arguments)]
pub fn compare_at(
    obj: &dyn NoisyObjective,
    u: &Noise,
    theta: &[f64],
    gamma: f64,
    kind: SmootherKind,
    n_samples: usize,
    seed: u64,
    spec: &QuadratureSpec,
) -> Result<Comparison> {
    let oracle = oracle_moments(&AtNoise::new(obj, u), theta, gamma, spec)?;
    compare_with_oracle(obj, u, theta, gamma, kind, n_samples, seed, &oracle)
}

#[allow(clippy::too_many_arguments)]
pub fn compare_with_oracle(
    obj: &dyn NoisyObjective,
    u: &Noise,
    theta: &[f64],
    gamma: f64,
    kind: SmootherKind,
    n_samples: usize,
    seed: u64,
    oracle: &OracleMoments,
) -> Result<Comparison> {
    let batch = draw_batch(
        obj,
        theta,
        gamma,
        u,
        n_samples,
        &Substream::new(seed, 1, MONTE_CARLO),
    )?;
    let (mc_value, value_se) = value_with_se(kind, &batch.losses);
    let (est, oracle_value, oracle_grad, sd) = match kind {
        SmootherKind::MeanSmooth => (
            mean_smooth_from_batch(&batch, gamma),
            oracle.mean_value,
            oracle.mean_grad.clone(),
            &oracle.mean_grad_sd,
        ),
        SmootherKind::ExpSmooth => (
            exp_smooth_from_batch(&batch, theta, gamma, None)?,
            oracle.exp_value,
            oracle.exp_grad.clone(),
            &oracle.exp_grad_sd,
        ),
    };
    let sqrt_n = (n_samples as f64).sqrt();
    Ok(Comparison {
        kind,
        gamma,
        theta: theta.to_vec(),
        mc_value,
        value_se,
        oracle_value,
        mc_grad: est.gradient,
        grad_se: est.std_error,
        grad_se_exact: sd.iter().map(|s| s / sqrt_n).collect(),
        oracle_grad,
    })
}

/// Parse `lo:hi:count`.
pub fn parse_grid(spec: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Domain(format!("grid '{spec}' is not of the form lo:hi:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !lo.is_finite() || !hi.is_finite() || (count > 1 && hi < lo) {
        return Err(bad());
    }
    Ok((lo, hi, count))
}

/// Tensor grid: `count` evenly spaced values per axis, `count^dim` points.
pub fn grid_points(dim: usize, lo: f64, hi: f64, count: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = if count == 1 {
        vec![lo]
    } else {
        (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect()
    };
    let mut points = vec![Vec::new()];
    for _ in 0..dim {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    points
}
