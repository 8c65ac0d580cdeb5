//! The smoothed gradient-descent recursion
//! `theta_{n+1} = theta_n - beta_n grad L_{gamma_n}(theta_n, U_{n+1})`.
//!
//! Iteration `n` (from 1) draws a fresh noise value from substream
//! `(seed, n, "noise")` and the Gaussian perturbations from `(seed, n, "mc")`.
//! Runs stop after a fixed budget; the recorded gradient norms are
//! diagnostics only.

use crate::error::{Error, Result};
use crate::objectives::NoisyObjective;
use crate::point::Point;
use crate::rng::{Substream, MONTE_CARLO, NOISE};
use crate::schedule::Schedule;
use crate::smoothers::{estimate_gradient, grad_exp_smooth, GradEstimate, SmootherKind};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub beta: Schedule,
    pub gamma: Schedule,
    pub smoother: SmootherKind,
    pub n_iterations: u64,
    pub n_samples: usize,
    /// ESS target for loss rescaling; exponential smoother only.
    pub target_ess: Option<f64>,
    pub master_seed: u64,
    /// Iteration `n` is recorded when `n % record_every == 0`, and always for the first and last.
    pub record_every: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::domain("n_iterations must be >= 1"));
        }
        if self.n_samples < 2 {
            return Err(Error::domain("n_samples must be >= 2"));
        }
        if self.record_every == 0 {
            return Err(Error::domain("record_every must be >= 1"));
        }
        if let Some(t) = self.target_ess {
            if !(t > 1.0 && t < self.n_samples as f64) {
                return Err(Error::domain(format!(
                    "target_ess must lie in (1, {}), got {t}",
                    self.n_samples
                )));
            }
        }
        Ok(())
    }

    pub fn is_recorded(&self, n: u64) -> bool {
        n == 1 || n == self.n_iterations || n.is_multiple_of(self.record_every)
    }

    /// Number of records a run with this configuration produces.
    pub fn n_records(&self) -> u64 {
        (1..=self.n_iterations)
            .filter(|&n| self.is_recorded(n))
            .count() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub n: u64,
    /// The iterate at which the gradient of iteration `n` was estimated.
    pub theta: Point,
    pub beta: f64,
    pub gamma: f64,
    pub grad_norm: f64,
    pub value: f64,
    pub ess: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub final_theta: Point,
    pub running_min_grad_norm: f64,
}

/// `theta - beta * grad`.
pub fn step(theta: &Point, beta: f64, grad: &[f64]) -> Result<Point> {
    if grad.len() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            actual: grad.len(),
        });
    }
    let next: Vec<f64> = theta.iter().zip(grad).map(|(t, g)| t - beta * g).collect();
    Point::new(next).map_err(|_| Error::NonFinite("step produced a non-finite iterate".into()))
}

/// The exponential-smoother step written through the posterior mean `m`:
/// `theta - beta (theta - m) / gamma = m + (1 - beta / gamma) (theta - m)`.
/// With `beta == gamma` the result is exactly `m`.
pub fn exp_step(theta: &Point, beta: f64, gamma: f64, posterior_mean: &[f64]) -> Result<Point> {
    if posterior_mean.len() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            actual: posterior_mean.len(),
        });
    }
    let keep = 1.0 - beta / gamma;
    let next: Vec<f64> = theta
        .iter()
        .zip(posterior_mean)
        .map(|(t, m)| m + keep * (t - m))
        .collect();
    Point::new(next).map_err(|_| Error::NonFinite("step produced a non-finite iterate".into()))
}

fn record_from(n: u64, theta: &Point, beta: f64, gamma: f64, est: &GradEstimate) -> TraceRecord {
    TraceRecord {
        n,
        theta: theta.clone(),
        beta,
        gamma,
        grad_norm: est.grad_norm(),
        value: est.value_estimate,
        ess: est.ess,
        lambda: est.rescale_lambda,
    }
}

fn finish(records: Vec<TraceRecord>, final_theta: Point) -> RunTrace {
    let running_min_grad_norm = records
        .iter()
        .map(|r| r.grad_norm)
        .fold(f64::INFINITY, f64::min);
    RunTrace {
        records,
        final_theta,
        running_min_grad_norm,
    }
}

/// Run the recursion from `theta0`. The result is a deterministic function of
/// the inputs, independent of the rayon thread count.
pub fn run(obj: &dyn NoisyObjective, theta0: &Point, config: &RunConfig) -> Result<RunTrace> {
    config.validate()?;
    if theta0.dim() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            actual: theta0.dim(),
        });
    }
    let target_ess = match config.smoother {
        SmootherKind::ExpSmooth => config.target_ess,
        SmootherKind::MeanSmooth => None,
    };
    let mut theta = theta0.clone();
    let mut records = Vec::with_capacity(config.n_records() as usize);
    for n in 1..=config.n_iterations {
        let beta = config.beta.value(n);
        let gamma = config.gamma.value(n);
        let u = obj.sample_noise(&mut Substream::new(config.master_seed, n, NOISE).rng());
        let mc = Substream::new(config.master_seed, n, MONTE_CARLO);
        let est = estimate_gradient(
            config.smoother,
            obj,
            &theta,
            gamma,
            &u,
            config.n_samples,
            target_ess,
            &mc,
        )
        .map_err(|e| e.at_iteration(n))?;
        if config.is_recorded(n) {
            records.push(record_from(n, &theta, beta, gamma, &est));
        }
        theta = match (&config.smoother, &est.posterior_mean) {
            (SmootherKind::ExpSmooth, Some(m)) => exp_step(&theta, beta, gamma, m),
            _ => step(&theta, beta, &est.gradient),
        }
        .map_err(|e| e.at_iteration(n))?;
    }
    Ok(finish(records, theta))
}

/// Moment matching: `theta_{n+1}` is the self-normalised weighted mean of the
/// perturbed points, with smoothing `gamma_n`. Every iteration is recorded,
/// with `beta_n = gamma_n`.
pub fn moment_match_run(
    obj: &dyn NoisyObjective,
    theta0: &Point,
    gamma: &Schedule,
    n_iterations: u64,
    n_samples: usize,
    master_seed: u64,
) -> Result<RunTrace> {
    if n_iterations == 0 {
        return Err(Error::domain("n_iterations must be >= 1"));
    }
    let mut theta = theta0.clone();
    let mut records = Vec::with_capacity(n_iterations as usize);
    for n in 1..=n_iterations {
        let g = gamma.value(n);
        let u = obj.sample_noise(&mut Substream::new(master_seed, n, NOISE).rng());
        let est = grad_exp_smooth(
            obj,
            &theta,
            g,
            &u,
            n_samples,
            None,
            &Substream::new(master_seed, n, MONTE_CARLO),
        )
        .map_err(|e| e.at_iteration(n))?;
        records.push(record_from(n, &theta, g, g, &est));
        let mean = est
            .posterior_mean
            .expect("exponential smoother exposes its weighted mean");
        theta = Point::new(mean).map_err(|e| e.at_iteration(n))?;
    }
    Ok(finish(records, theta))
}
