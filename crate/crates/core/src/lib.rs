//! Gradient-free optimization of noisy and discontinuous objectives through
//! Gaussian smoothing.
//!
//! The optimizer follows `theta_{n+1} = theta_n - beta_n grad L_{gamma_n}(theta_n, U_{n+1})`,
//! where `L_gamma` is either the Gaussian convolution of the loss
//! ([`SmootherKind::MeanSmooth`]) or its entropic counterpart
//! `-log E[exp(-loss)]` ([`SmootherKind::ExpSmooth`]). Gradients are estimated
//! by Monte Carlo; [`oracle`] provides quadrature references in low
//! dimension, [`convergence`] checks power-law schedules, and [`auc`] holds the
//! AUC-ranking application.

// negated float comparisons are how NaN gets rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auc;
pub mod convergence;
pub mod error;
pub mod objectives;
pub mod optimizer;
pub mod oracle;
pub mod point;
pub mod rng;
pub mod schedule;
pub mod smoothers;

pub use convergence::{
    validate_schedules, ConvergenceLevel, ConvergenceVerdict, InequalityCheck, Mode,
    RegularityProfile, ScheduleCheck,
};
pub use error::{Error, Result};
pub use objectives::{
    builtin_corpus, objective_by_descriptor, with_gaussian_noise, Noise, NoisyObjective,
};
pub use optimizer::{moment_match_run, run, step, RunConfig, RunTrace, TraceRecord};
pub use point::Point;
pub use rng::Substream;
pub use schedule::{schedule_value, Schedule};
pub use smoothers::{
    ess, grad_exp_smooth, grad_mean_smooth, rescale_to_target_ess, GradEstimate, SmootherKind,
};
