//! Convergence conditions for power-law schedules.
//!
//! With `beta_n = c_beta n^-iota` and `gamma_n = c_gamma n^-kappa`, the
//! recursion drives `||grad L_{gamma_n}(theta_n)||` to zero (along a
//! subsequence, or fully) when the exponents satisfy inequalities that depend
//! on the Hölder exponent `alpha` of the loss and, in the stochastic case, on
//! the moment order `eta` of the noise.
//!
//! Stochastic case:
//! - `kappa (2 - 3 alpha / 2) < iota` gives `liminf = 0`;
//! - additionally `min(1 - kappa / 2, iota - kappa (3/2 - alpha)) > 1 / eta`
//!   gives `lim = 0`.
//!
//! Deterministic case:
//! - `kappa (1 - alpha / 2) < iota`, or equality together with
//!   `c_beta c_gamma^(alpha/2 - 1) < c_star`, gives `liminf = 0`;
//! - additionally `kappa (3/2 - alpha) < iota` gives `lim = 0`.
//!
//! `c_star = 2` is known for the exponential smoother only.

use std::fmt;

use crate::error::{Error, Result};
use crate::smoothers::SmootherKind;

/// Relative tolerance used to decide that a deterministic boundary equality holds.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// The constant `c_star` for the exponential smoother in the deterministic boundary case.
pub const EXP_SMOOTH_C_STAR: f64 = 2.0;

/// Declared regularity of a loss: `|l(t,u) - l(t',u)| <= J(u) (|t-t'|^alpha + |t-t'|^beta)`
/// with `E[J(U)^eta] < infinity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityProfile {
    pub alpha: f64,
    pub beta_upper: f64,
    /// Noise moment order; `f64::INFINITY` when every moment is finite.
    pub eta: f64,
    pub deterministic: bool,
}

impl RegularityProfile {
    pub fn new(alpha: f64, beta_upper: f64, eta: f64, deterministic: bool) -> Result<Self> {
        let p = RegularityProfile {
            alpha,
            beta_upper,
            eta,
            deterministic,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::domain(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.beta_upper >= self.alpha) || !self.beta_upper.is_finite() {
            return Err(Error::domain(format!(
                "beta must be finite and >= alpha, got {}",
                self.beta_upper
            )));
        }
        if !(self.eta >= 2.0) {
            return Err(Error::domain(format!(
                "eta must be >= 2 or infinite, got {}",
                self.eta
            )));
        }
        Ok(())
    }

    pub(crate) fn eta_threshold(&self) -> f64 {
        if self.eta.is_infinite() {
            0.0
        } else {
            1.0 / self.eta
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Stochastic,
    Deterministic,
}

/// Ordered from weakest to strongest guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConvergenceLevel {
    NoGuarantee,
    BoundaryCaseNeedsConstant,
    SubsequenceOnly,
    FullConvergence,
}

impl fmt::Display for ConvergenceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConvergenceLevel::NoGuarantee => "NoGuarantee",
            ConvergenceLevel::BoundaryCaseNeedsConstant => "BoundaryCaseNeedsConstant",
            ConvergenceLevel::SubsequenceOnly => "SubsequenceOnly",
            ConvergenceLevel::FullConvergence => "FullConvergence",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Less,
    Greater,
    Equal,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Less => "<",
            Relation::Greater => ">",
            Relation::Equal => "=",
        })
    }
}

/// One evaluated inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityCheck {
    pub label: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub passed: bool,
    pub note: Option<String>,
}

impl InequalityCheck {
    fn new(label: &str, lhs: f64, relation: Relation, rhs: f64) -> Self {
        let passed = match relation {
            Relation::Less => lhs < rhs && !nearly_equal(lhs, rhs),
            Relation::Greater => lhs > rhs && !nearly_equal(lhs, rhs),
            Relation::Equal => nearly_equal(lhs, rhs),
        };
        InequalityCheck {
            label: label.to_string(),
            lhs,
            relation,
            rhs,
            passed,
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

impl fmt::Display for InequalityCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {:.6} {} {:.6}",
            if self.passed { "pass" } else { "FAIL" },
            self.label,
            self.lhs,
            self.relation,
            self.rhs
        )?;
        if let Some(note) = &self.note {
            write!(f, " ({note})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceVerdict {
    pub level: ConvergenceLevel,
    pub reasons: Vec<InequalityCheck>,
    pub c_star_used: Option<f64>,
}

impl fmt::Display for ConvergenceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict: {}", self.level)?;
        if let Some(c) = self.c_star_used {
            writeln!(f, "c_star: {c}")?;
        }
        for r in &self.reasons {
            writeln!(f, "  {r}")?;
        }
        Ok(())
    }
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Inputs to [`validate_schedules`].
#[derive(Debug, Clone, Copy)]
pub struct ScheduleCheck {
    pub iota: f64,
    pub kappa: f64,
    pub c_beta: f64,
    pub c_gamma: f64,
    pub profile: RegularityProfile,
    pub mode: Mode,
    pub smoother: SmootherKind,
}

/// Classify a pair of power-law schedules against the convergence conditions.
///
/// Boundary equalities count as failures of strict inequalities; the
/// deterministic equality `kappa (1 - alpha/2) = iota` is handled separately
/// through the constant check.
pub fn validate_schedules(check: &ScheduleCheck) -> Result<ConvergenceVerdict> {
    let ScheduleCheck {
        iota,
        kappa,
        c_beta,
        c_gamma,
        profile,
        mode,
        smoother,
    } = *check;
    for (name, v) in [("iota", iota), ("kappa", kappa)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::domain(format!("{name} must lie in (0, 1], got {v}")));
        }
    }
    profile.validate()?;
    let alpha = profile.alpha;

    match mode {
        Mode::Stochastic => {
            let first = InequalityCheck::new(
                "kappa(2 - 3 alpha/2) < iota",
                kappa * (2.0 - 1.5 * alpha),
                Relation::Less,
                iota,
            );
            let second = InequalityCheck::new(
                "min{1 - kappa/2, iota - kappa(3/2 - alpha)} > 1/eta",
                (1.0 - kappa / 2.0).min(iota - kappa * (1.5 - alpha)),
                Relation::Greater,
                profile.eta_threshold(),
            );
            let level = match (first.passed, second.passed) {
                (true, true) => ConvergenceLevel::FullConvergence,
                (true, false) => ConvergenceLevel::SubsequenceOnly,
                _ => ConvergenceLevel::NoGuarantee,
            };
            Ok(ConvergenceVerdict {
                level,
                reasons: vec![first, second],
                c_star_used: None,
            })
        }
        Mode::Deterministic => {
            let lhs = kappa * (1.0 - alpha / 2.0);
            let strict =
                InequalityCheck::new("kappa(1 - alpha/2) < iota", lhs, Relation::Less, iota);
            let full = InequalityCheck::new(
                "kappa(3/2 - alpha) < iota",
                kappa * (1.5 - alpha),
                Relation::Less,
                iota,
            );
            let mut reasons = vec![strict.clone()];
            let mut c_star_used = None;

            let liminf_level = if strict.passed {
                ConvergenceLevel::SubsequenceOnly
            } else {
                let boundary =
                    InequalityCheck::new("kappa(1 - alpha/2) = iota", lhs, Relation::Equal, iota);
                let on_boundary = boundary.passed;
                reasons.push(boundary);
                if !on_boundary {
                    ConvergenceLevel::NoGuarantee
                } else {
                    let product = c_beta * c_gamma.powf(alpha / 2.0 - 1.0);
                    match smoother {
                        SmootherKind::ExpSmooth => {
                            c_star_used = Some(EXP_SMOOTH_C_STAR);
                            let c = InequalityCheck::new(
                                "c_beta c_gamma^(alpha/2 - 1) < c_star",
                                product,
                                Relation::Less,
                                EXP_SMOOTH_C_STAR,
                            );
                            let ok = c.passed;
                            reasons.push(c);
                            if ok {
                                ConvergenceLevel::SubsequenceOnly
                            } else {
                                ConvergenceLevel::NoGuarantee
                            }
                        }
                        SmootherKind::MeanSmooth => {
                            let c = InequalityCheck {
                                label: "c_beta c_gamma^(alpha/2 - 1) < c_star".to_string(),
                                lhs: product,
                                relation: Relation::Less,
                                rhs: f64::NAN,
                                passed: false,
                                note: None,
                            }
                            .with_note(
                                "constant unverifiable: c_star unknown for the mean smoother",
                            );
                            reasons.push(c);
                            ConvergenceLevel::BoundaryCaseNeedsConstant
                        }
                    }
                }
            };

            reasons.push(full.clone());
            let level = if liminf_level == ConvergenceLevel::SubsequenceOnly && full.passed {
                ConvergenceLevel::FullConvergence
            } else {
                liminf_level
            };
            Ok(ConvergenceVerdict {
                level,
                reasons,
                c_star_used,
            })
        }
    }
}
