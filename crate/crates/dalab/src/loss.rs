//! Classification and domain-discrimination losses with their exact
//! boundedness and Lipschitz constants.
//!
//! The cross-entropy uses the delta-floored form
//! `l(y1, y2) = -sum_k log(y1(k) + delta) y2(k)`, which is bounded by
//! `b_l = m |log delta|` and Lipschitz in its first argument with constant
//! `L_l = sqrt(m)/delta`. The floor makes values as small as `-log(1+delta)`
//! possible; they are reported as-is, not clipped.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Default floor; "very small" is all the definition requires.
pub const DEFAULT_DELTA: f64 = 1e-7;

/// Closed-form constants of the delta-floored cross-entropy on `[0,1]^m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConstants {
    /// `m |log delta|`
    pub bound: f64,
    /// `sqrt(m) / delta`
    pub lipschitz: f64,
    pub delta: f64,
    pub label_dim: usize,
}

pub fn loss_constants(m: usize, delta: f64) -> Result<LossConstants> {
    if m == 0 {
        return Err(Error::Config("label dimension must be >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    Ok(LossConstants {
        bound: m as f64 * delta.ln().abs(),
        lipschitz: (m as f64).sqrt() / delta,
        delta,
        label_dim: m,
    })
}

fn check_unit_box(v: &DVector<f64>, what: &'static str) -> Result<()> {
    if v.iter().any(|&x| x < 0.0) {
        return Err(Error::Config(format!("{what} has negative entries")));
    }
    Ok(())
}

/// Delta-floored cross-entropy `-sum_k log(y_pred(k) + delta) y_true(k)`.
pub fn cross_entropy(y_pred: &DVector<f64>, y_true: &DVector<f64>, delta: f64) -> Result<f64> {
    if y_pred.len() != y_true.len() {
        return Err(Error::Dimension {
            expected: y_true.len(),
            got: y_pred.len(),
            context: "cross_entropy",
        });
    }
    check_unit_box(y_pred, "y_pred")?;
    check_unit_box(y_true, "y_true")?;
    let mut acc = 0.0;
    for (p, t) in y_pred.iter().zip(y_true.iter()) {
        if *t != 0.0 {
            acc -= (p + delta).ln() * t;
        }
    }
    Ok(acc)
}

/// Gradient of [`cross_entropy`] with respect to `y_pred`:
/// `d l / d y_pred(k) = -y_true(k) / (y_pred(k) + delta)`.
pub fn cross_entropy_grad(
    y_pred: &DVector<f64>,
    y_true: &DVector<f64>,
    delta: f64,
) -> DVector<f64> {
    y_pred.zip_map(y_true, |p, t| -t / (p + delta))
}

/// Convex combination `(1-alpha) loss_s + alpha loss_t`.
pub fn weighted_loss(loss_s: f64, loss_t: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "alpha must lie in [0,1], got {alpha}"
        )));
    }
    Ok((1.0 - alpha) * loss_s + alpha * loss_t)
}

/// Which domain a sample belongs to; carries the log-penalty convention
/// `source -> -log(1 - v + delta)`, `target -> -log(v + delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainLabel {
    Source,
    Target,
}

impl DomainLabel {
    pub fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(DomainLabel::Source),
            1 => Ok(DomainLabel::Target),
            other => Err(Error::Config(format!(
                "domain label must be 0 or 1, got {other}"
            ))),
        }
    }
}

/// Logarithmic domain penalty on a discriminator output `v in [0,1]`.
pub fn domain_log_loss(v: f64, label: DomainLabel, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!(
            "discriminator output must lie in [0,1], got {v}"
        )));
    }
    Ok(match label {
        DomainLabel::Source => -(1.0 - v + delta).ln(),
        DomainLabel::Target => -(v + delta).ln(),
    })
}

/// Derivative of [`domain_log_loss`] with respect to `v`.
pub fn domain_log_loss_grad(v: f64, label: DomainLabel, delta: f64) -> f64 {
    match label {
        DomainLabel::Source => 1.0 / (1.0 - v + delta),
        DomainLabel::Target => -1.0 / (v + delta),
    }
}
