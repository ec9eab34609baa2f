//! Link bias `d = |1/2 - p|` and its density when `p` follows a Beta posterior.

use rand::Rng;
use rand_distr::{Beta, Distribution, Open01};
use thiserror::Error;

use crate::net::AnswerTally;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DomainError {
    #[error("link bias {0} is outside [0, 1/2]")]
    LinkBiasOutOfRange(f64),
    #[error("Beta parameters must be >= 1, got alpha={0}, beta={1}")]
    BadShape(f64, f64),
}

/// Distance of a 'yes' proportion from maximal uncertainty, in `[0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct LinkBias<T>(T);

impl<T: Scalar> LinkBias<T> {
    pub fn from_proportion(p_yes: T) -> Self {
        LinkBias((T::of(0.5) - p_yes).abs())
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// Deterministic link bias of a tally, using the Laplace-smoothed proportion.
pub fn link_bias<T: Scalar>(tally: &AnswerTally) -> LinkBias<T> {
    LinkBias::from_proportion(tally.smoothed_yes())
}

fn check_shape<T: Scalar>(alpha: T, beta: T) -> Result<(), DomainError> {
    if alpha >= T::one() && beta >= T::one() {
        Ok(())
    } else {
        Err(DomainError::BadShape(alpha.to_f64_lossy(), beta.to_f64_lossy()))
    }
}

// exponent * ln(base), with 0^0 = 1.
fn log_pow(base: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        0.0
    } else {
        exponent * base.ln()
    }
}

/// Density of `d = |1/2 - p|` for `p ~ Beta(alpha, beta)`:
///
/// ```text
/// phi(d | a, b) = [(1-2d)^(a-1) (1+2d)^(b-1) + (1+2d)^(a-1) (1-2d)^(b-1)] / [B(a, b) 2^(a+b-2)]
/// ```
///
/// Evaluated in log space so large shapes do not overflow.
pub fn phi_density<T: Scalar>(d: T, alpha: T, beta: T) -> Result<T, DomainError> {
    let (d, a, b) = (d.to_f64_lossy(), alpha.to_f64_lossy(), beta.to_f64_lossy());
    if !(0.0..=0.5).contains(&d) {
        return Err(DomainError::LinkBiasOutOfRange(d));
    }
    check_shape(alpha, beta)?;
    let norm = statrs::function::beta::ln_beta(a, b) + (a + b - 2.0) * std::f64::consts::LN_2;
    let (lo, hi) = (1.0 - 2.0 * d, 1.0 + 2.0 * d);
    let first = (log_pow(lo, a - 1.0) + log_pow(hi, b - 1.0) - norm).exp();
    let second = (log_pow(hi, a - 1.0) + log_pow(lo, b - 1.0) - norm).exp();
    Ok(T::of(first + second))
}

/// Draws a link bias from its posterior: `p ~ Beta(alpha, beta)`, then `|1/2 - p|`.
pub fn sample_link_bias<T, R>(alpha: T, beta: T, rng: &mut R) -> Result<LinkBias<T>, DomainError>
where
    T: Scalar,
    Open01: Distribution<T>,
    R: Rng + ?Sized,
{
    check_shape(alpha, beta)?;
    let dist = Beta::new(alpha, beta).map_err(|_| DomainError::BadShape(alpha.to_f64_lossy(), beta.to_f64_lossy()))?;
    Ok(LinkBias::from_proportion(dist.sample(rng)))
}
