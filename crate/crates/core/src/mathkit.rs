//! Numerically robust scalar utilities shared by every other module:
//! log-factorials, log-binomials, binary entropy, and the global
//! tolerance policy.
//!
//! Factorial products are kept in log space throughout the crate so that
//! truncation orders well past n = 20 never overflow; `n!` leaves the
//! range of `f64` near n = 171.

use thiserror::Error;

/// Errors from the scalar utility layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MathError {
    /// An argument fell outside the function's domain.
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    /// Binomial order violation: k must not exceed n.
    #[error("binomial order k = {k} exceeds n = {n}")]
    BinomialOrder { n: u64, k: u64 },
    /// A tolerance field was nonpositive or implausibly large.
    #[error("tolerance {what} = {value} must lie in (0, 1e-3)")]
    BadTolerance { what: &'static str, value: f64 },
}

/// Comparison and truncation tolerances used across the crate.
///
/// `abs_eps` and `rel_eps` govern floating-point comparisons; `tail_eps`
/// caps the probability mass a truncated photon-number expansion may drop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_eps: f64,
    pub rel_eps: f64,
    pub tail_eps: f64,
}

impl Tolerance {
    /// Build a tolerance set, rejecting values outside (0, 1e-3).
    pub fn new(abs_eps: f64, rel_eps: f64, tail_eps: f64) -> Result<Self, MathError> {
        let check = |what, value: f64| {
            if value > 0.0 && value < 1e-3 {
                Ok(())
            } else {
                Err(MathError::BadTolerance { what, value })
            }
        };
        check("abs_eps", abs_eps)?;
        check("rel_eps", rel_eps)?;
        check("tail_eps", tail_eps)?;
        Ok(Self {
            abs_eps,
            rel_eps,
            tail_eps,
        })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_eps: 1e-12,
            rel_eps: 1e-9,
            tail_eps: 1e-10,
        }
    }
}

/// ln(n!), exact (up to rounding) for n <= 20 via integer factorials,
/// Stirling's series beyond. Relative error is below 1e-12 everywhere.
pub fn log_factorial(n: u64) -> f64 {
    if n <= 20 {
        let mut f: u64 = 1;
        for i in 2..=n {
            f *= i;
        }
        (f as f64).ln()
    } else {
        let x = n as f64;
        let x2 = x * x;
        0.5 * (2.0 * std::f64::consts::PI * x).ln() + x * (x.ln() - 1.0)
            + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x * x2)
            + 1.0 / (1260.0 * x * x2 * x2)
    }
}

/// ln C(n, k) via log-factorial differences.
pub fn log_binomial(n: u64, k: u64) -> Result<f64, MathError> {
    if k > n {
        return Err(MathError::BinomialOrder { n, k });
    }
    Ok(log_factorial(n) - log_factorial(k) - log_factorial(n - k))
}

/// Exact binomial coefficient for the small orders used in basis
/// transformations. Panics on overflow, which cannot occur for n <= 60.
pub fn binomial_exact(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Binary entropy h(p) = -p log2 p - (1-p) log2 (1-p), in bits.
///
/// h(0) = h(1) = 0 by continuity. Inputs outside [0, 1] are a domain
/// error rather than being clamped, so callers surface bad probabilities.
pub fn binary_entropy(p: f64) -> Result<f64, MathError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(MathError::OutOfRange {
            what: "binary_entropy argument",
            value: p,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}
