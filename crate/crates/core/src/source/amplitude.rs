//! Closed-form interference amplitudes of the heralding paths.
//!
//! An n-pair state sends n photons through the beam splitter and
//! half-wave plate; a herald outcome is a photon count tuple
//! (n₊, n₋, n_H, n_V) on the four detectors together with the signal
//! state |m⟩|n−m⟩. The amplitude collects every way the (n−m) heralded
//! H photons and m V photons can split across the detectors, with a
//! (−1) sign for each V photon that reaches D₋. Terms partially cancel,
//! so each term is evaluated as sign times exp(log magnitude) and summed
//! in double precision.

use super::{HeraldCounts, SourceError};
use crate::mathkit::log_factorial;

const LN_SQRT2: f64 = std::f64::consts::LN_2 / 2.0;

/// Amplitude A(n, m, counts) of the herald outcome `counts` paired with
/// the signal state |m⟩|n−m⟩, normalized so that Σ A² over all (m, counts)
/// of one n-pair sector is exactly 1. The joint emission probability is
/// P(n) · A².
pub fn heralding_amplitude(n: u32, m: u32, counts: &HeraldCounts) -> Result<f64, SourceError> {
    if m > n || counts.total() != n || counts.n_h > n - m || counts.n_v > m {
        return Err(SourceError::InconsistentCounts {
            n,
            m,
            counts: *counts,
        });
    }
    Ok(amplitude_unchecked(n, m, counts))
}

/// Amplitude without the consistency checks; callers must uphold
/// counts.total() == n, counts.n_h <= n − m and counts.n_v <= m.
pub(crate) fn amplitude_unchecked(n: u32, m: u32, counts: &HeraldCounts) -> f64 {
    let (n_plus, n_minus) = (counts.n_plus as i64, counts.n_minus as i64);
    let (i3, j3) = (counts.n_h as i64, counts.n_v as i64);
    let n = n as i64;
    let m = m as i64;

    // The first factor of the herald polynomial contributes i1 + i2 + i3
    // = n − m photons, the second j1 + j2 + j3 = m, with i1 + j1 = n₊ and
    // i2 + j2 = n₋. One free summation index remains.
    let h_rest = n - m - i3; // i1 + i2
    let v_rest = m - j3; // j1 + j2
    let lo = 0.max(h_rest - n_minus).max(n_plus - v_rest);
    let hi = n_plus.min(h_rest);

    let herald_log = 0.5 * (log_factorial(n_plus as u64) + log_factorial(n_minus as u64))
        + 0.5 * (log_factorial(i3 as u64) + log_factorial(j3 as u64))
        - (2 * n - i3 - j3) as f64 * LN_SQRT2;

    let mut sum = 0.0;
    for i1 in lo..=hi {
        let j1 = n_plus - i1;
        let i2 = h_rest - i1;
        let j2 = n_minus - i2;
        debug_assert!(j1 >= 0 && i2 >= 0 && j2 >= 0);
        let log_mag = herald_log
            - log_factorial(i1 as u64)
            - log_factorial(i2 as u64)
            - log_factorial(i3 as u64)
            - log_factorial(j1 as u64)
            - log_factorial(j2 as u64)
            - log_factorial(j3 as u64);
        let sign = if j2 % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * log_mag.exp();
    }

    let prefactor_log = 0.5 * (log_factorial(m as u64) + log_factorial((n - m) as u64))
        - 0.5 * ((n + 1) as f64).ln();
    prefactor_log.exp() * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_amplitudes() {
        // Herald H in the Z arm pairs with a V signal photon; the joint
        // probability is 1/2 (Bell weight) x 1/2 (beam splitter arm).
        let a = heralding_amplitude(1, 0, &HeraldCounts::new(0, 0, 1, 0)).unwrap();
        assert!((a * a - 0.25).abs() < 1e-15);
        // The X-arm outcomes carry 1/8 each.
        let a = heralding_amplitude(1, 0, &HeraldCounts::new(1, 0, 0, 0)).unwrap();
        assert!((a * a - 0.125).abs() < 1e-15);
        let a = heralding_amplitude(1, 1, &HeraldCounts::new(0, 1, 0, 0)).unwrap();
        assert!((a * a - 0.125).abs() < 1e-15);
        assert!(a < 0.0, "V photon reaching D- carries a minus sign");
    }

    #[test]
    fn incompatible_herald_is_rejected() {
        // Herald H pairs with signal V, so m = 1 with n_h = 1 cannot occur.
        let err = heralding_amplitude(1, 1, &HeraldCounts::new(0, 0, 1, 0)).unwrap_err();
        assert!(matches!(err, SourceError::InconsistentCounts { .. }));
        // Total herald photons must equal n.
        assert!(heralding_amplitude(2, 0, &HeraldCounts::new(1, 0, 0, 0)).is_err());
    }

    #[test]
    fn two_pair_plus_only_outcome() {
        // n = 2, m = 1, both herald photons on D+: a single interference
        // term, A^2 = 1/24 by direct expansion of the two trinomials.
        let a = heralding_amplitude(2, 1, &HeraldCounts::new(2, 0, 0, 0)).unwrap();
        assert!((a * a - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn hom_cancellation_in_herald_arm() {
        // n = 2, m = 1 with one click on D+ and one on D-: the two paths
        // (H->D+, V->D-) and (H->D-, V->D+) interfere destructively.
        let a = heralding_amplitude(2, 1, &HeraldCounts::new(1, 1, 0, 0)).unwrap();
        assert!(a.abs() < 1e-15);
    }

    #[test]
    fn per_n_unitarity() {
        for n in 0..=10u32 {
            let mut total = 0.0;
            for m in 0..=n {
                for n_h in 0..=(n - m) {
                    for n_v in 0..=m {
                        for n_plus in 0..=(n - n_h - n_v) {
                            let counts = HeraldCounts::new(
                                n_plus,
                                n - n_h - n_v - n_plus,
                                n_h,
                                n_v,
                            );
                            let a = amplitude_unchecked(n, m, &counts);
                            total += a * a;
                        }
                    }
                }
            }
            assert!(
                (total - 1.0).abs() < 1e-10,
                "n = {n}: sum of A^2 = {total}"
            );
        }
    }
}
