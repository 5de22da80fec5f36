//! Fiber transmission and Bob's threshold-detector measurement.
//!
//! A signal state |m⟩|k⟩ crosses a fiber with transmittance
//! η_c = 10^(−αL/10) and meets two threshold detectors behind a
//! polarizing beam splitter. A pulse is kept only when exactly one
//! detector fires; double clicks are discarded. Misalignment flips a
//! photon's registered polarization with probability e_d, which enters
//! the error weighting but not the yield.

use crate::source::{HeraldClass, SignalDistribution};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid channel parameter: {0}")]
    InvalidParams(String),
}

/// Fiber and receiver parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Fiber attenuation coefficient in dB/km.
    pub alpha: f64,
    /// Transmission distance in km.
    pub distance: f64,
    /// Bob's detector efficiency.
    pub eta_d: f64,
    /// Bob's per-pulse dark count probability.
    pub dark: f64,
    /// Basis misalignment error probability.
    pub e_d: f64,
}

impl ChannelParams {
    pub fn new(
        alpha: f64,
        distance: f64,
        eta_d: f64,
        dark: f64,
        e_d: f64,
    ) -> Result<Self, ChannelError> {
        if !(alpha >= 0.0) {
            return Err(ChannelError::InvalidParams(format!(
                "attenuation alpha = {alpha} must be nonnegative"
            )));
        }
        if !(distance >= 0.0) {
            return Err(ChannelError::InvalidParams(format!(
                "distance = {distance} must be nonnegative"
            )));
        }
        if !(0.0..=1.0).contains(&eta_d) {
            return Err(ChannelError::InvalidParams(format!(
                "detector efficiency eta_d = {eta_d} must lie in [0, 1]"
            )));
        }
        if !(0.0..1.0).contains(&dark) {
            return Err(ChannelError::InvalidParams(format!(
                "dark count probability {dark} must lie in [0, 1)"
            )));
        }
        if !(0.0..=0.5).contains(&e_d) {
            return Err(ChannelError::InvalidParams(format!(
                "misalignment error e_d = {e_d} must lie in [0, 0.5]"
            )));
        }
        Ok(Self {
            alpha,
            distance,
            eta_d,
            dark,
            e_d,
        })
    }

    /// Same channel at a different distance.
    pub fn with_distance(&self, distance: f64) -> Self {
        Self { distance, ..*self }
    }

    /// End-to-end photon transmission probability, η_c · η_D.
    pub fn transmission(&self) -> f64 {
        transmittance(self.alpha, self.distance) * self.eta_d
    }
}

/// Channel transmittance 10^(−α L / 10).
pub fn transmittance(alpha: f64, distance: f64) -> f64 {
    10f64.powf(-alpha * distance / 10.0)
}

fn bob_click(n: usize, transmission: f64, dark: f64) -> f64 {
    1.0 - (1.0 - dark) * (1.0 - transmission).powi(n as i32)
}

/// Yield Y_{m,k}: probability of an exclusive single click at Bob given
/// the state |m⟩|k⟩ entered the channel.
pub fn yield_prob(m: usize, k: usize, ch: &ChannelParams) -> f64 {
    let t = ch.transmission();
    let d1 = bob_click(m, t, ch.dark);
    let d2 = bob_click(k, t, ch.dark);
    d1 * (1.0 - d2) + d2 * (1.0 - d1)
}

/// Error contribution of |m⟩|k⟩ under the convention that the first mode
/// carries the nominally correct polarization: clicks on the second-mode
/// detector count as errors with weight 1 − e_d, clicks on the first-mode
/// detector with weight e_d.
///
/// Returns (e·Y, e); e = 0 when the yield vanishes.
pub fn error_rate(m: usize, k: usize, ch: &ChannelParams) -> (f64, f64) {
    let t = ch.transmission();
    let d1 = bob_click(m, t, ch.dark);
    let d2 = bob_click(k, t, ch.dark);
    let y = d1 * (1.0 - d2) + d2 * (1.0 - d1);
    let ey = ch.e_d * d1 * (1.0 - d2) + (1.0 - ch.e_d) * d2 * (1.0 - d1);
    if y > 0.0 {
        (ey, ey / y)
    } else {
        (0.0, 0.0)
    }
}

/// Which Fock slot of a distribution carries the nominally correct
/// polarization: `First` for signal H or +, `Second` for signal V or −.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nominal {
    First,
    Second,
}

impl Nominal {
    /// Nominal orientation of a single-click herald class: D_V heralds a
    /// signal H photon and D₊ a signal + photon (first slot); D_H and D₋
    /// herald the second slot.
    pub fn for_class(class: HeraldClass) -> Option<Nominal> {
        match class {
            HeraldClass::V | HeraldClass::PLUS => Some(Nominal::First),
            HeraldClass::H | HeraldClass::MINUS => Some(Nominal::Second),
            _ => None,
        }
    }
}

/// Observed per-class statistics: gain Q_x and error rate E_x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    /// Joint per-pulse probability of this herald class and a valid
    /// detection at Bob.
    pub gain: f64,
    /// Bit error rate among this class's detections.
    pub qber: f64,
}

impl ClassStats {
    /// The product Q_x E_x consumed by the error linear program.
    pub fn error_gain(&self) -> f64 {
        self.gain * self.qber
    }
}

/// Fold a signal distribution through the detector model:
/// Q = Σ P(m,k) Y_{m,k} and Q·E = Σ P(m,k) e_{m,k} Y_{m,k}, with the
/// error convention set by `nominal`.
pub fn class_stats(dist: &SignalDistribution, ch: &ChannelParams, nominal: Nominal) -> ClassStats {
    let mut gain = 0.0;
    let mut error_gain = 0.0;
    for (m, k) in dist.grid().iter() {
        let p = dist.prob(m, k);
        if p == 0.0 {
            continue;
        }
        let (ey, _) = match nominal {
            Nominal::First => error_rate(m, k, ch),
            Nominal::Second => error_rate(k, m, ch),
        };
        gain += p * yield_prob(m, k, ch);
        error_gain += p * ey;
    }
    let qber = if gain > 0.0 { error_gain / gain } else { 0.0 };
    ClassStats { gain, qber }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{FockGrid, HeraldClass, SignalDistribution};

    fn ch(distance: f64, dark: f64, e_d: f64) -> ChannelParams {
        ChannelParams::new(0.2, distance, 0.65, dark, e_d).unwrap()
    }

    #[test]
    fn transmittance_decades() {
        assert_eq!(transmittance(0.2, 0.0), 1.0);
        assert!((transmittance(0.2, 50.0) - 0.1).abs() < 1e-15);
        assert!((transmittance(0.2, 100.0) - 0.01).abs() < 1e-16);
    }

    #[test]
    fn vacuum_yield_is_dark_count_driven() {
        assert_eq!(yield_prob(0, 0, &ch(50.0, 0.0, 0.015)), 0.0);
        let dark = 1e-6;
        let expected = 2.0 * dark * (1.0 - dark);
        let got = yield_prob(0, 0, &ch(50.0, dark, 0.015));
        assert!((got - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn single_photon_yield_is_transmission() {
        let c = ch(50.0, 0.0, 0.015);
        assert!((yield_prob(1, 0, &c) - c.transmission()).abs() < 1e-15);
        assert!((yield_prob(0, 1, &c) - c.transmission()).abs() < 1e-15);
    }

    #[test]
    fn error_rate_examples() {
        let c = ch(50.0, 0.0, 0.015);
        let (_, e) = error_rate(1, 0, &c);
        assert!((e - 0.015).abs() < 1e-15);
        let (_, e) = error_rate(0, 1, &c);
        assert!((e - 0.985).abs() < 1e-15);
        // Vacuum with dark counts errs half the time.
        let c = ch(50.0, 1e-6, 0.015);
        let (_, e) = error_rate(0, 0, &c);
        assert!((e - 0.5).abs() < 1e-12);
    }

    #[test]
    fn swap_symmetry_between_orientations() {
        let c = ch(30.0, 1e-6, 0.015);
        for m in 0..=4usize {
            for k in 0..=4usize {
                let (ey_h, e_h) = error_rate(m, k, &c);
                let (ey_v, e_v) = error_rate(k, m, &c);
                let y = yield_prob(m, k, &c);
                // Complementary conventions split the same yield.
                assert!((ey_h + ey_v - y).abs() < 1e-15);
                if y > 0.0 {
                    assert!((e_h + e_v - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn error_gain_never_exceeds_yield() {
        for &distance in &[0.0, 50.0, 150.0, 300.0] {
            let c = ch(distance, 1e-6, 0.015);
            for m in 0..=10usize {
                for k in 0..=(10 - m) {
                    let y = yield_prob(m, k, &c);
                    let (ey, _) = error_rate(m, k, &c);
                    assert!(0.0 <= ey && ey <= y && y <= 1.0, "({m},{k}) at {distance}");
                }
            }
        }
    }

    #[test]
    fn yield_grows_with_transmission_before_saturation() {
        for (m, k) in [(1usize, 0usize), (2, 1), (0, 3)] {
            let mut last = -1.0;
            for i in 0..=30 {
                let t = 0.3 * i as f64 / 30.0;
                // Raw detector model at dark = 0, parameterized by t.
                let d1 = 1.0 - (1.0 - t).powi(m as i32);
                let d2 = 1.0 - (1.0 - t).powi(k as i32);
                let y = d1 * (1.0 - d2) + d2 * (1.0 - d1);
                assert!(y >= last - 1e-15, "({m},{k}): t = {t}");
                last = y;
            }
        }
    }

    #[test]
    fn pure_single_photon_class_stats() {
        let c = ch(50.0, 0.0, 0.015);
        let grid = FockGrid::new(2);
        let mut entries = vec![0.0; grid.len()];
        entries[grid.index(1, 0)] = 0.3;
        let dist = SignalDistribution::from_parts(HeraldClass::V, 2, entries, 0.0);
        let stats = class_stats(&dist, &c, Nominal::First);
        assert!((stats.gain - 0.3 * c.transmission()).abs() < 1e-15);
        assert!((stats.qber - 0.015).abs() < 1e-12);
    }

    #[test]
    fn empty_distribution_has_zero_stats() {
        let c = ch(50.0, 1e-6, 0.015);
        let dist = SignalDistribution::from_parts(
            HeraldClass::NONE,
            2,
            vec![0.0; FockGrid::new(2).len()],
            0.0,
        );
        let stats = class_stats(&dist, &c, Nominal::First);
        assert_eq!(stats.gain, 0.0);
        assert_eq!(stats.qber, 0.0);
    }

    #[test]
    fn long_distance_limit_is_dark_floor() {
        let dark = 1e-6;
        let c = ch(5000.0, dark, 0.015);
        let grid = FockGrid::new(2);
        let mut entries = vec![0.0; grid.len()];
        entries[grid.index(1, 0)] = 0.2;
        entries[grid.index(0, 1)] = 0.2;
        let dist = SignalDistribution::from_parts(HeraldClass::V, 2, entries, 0.0);
        let stats = class_stats(&dist, &c, Nominal::First);
        let floor = 0.4 * 2.0 * dark * (1.0 - dark);
        assert!((stats.gain - floor).abs() < 1e-9 * floor);
        assert!((stats.qber - 0.5).abs() < 1e-6);
    }

    #[test]
    fn params_validation() {
        assert!(ChannelParams::new(-0.1, 50.0, 0.65, 1e-6, 0.015).is_err());
        assert!(ChannelParams::new(0.2, -1.0, 0.65, 1e-6, 0.015).is_err());
        assert!(ChannelParams::new(0.2, 50.0, 1.5, 1e-6, 0.015).is_err());
        assert!(ChannelParams::new(0.2, 50.0, 0.65, 1e-6, 0.6).is_err());
        assert!(ChannelParams::new(0.2, 50.0, 0.65, 1e-6, 0.015).is_ok());
    }
}
