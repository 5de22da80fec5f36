//! Poissonian passive-decoy reference source.
//!
//! A PDC pair source with a single herald detector and no encoding optics
//! splits its emission into click-conditioned and no-click-conditioned
//! photon-number distributions. This is the classic passive decoy-state
//! construction and serves as a baseline for the fully passive source.

use super::{FockGrid, HeraldClass, SignalDistribution, SourceError};
use crate::mathkit::{log_factorial, Tolerance};

/// Click-conditioned and no-click-conditioned single-mode distributions
/// for the Poissonian heralded source, truncated at `n_cut`.
///
/// The emission weight of the n-photon sector is λ²ⁿ e^(−2λ) / n!, the
/// herald clicks with probability 1 − (1−Pd)(1−η)ⁿ, and the two returned
/// tables carry the click and no-click shares of each sector. Photon
/// number occupies the first Fock slot; the second stays at zero. The
/// click table is labeled with the single-detector class
/// [`HeraldClass::H`], the no-click table with [`HeraldClass::NONE`].
pub fn poisson_heralded_dists(
    lambda: f64,
    eta_h: f64,
    dark: f64,
    n_cut: usize,
) -> Result<(SignalDistribution, SignalDistribution), SourceError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(SourceError::InvalidParams(format!(
            "pair parameter lambda = {lambda} must lie in [0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&eta_h) {
        return Err(SourceError::InvalidParams(format!(
            "herald efficiency eta_h = {eta_h} must lie in [0, 1]"
        )));
    }
    if !(0.0..1.0).contains(&dark) {
        return Err(SourceError::InvalidParams(format!(
            "dark count probability {dark} must lie in [0, 1)"
        )));
    }
    if n_cut < 2 {
        return Err(SourceError::InvalidParams(format!(
            "truncation order n_cut = {n_cut} must be at least 2"
        )));
    }

    let weight = |n: usize| -> f64 {
        if lambda == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        (2.0 * n as f64 * lambda.ln() - 2.0 * lambda - log_factorial(n as u64)).exp()
    };

    let tail: f64 = (n_cut + 1..n_cut + 200).map(weight).sum();
    let tail_eps = Tolerance::default().tail_eps;
    if tail > tail_eps {
        return Err(SourceError::Truncation {
            tail,
            limit: tail_eps,
        });
    }

    let grid = FockGrid::new(n_cut);
    let mut click = vec![0.0; grid.len()];
    let mut no_click = vec![0.0; grid.len()];
    for n in 0..=n_cut {
        let p_n = weight(n);
        let p_no = (1.0 - dark) * (1.0 - eta_h).powi(n as i32);
        let idx = grid.index(n, 0);
        click[idx] = p_n * (1.0 - p_no);
        no_click[idx] = p_n * p_no;
    }

    Ok((
        SignalDistribution::from_parts(HeraldClass::H, n_cut, click, tail),
        SignalDistribution::from_parts(HeraldClass::NONE, n_cut, no_click, tail),
    ))
}
