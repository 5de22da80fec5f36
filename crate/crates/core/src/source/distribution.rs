//! Conditional signal distributions for the 16 herald classes.
//!
//! For every photon-count tuple reaching the herald detectors, the
//! threshold-click model assigns a probability to each of the 16 response
//! classes; weighting the interference amplitudes by those probabilities
//! and marginalizing yields the joint table P_x(m, k) of signal Fock
//! states per class. The same enumeration also projects the signal modes
//! onto the X basis, keeping the signed amplitudes coherent within each
//! photon-number sector so that D₊ heralds |+⟩ and D₋ heralds |−⟩ states.

use super::amplitude::amplitude_unchecked;
use super::{
    pair_prob, FockGrid, HeraldClass, HeraldCounts, SignalDistribution, SourceParams,
};
use crate::mathkit::{binomial_exact, log_factorial};

const LN_SQRT2: f64 = std::f64::consts::LN_2 / 2.0;

/// Probability that a threshold detector with efficiency `eta` and dark
/// count probability `dark` clicks on `n` incident photons.
fn click_prob(n: u32, eta: f64, dark: f64) -> f64 {
    1.0 - (1.0 - dark) * (1.0 - eta).powi(n as i32)
}

/// Probability γ_x that the herald counts produce exactly the response
/// class `class`: clicked detectors fire, unclicked detectors stay silent.
pub fn click_class_prob(counts: &HeraldCounts, class: HeraldClass, eta_h: f64, dark: f64) -> f64 {
    let mut gamma = 1.0;
    for det in super::Detector::ALL {
        let d = click_prob(counts.count(det), eta_h, dark);
        gamma *= if class.contains(det) { d } else { 1.0 - d };
    }
    gamma
}

/// All 16 γ_x values for one count tuple, in class-index order. The 16
/// products are assembled from the four per-detector click probabilities
/// so the values partition unity exactly.
fn click_class_probs(counts: &HeraldCounts, eta_h: f64, dark: f64) -> [f64; 16] {
    let d: Vec<f64> = super::Detector::ALL
        .iter()
        .map(|&det| click_prob(counts.count(det), eta_h, dark))
        .collect();
    let mut out = [0.0; 16];
    for (idx, slot) in out.iter_mut().enumerate() {
        let mut gamma = 1.0;
        for (bit, &dk) in d.iter().enumerate() {
            gamma *= if idx & (1 << bit) != 0 { dk } else { 1.0 - dk };
        }
        *slot = gamma;
    }
    out
}

/// Z- and X-basis joint distributions for all 16 classes of one source.
pub(crate) struct DistributionSet {
    pub z: Vec<SignalDistribution>,
    pub x: Vec<SignalDistribution>,
}

/// Single-pass enumeration over pair number, herald counts and signal
/// sectors, accumulating both measurement bases at once.
pub(crate) fn build_distributions(params: &SourceParams) -> DistributionSet {
    let n_cut = params.n_cut();
    let grid = FockGrid::new(n_cut);
    let tail = params.tail_mass();
    let mut z = vec![vec![0.0; grid.len()]; 16];
    let mut x = vec![vec![0.0; grid.len()]; 16];

    // X-basis change-of-basis kernels per photon-number sector.
    let kernels: Vec<Vec<Vec<f64>>> = (0..=n_cut).map(x_kernel_matrix).collect();

    let mut amps = vec![0.0; n_cut + 1];
    for n in 0..=n_cut {
        let p_n = pair_prob(params.lambda(), n);
        let kernel = &kernels[n];
        // Enumerate herald count tuples with n photons in total.
        for n_h in 0..=n {
            for n_v in 0..=(n - n_h) {
                for n_plus in 0..=(n - n_h - n_v) {
                    let n_minus = n - n_h - n_v - n_plus;
                    let counts = HeraldCounts::new(
                        n_plus as u32,
                        n_minus as u32,
                        n_h as u32,
                        n_v as u32,
                    );
                    let gammas = click_class_probs(&counts, params.eta_h(), params.dark());

                    // Signal sectors consistent with these counts.
                    let m_lo = n_v;
                    let m_hi = n - n_h;
                    for m in m_lo..=m_hi {
                        amps[m] = amplitude_unchecked(n as u32, m as u32, &counts);
                    }

                    for m in m_lo..=m_hi {
                        let w = p_n * amps[m] * amps[m];
                        if w == 0.0 {
                            continue;
                        }
                        let idx = grid.index(m, n - m);
                        for (c, &gamma) in gammas.iter().enumerate() {
                            z[c][idx] += w * gamma;
                        }
                    }

                    // Coherent X projection of the signed amplitude vector.
                    for t in 0..=n {
                        let mut ax = 0.0;
                        for m in m_lo..=m_hi {
                            ax += amps[m] * kernel[t][m];
                        }
                        let w = p_n * ax * ax;
                        if w == 0.0 {
                            continue;
                        }
                        let idx = grid.index(t, n - t);
                        for (c, &gamma) in gammas.iter().enumerate() {
                            x[c][idx] += w * gamma;
                        }
                    }
                }
            }
        }
    }

    let pack = |tables: Vec<Vec<f64>>| {
        tables
            .into_iter()
            .zip(HeraldClass::all())
            .map(|(entries, class)| SignalDistribution::from_parts(class, n_cut, entries, tail))
            .collect()
    };
    DistributionSet {
        z: pack(z),
        x: pack(x),
    }
}

/// Joint Z-basis signal distributions for all 16 herald classes.
pub fn signal_distributions(params: &SourceParams) -> Vec<SignalDistribution> {
    build_distributions(params).z
}

/// Joint X-basis signal distributions for all 16 herald classes, with the
/// per-sector interference signs retained through the basis change.
pub fn signal_distributions_x(params: &SourceParams) -> Vec<SignalDistribution> {
    build_distributions(params).x
}

/// Z-basis distribution of a single class.
pub fn signal_distribution(params: &SourceParams, class: HeraldClass) -> SignalDistribution {
    signal_distributions(params)
        .into_iter()
        .nth(class.index())
        .expect("16 classes are always produced")
}

/// X-basis distribution of a single class.
pub fn signal_distribution_x(params: &SourceParams, class: HeraldClass) -> SignalDistribution {
    signal_distributions_x(params)
        .into_iter()
        .nth(class.index())
        .expect("16 classes are always produced")
}

/// Matrix element ⟨t, n−t| of the X-basis image of |m, n−m⟩: the n-photon
/// representation of the mode rotation b_H = (b₊+b₋)/√2, b_V = (b₊−b₋)/√2.
fn x_kernel(n: usize, t: usize, m: usize) -> f64 {
    let k = n - m;
    let mut s: i128 = 0;
    let lo = t.saturating_sub(k);
    let hi = t.min(m);
    for a in lo..=hi {
        let b = t - a; // photons the V mode sends to b₊
        let term = binomial_exact(m as u64, a as u64) as i128
            * binomial_exact(k as u64, b as u64) as i128;
        s += if (k - b) % 2 == 0 { term } else { -term };
    }
    if s == 0 {
        return 0.0;
    }
    let scale = 0.5
        * (log_factorial(t as u64) + log_factorial((n - t) as u64)
            - log_factorial(m as u64)
            - log_factorial(k as u64))
        - n as f64 * LN_SQRT2;
    s as f64 * scale.exp()
}

fn x_kernel_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..=n)
        .map(|t| (0..=n).map(|m| x_kernel(n, t, m)).collect())
        .collect()
}

/// Project a signal distribution onto the X measurement basis by the
/// coherent amplitude sum within each photon-number sector, taking the
/// positive square roots of the entries as amplitudes. The truncation
/// tail is preserved.
///
/// Distributions produced by [`signal_distributions_x`] keep the relative
/// signs of the underlying amplitudes instead and should be preferred for
/// X-basis herald classes, where those signs interfere destructively.
pub fn project_x_basis(dist: &SignalDistribution) -> SignalDistribution {
    let n_cut = dist.n_cut();
    let grid = dist.grid();
    let mut entries = vec![0.0; grid.len()];
    for n in 0..=n_cut {
        let kernel = x_kernel_matrix(n);
        let roots: Vec<f64> = (0..=n).map(|m| dist.prob(m, n - m).sqrt()).collect();
        for t in 0..=n {
            let amp: f64 = (0..=n).map(|m| roots[m] * kernel[t][m]).sum();
            entries[grid.index(t, n - t)] = amp * amp;
        }
    }
    SignalDistribution::from_parts(dist.class(), n_cut, entries, dist.tail())
}
