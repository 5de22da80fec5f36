//! Heralded fully passive parametric down-conversion source.
//!
//! A type-II PDC crystal emits n-photon-pair states |Φₙ⟩ with probability
//! P(n) = (n+1)λⁿ/(1+λ)ⁿ⁺², where λ = sinh²χ and the mean pair number is
//! 2λ. The heralding arm is split on a 50/50 beam splitter; one output is
//! rotated by a half-wave plate and measured in the X basis (detectors D₊,
//! D₋), the other is measured directly in the Z basis (D_H, D_V). The
//! subset of detectors that click, one of 16 possibilities, heralds a
//! conditional photon-number distribution in the signal arm without any
//! active modulation.
//!
//! This module provides the pair-number statistics, the exact
//! interference amplitudes of the heralding paths, the threshold-detector
//! click model, and the resulting joint signal distributions in both the
//! Z and X measurement bases.

mod amplitude;
mod distribution;
mod poisson;

pub use amplitude::heralding_amplitude;
pub use distribution::{
    click_class_prob, project_x_basis, signal_distribution, signal_distribution_x,
    signal_distributions, signal_distributions_x,
};
pub(crate) use distribution::build_distributions;
pub use poisson::poisson_heralded_dists;

use crate::mathkit::Tolerance;
use thiserror::Error;

/// Errors from source construction and amplitude evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("invalid source parameter: {0}")]
    InvalidParams(String),
    /// The pair-number tail beyond `n_cut` exceeds the allowed mass.
    #[error("truncated tail mass {tail:.3e} exceeds tail_eps {limit:.3e}; raise n_cut")]
    Truncation { tail: f64, limit: f64 },
    /// Herald counts that cannot arise from the stated (n, m) sector.
    #[error("herald counts {counts:?} are inconsistent with n = {n}, m = {m}")]
    InconsistentCounts {
        n: u32,
        m: u32,
        counts: HeraldCounts,
    },
}

/// The four herald detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    Plus,
    Minus,
    H,
    V,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::Plus, Detector::Minus, Detector::H, Detector::V];

    fn bit(self) -> u8 {
        match self {
            Detector::Plus => 1,
            Detector::Minus => 2,
            Detector::H => 4,
            Detector::V => 8,
        }
    }
}

/// One of the 16 herald outcomes: the subset of {D₊, D₋, D_H, D_V} that
/// clicked in a pulse. The empty subset (no response) is a valid class
/// and participates in the decoy analysis even though it generates no key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeraldClass(u8);

impl HeraldClass {
    pub const NONE: HeraldClass = HeraldClass(0);
    pub const PLUS: HeraldClass = HeraldClass(1);
    pub const MINUS: HeraldClass = HeraldClass(2);
    pub const H: HeraldClass = HeraldClass(4);
    pub const V: HeraldClass = HeraldClass(8);

    /// All 16 classes in a fixed, deterministic order.
    pub fn all() -> [HeraldClass; 16] {
        let mut out = [HeraldClass(0); 16];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = HeraldClass(i as u8);
        }
        out
    }

    pub fn from_index(index: usize) -> Option<HeraldClass> {
        (index < 16).then(|| HeraldClass(index as u8))
    }

    /// Position of this class in [`HeraldClass::all`].
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn contains(self, det: Detector) -> bool {
        self.0 & det.bit() != 0
    }

    pub fn click_count(self) -> u32 {
        self.0.count_ones()
    }

    /// Key is generated only from the four single-click classes.
    pub fn is_keygen(self) -> bool {
        self.click_count() == 1
    }

    /// Paper-style label, e.g. "0", "H", "+-", "HV+-".
    pub fn label(self) -> &'static str {
        const LABELS: [&str; 16] = [
            "0", "+", "-", "+-", "H", "H+", "H-", "H+-", "V", "V+", "V-", "V+-", "HV", "HV+",
            "HV-", "HV+-",
        ];
        LABELS[self.index()]
    }

    /// Lowercase alphanumeric key, safe for CSV column names.
    pub fn column_key(self) -> &'static str {
        const KEYS: [&str; 16] = [
            "none", "p", "m", "pm", "h", "hp", "hm", "hpm", "v", "vp", "vm", "vpm", "hv", "hvp",
            "hvm", "hvpm",
        ];
        KEYS[self.index()]
    }
}

impl std::fmt::Display for HeraldClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Photon counts arriving at the four herald detectors for one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HeraldCounts {
    pub n_plus: u32,
    pub n_minus: u32,
    pub n_h: u32,
    pub n_v: u32,
}

impl HeraldCounts {
    pub fn new(n_plus: u32, n_minus: u32, n_h: u32, n_v: u32) -> Self {
        Self {
            n_plus,
            n_minus,
            n_h,
            n_v,
        }
    }

    pub fn total(&self) -> u32 {
        self.n_plus + self.n_minus + self.n_h + self.n_v
    }

    pub fn count(&self, det: Detector) -> u32 {
        match det {
            Detector::Plus => self.n_plus,
            Detector::Minus => self.n_minus,
            Detector::H => self.n_h,
            Detector::V => self.n_v,
        }
    }
}

/// Triangular grid over two-mode Fock states (m, k) with m + k <= n_cut.
///
/// The linear index doubles as the decision-variable index of the decoy
/// linear programs, so both sides of that interface agree by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockGrid {
    n_cut: usize,
}

impl FockGrid {
    pub fn new(n_cut: usize) -> Self {
        Self { n_cut }
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut
    }

    /// Number of grid points, (n_cut + 1)(n_cut + 2) / 2.
    pub fn len(&self) -> usize {
        (self.n_cut + 1) * (self.n_cut + 2) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear index of (m, k); states are ordered by total photon number,
    /// then by m.
    pub fn index(&self, m: usize, k: usize) -> usize {
        debug_assert!(m + k <= self.n_cut);
        let n = m + k;
        n * (n + 1) / 2 + m
    }

    /// Iterate (m, k) in index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> {
        let n_cut = self.n_cut;
        (0..=n_cut).flat_map(move |n| (0..=n).map(move |m| (m, n - m)))
    }
}

/// Parameters of the heralded PDC source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    lambda: f64,
    eta_h: f64,
    dark: f64,
    n_cut: usize,
    tolerance: Tolerance,
}

impl SourceParams {
    /// Validate parameters against the default [`Tolerance`].
    pub fn new(lambda: f64, eta_h: f64, dark: f64, n_cut: usize) -> Result<Self, SourceError> {
        Self::with_tolerance(lambda, eta_h, dark, n_cut, Tolerance::default())
    }

    /// Validate parameters against an explicit tolerance. The truncated
    /// pair-number tail must not exceed `tolerance.tail_eps`.
    pub fn with_tolerance(
        lambda: f64,
        eta_h: f64,
        dark: f64,
        n_cut: usize,
        tolerance: Tolerance,
    ) -> Result<Self, SourceError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(SourceError::InvalidParams(format!(
                "pair parameter lambda = {lambda} must be positive and finite"
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
        let tail = pair_tail_mass(lambda, n_cut);
        if tail > tolerance.tail_eps {
            return Err(SourceError::Truncation {
                tail,
                limit: tolerance.tail_eps,
            });
        }
        Ok(Self {
            lambda,
            eta_h,
            dark,
            n_cut,
            tolerance,
        })
    }

    /// Pick the smallest truncation order >= `min_cut` whose tail mass
    /// meets `tolerance.tail_eps`, then construct. Used by sweeps that
    /// vary lambda over a wide range.
    pub fn auto_cut(
        lambda: f64,
        eta_h: f64,
        dark: f64,
        min_cut: usize,
        tolerance: Tolerance,
    ) -> Result<Self, SourceError> {
        const HARD_CAP: usize = 64;
        let mut n_cut = min_cut.max(2);
        while pair_tail_mass(lambda, n_cut) > tolerance.tail_eps && n_cut < HARD_CAP {
            n_cut += 1;
        }
        Self::with_tolerance(lambda, eta_h, dark, n_cut, tolerance)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta_h(&self) -> f64 {
        self.eta_h
    }

    pub fn dark(&self) -> f64 {
        self.dark
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tolerance
    }

    pub fn grid(&self) -> FockGrid {
        FockGrid::new(self.n_cut)
    }

    /// Mean photon-pair number, 2λ.
    pub fn mean_pairs(&self) -> f64 {
        2.0 * self.lambda
    }

    /// Probability mass of pair numbers beyond `n_cut`.
    pub fn tail_mass(&self) -> f64 {
        pair_tail_mass(self.lambda, self.n_cut)
    }
}

/// P(n) = (n+1) λⁿ / (1+λ)ⁿ⁺², the probability of an n-photon-pair
/// emission. Normalized over n >= 0 with mean pair number 2λ.
pub fn pair_number_prob(params: &SourceParams, n: usize) -> f64 {
    pair_prob(params.lambda, n)
}

pub(crate) fn pair_prob(lambda: f64, n: usize) -> f64 {
    let x = lambda / (1.0 + lambda);
    (n as f64 + 1.0) * x.powi(n as i32) / ((1.0 + lambda) * (1.0 + lambda))
}

/// Closed form for the truncated tail sum over n > n_cut:
/// with x = λ/(1+λ), the tail equals x^(n_cut+1) [(n_cut+2) - (n_cut+1) x].
pub(crate) fn pair_tail_mass(lambda: f64, n_cut: usize) -> f64 {
    let x = lambda / (1.0 + lambda);
    let k = (n_cut + 1) as f64;
    x.powi(n_cut as i32 + 1) * ((k + 1.0) - k * x)
}

/// Joint probability table over signal Fock states |m⟩_H |k⟩_V heralded
/// by one detector-response class.
///
/// Entries are joint with the herald outcome: they sum to the probability
/// of the class itself (within truncation), not to 1. `tail` carries the
/// pair-number mass beyond `n_cut`, shared by all 16 classes of one
/// source, so summing every class's entries plus the tail recovers unity.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDistribution {
    class: HeraldClass,
    n_cut: usize,
    entries: Vec<f64>,
    tail: f64,
}

impl SignalDistribution {
    pub(crate) fn from_parts(
        class: HeraldClass,
        n_cut: usize,
        entries: Vec<f64>,
        tail: f64,
    ) -> Self {
        debug_assert_eq!(entries.len(), FockGrid::new(n_cut).len());
        Self {
            class,
            n_cut,
            entries,
            tail,
        }
    }

    pub fn class(&self) -> HeraldClass {
        self.class
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut
    }

    pub fn grid(&self) -> FockGrid {
        FockGrid::new(self.n_cut)
    }

    /// Residual probability mass beyond the truncation order.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// Joint probability of the signal state (m photons in the first
    /// mode, k in the second) together with this herald class.
    pub fn prob(&self, m: usize, k: usize) -> f64 {
        if m + k > self.n_cut {
            return 0.0;
        }
        self.entries[self.grid().index(m, k)]
    }

    /// Entries in grid order.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Total truncated probability of this herald class.
    pub fn weight(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// Entry rescaled by the class weight, for presentation and for the
    /// Bell-limit checks. Returns 0 for a weightless class.
    pub fn conditional_prob(&self, m: usize, k: usize) -> f64 {
        let w = self.weight();
        if w > 0.0 {
            self.prob(m, k) / w
        } else {
            0.0
        }
    }

    /// Scale every entry and the tail by `c`. The decoy linear programs
    /// are exactly degree-one in this scaling, which tests exploit.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            class: self.class,
            n_cut: self.n_cut,
            entries: self.entries.iter().map(|p| p * c).collect(),
            tail: self.tail * c,
        }
    }
}
