//! Secret-key rates, throughput, and operating-point optimization.
//!
//! Each single-click herald class contributes a GLLP-style rate
//! R_x = q [ P₁Y₁ (1 − h(e₁)) − Q_x f h(E_x) ], with the single-photon
//! quantities replaced by their decoy-state bounds. Classes heralded in
//! the Z basis ({H}, {V}) are measured in Z; classes heralded in the X
//! basis ({+}, {−}) use the X-projected distributions throughout,
//! including their decoy programs.
//!
//! Rates appear in two normalizations. `per_pulse_rate` counts secret
//! bits per emitted pump pulse, with the heralding probability embedded
//! in the joint quantities; multiplied by the pulse rate it gives the
//! throughput that the lambda optimizer maximizes. `per_herald_rate`
//! divides out the total keygen-class probability and counts secret bits
//! per heralded pulse, the pulse-quality figure that comparisons against
//! an unheralded baseline use.

use crate::channel::{class_stats, error_rate, yield_prob, ChannelError, ChannelParams, ClassStats, Nominal};
use crate::decoy::{single_photon_bounds, DecoyBounds, DecoyError, SolveStatus};
use crate::mathkit::{binary_entropy, log_factorial};
use crate::source::{HeraldClass, SourceError, SourceParams};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("invalid protocol parameter: {0}")]
    InvalidParams(String),
    #[error("decoy analysis failed for class {class}: {source}")]
    Decoy {
        class: HeraldClass,
        source: DecoyError,
    },
    #[error("decoy program for class {class} ended {status:?}")]
    Solver {
        class: HeraldClass,
        status: SolveStatus,
    },
}

/// Protocol-level constants of the rate formula.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    /// Basis reconciliation factor q.
    pub q: f64,
    /// Error-correction inefficiency f >= 1.
    pub f: f64,
    /// Source repetition rate in Hz.
    pub pulse_rate: f64,
    /// Herald classes used for key generation; must be single-click.
    pub keygen_classes: Vec<HeraldClass>,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            q: 0.5,
            f: 1.16,
            pulse_rate: 1e6,
            keygen_classes: vec![
                HeraldClass::H,
                HeraldClass::V,
                HeraldClass::PLUS,
                HeraldClass::MINUS,
            ],
        }
    }
}

impl ProtocolParams {
    fn validate(&self) -> Result<(), RateError> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(RateError::InvalidParams(format!(
                "reconciliation factor q = {} must lie in (0, 1]",
                self.q
            )));
        }
        if !(self.f >= 1.0) {
            return Err(RateError::InvalidParams(format!(
                "error-correction inefficiency f = {} must be at least 1",
                self.f
            )));
        }
        if !(self.pulse_rate > 0.0) {
            return Err(RateError::InvalidParams(format!(
                "pulse rate {} must be positive",
                self.pulse_rate
            )));
        }
        if self.keygen_classes.is_empty() {
            return Err(RateError::InvalidParams(
                "keygen class set is empty".to_string(),
            ));
        }
        for class in &self.keygen_classes {
            if !class.is_keygen() {
                return Err(RateError::InvalidParams(format!(
                    "class {class} is not a single-click class"
                )));
            }
        }
        Ok(())
    }
}

/// Per-class diagnostics of one rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassReport {
    pub class: HeraldClass,
    /// Truncated probability of the class (its heralding rate).
    pub weight: f64,
    /// Joint gain Q_x.
    pub gain: f64,
    /// Observed error rate E_x under the class's own bit convention.
    pub qber: f64,
    pub p1y1_lower: f64,
    pub e1_upper: f64,
    /// Unclamped per-pulse rate contribution R_x.
    pub rate: f64,
}

/// One evaluated operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub distance: f64,
    pub lambda: f64,
    /// Secret bits per emitted pulse: Σ_x max(R_x, 0).
    pub per_pulse_rate: f64,
    /// Secret bits per keygen-heralded pulse.
    pub per_herald_rate: f64,
    /// Secret bits per second, pulse_rate × per_pulse_rate.
    pub throughput: f64,
    pub classes: Vec<ClassReport>,
}

fn entropy(p: f64) -> f64 {
    binary_entropy(p).expect("probability within [0, 1] by construction")
}

/// GLLP rate of one class from its decoy bounds and observed statistics,
/// in secret bits per pulse. The single-photon term is evaluated at
/// min(e₁, 1/2); beyond that point the bound certifies nothing and the
/// term is credited as zero rather than rebounding.
pub fn class_key_rate(bounds: &DecoyBounds, stats: &ClassStats, p: &ProtocolParams) -> f64 {
    let e1 = bounds.e1_upper.min(0.5);
    let single = bounds.p1y1_lower * (1.0 - entropy(e1));
    let leak = stats.gain * p.f * entropy(stats.qber.min(1.0));
    p.q * (single - leak)
}

/// Full pipeline at one (source, channel) point: distributions for all
/// 16 classes in both bases, per-class statistics, decoy bounds for every
/// keygen class, and the aggregated rates.
pub fn total_rate(
    src: &SourceParams,
    ch: &ChannelParams,
    p: &ProtocolParams,
) -> Result<RatePoint, RateError> {
    p.validate()?;
    let set = crate::source::build_distributions(src);

    let mut classes = Vec::with_capacity(p.keygen_classes.len());
    let mut per_pulse_rate = 0.0;
    let mut herald_weight = 0.0;
    for &target in &p.keygen_classes {
        let dists = match target {
            HeraldClass::PLUS | HeraldClass::MINUS => &set.x,
            _ => &set.z,
        };
        let nominal = Nominal::for_class(target).expect("validated as single-click");
        let stats: Vec<ClassStats> = dists
            .iter()
            .map(|d| class_stats(d, ch, nominal))
            .collect();
        let bounds = single_photon_bounds(dists, &stats, target).map_err(|source| {
            RateError::Decoy {
                class: target,
                source,
            }
        })?;
        if bounds.status != SolveStatus::Optimal {
            return Err(RateError::Solver {
                class: target,
                status: bounds.status,
            });
        }
        let own = stats[target.index()];
        let rate = class_key_rate(&bounds, &own, p);
        per_pulse_rate += rate.max(0.0);
        herald_weight += dists[target.index()].weight();
        classes.push(ClassReport {
            class: target,
            weight: dists[target.index()].weight(),
            gain: own.gain,
            qber: own.qber,
            p1y1_lower: bounds.p1y1_lower,
            e1_upper: bounds.e1_upper,
            rate,
        });
    }

    let per_herald_rate = if herald_weight > 0.0 {
        per_pulse_rate / herald_weight
    } else {
        0.0
    };
    Ok(RatePoint {
        distance: ch.distance,
        lambda: src.lambda(),
        per_pulse_rate,
        per_herald_rate,
        throughput: p.pulse_rate * per_pulse_rate,
        classes,
    })
}

/// Search ceiling for [`max_distance`]; channels that stay above zero
/// rate (no dark counts, no misalignment) report this cap.
pub const MAX_SEARCH_DISTANCE_KM: f64 = 10_000.0;

/// Largest distance with a positive per-pulse rate, located by doubling
/// and bisection to 0.1 km. Returns 0 when the rate is already zero at
/// L = 0 and the search cap when the rate never dies.
pub fn max_distance(
    src: &SourceParams,
    p: &ProtocolParams,
    ch_template: &ChannelParams,
) -> Result<f64, RateError> {
    let positive = |l: f64| -> Result<bool, RateError> {
        Ok(total_rate(src, &ch_template.with_distance(l), p)?.per_pulse_rate > 0.0)
    };
    if !positive(0.0)? {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 50.0;
    while positive(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi >= MAX_SEARCH_DISTANCE_KM {
            return Ok(MAX_SEARCH_DISTANCE_KM);
        }
    }
    while hi - lo > 0.1 {
        let mid = 0.5 * (lo + hi);
        if positive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Result of a throughput optimization over the pair parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaOpt {
    pub lambda: f64,
    pub point: RatePoint,
    /// Set when every scanned lambda produced zero throughput; the
    /// reported lambda is then the midpoint of the range.
    pub all_zero: bool,
}

const LAMBDA_GRID_POINTS: usize = 40;
const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

/// Maximize throughput over λ by a 40-point logarithmic scan followed by
/// golden-section refinement to a relative width of 1e-3. The truncation
/// order adapts per λ, never dropping below the template's `n_cut`.
pub fn optimize_lambda(
    src_template: &SourceParams,
    ch: &ChannelParams,
    p: &ProtocolParams,
    lambda_range: (f64, f64),
) -> Result<LambdaOpt, RateError> {
    let (lo, hi) = lambda_range;
    if !(lo > 0.0 && lo < hi && hi <= 1.0) {
        return Err(RateError::InvalidParams(format!(
            "lambda range ({lo}, {hi}) must satisfy 0 < lo < hi <= 1"
        )));
    }

    let evaluate = |lambda: f64| -> Result<RatePoint, RateError> {
        let src = SourceParams::auto_cut(
            lambda,
            src_template.eta_h(),
            src_template.dark(),
            src_template.n_cut(),
            src_template.tolerance(),
        )?;
        total_rate(&src, ch, p)
    };

    let mut best: Option<(f64, RatePoint)> = None;
    let consider = |lambda: f64, point: RatePoint, best: &mut Option<(f64, RatePoint)>| {
        let replace = match best {
            None => true,
            Some((_, b)) => point.throughput > b.throughput,
        };
        if replace {
            *best = Some((lambda, point));
        }
    };

    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    let grid: Vec<f64> = (0..LAMBDA_GRID_POINTS)
        .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / (LAMBDA_GRID_POINTS - 1) as f64).exp())
        .collect();
    let mut best_idx = 0;
    for (i, &lambda) in grid.iter().enumerate() {
        let point = evaluate(lambda)?;
        if best
            .as_ref()
            .map_or(true, |(_, b)| point.throughput > b.throughput)
        {
            best_idx = i;
        }
        consider(lambda, point, &mut best);
    }

    let (_, best_point) = best.as_ref().expect("grid is nonempty");
    if best_point.throughput == 0.0 {
        let mid = 0.5 * (lo + hi);
        let point = evaluate(mid)?;
        return Ok(LambdaOpt {
            lambda: mid,
            point,
            all_zero: true,
        });
    }

    // Golden-section refinement on ln λ around the best grid point.
    let mut a = grid[best_idx.saturating_sub(1)].ln();
    let mut b = grid[(best_idx + 1).min(LAMBDA_GRID_POINTS - 1)].ln();
    let resp = 2.0 - GOLDEN_RATIO;
    let mut u1 = a + resp * (b - a);
    let mut u2 = b - resp * (b - a);
    let eval_log = |u: f64, best: &mut Option<(f64, RatePoint)>| -> Result<f64, RateError> {
        let lambda = u.exp();
        let point = evaluate(lambda)?;
        let value = point.throughput;
        consider(lambda, point, best);
        Ok(value)
    };
    let mut f1 = eval_log(u1, &mut best)?;
    let mut f2 = eval_log(u2, &mut best)?;
    while b - a > 1e-3 {
        if f1 > f2 {
            b = u2;
            u2 = u1;
            f2 = f1;
            u1 = a + resp * (b - a);
            f1 = eval_log(u1, &mut best)?;
        } else {
            a = u1;
            u1 = u2;
            f1 = f2;
            u2 = b - resp * (b - a);
            f2 = eval_log(u2, &mut best)?;
        }
    }

    let (lambda, point) = best.expect("at least the grid was evaluated");
    Ok(LambdaOpt {
        lambda,
        point,
        all_zero: false,
    })
}

/// Asymptotic decoy-state BB84 with an actively modulated Poissonian
/// source of mean photon number μ, in the infinite-decoy limit where the
/// single-photon yield and error rate are known exactly. Uses the same
/// detector model as the heralded protocol. Returns bits per pulse,
/// possibly negative.
pub fn active_wcp_baseline(mu: f64, ch: &ChannelParams, p: &ProtocolParams) -> f64 {
    assert!(mu > 0.0, "mean photon number must be positive");
    let y1 = yield_prob(1, 0, ch);
    let (_, e1) = error_rate(1, 0, ch);

    let n_max = mu.ceil() as usize + 60;
    let mut gain = 0.0;
    let mut error_gain = 0.0;
    for n in 0..=n_max {
        let p_n = (n as f64 * mu.ln() - mu - log_factorial(n as u64)).exp();
        gain += p_n * yield_prob(n, 0, ch);
        error_gain += p_n * error_rate(n, 0, ch).0;
    }
    let e_mu = if gain > 0.0 { error_gain / gain } else { 0.0 };

    let single = mu * (-mu).exp() * y1 * (1.0 - entropy(e1.min(0.5)));
    p.q * (single - gain * p.f * entropy(e_mu.min(1.0)))
}

/// Baseline rate with μ re-optimized by the same scan plus golden-section
/// scheme as the λ optimizer. Returns (μ*, rate*) with the rate clamped
/// at zero.
pub fn optimal_wcp_baseline(ch: &ChannelParams, p: &ProtocolParams, mu_range: (f64, f64)) -> (f64, f64) {
    let (lo, hi) = mu_range;
    assert!(lo > 0.0 && lo < hi, "bad mu range ({lo}, {hi})");
    let mut best = (0.5 * (lo + hi), 0.0f64);
    let consider = |mu: f64, rate: f64, best: &mut (f64, f64)| {
        if rate > best.1 {
            *best = (mu, rate);
        }
    };

    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    let grid: Vec<f64> = (0..LAMBDA_GRID_POINTS)
        .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / (LAMBDA_GRID_POINTS - 1) as f64).exp())
        .collect();
    let mut best_idx = 0;
    for (i, &mu) in grid.iter().enumerate() {
        let rate = active_wcp_baseline(mu, ch, p);
        if rate > best.1 {
            best_idx = i;
        }
        consider(mu, rate, &mut best);
    }
    if best.1 == 0.0 {
        return (0.5 * (lo + hi), 0.0);
    }

    let mut a = grid[best_idx.saturating_sub(1)].ln();
    let mut b = grid[(best_idx + 1).min(LAMBDA_GRID_POINTS - 1)].ln();
    let resp = 2.0 - GOLDEN_RATIO;
    let mut u1 = a + resp * (b - a);
    let mut u2 = b - resp * (b - a);
    let mut f1 = active_wcp_baseline(u1.exp(), ch, p);
    consider(u1.exp(), f1, &mut best);
    let mut f2 = active_wcp_baseline(u2.exp(), ch, p);
    consider(u2.exp(), f2, &mut best);
    while b - a > 1e-3 {
        if f1 > f2 {
            b = u2;
            u2 = u1;
            f2 = f1;
            u1 = a + resp * (b - a);
            f1 = active_wcp_baseline(u1.exp(), ch, p);
            consider(u1.exp(), f1, &mut best);
        } else {
            a = u1;
            u1 = u2;
            f1 = f2;
            u2 = b - resp * (b - a);
            f2 = active_wcp_baseline(u2.exp(), ch, p);
            consider(u2.exp(), f2, &mut best);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::Tolerance;

    fn table_channel(distance: f64) -> ChannelParams {
        ChannelParams::new(0.2, distance, 0.65, 1e-6, 0.015).unwrap()
    }

    fn source(lambda: f64, n_cut: usize) -> SourceParams {
        let tol = Tolerance::new(1e-12, 1e-9, 9e-4).unwrap();
        SourceParams::with_tolerance(lambda, 0.65, 1e-6, n_cut, tol).unwrap()
    }

    #[test]
    fn empty_bounds_give_zero_rate() {
        let bounds = DecoyBounds {
            p1y1_lower: 0.0,
            e1y1p1_upper: 0.0,
            e1_upper: 0.0,
            status: SolveStatus::Optimal,
        };
        let stats = ClassStats {
            gain: 0.0,
            qber: 0.0,
        };
        assert_eq!(class_key_rate(&bounds, &stats, &ProtocolParams::default()), 0.0);
    }

    #[test]
    fn maximal_error_removes_single_photon_credit() {
        let bounds = DecoyBounds {
            p1y1_lower: 0.1,
            e1y1p1_upper: 0.05,
            e1_upper: 0.5,
            status: SolveStatus::Optimal,
        };
        let stats = ClassStats {
            gain: 0.1,
            qber: 0.05,
        };
        let p = ProtocolParams::default();
        let r = class_key_rate(&bounds, &stats, &p);
        let leak = p.q * 0.1 * p.f * binary_entropy(0.05).unwrap();
        assert!((r + leak).abs() < 1e-15, "rate {r} should be pure leakage");
        assert!(r < 0.0);
    }

    #[test]
    fn symmetric_classes_agree() {
        let src = source(0.05, 6);
        let point = total_rate(&src, &table_channel(50.0), &ProtocolParams::default()).unwrap();
        let by_class = |c: HeraldClass| point.classes.iter().find(|r| r.class == c).unwrap();
        let (h, v) = (by_class(HeraldClass::H), by_class(HeraldClass::V));
        let (pl, mi) = (by_class(HeraldClass::PLUS), by_class(HeraldClass::MINUS));
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
        assert!(rel(h.rate, v.rate) < 1e-12, "{} vs {}", h.rate, v.rate);
        assert!(rel(pl.rate, mi.rate) < 1e-12, "{} vs {}", pl.rate, mi.rate);
        assert!(rel(h.gain, v.gain) < 1e-12);
        assert!(rel(pl.gain, mi.gain) < 1e-12);
    }

    #[test]
    fn throughput_identity_and_clamping() {
        let src = source(0.05, 6);
        let p = ProtocolParams::default();
        let point = total_rate(&src, &table_channel(80.0), &p).unwrap();
        assert_eq!(point.throughput, p.pulse_rate * point.per_pulse_rate);
        let clamped: f64 = point.classes.iter().map(|c| c.rate.max(0.0)).sum();
        assert_eq!(point.per_pulse_rate, clamped);
        let weight: f64 = point.classes.iter().map(|c| c.weight).sum();
        assert!((point.per_herald_rate * weight - point.per_pulse_rate).abs() < 1e-18);
    }

    #[test]
    fn dead_channel_has_zero_rate() {
        let tol = Tolerance::new(1e-12, 1e-9, 9e-4).unwrap();
        let src = SourceParams::with_tolerance(0.05, 0.65, 0.0, 6, tol).unwrap();
        let ch = ChannelParams::new(0.2, 2000.0, 0.65, 0.0, 0.015).unwrap();
        let point = total_rate(&src, &ch, &ProtocolParams::default()).unwrap();
        assert_eq!(point.per_pulse_rate, 0.0);
        assert_eq!(point.throughput, 0.0);
    }

    #[test]
    fn positive_rate_well_past_100_km_at_small_lambda() {
        let src = source(0.001, 10);
        let point = total_rate(&src, &table_channel(100.0), &ProtocolParams::default()).unwrap();
        assert!(point.per_pulse_rate > 0.0);
        for report in &point.classes {
            assert!(report.rate > 0.0, "class {}", report.class);
        }
    }

    #[test]
    fn decoy_bounds_are_conservative_per_class() {
        let src = source(0.05, 6);
        let ch = table_channel(50.0);
        let p = ProtocolParams::default();
        let set = crate::source::build_distributions(&src);
        let point = total_rate(&src, &ch, &p).unwrap();
        for report in &point.classes {
            let dists = match report.class {
                HeraldClass::PLUS | HeraldClass::MINUS => &set.x,
                _ => &set.z,
            };
            let d = &dists[report.class.index()];
            let nominal = Nominal::for_class(report.class).unwrap();
            let (ey10, ey01) = match nominal {
                Nominal::First => (error_rate(1, 0, &ch).0, error_rate(0, 1, &ch).0),
                Nominal::Second => (error_rate(0, 1, &ch).0, error_rate(1, 0, &ch).0),
            };
            let p1y1 = d.prob(1, 0) * yield_prob(1, 0, &ch) + d.prob(0, 1) * yield_prob(0, 1, &ch);
            let e1y1 = d.prob(1, 0) * ey10 + d.prob(0, 1) * ey01;
            assert!(report.p1y1_lower <= p1y1 + 1e-15, "class {}", report.class);
            assert!(
                report.e1_upper >= e1y1 / p1y1 - 1e-12,
                "class {}",
                report.class
            );
            let truth_bounds = DecoyBounds {
                p1y1_lower: p1y1,
                e1y1p1_upper: e1y1,
                e1_upper: e1y1 / p1y1,
                status: SolveStatus::Optimal,
            };
            let stats = ClassStats {
                gain: report.gain,
                qber: report.qber,
            };
            let truth_rate = class_key_rate(&truth_bounds, &stats, &p);
            assert!(report.rate <= truth_rate + 1e-15, "class {}", report.class);
        }
    }

    #[test]
    fn rate_declines_with_distance() {
        let p = ProtocolParams::default();
        for lambda in [0.001, 0.01, 0.05, 0.1] {
            let src = SourceParams::new(lambda, 0.65, 1e-6, 10).unwrap();
            let mut last = f64::INFINITY;
            for l in [0.0, 40.0, 80.0, 120.0, 160.0] {
                let point = total_rate(&src, &table_channel(l), &p).unwrap();
                assert!(
                    point.per_pulse_rate <= last + 1e-18,
                    "rate rose between distances at lambda {lambda}, {l} km"
                );
                last = point.per_pulse_rate;
            }
        }
    }

    #[test]
    fn baseline_vanishes_with_the_source() {
        // Without dark counts the rate goes to zero with the intensity.
        let ch = ChannelParams::new(0.2, 50.0, 0.65, 0.0, 0.015).unwrap();
        let p = ProtocolParams::default();
        let tiny = active_wcp_baseline(1e-9, &ch, &p);
        assert!(tiny.abs() < 1e-9);
        // Ideal short channel at moderate intensity pays off.
        let ideal = ChannelParams::new(0.2, 0.0, 1.0, 0.0, 0.0).unwrap();
        assert!(active_wcp_baseline(0.5, &ideal, &p) > 0.0);
    }

    #[test]
    fn baseline_optimizer_beats_fixed_choices() {
        let ch = table_channel(50.0);
        let p = ProtocolParams::default();
        let (mu_star, best) = optimal_wcp_baseline(&ch, &p, (1e-3, 2.0));
        assert!(best > 0.0);
        assert!(mu_star > 0.0 && mu_star < 2.0);
        for mu in [0.05, 0.2, 0.5, 0.9, 1.5] {
            assert!(best >= active_wcp_baseline(mu, &ch, &p) - 1e-12, "mu = {mu}");
        }
    }

    #[test]
    fn protocol_params_are_validated() {
        let src = source(0.05, 6);
        let ch = table_channel(10.0);
        let bad = ProtocolParams {
            q: 0.0,
            ..ProtocolParams::default()
        };
        assert!(matches!(
            total_rate(&src, &ch, &bad),
            Err(RateError::InvalidParams(_))
        ));
        let bad = ProtocolParams {
            keygen_classes: vec![HeraldClass::NONE],
            ..ProtocolParams::default()
        };
        assert!(matches!(
            total_rate(&src, &ch, &bad),
            Err(RateError::InvalidParams(_))
        ));
    }
}
