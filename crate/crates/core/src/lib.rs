//! Simulation and optimization of fully passive quantum key distribution
//! with a heralded parametric down-conversion source.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`source`] computes the joint photon-number distributions heralded
//!    by each of the 16 detector-response classes, from first-principles
//!    interference amplitudes.
//! 2. [`channel`] propagates those distributions through fiber loss and a
//!    threshold-detector measurement, yielding per-class gain and QBER.
//! 3. [`decoy`] bounds the single-photon gain and error rate with linear
//!    programs that use all 16 classes as passive decoy constraints.
//! 4. [`keyrate`] combines the bounds into secret-key rates, throughput
//!    at a given pulse rate, maximum distances, and optimal operating
//!    points.
//!
//! [`oracle`] reproduces stage 1 by exact symbolic expansion of
//! creation-operator polynomials and exists solely to validate it.

pub mod channel;
pub mod decoy;
pub mod keyrate;
pub mod mathkit;
pub mod oracle;
pub mod source;

pub use channel::{
    class_stats, error_rate, transmittance, yield_prob, ChannelError, ChannelParams, ClassStats,
    Nominal,
};
pub use decoy::{
    build_error_lp, build_yield_lp, single_photon_bounds, solve, DecoyBounds, DecoyError,
    LinearProgram, SolveStatus,
};
pub use keyrate::{
    active_wcp_baseline, class_key_rate, max_distance, optimize_lambda, total_rate, ClassReport,
    LambdaOpt, ProtocolParams, RateError, RatePoint,
};
pub use mathkit::{binary_entropy, log_binomial, log_factorial, MathError, Tolerance};
pub use source::{
    heralding_amplitude, pair_number_prob, poisson_heralded_dists, project_x_basis,
    signal_distribution, signal_distribution_x, signal_distributions, signal_distributions_x,
    FockGrid, HeraldClass, HeraldCounts, SignalDistribution, SourceError, SourceParams,
};
