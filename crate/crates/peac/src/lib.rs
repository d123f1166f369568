//! Phase estimation for correlated atom interferometers.
//!
//! Two estimators recover the differential phase θ between simultaneous
//! interferometers that share a common random laser phase:
//!
//! * amplitude-collapse estimation: per interrogation time, histogram the
//!   signal, fit the arcsine-with-Gaussian-blur density, and invert the
//!   amplitude-versus-θ collapse law;
//! * ellipse fitting: fit a conic to the correlated signal pair and read θ
//!   from its coefficients.
//!
//! Supporting modules provide the homoscedastic fringe model and synthetic
//! sample generation, finite-pulse phase physics, and a Monte-Carlo
//! bias/precision harness comparing both estimators.
//!
//! All numerics are generic over the scalar type via [`float::Real`]
//! (implemented for `f32` and `f64`); the type aliases at the crate root fix
//! `f64` for ordinary use.

// Validation guards are written `!(x > 0)` on purpose: unlike `x <= 0`,
// the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collapse;
pub mod dataset;
pub mod ellipse;
pub mod estimator;
pub mod fit;
pub mod float;
pub mod histogram;
pub mod pdf;
pub mod pulse;
pub mod quad;
pub mod replication;
pub mod signal;

pub use float::Real;

/// Fringe-channel parameters at `f64` precision.
pub type SignalParams = signal::SignalParams<f64>;
/// Three-component mixture model at `f64` precision.
pub type MixtureModel = signal::MixtureModel<f64>;
/// Laser-phase scan protocol at `f64` precision.
pub type ScanConfig = signal::ScanConfig<f64>;
/// Pulse and timing parameters at `f64` precision.
pub type PulseConfig = pulse::PulseConfig<f64>;
/// Histogram at `f64` precision.
pub type Histogram = histogram::Histogram<f64>;
/// Blurred-arcsine density parameters at `f64` precision.
pub type PdfParams = pdf::PdfParams<f64>;
/// Converged density fit at `f64` precision.
pub type PdfFit = estimator::PdfFit<f64>;
/// Port/rotated-channel fit bundle at `f64` precision.
pub type ChannelSuiteFit = estimator::ChannelSuiteFit<f64>;
/// Conic coefficients at `f64` precision.
pub type ConicCoefficients = ellipse::ConicCoefficients<f64>;
/// Collapse-curve fit result at `f64` precision.
pub type CollapseFitResult = collapse::CollapseFitResult<f64>;
/// Pointwise acceleration fit at `f64` precision.
pub type PointwiseFit = collapse::PointwiseFit<f64>;
/// Measurement record at `f64` precision.
pub type Record = dataset::Record<f64>;
/// Record table at `f64` precision.
pub type Dataset = dataset::Dataset<f64>;
/// Shot-simulation plan at `f64` precision.
pub type ShotPlan = dataset::ShotPlan<f64>;
/// Monte-Carlo replication parameters at `f64` precision.
pub type ReplicationConfig = replication::ReplicationConfig<f64>;
/// Bias/precision report row at `f64` precision.
pub type EstimateReport = replication::EstimateReport<f64>;
