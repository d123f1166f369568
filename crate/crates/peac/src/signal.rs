//! Signal data model and synthetic sample generation.
//!
//! The underlying fringe model is homoscedastic: a signal value is
//! `S = B + A·cos(φ₀ + θ_off)` with constant amplitude `A` and a Gaussian
//! baseline `B ~ N(μ, σ²)`. Superposing several such correlated signals with
//! weights `λᵢ` and per-signal phase offsets again yields this form, with the
//! combined amplitude and offset phase given by the harmonic addition theorem.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::float::Real;

/// Errors from the signal model.
#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    /// A parameter is non-finite or outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// An operation received an empty list.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    /// Port normalization with zero total population.
    #[error("degenerate division: total port population is zero")]
    ZeroTotal,
}

// ── Parameter types ──────────────────────────────────────────────────

/// Amplitude and baseline statistics of one fringe channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalParams<F> {
    /// Fringe amplitude `A ≥ 0` (dimensionless).
    pub amplitude: F,
    /// Baseline mean `μ`.
    pub baseline_mean: F,
    /// Baseline standard deviation `σ ≥ 0`.
    pub baseline_sigma: F,
}

impl<F: Real> SignalParams<F> {
    /// Validates domain constraints (finite values, `A ≥ 0`, `σ ≥ 0`).
    pub fn validate(&self) -> Result<(), SignalError> {
        let all_finite = self.amplitude.is_finite()
            && self.baseline_mean.is_finite()
            && self.baseline_sigma.is_finite();
        if !all_finite {
            return Err(SignalError::InvalidParameter("non-finite field".into()));
        }
        if self.amplitude < F::zero() {
            return Err(SignalError::InvalidParameter("amplitude < 0".into()));
        }
        if self.baseline_sigma < F::zero() {
            return Err(SignalError::InvalidParameter("baseline_sigma < 0".into()));
        }
        Ok(())
    }

    /// `|μ| + A ≤ 1` holds for physical (normalized) signals. Violations are
    /// legitimate for derived channels (rotated signals range up to √2), so
    /// this is advisory, never an error.
    pub fn physicality_warning(&self) -> Option<String> {
        let bound = self.baseline_mean.abs() + self.amplitude;
        (bound > F::one()).then(|| {
            format!(
                "|baseline_mean| + amplitude = {bound} exceeds 1; \
                 signal is outside the physical range unless it is a rotated channel"
            )
        })
    }
}

/// Component weights and differential phase of a superposed three-component
/// signal. `Λ = λ₀ + λ₊ + λ₋` is not forced to 1: the two-component "sum"
/// convention uses `λ₊ = λ₋ = 1/√2` (Λ = √2). Normalization is the caller's
/// choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel<F> {
    pub lambda_0: F,
    pub lambda_plus: F,
    pub lambda_minus: F,
    /// Common single-component amplitude `A₀`.
    pub a0: F,
    /// Differential phase θ in radians.
    pub theta: F,
}

impl<F: Real> MixtureModel<F> {
    /// Population imbalance `Δλ = λ₊ − λ₋`.
    pub fn delta_lambda(&self) -> F {
        self.lambda_plus - self.lambda_minus
    }

    /// Total weight `Λ = λ₀ + λ₊ + λ₋`.
    pub fn total_weight(&self) -> F {
        self.lambda_0 + self.lambda_plus + self.lambda_minus
    }

    /// Two-component configuration used for the rotated sum channel:
    /// `λ₀ = 0`, `λ₊ = λ₋ = 1/√2`.
    pub fn two_state(a0: F, theta: F) -> Self {
        let w = F::one() / F::of(2.0).sqrt();
        Self {
            lambda_0: F::zero(),
            lambda_plus: w,
            lambda_minus: w,
            a0,
            theta,
        }
    }

    /// Validates weight non-negativity and finiteness.
    pub fn validate(&self) -> Result<(), SignalError> {
        for (name, v) in [
            ("lambda_0", self.lambda_0),
            ("lambda_plus", self.lambda_plus),
            ("lambda_minus", self.lambda_minus),
            ("a0", self.a0),
        ] {
            if !v.is_finite() {
                return Err(SignalError::InvalidParameter(format!("{name} non-finite")));
            }
            if v < F::zero() {
                return Err(SignalError::InvalidParameter(format!("{name} < 0")));
            }
        }
        if !self.theta.is_finite() {
            return Err(SignalError::InvalidParameter("theta non-finite".into()));
        }
        Ok(())
    }
}

/// Laser-phase scan protocol for sample generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig<F> {
    /// Phase settings φ_las (radians in [0, 2π)), stepped in order.
    pub phases: Vec<F>,
    /// Repetitions per phase setting.
    pub repetitions: usize,
    /// Stepped scan when true; independent uniform φ₀ ∈ [0, 2π) when false.
    pub phase_stable: bool,
    /// RNG seed; identical seeds give bit-identical output.
    pub seed: u64,
}

impl<F: Real> ScanConfig<F> {
    /// `count` evenly spaced phases `2πj/count`, `repetitions` each.
    pub fn evenly_spaced(count: usize, repetitions: usize, phase_stable: bool, seed: u64) -> Self {
        let phases = (0..count)
            .map(|j| F::two_pi() * F::of(j as f64) / F::of(count as f64))
            .collect();
        Self {
            phases,
            repetitions,
            phase_stable,
            seed,
        }
    }

    /// Total shots in one full scan.
    pub fn shots(&self) -> usize {
        self.phases.len() * self.repetitions
    }

    /// Validates `P ≥ 1`, `R ≥ 1` and phase finiteness.
    pub fn validate(&self) -> Result<(), SignalError> {
        if self.phases.is_empty() {
            return Err(SignalError::EmptyInput("scan phases"));
        }
        if self.repetitions == 0 {
            return Err(SignalError::InvalidParameter("repetitions = 0".into()));
        }
        if self.phases.iter().any(|p| !p.is_finite()) {
            return Err(SignalError::InvalidParameter("non-finite phase".into()));
        }
        Ok(())
    }

    /// Phase of shot `i` in stepped mode: repetitions are nested inside each
    /// phase setting (scan-index major order).
    fn stepped_phase(&self, i: usize) -> F {
        self.phases[(i / self.repetitions) % self.phases.len()]
    }
}

// ── Sample generation ────────────────────────────────────────────────

/// Draws one baseline value.
#[inline]
pub(crate) fn draw_baseline<F: Real>(mean: F, sigma: F, rng: &mut impl Rng) -> F {
    if sigma > F::zero() {
        let n = Normal::new(mean.as_f64(), sigma.as_f64()).expect("validated sigma");
        F::of(n.sample(rng))
    } else {
        mean
    }
}

/// Draws one fringe phase φ₀ for shot `i` under the scan protocol.
#[inline]
pub(crate) fn draw_phase<F: Real>(scan: &ScanConfig<F>, i: usize, rng: &mut impl Rng) -> F {
    if scan.phase_stable {
        scan.stepped_phase(i)
    } else {
        F::of(rng.random_range(0.0..std::f64::consts::TAU))
    }
}

/// Generates `n` signal values `b + A·cos(φ₀ + θ_off)` using the given RNG
/// stream. Phases are stepped through the scan list (`phase_stable`) or drawn
/// uniformly on [0, 2π).
pub fn generate_samples_in<F: Real>(
    params: &SignalParams<F>,
    theta_off: F,
    scan: &ScanConfig<F>,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<F>, SignalError> {
    params.validate()?;
    scan.validate()?;
    if !theta_off.is_finite() {
        return Err(SignalError::InvalidParameter("theta_off non-finite".into()));
    }
    if n == 0 {
        return Err(SignalError::EmptyInput("sample count"));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let phi = draw_phase(scan, i, rng);
        let b = draw_baseline(params.baseline_mean, params.baseline_sigma, rng);
        out.push(b + params.amplitude * (phi + theta_off).cos());
    }
    Ok(out)
}

/// [`generate_samples_in`] with a fresh ChaCha8 stream seeded from
/// `scan.seed`; deterministic given the seed.
pub fn generate_samples<F: Real>(
    params: &SignalParams<F>,
    theta_off: F,
    scan: &ScanConfig<F>,
    n: usize,
) -> Result<Vec<F>, SignalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(scan.seed);
    generate_samples_in(params, theta_off, scan, n, &mut rng)
}

// ── Harmonic addition ────────────────────────────────────────────────

/// Relative amplitude below which a superposition counts as fully cancelled.
const CANCELLATION_EPS: f64 = 1e-12;

/// Combines `Σ λᵢ·cos(φ₀ + θᵢ)` into `A·cos(φ₀ + θ_off)`.
///
/// Returns `(A, θ_off)` with `A ≥ 0` and `θ_off ∈ (−π, π]`. Full cancellation
/// (`A` below 1e−12 of `Σ|λᵢ|`) returns `(0, 0)` by convention, since the
/// offset phase of a zero signal is undefined.
pub fn superpose_cosines<F: Real>(weights: &[F], phases: &[F]) -> Result<(F, F), SignalError> {
    if weights.is_empty() || phases.is_empty() {
        return Err(SignalError::EmptyInput("weights/phases"));
    }
    if weights.len() != phases.len() {
        return Err(SignalError::InvalidParameter(format!(
            "weights ({}) and phases ({}) differ in length",
            weights.len(),
            phases.len()
        )));
    }
    let mut x = F::zero(); // Σ λᵢ cos θᵢ
    let mut y = F::zero(); // Σ λᵢ sin θᵢ
    let mut scale = F::zero(); // Σ |λᵢ|
    for (&w, &p) in weights.iter().zip(phases) {
        if !w.is_finite() || !p.is_finite() {
            return Err(SignalError::InvalidParameter("non-finite term".into()));
        }
        x += w * p.cos();
        y += w * p.sin();
        scale += w.abs();
    }
    let amp = (x * x + y * y).sqrt();
    if amp <= scale * F::of(CANCELLATION_EPS) {
        return Ok((F::zero(), F::zero()));
    }
    Ok((amp, y.atan2(x)))
}

/// Combined amplitude of the three-component superposition:
/// `A₀·√(Δλ²·sin²(θ/2) + [λ₀ + (λ₊+λ₋)·cos(θ/2)]²)`.
///
/// Identical to [`superpose_cosines`] applied to weights `(λ₋, λ₀, λ₊)·A₀`
/// at phases `(−θ/2, 0, +θ/2)`.
pub fn amplitude_three_state<F: Real>(model: &MixtureModel<F>) -> Result<F, SignalError> {
    model.validate()?;
    let half = model.theta / F::of(2.0);
    let dl = model.delta_lambda();
    let along = model.lambda_0 + (model.lambda_plus + model.lambda_minus) * half.cos();
    let across = dl * half.sin();
    Ok(model.a0 * (across * across + along * along).sqrt())
}

/// Offset phase of the three-component superposition:
/// `atan2(Δλ·sin(θ/2), λ₀ + (λ₊+λ₋)·cos(θ/2))`, with the same cancellation
/// convention as [`superpose_cosines`].
pub fn theta_offset_three_state<F: Real>(model: &MixtureModel<F>) -> Result<F, SignalError> {
    model.validate()?;
    let half = model.theta / F::of(2.0);
    let dl = model.delta_lambda();
    let x = model.lambda_0 + (model.lambda_plus + model.lambda_minus) * half.cos();
    let y = dl * half.sin();
    let scale = model.lambda_0 + model.lambda_plus + model.lambda_minus;
    if (x * x + y * y).sqrt() <= scale * F::of(CANCELLATION_EPS) {
        return Ok(F::zero());
    }
    Ok(y.atan2(x))
}

// ── Coordinate operations ────────────────────────────────────────────

/// Projection of the bivariate point `(s₋, s₊)` onto the direction at angle
/// `α`: `s₋·cos α + s₊·sin α`. `α = π/4` gives the sum channel
/// `(s₊+s₋)/√2`; `α = 3π/4` gives the difference channel `(s₊−s₋)/√2`.
pub fn rotate_bivariate<F: Real>(s_minus: F, s_plus: F, alpha: F) -> F {
    s_minus * alpha.cos() + s_plus * alpha.sin()
}

/// Normalized population difference `(n₀ − n₁)/(n₀ + n₁) ∈ [−1, 1]`.
pub fn normalize_ports<F: Real>(n0: F, n1: F) -> Result<F, SignalError> {
    let total = n0 + n1;
    if !total.is_finite() {
        return Err(SignalError::InvalidParameter("non-finite counts".into()));
    }
    if total == F::zero() {
        return Err(SignalError::ZeroTotal);
    }
    Ok((n0 - n1) / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scan_one_phase(seed: u64) -> ScanConfig<f64> {
        ScanConfig {
            phases: vec![0.0],
            repetitions: 1,
            phase_stable: true,
            seed,
        }
    }

    #[test]
    fn noiseless_in_phase_samples_equal_amplitude() {
        let p = SignalParams {
            amplitude: 0.5,
            baseline_mean: 0.0,
            baseline_sigma: 0.0,
        };
        let v = generate_samples(&p, 0.0, &scan_one_phase(1), 10).unwrap();
        assert!(v.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn zero_amplitude_samples_equal_baseline() {
        let p = SignalParams {
            amplitude: 0.0,
            baseline_mean: 0.2,
            baseline_sigma: 0.0,
        };
        let scan = ScanConfig::<f64>::evenly_spaced(5, 3, true, 7);
        let v = generate_samples(&p, 1.3, &scan, 15).unwrap();
        assert!(v.iter().all(|&x| x == 0.2));
    }

    #[test]
    fn non_finite_parameters_rejected() {
        let p = SignalParams {
            amplitude: f64::NAN,
            baseline_mean: 0.0,
            baseline_sigma: 0.0,
        };
        assert!(matches!(
            generate_samples(&p, 0.0, &scan_one_phase(0), 1),
            Err(SignalError::InvalidParameter(_))
        ));
    }

    #[test]
    fn single_term_superposition_is_identity() {
        let (a, off) = superpose_cosines(&[1.0], &[0.3]).unwrap();
        assert_relative_eq!(a, 1.0, max_relative = 1e-15);
        assert_relative_eq!(off, 0.3, max_relative = 1e-15);
    }

    #[test]
    fn perfect_cancellation_returns_zero_by_convention() {
        let (a, off) = superpose_cosines(&[1.0, 1.0], &[0.0, std::f64::consts::PI]).unwrap();
        assert_eq!(a, 0.0);
        assert_eq!(off, 0.0);
    }

    #[test]
    fn empty_superposition_is_an_error() {
        assert_eq!(
            superpose_cosines::<f64>(&[], &[]),
            Err(SignalError::EmptyInput("weights/phases"))
        );
    }

    #[test]
    fn single_component_mixture_has_no_modulation() {
        for theta in [0.0, 1.0, std::f64::consts::PI, 5.0] {
            let m = MixtureModel {
                lambda_0: 1.0,
                lambda_plus: 0.0,
                lambda_minus: 0.0,
                a0: 0.79,
                theta,
            };
            assert_relative_eq!(amplitude_three_state(&m).unwrap(), 0.79, max_relative = 1e-15);
        }
    }

    #[test]
    fn balanced_two_state_vanishes_at_pi() {
        let m = MixtureModel::two_state(0.7, std::f64::consts::PI);
        assert!(amplitude_three_state(&m).unwrap().abs() < 1e-15);
    }

    #[test]
    fn pinned_three_state_amplitude() {
        // λ₀=0.42, Δλ=0.18 (λ₊=0.38, λ₋=0.20), A₀=0.79, θ=π:
        // A = 0.79·√(0.18² + 0.42²) = 0.360987645218
        let m = MixtureModel {
            lambda_0: 0.42,
            lambda_plus: 0.38,
            lambda_minus: 0.20,
            a0: 0.79,
            theta: std::f64::consts::PI,
        };
        assert_relative_eq!(
            amplitude_three_state(&m).unwrap(),
            0.360987645218,
            max_relative = 1e-10
        );
    }

    #[test]
    fn rotation_reproduces_sum_and_diff() {
        let (sm, sp) = (1.0f64, 1.0f64);
        assert_relative_eq!(
            rotate_bivariate(sm, sp, std::f64::consts::FRAC_PI_4),
            2f64.sqrt(),
            max_relative = 1e-15
        );
        assert!(rotate_bivariate(sm, sp, 3.0 * std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_relative_eq!(
            rotate_bivariate(0.3, -0.1, std::f64::consts::FRAC_PI_4),
            0.2 / 2f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn port_normalization() {
        assert_eq!(normalize_ports(100.0, 100.0).unwrap(), 0.0);
        assert_relative_eq!(normalize_ports(150.0, 50.0).unwrap(), 0.5);
        assert_eq!(normalize_ports(0.0, 0.0), Err(SignalError::ZeroTotal));
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        let p = SignalParams {
            amplitude: 0.8,
            baseline_mean: 0.1,
            baseline_sigma: 0.05,
        };
        let scan = ScanConfig::<f64>::evenly_spaced(4, 2, false, 42);
        let a = generate_samples(&p, 0.4, &scan, 64).unwrap();
        let b = generate_samples(&p, 0.4, &scan, 64).unwrap();
        assert_eq!(a, b);
    }
}
