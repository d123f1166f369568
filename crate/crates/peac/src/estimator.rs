//! Phase estimation from amplitude collapse: histogram-fit pipeline and
//! phase inversion.
//!
//! Per interrogation time, the signal histogram is fitted with the
//! blurred-arcsine density to extract the fringe amplitude. Superposed
//! channels modulate that amplitude with the differential phase θ — the sum
//! channel as `√2·A₀·|cos(θ/2)|`, the difference channel as
//! `√2·A₀·|sin(θ/2)|`, and the non-state-selective mixture per the
//! three-component law — so inverting the modulation recovers θ up to
//! branch, which series-level unwrapping resolves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{self, FitError, FitOptions};
use crate::float::Real;
use crate::histogram::{self, Histogram, HistogramError};
use crate::pdf::{self, PdfError, PdfParams};

/// Errors from the estimation pipeline.
#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("histogram: {0}")]
    Histogram(#[from] HistogramError),
    #[error("density: {0}")]
    Pdf(#[from] PdfError),
    #[error("fit: {0}")]
    Fit(#[from] FitError),
    /// Amplitude ratio exceeds 1 beyond the clamping tolerance.
    #[error("inconsistent amplitude: ratio {0} exceeds 1 beyond tolerance")]
    InconsistentAmplitude(f64),
    /// The amplitude equation carries no phase information.
    #[error("branch degenerate: {0}")]
    BranchDegenerate(String),
    /// Reference amplitude a0 = 0: phase undefined.
    #[error("undefined phase: reference amplitude is zero")]
    UndefinedPhase,
    /// A required channel is missing or unusable.
    #[error("incomplete dataset: {0}")]
    IncompleteDataset(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Ratios in `(1, 1 + CLAMP_TOL]` clamp silently before arccos/arcsin;
/// beyond that the amplitude is inconsistent with the model.
pub const CLAMP_TOL: f64 = 1e-6;

// ── Initial guesses ──────────────────────────────────────────────────

/// Count-drop fraction used to read the peak width off the histogram.
const DROP_FRACTION: f64 = 0.25;

/// `√(−1/(2·ln k))` for `k = 1/4`: converts the quarter-drop distance of a
/// Gaussian peak into its standard deviation.
pub const SIGMA_FROM_QUARTER_DROP: f64 = 0.6005612043932249;

/// Starting point for the density fit, with a confidence flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialGuess<F> {
    pub params: PdfParams<F>,
    /// Set when a fallback was needed (edge-bin maximum or no count drop);
    /// the guess is usable but less trustworthy.
    pub low_confidence: bool,
}

/// Reads starting parameters off the histogram shape.
///
/// The mean is the count-weighted bin-center mean. From the histogram
/// maximum, walking outward (away from the mean), the quarter-drop position
/// `s_k` is where the counts fall to 1/4 of the peak count; then
/// `σ = |s_max − s_k|·`[`SIGMA_FROM_QUARTER_DROP`] and
/// `A = |s_max − μ| + σ`.
///
/// The drop must be sustained (two consecutive bins at or below threshold)
/// so that a single outlier-thinned bin does not fake a crossing; isolated
/// dips are stepped over. The crossing position interpolates linearly
/// between the straddling bin centers and is floored at one bin width — a
/// narrower drop is unresolvable at the histogram's resolution, and an
/// unconfirmed or absent drop falls back to that same one-bin-width floor.
/// A maximum sitting at the outward boundary bin flips the search inward
/// and flags the guess low-confidence.
pub fn initial_guesses<F: Real>(h: &Histogram<F>) -> Result<InitialGuess<F>, EstimatorError> {
    h.validate()?;
    let centers = h.centers();
    let n = centers.len();
    let total = F::of(h.total as f64);
    let mut mu = F::zero();
    for (c, &count) in centers.iter().zip(&h.counts) {
        mu += *c * F::of(count as f64);
    }
    mu /= total;

    let mut peak = 0;
    for i in 1..n {
        if h.counts[i] > h.counts[peak] {
            peak = i;
        }
    }
    let s_max = centers[peak];
    let threshold = h.counts[peak] as f64 * DROP_FRACTION;

    let outward_right = s_max >= mu;
    let at_boundary = if outward_right { peak == n - 1 } else { peak == 0 };
    let (right, low_confidence) = if at_boundary {
        (!outward_right, true)
    } else {
        (outward_right, false)
    };

    // Distance in bins from the peak to the sustained quarter-drop crossing,
    // interpolated between the straddling bin centers.
    let step = |i: usize| -> Option<usize> {
        let next = if right { i + 1 } else { i.wrapping_sub(1) };
        (next < n).then_some(next)
    };
    let count = |i: usize| h.counts[i] as f64;
    let mut drop_bins: Option<f64> = None;
    let mut i = peak;
    while let Some(next) = step(i) {
        if count(next) > threshold {
            i = next;
            continue;
        }
        match step(next) {
            Some(confirm) if count(confirm) <= threshold => {
                let above = count(i);
                let t = (above - threshold) / (above - count(next));
                drop_bins = Some((peak.abs_diff(next) - 1) as f64 + t);
                break;
            }
            // Isolated dip: resume the walk beyond it.
            Some(confirm) => i = confirm,
            None => break,
        }
    }
    let sigma =
        h.bin_width() * F::of(drop_bins.unwrap_or(1.0).max(1.0) * SIGMA_FROM_QUARTER_DROP);
    let amplitude = (s_max - mu).abs() + sigma;
    Ok(InitialGuess {
        params: PdfParams::new(amplitude, mu, sigma),
        low_confidence,
    })
}

// ── Density fitting ──────────────────────────────────────────────────

/// Converged density fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdfFit<F> {
    pub params: PdfParams<F>,
    /// Sum of squared density residuals at the solution.
    pub residual: F,
    /// Optimizer iterations used.
    pub iterations: usize,
    /// Whether the simplex fallback was engaged.
    pub used_simplex: bool,
}

/// Fits the blurred-arcsine density to the histogram's bin-center density
/// estimates by bounded least squares (unweighted, matching curve-fit
/// convention; Poisson weighting is deliberately not applied).
///
/// `amplitude_bounds` restricts the fitted amplitude; `None` allows
/// `[0, data range]`. Non-convergence is an error carrying the best point.
pub fn fit_pdf<F: Real>(
    h: &Histogram<F>,
    guess: &PdfParams<F>,
    amplitude_bounds: Option<(F, F)>,
) -> Result<PdfFit<F>, EstimatorError> {
    h.validate()?;
    let centers = h.centers();
    let target = h.densities();
    let range = h.bin_edges[h.nbins()] - h.bin_edges[0];
    let (a_lo, a_hi) = match amplitude_bounds {
        Some((lo, hi)) => {
            if !(lo <= hi) || lo < F::zero() {
                return Err(EstimatorError::InvalidParameter(format!(
                    "amplitude bounds [{lo}, {hi}]"
                )));
            }
            (lo, hi)
        }
        None => (F::zero(), range),
    };
    // σ must stay positive for the density to exist; the floor is far below
    // any resolvable width.
    let sigma_floor = (h.bin_width() * F::of(0.02)).max(F::of(1e-12));
    let bounds = [
        (a_lo, a_hi),
        (h.bin_edges[0] - range, h.bin_edges[h.nbins()] + range),
        (sigma_floor, range),
    ];
    let p0 = [
        guess.amplitude.max(a_lo).min(a_hi),
        guess.mean,
        guess.sigma.max(sigma_floor).min(range),
    ];
    let mut model = Vec::with_capacity(centers.len());
    let report = fit::fit_least_squares(
        &p0,
        &bounds,
        &FitOptions::default(),
        |p: &[F], out: &mut Vec<F>| {
            let params = PdfParams::new(p[0], p[1], p[2]);
            if pdf::pdf_eval_many(&centers, &params, &mut model).is_err() {
                return false;
            }
            out.extend(model.iter().zip(&target).map(|(&m, &t)| m - t));
            true
        },
    )?;
    Ok(PdfFit {
        params: PdfParams::new(report.params[0], report.params[1], report.params[2]),
        residual: report.cost,
        iterations: report.iterations,
        used_simplex: report.used_simplex,
    })
}

/// Start point from histogram moments: the fringe model has
/// `Var(S) = A²/2 + σ²`, so the amplitude is read off the binned variance
/// once the width estimate is subtracted. Immune to an unresolved
/// inter-peak valley, which can fool the shape walk in [`initial_guesses`].
fn moment_guess<F: Real>(h: &Histogram<F>, sigma_hint: F) -> PdfParams<F> {
    let total = F::of(h.total as f64);
    let weighted = |f: &mut dyn FnMut(F) -> F| {
        h.centers()
            .iter()
            .zip(&h.counts)
            .map(|(&c, &n)| f(c) * F::of(n as f64))
            .sum::<F>()
            / total
    };
    let mean = weighted(&mut |c| c);
    let var = weighted(&mut |c| (c - mean) * (c - mean));
    // σ² ≤ Var for this family; capping the hint at the equal-split point
    // keeps the start's amplitude at least √Var even when the hint is
    // inflated, which is the failure this start exists to undo.
    let sigma = sigma_hint
        .min((var * F::of(0.5)).sqrt())
        .max(F::of(1e-12));
    let floor = h.bin_width() * F::of(0.5);
    let amp = ((var - sigma * sigma) * F::of(2.0)).max(floor * floor).sqrt();
    PdfParams::new(amp, mean, sigma)
}

/// [`fit_pdf`] from two deterministic starts: the caller's shape-based
/// guess and [`moment_guess`]. The lower residual wins; ties keep the
/// shape start.
///
/// The shape walk strands in a spurious minimum when the fringe's
/// inter-peak valley is unresolved (most visibly the flat pure-Gaussian
/// solution), while the moment start reads the amplitude off the variance
/// and lands in the true basin in exactly those cases. The pair covers
/// each other's blind spots at the cost of one extra local fit.
pub fn fit_pdf_multistart<F: Real>(
    h: &Histogram<F>,
    guess: &PdfParams<F>,
    amplitude_bounds: Option<(F, F)>,
) -> Result<PdfFit<F>, EstimatorError> {
    let first = fit_pdf(h, guess, amplitude_bounds);
    let second = fit_pdf(h, &moment_guess(h, guess.sigma), amplitude_bounds);
    match (first, second) {
        (Ok(a), Ok(b)) => Ok(if b.residual < a.residual { b } else { a }),
        (Ok(a), Err(_)) => Ok(a),
        (Err(_), Ok(b)) => Ok(b),
        (Err(e), Err(_)) => Err(e),
    }
}

// ── Channel suite ────────────────────────────────────────────────────

/// Density fits for the two ports and their rotated combinations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSuiteFit<F> {
    pub plus: PdfFit<F>,
    pub minus: PdfFit<F>,
    pub sum: PdfFit<F>,
    pub diff: PdfFit<F>,
    /// Reference single-channel amplitude `(A₊ + A₋)/2`.
    pub a0: F,
}

/// Full per-interrogation-time fitting procedure.
///
/// Fits the two port signals unconstrained, takes `A₀ = (A₊+A₋)/2`, then
/// fits the rotated sum and difference channels with amplitude restricted to
/// `[0, √2·A₀]` and the ports' mean fitted σ as the width guess (unless that
/// is below a port bin width, which would be unresolvable — then the
/// histogram-shape guess is kept).
pub fn fit_channel_suite<F: Real>(
    s_plus: &[F],
    s_minus: &[F],
) -> Result<ChannelSuiteFit<F>, EstimatorError> {
    if s_plus.is_empty() || s_minus.is_empty() {
        return Err(EstimatorError::IncompleteDataset(
            "both port channels are required".into(),
        ));
    }
    if s_plus.len() != s_minus.len() {
        return Err(EstimatorError::IncompleteDataset(format!(
            "port lengths differ: {} vs {}",
            s_plus.len(),
            s_minus.len()
        )));
    }
    let fit_port = |values: &[F]| -> Result<(PdfFit<F>, F), EstimatorError> {
        let h = histogram::bin(values, None)?;
        let guess = initial_guesses(&h)?;
        let fit = fit_pdf_multistart(&h, &guess.params, None)?;
        Ok((fit, h.bin_width()))
    };
    let (plus, bw_plus) = fit_port(s_plus)?;
    let (minus, bw_minus) = fit_port(s_minus)?;
    let a0 = (plus.params.amplitude + minus.params.amplitude) / F::of(2.0);
    let sigma_ports = (plus.params.sigma + minus.params.sigma) / F::of(2.0);
    let max_port_bw = bw_plus.max(bw_minus);

    let sqrt2 = F::of(2.0).sqrt();
    let inv_sqrt2 = F::one() / sqrt2;
    let rotated = |sign: F| -> Vec<F> {
        s_plus
            .iter()
            .zip(s_minus)
            .map(|(&p, &m)| (p + sign * m) * inv_sqrt2)
            .collect()
    };
    let fit_rotated = |values: &[F]| -> Result<PdfFit<F>, EstimatorError> {
        let h = histogram::bin(values, None)?;
        let mut guess = initial_guesses(&h)?.params;
        if sigma_ports >= max_port_bw {
            guess.sigma = sigma_ports;
        }
        fit_pdf_multistart(&h, &guess, Some((F::zero(), sqrt2 * a0)))
    };
    let sum = fit_rotated(&rotated(F::one()))?;
    let diff = fit_rotated(&rotated(-F::one()))?;
    Ok(ChannelSuiteFit {
        plus,
        minus,
        sum,
        diff,
        a0,
    })
}

// ── Phase inversion ──────────────────────────────────────────────────

/// Clamps `ratio` into [0, 1]; ratios within [`CLAMP_TOL`] above 1 clamp
/// silently, anything further is inconsistent.
fn clamp_unit<F: Real>(ratio: F) -> Result<F, EstimatorError> {
    if ratio > F::one() + F::of(CLAMP_TOL) {
        return Err(EstimatorError::InconsistentAmplitude(ratio.as_f64()));
    }
    Ok(ratio.min(F::one()).max(F::zero()))
}

/// Inverts the sum-channel modulation `A_sum = √2·A₀·|cos(θ/2)|`:
/// returns `2·arccos(A_sum/(√2·A₀))` in `[0, π]`.
pub fn reconstruct_theta_two_state<F: Real>(a_sum: F, a0: F) -> Result<F, EstimatorError> {
    if a0 <= F::zero() {
        return Err(EstimatorError::UndefinedPhase);
    }
    if a_sum < F::zero() {
        return Err(EstimatorError::InvalidParameter("negative amplitude".into()));
    }
    let ratio = clamp_unit(a_sum / (F::of(2.0).sqrt() * a0))?;
    Ok(F::of(2.0) * ratio.acos())
}

/// Inverts the difference-channel modulation `A_diff = √2·A₀·|sin(θ/2)|`:
/// returns `2·arcsin(A_diff/(√2·A₀))` in `[0, π]`.
pub fn reconstruct_theta_diff<F: Real>(a_diff: F, a0: F) -> Result<F, EstimatorError> {
    if a0 <= F::zero() {
        return Err(EstimatorError::UndefinedPhase);
    }
    if a_diff < F::zero() {
        return Err(EstimatorError::InvalidParameter("negative amplitude".into()));
    }
    let ratio = clamp_unit(a_diff / (F::of(2.0).sqrt() * a0))?;
    Ok(F::of(2.0) * ratio.asin())
}

/// Relative threshold below which the quadratic coefficient of the
/// three-component inversion counts as degenerate.
const DEGENERACY_TOL: f64 = 1e-12;

/// Inverts the three-component amplitude law for `c = cos(θ/2)`.
///
/// With `L = λ₊ + λ₋` and `R = (a_all/a0)²`, the law
/// `R = Δλ²·(1−c²) + (λ₀ + L·c)²` is quadratic in `c`:
/// `(L² − Δλ²)·c² + 2·λ₀·L·c + (λ₀² + Δλ² − R) = 0`.
/// Returns `θ = 2·arccos(c)` for each real root with `|c| ≤ 1` (the usual
/// clamping tolerance applies per branch), ordered `[+√ branch, −√ branch]`;
/// a branch whose root lies outside the clamp window is `None`. Branch
/// selection belongs to series-level continuity logic, never this function.
pub fn reconstruct_theta_three_state<F: Real>(
    a_all: F,
    lambda_0: F,
    lambda_plus: F,
    lambda_minus: F,
    a0: F,
) -> Result<[Option<F>; 2], EstimatorError> {
    if a0 <= F::zero() {
        return Err(EstimatorError::UndefinedPhase);
    }
    if a_all < F::zero() {
        return Err(EstimatorError::InvalidParameter("negative amplitude".into()));
    }
    let l = lambda_plus + lambda_minus;
    let dl = lambda_plus - lambda_minus;
    let quad_coeff = l * l - dl * dl;
    let scale = (l * l).max(dl * dl).max(F::one());
    if quad_coeff.abs() <= scale * F::of(DEGENERACY_TOL) {
        return Err(EstimatorError::BranchDegenerate(format!(
            "(λ₊+λ₋)² − Δλ² = {quad_coeff}: amplitude carries no phase information"
        )));
    }
    let r = (a_all / a0) * (a_all / a0);
    let half_b = lambda_0 * l;
    let c_term = lambda_0 * lambda_0 + dl * dl - r;
    let mut disc = half_b * half_b - quad_coeff * c_term;
    let disc_scale = (half_b * half_b).abs().max((quad_coeff * c_term).abs());
    if disc < F::zero() {
        if disc >= -disc_scale.max(F::one()) * F::of(1e-12) {
            disc = F::zero();
        } else {
            return Err(EstimatorError::InconsistentAmplitude(r.as_f64()));
        }
    }
    let root = disc.sqrt();
    let branch = |sign: F| -> Option<F> {
        let c = (-half_b + sign * root) / quad_coeff;
        if c.abs() > F::one() + F::of(CLAMP_TOL) {
            return None;
        }
        Some(F::of(2.0) * c.min(F::one()).max(-F::one()).acos())
    };
    let branches = [branch(F::one()), branch(-F::one())];
    if branches.iter().all(|b| b.is_none()) {
        return Err(EstimatorError::InconsistentAmplitude(r.as_f64()));
    }
    Ok(branches)
}

// ── Series unwrapping ────────────────────────────────────────────────

/// Resolves the cosine-inversion branch ambiguity along an ordered series.
///
/// Each wrapped value `w` admits the branch set `{2πm ± w}`. The first point
/// takes its branch in `[0, π]`, the second the branch nearest the first,
/// and every later point the branch nearest the linear prediction
/// `2·θ[i−1] − θ[i−2]`, which follows locally quadratic growth through fold
/// points where plain nearest-to-previous selection fails. Ties resolve to
/// the smaller candidate.
pub fn unwrap<F: Real>(series: &[F]) -> Vec<F> {
    let two_pi = F::two_pi();
    let nearest = |w: F, target: F| -> F {
        let mut best = F::nan();
        let mut best_dist = F::infinity();
        for sign in [F::one(), -F::one()] {
            let m = ((target - sign * w) / two_pi).round();
            let cand = two_pi * m + sign * w;
            let dist = (cand - target).abs();
            if dist < best_dist || (dist == best_dist && cand < best) {
                best = cand;
                best_dist = dist;
            }
        }
        best
    };
    let mut out = Vec::with_capacity(series.len());
    for (i, &w) in series.iter().enumerate() {
        let value = match i {
            0 => {
                // Anchor into [0, π].
                let folded = (w / two_pi - (w / two_pi).round()).abs() * two_pi;
                folded.min(two_pi - folded)
            }
            1 => nearest(w, out[0]),
            _ => nearest(w, F::of(2.0) * out[i - 1] - out[i - 2]),
        };
        out.push(value);
    }
    out
}
