//! Series-level acceleration extraction from the amplitude-collapse curve.
//!
//! Over a grid of interrogation times the non-state-selective channel's
//! fringe amplitude follows `A(θ(T))` with `θ(T) = 2·k·a·T²·(1 + γτ/T)` and
//! the three-component modulation law. Two routes recover the acceleration:
//! the collapse-curve fit adjusts `(a_ext, λ₀, Δλ, A₀)` against the whole
//! amplitude series, and the pointwise route inverts each amplitude into
//! phase candidates which a branch-resolved weighted line fit collapses onto
//! `θ = a_ext · x(T)`.

use serde::{Deserialize, Serialize};

use crate::estimator::EstimatorError;
use crate::fit::{self, FitOptions};
use crate::float::Real;
use crate::pulse::PulseConfig;

/// Converged collapse-curve fit. `Λ = 1` by convention: the
/// non-state-selective signal is a weighted average of the components, so
/// the weights `(λ₀, λ₊, λ₋)` sum to 1 and enter through `λ₀` and
/// `Δλ = λ₊ − λ₋` alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseFitResult<F> {
    /// External acceleration, m/s².
    pub a_ext_m_per_s2: F,
    /// Weight of the undiffracted component.
    pub lambda0: F,
    /// Port-weight imbalance `λ₊ − λ₋` (non-negative representative: the
    /// model depends on it only through its square).
    pub delta_lambda: F,
    /// Single-component fringe amplitude.
    pub a0: F,
    pub converged: bool,
    /// Sum of squared amplitude residuals at the solution.
    pub residual: F,
}

/// Fringe amplitude of the non-state-selective channel at differential
/// phase `theta`:
/// `A₀·√((Δλ·sin(θ/2))² + (λ₀ + (1−λ₀)·cos(θ/2))²)`.
pub fn model_amplitude<F: Real>(lambda0: F, delta_lambda: F, a0: F, theta: F) -> F {
    let half = theta * F::of(0.5);
    let s = delta_lambda * half.sin();
    let c = lambda0 + (F::one() - lambda0) * half.cos();
    a0 * (s * s + c * c).sqrt()
}

/// Derivative of [`model_amplitude`] with respect to `theta`; 0 at the
/// amplitude extrema where the inverse carries no phase information.
pub fn model_amplitude_slope<F: Real>(lambda0: F, delta_lambda: F, a0: F, theta: F) -> F {
    let half = theta * F::of(0.5);
    let s = half.sin();
    let c = half.cos();
    let l = F::one() - lambda0;
    let g = delta_lambda * delta_lambda * s * s + {
        let v = lambda0 + l * c;
        v * v
    };
    if !(g > F::zero()) {
        return F::zero();
    }
    a0 * (delta_lambda * delta_lambda * s * c - (lambda0 + l * c) * l * s)
        / (F::of(2.0) * g.sqrt())
}

// ── Collapse-curve fit ───────────────────────────────────────────────

/// Scan resolution of the coarse acceleration bracket.
const SCAN_STEPS: usize = 1200;

/// Linear regression of `A²` on `(1, c, c²)` with `c = cos(θ(T; a)/2)`;
/// returns the coefficients and the sum of squared `A²` residuals.
fn quadratic_regression<F: Real>(xs: &[F], amps_sq: &[F], a: F) -> Option<([F; 3], F)> {
    let mut m = [F::zero(); 9];
    let mut rhs = [F::zero(); 3];
    let mut basis = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(amps_sq) {
        let c = (a * x * F::of(0.5)).cos();
        let row = [F::one(), c, c * c];
        for i in 0..3 {
            for j in 0..3 {
                m[i * 3 + j] += row[i] * row[j];
            }
            rhs[i] += row[i] * y;
        }
        basis.push(row);
    }
    let mut mm = m;
    let mut sol = rhs;
    if !fit::solve_dense(3, &mut mm, &mut sol) {
        return None;
    }
    let mut sse = F::zero();
    for (row, &y) in basis.iter().zip(amps_sq) {
        let pred = sol[0] * row[0] + sol[1] * row[1] + sol[2] * row[2];
        let r = y - pred;
        sse += r * r;
    }
    Some(([sol[0], sol[1], sol[2]], sse))
}

/// Parameter candidates `(λ₀, Δλ, A₀)` consistent with regression
/// coefficients `β` of `A² = β₀ + β₁·c + β₂·c²`, from
/// `β₀ = A₀²(Δλ² + λ₀²)`, `β₁ = 2A₀²λ₀(1−λ₀)`, `β₂ = A₀²((1−λ₀)² − Δλ²)`.
fn params_from_beta<F: Real>(beta: &[F; 3]) -> Vec<(F, F, F)> {
    let (b0, b1, b2) = (beta[0], beta[1], beta[2]);
    // u = A₀²Δλ² solves u² − (β₀−β₂)·u + (β₁²/4 − β₀β₂) = 0.
    let p = b0 - b2;
    let disc = (b0 + b2) * (b0 + b2) - b1 * b1;
    if disc < F::zero() {
        return Vec::new();
    }
    let root = disc.sqrt();
    let mut out = Vec::new();
    for u in [(p - root) * F::of(0.5), (p + root) * F::of(0.5)] {
        let u = u.max(F::zero());
        let v = (b0 - u).max(F::zero());
        let w = b2 + u;
        if !(w > F::zero()) {
            continue;
        }
        // v/w = (λ₀/(1−λ₀))², w = A₀²(1−λ₀)².
        let r = (v / w).sqrt();
        let l = F::one() / (F::one() + r);
        let a0 = w.sqrt() / l;
        if !a0.is_finite() || !(a0 > F::zero()) {
            continue;
        }
        let lambda0 = r / (F::one() + r);
        let delta_lambda = u.sqrt() / a0;
        out.push((lambda0, delta_lambda.min(F::one()), a0));
    }
    out
}

/// Fits the collapse curve `A(θ(T; a_ext))` to measured `(T, A_all)` pairs.
///
/// `template` supplies the pulse constants (`k_eff`, `tau`, `gamma`); its
/// `a_ext` is ignored. The acceleration axis is bracketed from the first
/// interior minimum of the measured amplitudes (the collapse dip pins the
/// phase scale to within a factor of a few), scanned coarsely with a linear
/// subfit of the mixture parameters at each candidate, and the best
/// candidate is polished by bounded least squares over all four parameters.
pub fn fit_collapse_curve<F: Real>(
    series: &[(F, F)],
    template: &PulseConfig<F>,
) -> Result<CollapseFitResult<F>, EstimatorError> {
    if series.len() < 4 {
        return Err(EstimatorError::InvalidParameter(format!(
            "collapse fit needs at least 4 points, got {}",
            series.len()
        )));
    }
    let mut xs = Vec::with_capacity(series.len());
    let mut amps = Vec::with_capacity(series.len());
    let mut amps_sq = Vec::with_capacity(series.len());
    for &(t, a) in series {
        if !t.is_finite() || !a.is_finite() || t <= F::zero() || a < F::zero() {
            return Err(EstimatorError::InvalidParameter(format!(
                "bad series point (T = {t}, A = {a})"
            )));
        }
        let x = template
            .phase_per_unit_acceleration(t)
            .map_err(|e| EstimatorError::InvalidParameter(e.to_string()))?;
        xs.push(x);
        amps.push(a);
        amps_sq.push(a * a);
    }
    let max_amp = amps.iter().cloned().fold(F::zero(), F::max);
    if !(max_amp > F::zero()) {
        return Err(EstimatorError::InvalidParameter(
            "all amplitudes are zero".into(),
        ));
    }

    // Anchor: the first interior minimum of A(T) sits at a phase in
    // (0, 2π]; absent one, the series end bounds the reached phase.
    let mut order: Vec<usize> = (0..series.len()).collect();
    order.sort_by(|&i, &j| series[i].0.partial_cmp(&series[j].0).unwrap());
    let mut anchor_x = xs[*order.last().unwrap()];
    for w in order.windows(3) {
        let (a, b, c) = (amps[w[0]], amps[w[1]], amps[w[2]]);
        if b <= a && b <= c {
            anchor_x = xs[w[1]];
            break;
        }
    }
    let a_lo = F::of(0.5) * F::pi() / anchor_x;
    let a_hi = F::of(2.5) * F::pi() / anchor_x;

    let mut best: Option<(F, F)> = None;
    for i in 0..=SCAN_STEPS {
        let a = a_lo + (a_hi - a_lo) * F::of(i as f64 / SCAN_STEPS as f64);
        if let Some((_, sse)) = quadratic_regression(&xs, &amps_sq, a) {
            match best {
                Some((_, s)) if s <= sse => {}
                _ => best = Some((a, sse)),
            }
        }
    }
    let (a_scan, _) = best.ok_or_else(|| {
        EstimatorError::InvalidParameter("acceleration scan found no usable candidate".into())
    })?;
    let (beta, _) = quadratic_regression(&xs, &amps_sq, a_scan).ok_or_else(|| {
        EstimatorError::InvalidParameter("mixture subfit is singular at the scan optimum".into())
    })?;
    let mut starts = params_from_beta(&beta);
    if starts.is_empty() {
        // Marginal regression: fall back to a balanced mixture.
        starts.push((F::of(0.5), F::zero(), max_amp));
    }

    let bounds = [
        (a_scan * F::of(0.4), a_scan * F::of(2.5)),
        (F::zero(), F::one()),
        (F::zero(), F::one()),
        (F::of(1e-12), max_amp * F::of(4.0)),
    ];
    let opts = FitOptions::default();
    let mut solution: Option<(F, [F; 4])> = None;
    for (lambda0, delta_lambda, a0) in starts {
        let p0 = [
            a_scan,
            lambda0.max(F::zero()).min(F::one()),
            delta_lambda.max(F::zero()).min(F::one()),
            a0.max(bounds[3].0).min(bounds[3].1),
        ];
        let report = fit::fit_least_squares(&p0, &bounds, &opts, |p: &[F], out: &mut Vec<F>| {
            for (&x, &meas) in xs.iter().zip(&amps) {
                out.push(model_amplitude(p[1], p[2], p[3], p[0] * x) - meas);
            }
            true
        });
        if let Ok(r) = report {
            match solution {
                Some((cost, _)) if cost <= r.cost => {}
                _ => solution = Some((r.cost, [r.params[0], r.params[1], r.params[2], r.params[3]])),
            }
        }
    }
    let (residual, p) = solution.ok_or(EstimatorError::Fit(fit::FitError::DidNotConverge {
        best: Vec::new(),
        cost: f64::INFINITY,
        iterations: 0,
    }))?;
    Ok(CollapseFitResult {
        a_ext_m_per_s2: p[0],
        lambda0: p[1],
        delta_lambda: p[2],
        a0: p[3],
        converged: true,
        residual,
    })
}

// ── Pointwise route ──────────────────────────────────────────────────

/// Roots of the pointwise inversion further than this beyond `[−1, 1]` are
/// spurious; closer overshoots clamp to the nearest extremum (noise around
/// an amplitude extremum pushes the physical root slightly out of range).
const SERIES_ROOT_SLACK: f64 = 0.35;

/// Weight cap, in multiples of the median weight, limiting the dominance of
/// the most phase-sensitive points.
const WEIGHT_CAP_RATIO: f64 = 50.0;

/// Branch-selection refinement rounds after the global scan.
const REFINE_ROUNDS: usize = 3;

/// Acceleration recovered by pointwise phase inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseFit<F> {
    pub a_ext_m_per_s2: F,
    /// Branch-resolved phase per input point, in input order.
    pub thetas: Vec<F>,
}

/// Pointwise phase candidates for one measured amplitude: both quadratic
/// roots in `cos(θ/2)` (clamped per the series policy), unfolded into the
/// 4π-periodic families `4πm ± 2·arccos(c)` up to `theta_max`.
fn phase_candidates<F: Real>(
    ratio_sq: F,
    lambda0: F,
    delta_lambda: F,
    theta_max: F,
    out: &mut Vec<F>,
) {
    out.clear();
    let l = F::one() - lambda0;
    let quad = l * l - delta_lambda * delta_lambda;
    let lin = lambda0 * l;
    let cst = lambda0 * lambda0 + delta_lambda * delta_lambda - ratio_sq;
    let slack = F::of(1.0 + SERIES_ROOT_SLACK);
    let mut roots: Vec<F> = Vec::with_capacity(2);
    if quad.abs() <= (l * l + delta_lambda * delta_lambda) * F::of(1e-12) {
        // Degenerate quadratic: a single linear root.
        if lin.abs() > F::zero() {
            roots.push(-cst / (F::of(2.0) * lin));
        }
    } else {
        let disc = (lin * lin - quad * cst).max(F::zero());
        let root = disc.sqrt();
        roots.push((-lin + root) / quad);
        roots.push((-lin - root) / quad);
    }
    for c in roots {
        if !c.is_finite() || c.abs() > slack {
            continue;
        }
        let base = c.max(-F::one()).min(F::one()).acos() * F::of(2.0);
        let mut m = 0usize;
        loop {
            let center = F::two_pi() * F::of(2.0 * m as f64);
            let lo = center - base;
            let hi = center + base;
            if lo > theta_max && hi > theta_max {
                break;
            }
            if lo >= F::zero() && lo <= theta_max {
                out.push(lo);
            }
            if hi <= theta_max && hi > lo {
                out.push(hi);
            }
            m += 1;
        }
    }
}

/// Re-estimates the acceleration by pointwise inversion of an amplitude
/// series with known mixture parameters.
///
/// Every amplitude yields a small set of phase candidates (quadratic
/// inversion, both branches, all reachable 4π periods). A global scan of
/// `a` over `[0.5, 2]·a_guess` selects per-point candidates nearest the
/// line `θ = a·x(T)` and minimizes their weighted squared residuals, with
/// weights proportional to the squared amplitude-phase slope (capped):
/// points near amplitude extrema carry almost no phase information. The
/// winning branch assignment is refined by alternating weighted
/// least-squares line fits and reselection.
pub fn fit_acceleration_pointwise<F: Real>(
    series: &[(F, F)],
    lambda0: F,
    delta_lambda: F,
    a0: F,
    a_guess: F,
    template: &PulseConfig<F>,
) -> Result<PointwiseFit<F>, EstimatorError> {
    if series.is_empty() {
        return Err(EstimatorError::InvalidParameter(
            "empty amplitude series".into(),
        ));
    }
    if !(a0 > F::zero()) {
        return Err(EstimatorError::UndefinedPhase);
    }
    if !(a_guess > F::zero()) || !a_guess.is_finite() {
        return Err(EstimatorError::InvalidParameter(format!(
            "a_guess must be positive and finite, got {a_guess}"
        )));
    }
    let l = F::one() - lambda0;
    if (l * l - delta_lambda * delta_lambda).abs()
        <= (l * l + delta_lambda * delta_lambda) * F::of(1e-12)
        && (lambda0 * l).abs() <= F::of(1e-12)
    {
        return Err(EstimatorError::BranchDegenerate(
            "mixture weights carry no phase information".into(),
        ));
    }

    let a_lo = a_guess * F::of(0.5);
    let a_hi = a_guess * F::of(2.0);
    let mut xs = Vec::with_capacity(series.len());
    for &(t, a) in series {
        if !t.is_finite() || !a.is_finite() || t <= F::zero() || a < F::zero() {
            return Err(EstimatorError::InvalidParameter(format!(
                "bad series point (T = {t}, A = {a})"
            )));
        }
        let x = template
            .phase_per_unit_acceleration(t)
            .map_err(|e| EstimatorError::InvalidParameter(e.to_string()))?;
        xs.push(x);
    }
    let x_max = xs.iter().cloned().fold(F::zero(), F::max);
    let theta_max = a_hi * x_max + F::two_pi();

    // Candidate phases and their information weights, per point.
    let mut candidates: Vec<Vec<F>> = Vec::with_capacity(series.len());
    let mut weights: Vec<Vec<F>> = Vec::with_capacity(series.len());
    let mut scratch = Vec::new();
    let mut all_weights = Vec::new();
    for &(_, amp) in series {
        let ratio = amp / a0;
        phase_candidates(ratio * ratio, lambda0, delta_lambda, theta_max, &mut scratch);
        if scratch.is_empty() {
            return Err(EstimatorError::InconsistentAmplitude((amp / a0).as_f64()));
        }
        let w: Vec<F> = scratch
            .iter()
            .map(|&th| {
                let s = model_amplitude_slope(lambda0, delta_lambda, a0, th);
                s * s
            })
            .collect();
        all_weights.extend(w.iter().cloned());
        candidates.push(scratch.clone());
        weights.push(w);
    }
    all_weights.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = all_weights[all_weights.len() / 2].max(F::of(1e-300));
    let cap = median * F::of(WEIGHT_CAP_RATIO);
    for w in weights.iter_mut() {
        for v in w.iter_mut() {
            *v = (*v).min(cap);
        }
    }

    // Nearest candidate to θ = a·x per point; weighted SSE of the winners.
    let select = |a: F| -> (F, Vec<usize>) {
        let mut sse = F::zero();
        let mut picks = Vec::with_capacity(xs.len());
        for (i, &x) in xs.iter().enumerate() {
            let target = a * x;
            let mut best_j = 0;
            let mut best_d = F::infinity();
            for (j, &th) in candidates[i].iter().enumerate() {
                let d = (th - target).abs();
                if d < best_d {
                    best_d = d;
                    best_j = j;
                }
            }
            sse += weights[i][best_j] * best_d * best_d;
            picks.push(best_j);
        }
        (sse, picks)
    };

    let mut best_a = a_guess;
    let mut best_sse = F::infinity();
    for i in 0..=SCAN_STEPS {
        let a = a_lo + (a_hi - a_lo) * F::of(i as f64 / SCAN_STEPS as f64);
        let (sse, _) = select(a);
        if sse < best_sse {
            best_sse = sse;
            best_a = a;
        }
    }

    let mut a = best_a;
    for _ in 0..REFINE_ROUNDS {
        let (_, picks) = select(a);
        let mut num = F::zero();
        let mut den = F::zero();
        for (i, &j) in picks.iter().enumerate() {
            let w = weights[i][j];
            num += w * candidates[i][j] * xs[i];
            den += w * xs[i] * xs[i];
        }
        if !(den > F::zero()) {
            return Err(EstimatorError::BranchDegenerate(
                "all selected candidates carry zero weight".into(),
            ));
        }
        a = num / den;
    }
    let (_, picks) = select(a);
    let thetas = picks
        .iter()
        .enumerate()
        .map(|(i, &j)| candidates[i][j])
        .collect();
    Ok(PointwiseFit {
        a_ext_m_per_s2: a,
        thetas,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    use super::*;
    use crate::pulse;

    fn paper_template() -> PulseConfig<f64> {
        PulseConfig::new(0.0, 100e-6, 2e-3)
    }

    fn t_grid(n: usize) -> Vec<f64> {
        pulse::linspace(1e-3, 3e-3, n)
    }

    fn synthetic_series(
        a_ext: f64,
        lambda0: f64,
        delta_lambda: f64,
        a0: f64,
        n: usize,
    ) -> Vec<(f64, f64)> {
        let cfg = PulseConfig::new(a_ext, 100e-6, 2e-3);
        t_grid(n)
            .into_iter()
            .map(|t| {
                let theta = cfg.theta_at(t).unwrap();
                (t, model_amplitude(lambda0, delta_lambda, a0, theta))
            })
            .collect()
    }

    #[test]
    fn model_amplitude_matches_superposition() {
        // Same law as the general three-component superposition with
        // λ± = (1 − λ₀ ± Δλ)/2.
        let (lambda0, delta_lambda, a0) = (0.42, 0.18, 0.79);
        let model = crate::signal::MixtureModel {
            lambda_0: lambda0,
            lambda_plus: (1.0 - lambda0 + delta_lambda) / 2.0,
            lambda_minus: (1.0 - lambda0 - delta_lambda) / 2.0,
            a0,
            theta: 0.0,
        };
        for i in 0..50 {
            let theta = i as f64 * 0.25;
            let mut m = model;
            m.theta = theta;
            assert_abs_diff_eq!(
                model_amplitude(lambda0, delta_lambda, a0, theta),
                crate::signal::amplitude_three_state(&m).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn slope_matches_finite_differences() {
        let (lambda0, delta_lambda, a0) = (0.42, 0.18, 0.79);
        for i in 1..60 {
            let theta = i as f64 * 0.2;
            let h = 1e-6;
            let numeric = (model_amplitude(lambda0, delta_lambda, a0, theta + h)
                - model_amplitude(lambda0, delta_lambda, a0, theta - h))
                / (2.0 * h);
            assert_abs_diff_eq!(
                model_amplitude_slope(lambda0, delta_lambda, a0, theta),
                numeric,
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn noiseless_collapse_fit_recovers_parameters() {
        let truth = (0.0322, 0.42, 0.18, 0.79);
        let series = synthetic_series(truth.0, truth.1, truth.2, truth.3, 21);
        let fit = fit_collapse_curve(&series, &paper_template()).unwrap();
        assert!(fit.converged);
        assert!(((fit.a_ext_m_per_s2 - truth.0) / truth.0).abs() < 1e-6);
        assert!(((fit.lambda0 - truth.1) / truth.1).abs() < 1e-6);
        assert!(((fit.delta_lambda - truth.2) / truth.2).abs() < 1e-6);
        assert!(((fit.a0 - truth.3) / truth.3).abs() < 1e-6);
    }

    #[test]
    fn one_percent_noise_keeps_acceleration_within_one_percent() {
        let truth = (0.0322, 0.42, 0.18, 0.79);
        let clean = synthetic_series(truth.0, truth.1, truth.2, truth.3, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut errs = Vec::new();
        for _ in 0..100 {
            let noisy: Vec<(f64, f64)> = clean
                .iter()
                .map(|&(t, a)| (t, a * (1.0 + noise.sample(&mut rng))))
                .collect();
            let fit = fit_collapse_curve(&noisy, &paper_template()).unwrap();
            errs.push(((fit.a_ext_m_per_s2 - truth.0) / truth.0).abs());
        }
        let mean_err = errs.iter().sum::<f64>() / errs.len() as f64;
        let max_err = errs.iter().cloned().fold(0.0, f64::max);
        assert!(mean_err < 0.01, "mean relative error {mean_err}");
        assert!(max_err < 0.01, "max relative error {max_err}");
    }

    #[test]
    fn balanced_mixture_fits_delta_lambda_near_zero() {
        let series = synthetic_series(0.0322, 0.42, 0.0, 0.79, 21);
        let fit = fit_collapse_curve(&series, &paper_template()).unwrap();
        assert!(fit.delta_lambda.abs() < 1e-4, "Δλ = {}", fit.delta_lambda);
        assert!(((fit.a_ext_m_per_s2 - 0.0322) / 0.0322).abs() < 1e-6);
    }

    #[test]
    fn too_short_series_is_rejected() {
        let series = synthetic_series(0.0322, 0.42, 0.18, 0.79, 3);
        assert!(matches!(
            fit_collapse_curve(&series, &paper_template()),
            Err(EstimatorError::InvalidParameter(_))
        ));
    }

    #[test]
    fn pointwise_route_recovers_acceleration_noiseless() {
        let truth = (0.0322, 0.42, 0.18, 0.79);
        let series = synthetic_series(truth.0, truth.1, truth.2, truth.3, 21);
        let fit = fit_acceleration_pointwise(
            &series,
            truth.1,
            truth.2,
            truth.3,
            truth.0 * 1.3,
            &paper_template(),
        )
        .unwrap();
        assert!(((fit.a_ext_m_per_s2 - truth.0) / truth.0).abs() < 1e-9);
        // Reconstructed phases sit on the model line.
        let cfg = PulseConfig::new(truth.0, 100e-6, 2e-3);
        for (&(t, _), &th) in series.iter().zip(&fit.thetas) {
            assert_abs_diff_eq!(th, cfg.theta_at(t).unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn pointwise_route_tolerates_amplitude_noise() {
        let truth = (0.0322, 0.42, 0.18, 0.79);
        let clean = synthetic_series(truth.0, truth.1, truth.2, truth.3, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.008).unwrap();
        let mut max_err = 0.0f64;
        for _ in 0..100 {
            let noisy: Vec<(f64, f64)> = clean
                .iter()
                .map(|&(t, a)| (t, (a + noise.sample(&mut rng)).max(0.0)))
                .collect();
            let fit = fit_acceleration_pointwise(
                &noisy,
                truth.1,
                truth.2,
                truth.3,
                truth.0 * 0.85,
                &paper_template(),
            )
            .unwrap();
            max_err = max_err.max(((fit.a_ext_m_per_s2 - truth.0) / truth.0).abs());
        }
        assert!(max_err < 0.01, "max relative error {max_err}");
    }

    #[test]
    fn pointwise_route_rejects_uninformative_mixture() {
        let series = vec![(1e-3, 0.5), (2e-3, 0.5)];
        assert!(matches!(
            fit_acceleration_pointwise(&series, 1.0, 0.0, 0.8, 0.03, &paper_template()),
            Err(EstimatorError::BranchDegenerate(_))
        ));
    }
}
