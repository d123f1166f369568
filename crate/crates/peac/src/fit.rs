//! Bounded nonlinear least squares.
//!
//! Levenberg-Marquardt with box projection: steps are solved from the damped
//! normal equations and clamped into the feasible box. Derivatives are
//! numerical central differences with step `max(1e−6, 1e−4·|p|)`, and
//! sample points are clamped into the box (degrading to one-sided
//! differences at a bound), so the objective is never evaluated outside its
//! domain. The fitted densities are continuous but have boundary kinks (the
//! amplitude enters through |·|-like structure), so a stalled LM run is
//! restarted with a derivative-free Nelder-Mead simplex before giving up.

use thiserror::Error;

use crate::float::Real;

/// Errors from least-squares fitting.
#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    /// No convergence within the iteration budget; carries the best point.
    #[error("fit did not converge after {iterations} iterations (cost {cost:.6e})")]
    DidNotConverge {
        /// Best parameters found, as `f64`.
        best: Vec<f64>,
        /// Sum of squared residuals at `best`.
        cost: f64,
        iterations: usize,
    },
    /// Inconsistent dimensions or invalid bounds.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Tuning knobs for [`fit_least_squares`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Outer Levenberg-Marquardt iteration budget.
    pub max_iterations: usize,
    /// Relative cost-decrease threshold for convergence.
    pub ftol: f64,
    /// Relative step-size threshold for convergence.
    pub xtol: f64,
    /// Absolute central-difference step floor.
    pub diff_step_abs: f64,
    /// Relative central-difference step.
    pub diff_step_rel: f64,
    /// Restart a stalled run with a Nelder-Mead simplex.
    pub simplex_restart: bool,
    /// Simplex iteration budget.
    pub simplex_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 120,
            ftol: 1e-10,
            xtol: 1e-10,
            diff_step_abs: 1e-6,
            diff_step_rel: 1e-4,
            simplex_restart: true,
            simplex_iterations: 400,
        }
    }
}

/// Fit result.
#[derive(Debug, Clone)]
pub struct FitReport<F> {
    /// Fitted parameters, inside the bounds.
    pub params: Vec<F>,
    /// Sum of squared residuals.
    pub cost: F,
    /// Levenberg-Marquardt iterations used (all passes).
    pub iterations: usize,
    /// Whether a simplex restart was needed.
    pub used_simplex: bool,
}

/// Cost far above anything reachable; marks failed evaluations.
const BAD_COST: f64 = 1e300;

#[inline]
fn clamp_into<F: Real>(p: &mut [F], bounds: &[(F, F)]) {
    for (v, &(lo, hi)) in p.iter_mut().zip(bounds) {
        *v = (*v).max(lo).min(hi);
    }
}

/// Solves the n×n system `a·x = b` in place by Gaussian elimination with
/// partial pivoting; `a` is row-major. Returns false on a singular pivot.
pub(crate) fn solve_dense<F: Real>(n: usize, a: &mut [F], b: &mut [F]) -> bool {
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < F::of(1e-300) {
            return false;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let inv = F::one() / a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] * inv;
            if factor == F::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] -= factor * v;
            }
            let bc = b[col];
            b[row] -= factor * bc;
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * b[k];
        }
        b[col] = acc / a[col * n + col];
    }
    true
}

struct Objective<'a, F, R>
where
    R: FnMut(&[F], &mut Vec<F>) -> bool,
{
    residuals: R,
    buf: Vec<F>,
    evals: usize,
    _marker: std::marker::PhantomData<&'a F>,
}

impl<F: Real, R: FnMut(&[F], &mut Vec<F>) -> bool> Objective<'_, F, R> {
    /// Sum of squared residuals, or `BAD_COST` on evaluation failure.
    fn cost(&mut self, p: &[F]) -> F {
        self.evals += 1;
        self.buf.clear();
        if !(self.residuals)(p, &mut self.buf) {
            return F::of(BAD_COST);
        }
        let mut c = F::zero();
        for &r in &self.buf {
            c += r * r;
        }
        if c.is_finite() {
            c
        } else {
            F::of(BAD_COST)
        }
    }

    /// Like [`cost`](Self::cost) but leaves the residual vector in `out`.
    fn cost_into(&mut self, p: &[F], out: &mut Vec<F>) -> F {
        let c = self.cost(p);
        std::mem::swap(out, &mut self.buf);
        c
    }
}

/// Minimizes `Σ rᵢ(p)²` over the box `bounds`, starting from `p0`.
///
/// `residuals` writes the residual vector for a parameter point and returns
/// false if it cannot be evaluated there (treated as infinite cost). The
/// residual count must stay constant across calls.
pub fn fit_least_squares<F: Real, R: FnMut(&[F], &mut Vec<F>) -> bool>(
    p0: &[F],
    bounds: &[(F, F)],
    opts: &FitOptions,
    residuals: R,
) -> Result<FitReport<F>, FitError> {
    let n = p0.len();
    if n == 0 {
        return Err(FitError::InvalidParameter("no parameters".into()));
    }
    if bounds.len() != n {
        return Err(FitError::InvalidParameter(format!(
            "{} bounds for {n} parameters",
            bounds.len()
        )));
    }
    for &(lo, hi) in bounds {
        if !(lo <= hi) {
            return Err(FitError::InvalidParameter(format!("bound {lo} > {hi}")));
        }
    }
    let mut obj = Objective {
        residuals,
        buf: Vec::new(),
        evals: 0,
        _marker: std::marker::PhantomData,
    };
    let mut p: Vec<F> = p0.to_vec();
    clamp_into(&mut p, bounds);
    let mut r = Vec::new();
    let mut cost = obj.cost_into(&p, &mut r);
    if cost >= F::of(BAD_COST) {
        return Err(FitError::InvalidParameter(
            "residuals failed at the initial point".into(),
        ));
    }
    let mut iterations = 0;
    let mut used_simplex = false;
    let mut converged = lm_pass(&mut obj, &mut p, &mut r, &mut cost, bounds, opts, &mut iterations);
    if !converged && opts.simplex_restart {
        used_simplex = true;
        simplex_pass(&mut obj, &mut p, &mut cost, bounds, opts);
        // Polish (and re-judge convergence) with a fresh LM pass.
        cost = obj.cost_into(&p, &mut r);
        converged = lm_pass(&mut obj, &mut p, &mut r, &mut cost, bounds, opts, &mut iterations);
    }
    if converged {
        Ok(FitReport {
            params: p,
            cost,
            iterations,
            used_simplex,
        })
    } else {
        Err(FitError::DidNotConverge {
            best: p.iter().map(|v| v.as_f64()).collect(),
            cost: cost.as_f64(),
            iterations,
        })
    }
}

/// One Levenberg-Marquardt run; mutates `(p, r, cost)` to the best point and
/// reports whether a convergence criterion fired.
#[allow(clippy::too_many_arguments)]
fn lm_pass<F: Real, R: FnMut(&[F], &mut Vec<F>) -> bool>(
    obj: &mut Objective<'_, F, R>,
    p: &mut Vec<F>,
    r: &mut Vec<F>,
    cost: &mut F,
    bounds: &[(F, F)],
    opts: &FitOptions,
    iterations: &mut usize,
) -> bool {
    let n = p.len();
    let m = r.len();
    let mut jac = vec![F::zero(); m * n]; // column-major: jac[j*m + i]
    let mut lambda = F::of(1e-3);
    let mut r_hi = Vec::new();
    let mut r_lo = Vec::new();
    for _ in 0..opts.max_iterations {
        *iterations += 1;
        // Central differences, clamped into the box.
        for j in 0..n {
            let pj = p[j];
            let h = F::of(opts.diff_step_abs).max(F::of(opts.diff_step_rel) * pj.abs());
            let hi = (pj + h).min(bounds[j].1);
            let lo = (pj - h).max(bounds[j].0);
            let span = hi - lo;
            if span <= F::zero() {
                for i in 0..m {
                    jac[j * m + i] = F::zero();
                }
                continue;
            }
            p[j] = hi;
            let c_hi = obj.cost_into(p, &mut r_hi);
            p[j] = lo;
            let c_lo = obj.cost_into(p, &mut r_lo);
            p[j] = pj;
            if c_hi >= F::of(BAD_COST) || c_lo >= F::of(BAD_COST) || r_hi.len() != m || r_lo.len() != m
            {
                for i in 0..m {
                    jac[j * m + i] = F::zero();
                }
                continue;
            }
            for i in 0..m {
                jac[j * m + i] = (r_hi[i] - r_lo[i]) / span;
            }
        }
        // Normal equations.
        let mut h = vec![F::zero(); n * n];
        let mut g = vec![F::zero(); n];
        for a in 0..n {
            for b in a..n {
                let mut acc = F::zero();
                for i in 0..m {
                    acc += jac[a * m + i] * jac[b * m + i];
                }
                h[a * n + b] = acc;
                h[b * n + a] = acc;
            }
            let mut acc = F::zero();
            for i in 0..m {
                acc += jac[a * m + i] * r[i];
            }
            g[a] = acc;
        }
        // Projected gradient: components pushing outward at an active bound
        // do not count (the box pins them).
        let mut pgnorm = F::zero();
        for j in 0..n {
            let pinned_high = p[j] >= bounds[j].1 && g[j] < F::zero();
            let pinned_low = p[j] <= bounds[j].0 && g[j] > F::zero();
            if !(pinned_high || pinned_low) {
                pgnorm = pgnorm.max(g[j].abs());
            }
        }
        if pgnorm <= F::of(1e-14) * (F::one() + *cost) {
            return true;
        }
        // Damped trials: grow lambda until a step decreases the cost.
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = h.clone();
            let mut delta = g.clone();
            for d in 0..n {
                let diag = h[d * n + d].max(F::of(1e-12));
                a[d * n + d] = h[d * n + d] + lambda * diag;
                delta[d] = -g[d];
            }
            if !solve_dense(n, &mut a, &mut delta) {
                lambda *= F::of(10.0);
                continue;
            }
            let mut trial: Vec<F> = p.iter().zip(&delta).map(|(&v, &d)| v + d).collect();
            clamp_into(&mut trial, bounds);
            let mut r_trial = Vec::new();
            let trial_cost = obj.cost_into(&trial, &mut r_trial);
            if trial_cost < *cost {
                let step: F = trial
                    .iter()
                    .zip(p.iter())
                    .fold(F::zero(), |acc, (&a, &b)| acc.max((a - b).abs()));
                let scale: F = p.iter().fold(F::zero(), |acc, &v| acc.max(v.abs()));
                let drop = *cost - trial_cost;
                *p = trial;
                *r = r_trial;
                let old = *cost;
                *cost = trial_cost;
                lambda = (lambda / F::of(3.0)).max(F::of(1e-14));
                accepted = true;
                if drop <= F::of(opts.ftol) * old.max(F::of(1e-300))
                    || step <= F::of(opts.xtol) * (scale + F::of(opts.xtol))
                    || *cost <= F::of(1e-280)
                {
                    return true;
                }
                break;
            }
            lambda *= F::of(4.0);
            if lambda > F::of(1e10) {
                break;
            }
        }
        if !accepted {
            // Stalled: no downhill damped step exists at this point.
            return false;
        }
    }
    false
}

/// Nelder-Mead with box clamping; mutates `(p, cost)` to the best vertex.
fn simplex_pass<F: Real, R: FnMut(&[F], &mut Vec<F>) -> bool>(
    obj: &mut Objective<'_, F, R>,
    p: &mut Vec<F>,
    cost: &mut F,
    bounds: &[(F, F)],
    opts: &FitOptions,
) {
    let n = p.len();
    let mut verts: Vec<Vec<F>> = Vec::with_capacity(n + 1);
    let mut costs: Vec<F> = Vec::with_capacity(n + 1);
    verts.push(p.clone());
    costs.push(*cost);
    for j in 0..n {
        let mut v = p.clone();
        let span = bounds[j].1 - bounds[j].0;
        let mut step = (v[j].abs() * F::of(0.05)).max(F::of(0.02));
        if span.is_finite() && span > F::zero() {
            step = step.min(span * F::of(0.25));
        }
        v[j] = if v[j] + step <= bounds[j].1 {
            v[j] + step
        } else {
            v[j] - step
        };
        clamp_into(&mut v, bounds);
        let c = obj.cost(&v);
        verts.push(v);
        costs.push(c);
    }
    let (alpha, gamma, rho, shrink) = (F::one(), F::of(2.0), F::of(0.5), F::of(0.5));
    for _ in 0..opts.simplex_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| costs[a].partial_cmp(&costs[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];
        let spread = costs[worst] - costs[best];
        if spread <= F::of(opts.ftol) * (costs[best].abs() + F::of(1e-300)) {
            break;
        }
        // Centroid of all but the worst vertex.
        let mut centroid = vec![F::zero(); n];
        for (i, v) in verts.iter().enumerate() {
            if i == worst {
                continue;
            }
            for j in 0..n {
                centroid[j] += v[j];
            }
        }
        let inv = F::one() / F::of(n as f64);
        for c in centroid.iter_mut() {
            *c *= inv;
        }
        // Reflection of the worst vertex through the centroid.
        let mut refl: Vec<F> = centroid
            .iter()
            .zip(&verts[worst])
            .map(|(&c, &w)| c + alpha * (c - w))
            .collect();
        clamp_into(&mut refl, bounds);
        let refl_cost = obj.cost(&refl);
        if refl_cost < costs[best] {
            let mut exp: Vec<F> = centroid
                .iter()
                .zip(&verts[worst])
                .map(|(&c, &w)| c + gamma * (c - w))
                .collect();
            clamp_into(&mut exp, bounds);
            let exp_cost = obj.cost(&exp);
            if exp_cost < refl_cost {
                verts[worst] = exp;
                costs[worst] = exp_cost;
            } else {
                verts[worst] = refl;
                costs[worst] = refl_cost;
            }
        } else if refl_cost < costs[second_worst] {
            verts[worst] = refl;
            costs[worst] = refl_cost;
        } else {
            let mut con: Vec<F> = centroid
                .iter()
                .zip(&verts[worst])
                .map(|(&c, &w)| c + rho * (w - c))
                .collect();
            clamp_into(&mut con, bounds);
            let con_cost = obj.cost(&con);
            if con_cost < costs[worst] {
                verts[worst] = con;
                costs[worst] = con_cost;
            } else {
                let best_v = verts[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    let v: Vec<F> = best_v
                        .iter()
                        .zip(&verts[i])
                        .map(|(&b, &x)| b + shrink * (x - b))
                        .collect();
                    costs[i] = obj.cost(&v);
                    verts[i] = v;
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if costs[i] < costs[best] {
            best = i;
        }
    }
    if costs[best] < *cost {
        *p = verts[best].clone();
        *cost = costs[best];
    }
}
