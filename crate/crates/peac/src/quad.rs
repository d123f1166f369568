//! Gauss–Legendre quadrature rules.
//!
//! Nodes and weights are computed once per order by Newton iteration on the
//! Legendre polynomials and cached; rules for the two orders used by the PDF
//! (32 and 64) are precomputed statics.

use std::sync::LazyLock;

use crate::float::Real;

/// Node/weight pairs on the reference interval [-1, 1].
fn legendre_pairs(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2, "Gauss-Legendre order must be at least 2");
    let mut pairs = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        // Tricomi initial guess for the i-th root of P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Bonnet recurrence for P_n(x) and P'_n(x)
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        pairs.push((x, w));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

static GL32: LazyLock<Vec<(f64, f64)>> = LazyLock::new(|| legendre_pairs(32));
static GL64: LazyLock<Vec<(f64, f64)>> = LazyLock::new(|| legendre_pairs(64));

/// Cached node/weight pairs for order 32.
pub fn gl32() -> &'static [(f64, f64)] {
    &GL32
}

/// Cached node/weight pairs for order 64.
pub fn gl64() -> &'static [(f64, f64)] {
    &GL64
}

/// ∫_a^b f(x) dx with a fixed rule given as reference-interval pairs.
pub fn integrate<F: Real>(pairs: &[(f64, f64)], a: F, b: F, mut f: impl FnMut(F) -> F) -> F {
    let half = (b - a) / F::of(2.0);
    let mid = (a + b) / F::of(2.0);
    let mut acc = F::zero();
    for &(x, w) in pairs {
        acc += F::of(w) * f(mid + half * F::of(x));
    }
    acc * half
}

/// ∫_a^b f(x) dx with `panels` equal subintervals, each integrated by `pairs`.
pub fn integrate_panels<F: Real>(
    pairs: &[(f64, f64)],
    a: F,
    b: F,
    panels: usize,
    mut f: impl FnMut(F) -> F,
) -> F {
    let n = F::of(panels as f64);
    let width = (b - a) / n;
    let mut acc = F::zero();
    for i in 0..panels {
        let lo = a + width * F::of(i as f64);
        let hi = if i + 1 == panels { b } else { lo + width };
        acc += integrate(pairs, lo, hi, &mut f);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_are_symmetric_and_weights_sum_to_two() {
        for pairs in [gl32(), gl64()] {
            let wsum: f64 = pairs.iter().map(|p| p.1).sum();
            assert_relative_eq!(wsum, 2.0, max_relative = 1e-14);
            for (lo, hi) in pairs.iter().zip(pairs.iter().rev()) {
                assert_relative_eq!(lo.0, -hi.0, epsilon = 1e-14);
                assert_relative_eq!(lo.1, hi.1, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn integrates_polynomials_exactly() {
        // order n is exact for degree 2n-1
        let val = integrate(gl32(), -1.0f64, 2.0, |x| {
            3.0 * x * x * x * x * x - x * x + 4.0
        });
        // antiderivative: x^6/2 - x^3/3 + 4x
        let exact = |x: f64| 0.5 * x.powi(6) - x.powi(3) / 3.0 + 4.0 * x;
        assert_relative_eq!(val, exact(2.0) - exact(-1.0), max_relative = 1e-14);
    }

    #[test]
    fn integrates_sine_over_half_period() {
        let val = integrate(gl64(), 0.0f64, std::f64::consts::PI, |x| x.sin());
        assert_relative_eq!(val, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn panel_rule_matches_single_panel_on_smooth_integrand() {
        let f = |x: f64| (-x * x).exp();
        let one = integrate(gl64(), -6.0, 6.0, f);
        let many = integrate_panels(gl32(), -6.0, 6.0, 8, f);
        assert_relative_eq!(one, many, max_relative = 1e-12);
        assert_relative_eq!(one, std::f64::consts::PI.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn works_in_f32() {
        let val = integrate(gl32(), 0.0f32, 1.0, |x| x * x);
        assert!((val - 1.0 / 3.0).abs() < 1e-6);
    }
}
