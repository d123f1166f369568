//! Algebraic ellipse fit of bivariate correlated signals and phase
//! extraction from the fitted conic.
//!
//! Two channels sharing a common random phase trace an ellipse in the
//! `(s_minus, s_plus)` plane; the differential phase θ sets its opening via
//! `cos θ = −c0/√(4·c₊²·c₋²)`. The conic is fitted with the ellipse-specific
//! partitioned least-squares scheme (quadratic/linear scatter blocks and a
//! reduced 3×3 eigenproblem whose admissible eigenvector satisfies the
//! ellipse constraint `4·c₊²·c₋² − c0² > 0`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::float::Real;

/// Errors from conic fitting and phase extraction.
#[derive(Debug, Error, PartialEq)]
pub enum EllipseError {
    /// Fewer points than the conic has degrees of freedom.
    #[error("too few points: {0} < 6")]
    TooFewPoints(usize),
    /// Scatter matrix is numerically rank-deficient (collinear or
    /// coincident points); no conic is identifiable.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    /// Quadratic coefficients violate the positivity convention.
    #[error("sign convention violated: {0}")]
    SignConvention(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Algebraic conic `c₋²·s₋² + c0·s₋·s₊ + c₊²·s₊² + d₋·s₋ + d₊·s₊ + d0 = 0`
/// in the `(s_minus, s_plus)` plane, normalized to a unit coefficient vector
/// with `c_plus_sq` and `c_minus_sq` positive (fixing the sign of `c0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConicCoefficients<F> {
    pub c_plus_sq: F,
    pub c_minus_sq: F,
    pub c0: F,
    pub d_plus: F,
    pub d_minus: F,
    pub d0: F,
    /// Whether the ellipse constraint `4·c₊²·c₋² − c0² > 0` holds beyond
    /// tolerance; a violating fit is degenerate (collapsed ellipse) but its
    /// phase is still reported.
    pub is_ellipse: bool,
}

/// Ellipse-constraint margin below which a fit is labeled degenerate.
const DEGENERATE_CONSTRAINT_TOL: f64 = 1e-12;

/// Relative pivot threshold for rank decisions in the 3×3 solves.
const RANK_TOL: f64 = 1e-12;

// ── 3×3 linear algebra ───────────────────────────────────────────────

/// Solves `a·x = b` (row-major 3×3) by Gaussian elimination with partial
/// pivoting; fails when a pivot falls below `rel_tol` times the largest
/// initial entry. Inverse iteration passes a subnormal-scale tolerance —
/// near-singular systems are exactly the ones it must solve.
fn solve3<F: Real>(a: &[F; 9], b: &[F; 3], rel_tol: f64) -> Option<[F; 3]> {
    let mut m = *a;
    let mut x = *b;
    let mut scale = F::zero();
    for v in m.iter() {
        scale = scale.max(v.abs());
    }
    if !(scale > F::zero()) {
        return None;
    }
    let tol = scale * F::of(rel_tol);
    for col in 0..3 {
        let mut pivot = col;
        for row in col + 1..3 {
            if m[row * 3 + col].abs() > m[pivot * 3 + col].abs() {
                pivot = row;
            }
        }
        if m[pivot * 3 + col].abs() <= tol {
            return None;
        }
        if pivot != col {
            for k in 0..3 {
                m.swap(pivot * 3 + k, col * 3 + k);
            }
            x.swap(pivot, col);
        }
        for row in col + 1..3 {
            let f = m[row * 3 + col] / m[col * 3 + col];
            for k in col..3 {
                let sub = f * m[col * 3 + k];
                m[row * 3 + k] -= sub;
            }
            let sub = f * x[col];
            x[row] -= sub;
        }
    }
    for col in (0..3).rev() {
        let mut s = x[col];
        for k in col + 1..3 {
            s -= m[col * 3 + k] * x[k];
        }
        x[col] = s / m[col * 3 + col];
    }
    Some(x)
}

fn matvec3<F: Real>(a: &[F; 9], v: &[F; 3]) -> [F; 3] {
    [
        a[0] * v[0] + a[1] * v[1] + a[2] * v[2],
        a[3] * v[0] + a[4] * v[1] + a[5] * v[2],
        a[6] * v[0] + a[7] * v[1] + a[8] * v[2],
    ]
}

fn norm3<F: Real>(v: &[F; 3]) -> F {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Real roots of `λ³ + p2·λ² + p1·λ + p0` (one or three, with multiplicity
/// collapsed), via the trigonometric/Cardano closed forms.
fn cubic_real_roots<F: Real>(p2: F, p1: F, p0: F) -> Vec<F> {
    let third = F::of(1.0 / 3.0);
    let shift = p2 * third;
    // Depressed form t³ + p·t + q with λ = t − p2/3.
    let p = p1 - p2 * p2 * third;
    let q = p0 - p2 * p1 * third + F::of(2.0 / 27.0) * p2 * p2 * p2;
    let half_q = q * F::of(0.5);
    let disc = half_q * half_q + p * p * p * F::of(1.0 / 27.0);
    let mut roots = Vec::with_capacity(3);
    if disc > F::zero() {
        // One real root.
        let s = disc.sqrt();
        let u = (-half_q + s).cbrt();
        let v = (-half_q - s).cbrt();
        roots.push(u + v - shift);
    } else if p.abs() <= F::of(1e-300) {
        // Triple root.
        roots.push((-q).cbrt() - shift);
    } else {
        // Three real roots.
        let m = F::of(2.0) * (-p * third).sqrt();
        let arg = (F::of(3.0) * q / (p * m)).max(-F::one()).min(F::one());
        let phi = arg.acos() * third;
        for k in 0..3 {
            let angle = phi - F::of(2.0 * std::f64::consts::PI / 3.0) * F::of(k as f64);
            roots.push(m * angle.cos() - shift);
        }
    }
    roots
}

/// Eigenvector of `m` for (approximate) eigenvalue `lambda` by shifted
/// inverse iteration; returns the unit vector and its residual `‖Mv − λ̂v‖`
/// with the Rayleigh-refined eigenvalue.
fn eigenvector3<F: Real>(m: &[F; 9], lambda: F) -> Option<([F; 3], F)> {
    let mut scale = F::zero();
    for v in m.iter() {
        scale = scale.max(v.abs());
    }
    // Small shift keeps the system solvable when lambda is near-exact.
    let eps = (scale + lambda.abs()) * F::of(1e-12) + F::of(1e-300);
    let mut shifted = *m;
    for i in 0..3 {
        shifted[i * 3 + i] -= lambda + eps;
    }
    let mut v = [F::of(0.577), F::of(0.577), F::of(0.577)];
    for _ in 0..8 {
        let next = solve3(&shifted, &v, 1e-300)?;
        let n = norm3(&next);
        if !(n > F::zero()) || !n.is_finite() {
            return None;
        }
        v = [next[0] / n, next[1] / n, next[2] / n];
    }
    let mv = matvec3(m, &v);
    let rayleigh = mv[0] * v[0] + mv[1] * v[1] + mv[2] * v[2];
    let r = [
        mv[0] - rayleigh * v[0],
        mv[1] - rayleigh * v[1],
        mv[2] - rayleigh * v[2],
    ];
    Some((v, norm3(&r)))
}

// ── Conic fitting ────────────────────────────────────────────────────

/// Fits the ellipse-specific least-squares conic to `(s_minus, s_plus)`
/// points.
///
/// Points are mean-centered and isotropically scaled, the partitioned
/// normal equations are reduced to a 3×3 eigenproblem on the quadratic
/// block, and the eigenvector satisfying the ellipse constraint is selected
/// (when none does, the closest candidate is kept and the result carries
/// `is_ellipse = false`). The conic is transformed back to data coordinates
/// and sign-normalized.
pub fn fit_conic<F: Real>(points: &[(F, F)]) -> Result<ConicCoefficients<F>, EllipseError> {
    if points.len() < 6 {
        return Err(EllipseError::TooFewPoints(points.len()));
    }
    for &(x, y) in points {
        if !x.is_finite() || !y.is_finite() {
            return Err(EllipseError::InvalidParameter(
                "non-finite point".to_string(),
            ));
        }
    }
    let n = F::of(points.len() as f64);
    let mut cx = F::zero();
    let mut cy = F::zero();
    for &(x, y) in points {
        cx += x;
        cy += y;
    }
    cx /= n;
    cy /= n;
    let mut spread = F::zero();
    for &(x, y) in points {
        spread += (x - cx) * (x - cx) + (y - cy) * (y - cy);
    }
    let scale = (spread / (n + n)).sqrt();
    if !(scale > F::zero()) {
        return Err(EllipseError::DegenerateGeometry(
            "all points coincide".to_string(),
        ));
    }

    // Scatter blocks of the quadratic (x², xy, y²) and linear (x, y, 1)
    // design columns in preconditioned coordinates.
    let mut s1 = [F::zero(); 9];
    let mut s2 = [F::zero(); 9];
    let mut s3 = [F::zero(); 9];
    for &(xr, yr) in points {
        let x = (xr - cx) / scale;
        let y = (yr - cy) / scale;
        let q = [x * x, x * y, y * y];
        let l = [x, y, F::one()];
        for i in 0..3 {
            for j in 0..3 {
                s1[i * 3 + j] += q[i] * q[j];
                s2[i * 3 + j] += q[i] * l[j];
                s3[i * 3 + j] += l[i] * l[j];
            }
        }
    }

    // T = −S3⁻¹·S2ᵀ, column by column (column j of S2ᵀ is row j of S2).
    let mut t = [F::zero(); 9];
    for j in 0..3 {
        let col = [s2[j * 3], s2[j * 3 + 1], s2[j * 3 + 2]];
        let sol = solve3(&s3, &col, RANK_TOL).ok_or_else(|| {
            EllipseError::DegenerateGeometry("linear scatter block is singular".to_string())
        })?;
        for i in 0..3 {
            t[i * 3 + j] = -sol[i];
        }
    }

    // Reduced scatter S1 + S2·T, then M = C1⁻¹·(S1 + S2·T) for the
    // constraint matrix C1 with aᵀC1a = 4ac − b².
    let mut red = [F::zero(); 9];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = s1[i * 3 + j];
            for k in 0..3 {
                acc += s2[i * 3 + k] * t[k * 3 + j];
            }
            red[i * 3 + j] = acc;
        }
    }
    let half = F::of(0.5);
    let mut m = [F::zero(); 9];
    for j in 0..3 {
        m[j] = red[6 + j] * half;
        m[3 + j] = -red[3 + j];
        m[6 + j] = red[j] * half;
    }

    // Characteristic cubic λ³ − tr·λ² + m2·λ − det.
    let tr = m[0] + m[4] + m[8];
    let m2 = m[0] * m[4] - m[1] * m[3] + m[0] * m[8] - m[2] * m[6] + m[4] * m[8] - m[5] * m[7];
    let det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6]);
    let roots = cubic_real_roots(-tr, m2, -det);

    // Admissible eigenvector: positive ellipse-constraint value. Track the
    // best candidate so a marginally violating fit degrades to a labeled
    // degenerate result instead of an error.
    let mut best: Option<([F; 3], F)> = None;
    for &lambda in &roots {
        if !lambda.is_finite() {
            continue;
        }
        if let Some((v, residual)) = eigenvector3(&m, lambda) {
            let m_scale = norm3(&[m[0], m[4], m[8]]).max(lambda.abs()) + F::one();
            if residual > m_scale * F::of(1e-6) {
                continue;
            }
            let g = F::of(4.0) * v[0] * v[2] - v[1] * v[1];
            match best {
                Some((_, gb)) if gb >= g => {}
                _ => best = Some((v, g)),
            }
        }
    }
    let (a1, _) = best.ok_or_else(|| {
        EllipseError::DegenerateGeometry("no real eigenvector for the reduced system".to_string())
    })?;
    let a2 = matvec3(&t, &a1);

    // Back-transform u = (x − cx)/s, v = (y − cy)/s to data coordinates:
    // the quadratic part is invariant after multiplying through by s².
    let (qa, qb, qc) = (a1[0], a1[1], a1[2]);
    let (ld, le, lf) = (a2[0], a2[1], a2[2]);
    let two = F::of(2.0);
    let d = -(two * qa * cx + qb * cy) + ld * scale;
    let e = -(qb * cx + two * qc * cy) + le * scale;
    let f = qa * cx * cx + qb * cx * cy + qc * cy * cy - (ld * cx + le * cy) * scale
        + lf * scale * scale;

    // Unit-vector normalization, then the sign convention: positive
    // quadratic diagonal (possible whenever 4ac − b² > 0).
    let mut coef = [qa, qb, qc, d, e, f];
    let mut norm = F::zero();
    for v in coef.iter() {
        norm += *v * *v;
    }
    let norm = norm.sqrt();
    if !(norm > F::zero()) {
        return Err(EllipseError::DegenerateGeometry(
            "zero conic coefficient vector".to_string(),
        ));
    }
    let flip = if coef[0] + coef[2] < F::zero() {
        -F::one()
    } else {
        F::one()
    };
    for v in coef.iter_mut() {
        *v = *v * flip / norm;
    }
    let g = F::of(4.0) * coef[0] * coef[2] - coef[1] * coef[1];
    Ok(ConicCoefficients {
        c_minus_sq: coef[0],
        c0: coef[1],
        c_plus_sq: coef[2],
        d_minus: coef[3],
        d_plus: coef[4],
        d0: coef[5],
        is_ellipse: g > F::of(DEGENERATE_CONSTRAINT_TOL),
    })
}

// ── Phase and axes from the conic ────────────────────────────────────

/// Differential phase from the fitted conic:
/// `θ = arccos(−c0/√(4·c₊²·c₋²))` in `[0, π]`, the argument clamped into
/// `[−1, 1]` (degenerate fits land exactly on a boundary rather than
/// failing). Branch and `+πℤ` resolution are series-level concerns.
pub fn theta_from_conic<F: Real>(c: &ConicCoefficients<F>) -> Result<F, EllipseError> {
    if !(c.c_plus_sq > F::zero()) || !(c.c_minus_sq > F::zero()) {
        return Err(EllipseError::SignConvention(format!(
            "quadratic coefficients must be positive, got c_plus_sq = {}, c_minus_sq = {}",
            c.c_plus_sq, c.c_minus_sq
        )));
    }
    let ratio = -c.c0 / (F::of(4.0) * c.c_plus_sq * c.c_minus_sq).sqrt();
    Ok(ratio.max(-F::one()).min(F::one()).acos())
}

/// Ellipse center: the stationary point of the conic.
pub fn conic_center<F: Real>(c: &ConicCoefficients<F>) -> Result<(F, F), EllipseError> {
    let m = [
        F::of(2.0) * c.c_minus_sq,
        c.c0,
        F::zero(),
        c.c0,
        F::of(2.0) * c.c_plus_sq,
        F::zero(),
        F::zero(),
        F::zero(),
        F::one(),
    ];
    let rhs = [-c.d_minus, -c.d_plus, F::zero()];
    let sol = solve3(&m, &rhs, RANK_TOL).ok_or_else(|| {
        EllipseError::DegenerateGeometry("conic has no unique center".to_string())
    })?;
    Ok((sol[0], sol[1]))
}

/// Which superposed channel the minor axis projects onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollapsedChannel {
    /// Minor axis along the diagonal: the sum channel is collapsed.
    Sum,
    /// Minor axis along the anti-diagonal: the difference channel is
    /// collapsed.
    Diff,
}

/// Principal axes of the fitted conic in the `(s_minus, s_plus)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalAxes<F> {
    /// Unit vector along the major axis.
    pub major: [F; 2],
    /// Unit vector along the minor axis.
    pub minor: [F; 2],
    /// Channel measured along the minor axis — the collapsed, maximally
    /// phase-sensitive quadrature near a degeneracy point.
    pub favorable: CollapsedChannel,
    /// Set when `c0 ≈ 0` (circle): the axis ordering is arbitrary.
    pub axis_ambiguous: bool,
    /// Set when the fitted quadratic diagonal is too asymmetric for the
    /// equal-amplitude reading of the axes.
    pub unequal_amplitudes: bool,
}

/// Asymmetry `|c₊² − c₋²|/(c₊² + c₋²)` beyond which the equal-amplitude
/// assumption behind the diagonal axes is flagged.
const AMPLITUDE_ASYMMETRY_TOL: f64 = 0.05;

/// Relative size of `c0` below which the conic is a circle and the axes are
/// ambiguous.
const AXIS_AMBIGUITY_TOL: f64 = 1e-6;

/// Principal axes of an equal-amplitude conic: the diagonal
/// `(1, 1)ᵀ/√2` and anti-diagonal `(1, −1)ᵀ/√2`, ordered major first. The
/// quadratic form is larger along the minor axis, so positive `c0` puts the
/// minor axis on the diagonal (sum channel collapsed, θ near π) and
/// negative `c0` on the anti-diagonal (difference channel collapsed, θ near
/// 0 or 2π).
pub fn principal_axes<F: Real>(c: &ConicCoefficients<F>) -> Result<PrincipalAxes<F>, EllipseError> {
    if !(c.c_plus_sq > F::zero()) || !(c.c_minus_sq > F::zero()) {
        return Err(EllipseError::SignConvention(format!(
            "quadratic coefficients must be positive, got c_plus_sq = {}, c_minus_sq = {}",
            c.c_plus_sq, c.c_minus_sq
        )));
    }
    let r = F::of(std::f64::consts::FRAC_1_SQRT_2);
    let diagonal = [r, r];
    let anti_diagonal = [r, -r];
    let sum_collapsed = c.c0 > F::zero();
    let (major, minor, favorable) = if sum_collapsed {
        (anti_diagonal, diagonal, CollapsedChannel::Sum)
    } else {
        (diagonal, anti_diagonal, CollapsedChannel::Diff)
    };
    Ok(PrincipalAxes {
        major,
        minor,
        favorable,
        axis_ambiguous: c.c0.abs()
            <= (c.c_plus_sq + c.c_minus_sq) * F::of(AXIS_AMBIGUITY_TOL),
        unequal_amplitudes: (c.c_plus_sq - c.c_minus_sq).abs()
            > (c.c_plus_sq + c.c_minus_sq) * F::of(AMPLITUDE_ASYMMETRY_TOL),
    })
}
