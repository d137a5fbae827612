//! Polynomial kick steps, elliptic regions and sampled diagonalizers.

use serde::{Deserialize, Serialize};

use super::frame::{align, fresh_frame, Frame};
use super::interval_set::{Interval, IntervalSet};
use super::poly::{sign_changes, Poly, PolyMat2};
use super::EusError;
use crate::mat2::Mat2R;

/// Coefficientwise tolerance for the trace identity of a kick step.
pub const TRACE_IDENTITY_TOL: f64 = 1e-10;
/// Reconstruction budget `‖S diag(λ, λ̄) S⁻¹ − A‖ / ‖A‖`.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// Magnitude below which coefficients carry no relative precision: products
/// of such terms land in the subnormal range.
pub(crate) const UNDERFLOW_FLOOR: f64 = f64::MIN_POSITIVE / f64::EPSILON;

/// `max_k |p_k − q_k| / (scale_k + floor)`.
pub(crate) fn coefficient_defect(p: &Poly, q: &Poly, scale: &Poly) -> f64 {
    let n = p.coeffs().len().max(q.coeffs().len());
    (0..n)
        .map(|k| (p.coeff(k) - q.coeff(k)).abs() / (scale.coeff(k) + UNDERFLOW_FLOOR))
        .fold(0.0, f64::max)
}

/// A polynomial matrix with the matrix of coefficientwise magnitudes that
/// were summed into it, the scale of its rounding errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedPoly {
    pub value: PolyMat2,
    pub bound: PolyMat2,
}

impl TrackedPoly {
    pub fn new(value: PolyMat2) -> Self {
        TrackedPoly {
            bound: value.abs(),
            value,
        }
    }

    /// `H(t)`.
    pub fn shear() -> Self {
        TrackedPoly::new(PolyMat2::shear())
    }
}

/// `A M(c) A`, checked against `tr = tr A · (tr A + c a12) − 2`.
pub fn kick_step(a: &TrackedPoly, c: f64) -> Result<TrackedPoly, EusError> {
    if !(c.is_finite() && c != 0.0) {
        return Err(EusError::BadCoefficient(c));
    }
    let kicked = &a.value * &PolyMat2::constant(&Mat2R::kick(c));
    let next = &kicked * &a.value;
    let bound = &(&a.bound * &PolyMat2::constant(&Mat2R::kick(c.abs()))) * &a.bound;
    let tr = a.value.trace();
    let expected = &(&tr * &(&tr + &a.value.p12.scale(c))) - &Poly::constant(2.0);
    let tr_bound = a.bound.trace();
    let scale = &(&(&tr_bound * &(&tr_bound + &a.bound.p12.scale(c.abs()))) + &bound.trace())
        + &Poly::constant(2.0);
    let defect = coefficient_defect(&next.trace(), &expected, &scale);
    if !(defect <= TRACE_IDENTITY_TOL) {
        return Err(EusError::TraceIdentity { defect });
    }
    Ok(TrackedPoly { value: next, bound })
}

/// `A_{-1} = H(t)` followed by kick steps with `coeffs[0..=level]`.
pub fn poly_ladder(coeffs: &[f64], level: usize) -> Result<Vec<TrackedPoly>, EusError> {
    let mut out = Vec::with_capacity(level + 1);
    let mut a = TrackedPoly::shear();
    for &c in &coeffs[..=level] {
        a = kick_step(&a, c)?;
        out.push(a.clone());
    }
    Ok(out)
}

/// Coefficientwise defect of `det ≡ 1`, relative to the tracked magnitudes.
pub fn det_defect(a: &TrackedPoly) -> f64 {
    coefficient_defect(
        &a.value.det(),
        &Poly::constant(1.0),
        &(&a.bound.det_scale() + &Poly::constant(1.0)),
    )
}

/// Entry degrees `(p, p+1; p−1, p)` for some `p ≥ 1`.
pub fn has_square_degree_pattern(square: &PolyMat2) -> bool {
    match square.degrees() {
        [[Some(p), Some(q)], [Some(r), Some(s)]] => p >= 1 && q == p + 1 && r + 1 == p && s == p,
        _ => false,
    }
}

/// A component of `{t : |tr A(t)| < 2}`; `margin` is the least `2 − |tr|`
/// over interior samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPiece {
    pub span: Interval,
    pub margin: f64,
}

/// Components of `−2 < tr A(t) < 2` inside `domain`.
pub fn good_region(a: &PolyMat2, domain: Interval) -> Result<Vec<RegionPiece>, EusError> {
    let tr = a.trace();
    let degree = match tr.degree() {
        Some(d) if d >= 1 => d,
        _ => return Err(EusError::ConstantTrace),
    };
    let grid = 64 * (degree + 1);
    let upper = &tr - &Poly::constant(2.0);
    let lower = &tr + &Poly::constant(2.0);
    let mut cuts = vec![domain.lo, domain.hi];
    cuts.extend(upper.roots_in(domain.lo, domain.hi, grid, 1e-14));
    cuts.extend(lower.roots_in(domain.lo, domain.hi, grid, 1e-14));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut spans: Vec<Interval> = Vec::new();
    for w in cuts.windows(2) {
        let span = Interval::new(w[0], w[1]);
        if span.is_empty() || !(tr.eval(span.midpoint()).abs() < 2.0) {
            continue;
        }
        match spans.last_mut() {
            Some(last) if last.hi == span.lo => last.hi = span.hi,
            _ => spans.push(span),
        }
    }
    Ok(spans
        .into_iter()
        .map(|span| {
            let samples: Vec<f64> = span.samples(66).collect();
            let margin = samples[1..samples.len() - 1]
                .iter()
                .map(|&t| 2.0 - tr.eval(t).abs())
                .fold(f64::INFINITY, f64::min);
            RegionPiece { span, margin }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSample {
    pub t: f64,
    pub frame: Frame,
}

/// Diagonalizers at `per_interval` samples of each interval of `set`, with
/// the sign of `S` kept coherent along each interval.
pub fn diagonalize_on(
    eval: impl Fn(f64) -> Mat2R,
    set: &IntervalSet,
    per_interval: usize,
) -> Result<Vec<FrameSample>, EusError> {
    let mut out = Vec::new();
    for span in set.intervals() {
        let mut previous: Option<Frame> = None;
        for t in span.samples(per_interval) {
            let a = eval(t);
            let mut frame = fresh_frame(&a).ok_or(EusError::NotElliptic {
                t,
                trace: a.trace(),
            })?;
            if let Some(p) = previous {
                frame = align(frame, &p.s);
            }
            previous = Some(frame);
            out.push(FrameSample { t, frame });
        }
    }
    Ok(out)
}

/// A polynomial family with non-constant trace that is elliptic on `set`.
#[derive(Debug, Clone)]
pub struct GoodPair {
    pub matrix: PolyMat2,
    pub set: IntervalSet,
    pub samples: Vec<FrameSample>,
    pub margin: f64,
    pub residual: f64,
}

impl GoodPair {
    pub fn new(matrix: PolyMat2, set: IntervalSet, per_interval: usize) -> Result<Self, EusError> {
        if matrix.trace().is_constant() {
            return Err(EusError::ConstantTrace);
        }
        let samples = diagonalize_on(|t| matrix.eval(t), &set, per_interval)?;
        let (mut margin, mut residual) = (f64::INFINITY, 0f64);
        for s in &samples {
            let a = matrix.eval(s.t);
            margin = margin.min(2.0 - a.trace().abs());
            let err = (s.frame.reconstruct() - a.to_complex()).op_norm() / a.op_norm();
            residual = residual.max(err);
        }
        if !(residual <= RECONSTRUCTION_TOL) {
            return Err(EusError::Reconstruction { residual });
        }
        Ok(GoodPair {
            matrix,
            set,
            samples,
            margin,
            residual,
        })
    }
}

/// Roots of `f` on `[lo, hi]` by a uniform grid and bisection.
pub(crate) fn roots_on(f: impl Fn(f64) -> f64, span: Interval, grid: usize) -> Vec<f64> {
    if span.is_empty() {
        return Vec::new();
    }
    sign_changes(f, span.lo, span.hi, grid, 1e-14)
}

/// Last point on the `inside` side of the crossing of `g` between `inside`
/// and `outside`, where `g(inside) ≤ 0 < g(outside)`.
pub(crate) fn inner_crossing(g: impl Fn(f64) -> f64, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if g(mid) <= 0.0 {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kick_step_from_shear_is_level_zero() {
        let a0 = kick_step(&TrackedPoly::shear(), -1.0).unwrap();
        assert_eq!(a0.value.trace(), Poly::new(vec![2.0, -2.0]));
        assert!(det_defect(&a0) < 1e-15);
    }

    #[test]
    fn region_of_level_zero() {
        let a0 = kick_step(&TrackedPoly::shear(), -1.0).unwrap().value;
        let r = good_region(&a0, Interval::new(0.0, 10.0)).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].span.lo.abs() < 1e-12 && (r[0].span.hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_trace_is_rejected() {
        let rot = PolyMat2::constant(&Mat2R::rotation(1.0471975511965976));
        assert!(matches!(
            good_region(&rot, Interval::new(0.0, 1.0)),
            Err(EusError::ConstantTrace)
        ));
    }

    #[test]
    fn small_kick_is_nearly_a_square() {
        let a0 = kick_step(&TrackedPoly::shear(), -1.0).unwrap();
        let a1 = kick_step(&a0, 1e-9).unwrap().value;
        let a0 = a0.value;
        let sq = &a0 * &a0;
        let t = 0.7;
        assert!((a1.eval(t).trace() - sq.eval(t).trace()).abs() < 1e-8);
        assert!(a1.trace().degree() > sq.trace().degree());
    }

    #[test]
    fn inner_crossing_stays_inside() {
        let x = inner_crossing(|t| t - 0.3, 0.0, 1.0);
        assert!(x <= 0.3 && 0.3 - x < 1e-15);
    }
}
