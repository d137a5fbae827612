//! Pointwise evaluation of `A_n(t)` with its `t`-derivative, and unimodular
//! diagonalizers `S` with `A = S diag(λ, λ̄) S⁻¹` on elliptic windows.

use num_complex::Complex64;

use crate::mat2::{Mat2C, Mat2R, Scalar};

/// `A_n(t) = e^{log_scale} · a`, `A_n'(t) = e^{log_scale} · da`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ladder {
    pub a: Mat2R,
    pub da: Mat2R,
    pub log_scale: f64,
}

impl Ladder {
    pub fn matrix(&self) -> Mat2R {
        self.a.scale(self.log_scale.exp())
    }

    pub fn trace(&self) -> f64 {
        self.a.trace() * self.log_scale.exp()
    }

    pub fn slope(&self) -> f64 {
        self.da.trace() * self.log_scale.exp()
    }

    /// `ln |tr A_n(t)|`, finite even when the trace itself overflows.
    pub fn log_abs_trace(&self) -> f64 {
        self.a.trace().abs().ln() + self.log_scale
    }

    pub fn trace_sign(&self) -> f64 {
        self.a.trace().signum()
    }

    /// `max(|tr|, 2) / |tr'|`, the natural step for scanning sign changes.
    pub fn step_scale(&self) -> f64 {
        let log_num = self.log_abs_trace().max(std::f64::consts::LN_2);
        let log_den = self.da.trace().abs().ln() + self.log_scale;
        (log_num - log_den).exp()
    }
}

/// `A_{-1} = H(t)`, `A_{m+1} = A_m M(c_{m+1}) A_m`, up to `A_level`, with the
/// derivative carried along and a common rescaling at each level.
///
/// Each level is also rescaled to determinant exactly one: at large `t` the
/// products cancel heavily and the computed determinant drifts.
pub fn ladder(coeffs: &[f64], t: f64, level: usize) -> Ladder {
    let mut a = Mat2R::shear(t);
    let mut da = Mat2R::new(0.0, 1.0, 0.0, 0.0);
    let mut log_scale = 0.0;
    for &c in &coeffs[..=level] {
        let kick = Mat2R::kick(c);
        let am = a * kick;
        let next = am * a;
        let dnext = da * kick * a + am * da;
        let norm = next.op_norm();
        a = next.scale(1.0 / norm);
        da = dnext.scale(1.0 / norm);
        log_scale = 2.0 * log_scale + norm.ln();
        let det = a.det();
        if det > 0.0 && det.is_normal() {
            let fix = (-0.5 * (det.ln() + 2.0 * log_scale)).exp();
            a = a.scale(fix);
            da = da.scale(fix);
        }
    }
    Ladder { a, da, log_scale }
}

/// `A_0(t), …, A_level(t)` without rescaling, each set to determinant one.
pub fn ladder_values(coeffs: &[f64], t: f64, level: usize) -> Vec<Mat2R> {
    let mut a = Mat2R::shear(t);
    coeffs[..=level]
        .iter()
        .map(|&c| {
            a = unimodular(a * Mat2R::kick(c) * a);
            a
        })
        .collect()
}

fn unimodular(a: Mat2R) -> Mat2R {
    let det = a.det();
    if det > 0.0 && det.is_normal() {
        a.scale(1.0 / det.sqrt())
    } else {
        a
    }
}

/// Unimodular `s` with `A s = s diag(lambda, conj lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub s: Mat2C,
    pub lambda: Complex64,
}

impl Frame {
    /// `‖A s − s diag(λ, λ̄)‖ / (‖A‖ ‖s‖)`.
    pub fn residual(&self, a: &Mat2R) -> f64 {
        let ac = a.to_complex();
        let d = Mat2C::new(
            self.lambda,
            Complex64::zero(),
            Complex64::zero(),
            self.lambda.conj(),
        );
        (ac * self.s - self.s * d).op_norm() / (a.op_norm() * self.s.op_norm())
    }

    /// `s diag(λ, λ̄) s⁻¹`.
    pub fn reconstruct(&self) -> Mat2C {
        let d = Mat2C::new(
            self.lambda,
            Complex64::zero(),
            Complex64::zero(),
            self.lambda.conj(),
        );
        self.s * d * self.s.adjugate()
    }
}

/// Below this `|a12| / ‖A‖` the row-based eigenvector formula is used.
const SMALL_CORNER: f64 = 1e-12;

/// Diagonalizer of an elliptic unimodular matrix with `Im λ > 0`.
///
/// Columns `(a12, λ − a11)` and `(a12, λ̄ − a11)`, scaled to det 1; near
/// `a12 = 0` the columns `(λ − a22, a21)`, `(λ̄ − a22, a21)` are used.
pub fn fresh_frame(a: &Mat2R) -> Option<Frame> {
    let half = 0.5 * a.trace();
    let disc = 1.0 - half * half;
    if !(disc > 0.0) {
        return None;
    }
    let lambda = Complex64::new(half, disc.sqrt());
    let lbar = lambda.conj();
    let two_i_im = Complex64::new(0.0, 2.0 * lambda.im);
    let s = if a.a12.abs() >= SMALL_CORNER * a.op_norm() {
        let a12 = Complex64::from_real(a.a12);
        let root = (-two_i_im * a12).sqrt();
        Mat2C::new(a12, a12, lambda - a.a11, lbar - a.a11).map(|x| x / root)
    } else {
        let a21 = Complex64::from_real(a.a21);
        let root = (two_i_im * a21).sqrt();
        Mat2C::new(lambda - a.a22, lbar - a.a22, a21, a21).map(|x| x / root)
    };
    Some(Frame { s, lambda })
}

/// Flips the sign of `frame.s` if that brings it closer to `reference`.
pub fn align(frame: Frame, reference: &Mat2C) -> Frame {
    if (frame.s + *reference).frobenius() < (frame.s - *reference).frobenius() {
        Frame {
            s: -frame.s,
            ..frame
        }
    } else {
        frame
    }
}

/// Continues a diagonalizer of `A` to one of `next ≈ A²`, with
/// `B = s⁻¹ next s` formed directly.
pub fn continue_frame(prev: &Frame, next: &Mat2R) -> Option<(Frame, f64)> {
    let s = prev.s;
    continue_with(prev, &(s.adjugate() * next.to_complex() * s))
}

/// One kicked continuation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Continuation {
    pub frame: Frame,
    /// `‖S_next − S‖` for an exact diagonalizer `S` of `a`.
    pub drift: f64,
    /// How far `frame` moved from the exact-frame continuation to absorb the
    /// rounding in `S⁻¹ a S`.
    pub rounding: f64,
}

/// Continues a diagonalizer `s` of `a` to one of `a M(c) a`.
///
/// If `s` diagonalizes `a` exactly then `s⁻¹ a M(c) a s = D (I + c K) D`
/// with `K = s⁻¹ e₂₁ s`, and the drift follows from that matrix alone. The
/// returned frame instead diagonalizes `F (I + c K) F` with the computed
/// `F = s⁻¹ a s`, which keeps it accurate for the actual `a M(c) a`.
pub fn continue_kicked(prev: &Frame, a: &Mat2R, c: f64) -> Option<Continuation> {
    let s = prev.s;
    let inv = s.adjugate();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let bump = Mat2C::new(
        inv.a12 * s.a11,
        inv.a12 * s.a12,
        inv.a22 * s.a11,
        inv.a22 * s.a12,
    );
    let middle = Mat2C::new(
        one + bump.a11 * c,
        bump.a12 * c,
        bump.a21 * c,
        one + bump.a22 * c,
    );
    let d = Mat2C::new(prev.lambda, zero, zero, prev.lambda.conj());
    let (ideal, drift) = continue_with(prev, &(d * middle * d))?;
    let f = inv * a.to_complex() * s;
    let (frame, _) = continue_with(prev, &(f * middle * f))?;
    let rounding = (frame.s - ideal.s).op_norm();
    Some(Continuation {
        frame,
        drift,
        rounding,
    })
}

/// With `B = diag(λ², λ̄²) + Δ`, returns `s Ṽ` where `Ṽ` diagonalizes `B`,
/// has det 1 and tends to `I` as `Δ → 0`, together with the drift
/// `‖s Ṽ − s‖`. Every small quantity is formed without cancellation.
fn continue_with(prev: &Frame, b: &Mat2C) -> Option<(Frame, f64)> {
    let s = prev.s;
    let sq = prev.lambda * prev.lambda;
    let sq_bar = sq.conj();
    let d11 = b.a11 - sq;
    let d12 = b.a12;
    let d21 = b.a21;
    let d22 = b.a22 - sq_bar;

    let half_gap = 0.5 * (sq + d11 - sq_bar - d22);
    let product = d12 * d21;
    let mut root = (half_gap * half_gap + product).sqrt();
    if (root + half_gap).norm() < (root - half_gap).norm() {
        root = -root;
    }
    let shift = product / (root + half_gap);
    let diag = 2.0 * half_gap + shift;
    if !(diag.norm() > 0.0) {
        return None;
    }
    let lambda = sq + d11 + shift;
    let lambda = lambda / lambda.norm();

    let ratio = product / (diag * diag);
    let r = (Complex64::new(1.0, 0.0) + ratio).sqrt();
    let r_minus_one = ratio / (r + 1.0);
    let sigma = -diag * r;
    let corner = diag * r_minus_one / sigma;
    let excess = Mat2C::new(corner, d12 / sigma, -d21 / sigma, corner);
    let step = s * excess;
    if !step.is_finite() {
        return None;
    }
    Some((
        Frame {
            s: s + step,
            lambda,
        },
        step.op_norm(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_frame_has_unit_eigenvalue() {
        let beta = 0.7;
        let f = fresh_frame(&Mat2R::rotation(beta)).unwrap();
        assert!((f.lambda - Complex64::from_polar(1.0, beta)).norm() < 1e-14);
        assert!(f.residual(&Mat2R::rotation(beta)) < 1e-14);
        assert!((f.s.det() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn level_zero_at_unit_time_has_lambda_i() {
        let a = ladder(&[-1.0], 1.0, 0).matrix();
        let f = fresh_frame(&a).unwrap();
        assert!((f.lambda - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!(f.residual(&a) < 1e-14);
    }

    #[test]
    fn continuation_matches_fresh_square() {
        let a = Mat2R::new(0.3, 1.2, -0.9, 0.5);
        let a = a.scale(1.0 / a.det().sqrt());
        let f = fresh_frame(&a).unwrap();
        let (g, drift) = continue_frame(&f, &(a * a)).unwrap();
        assert!(drift < 1e-13);
        assert!(g.residual(&(a * a)) < 1e-13);
        let perturbed = a * Mat2R::kick(1e-3) * a;
        let (h, drift) = continue_frame(&f, &perturbed).unwrap();
        assert!(drift > 0.0 && drift < 1e-2);
        assert!(h.residual(&perturbed) < 1e-12);
        assert!((h.s.det() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let k = continue_kicked(&f, &a, 1e-3).unwrap();
        assert!((k.drift - drift).abs() < 1e-12 && (k.frame.s - h.s).op_norm() < 1e-12);
        assert!(k.rounding < 1e-13);
    }

    #[test]
    fn ladder_derivative_matches_difference_quotient() {
        let coeffs = [-1.0, -0.1, 0.05];
        let t = 0.8;
        let h = 1e-6;
        let l = ladder(&coeffs, t, 2);
        let fd =
            (ladder(&coeffs, t + h, 2).trace() - ladder(&coeffs, t - h, 2).trace()) / (2.0 * h);
        assert!((l.slope() - fd).abs() < 1e-6 * fd.abs().max(1.0));
        let direct = ladder_values(&coeffs, t, 2)[2];
        assert!(l.matrix().distance(&direct) < 1e-12 * direct.op_norm());
    }
}
