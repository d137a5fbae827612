//! 2×2 real and complex matrices: named constructors, closed-form norms,
//! the shear/diagonal/rotation decomposition and the symplectic form `Q`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for the unimodular tag.
pub const UNIMODULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    #[error("matrix is not unimodular: det = {det}")]
    NotUnimodular { det: String },
    #[error("matrix has non-finite entries")]
    NonFinite,
}

/// Field of matrix entries. Implemented for `f64` and `Complex64`.
pub trait Scalar:
    Copy
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn abs_sq(self) -> f64;
    fn conj(self) -> Self;
    fn is_finite(self) -> bool;
    fn scale(self, s: f64) -> Self;
    /// Largest singular value of `m`.
    fn op_norm(m: &Mat2<Self>) -> f64;

    fn abs(self) -> f64 {
        self.abs_sq().sqrt()
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn abs_sq(self) -> f64 {
        self * self
    }
    fn conj(self) -> Self {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn op_norm(m: &Mat2<f64>) -> f64 {
        // sigma_max = (|(a+d, b-c)| + |(a-d, b+c)|) / 2
        let p = (m.a11 + m.a22).hypot(m.a12 - m.a21);
        let q = (m.a11 - m.a22).hypot(m.a12 + m.a21);
        0.5 * (p + q)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn op_norm(m: &Mat2<Complex64>) -> f64 {
        // eigenvalues of A A*: (F ± sqrt((r1 - r2)^2 + 4|x|^2)) / 2
        let r1 = m.a11.norm_sqr() + m.a12.norm_sqr();
        let r2 = m.a21.norm_sqr() + m.a22.norm_sqr();
        let x = m.a11 * m.a21.conj() + m.a12 * m.a22.conj();
        let disc = (r1 - r2).hypot(2.0 * x.norm());
        (0.5 * (r1 + r2 + disc)).sqrt()
    }
}

/// A 2×2 matrix, row-major entries.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2<T> {
    pub a11: T,
    pub a12: T,
    pub a21: T,
    pub a22: T,
}

pub type Mat2R = Mat2<f64>;
pub type Mat2C = Mat2<Complex64>;

impl<T: fmt::Debug> fmt::Debug for Mat2<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{:?}, {:?}], [{:?}, {:?}]]",
            self.a11, self.a12, self.a21, self.a22
        )
    }
}

impl<T: Scalar> Mat2<T> {
    pub const fn new(a11: T, a12: T, a21: T, a22: T) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    /// `((1, z), (0, 1))`.
    pub fn upper_shear(z: T) -> Self {
        Self::new(T::one(), z, T::zero(), T::one())
    }

    /// `((1, 0), (c, 1))`.
    pub fn lower_shear(c: T) -> Self {
        Self::new(T::one(), T::zero(), c, T::one())
    }

    pub fn det(&self) -> T {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> T {
        self.a11 + self.a22
    }

    /// `((a22, -a12), (-a21, a11))`; equals the inverse when det = 1.
    pub fn adjugate(&self) -> Self {
        Self::new(self.a22, -self.a12, -self.a21, self.a11)
    }

    pub fn inverse(&self) -> Result<Self, MatError> {
        self.check_unimodular()?;
        Ok(self.adjugate())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| x.scale(s))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.a11), f(self.a12), f(self.a21), f(self.a22))
    }

    pub fn op_norm(&self) -> f64 {
        T::op_norm(self)
    }

    pub fn frobenius(&self) -> f64 {
        (self.a11.abs_sq() + self.a12.abs_sq() + self.a21.abs_sq() + self.a22.abs_sq()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    /// Determinant defect relative to the size of the two products forming it.
    pub fn det_defect(&self) -> f64 {
        let scale = 1f64
            .max((self.a11 * self.a22).abs())
            .max((self.a12 * self.a21).abs());
        (self.det() - T::one()).abs() / scale
    }

    pub fn is_unimodular(&self) -> bool {
        self.is_finite() && self.det_defect() <= UNIMODULAR_TOL
    }

    pub fn check_unimodular(&self) -> Result<(), MatError> {
        if !self.is_finite() {
            return Err(MatError::NonFinite);
        }
        if self.det_defect() > UNIMODULAR_TOL {
            return Err(MatError::NotUnimodular {
                det: format!("{:?}", self.det()),
            });
        }
        Ok(())
    }

    pub fn apply(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2 {
            x1: self.a11 * v.x1 + self.a12 * v.x2,
            x2: self.a21 * v.x1 + self.a22 * v.x2,
        }
    }

    /// Operator-norm distance.
    pub fn distance(&self, other: &Self) -> f64 {
        (*self - *other).op_norm()
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        Mat2::new(
            self.a11 * b.a11 + self.a12 * b.a21,
            self.a11 * b.a12 + self.a12 * b.a22,
            self.a21 * b.a11 + self.a22 * b.a21,
            self.a21 * b.a12 + self.a22 * b.a22,
        )
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        Mat2::new(
            self.a11 + b.a11,
            self.a12 + b.a12,
            self.a21 + b.a21,
            self.a22 + b.a22,
        )
    }
}

impl<T: Scalar> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        Mat2::new(
            self.a11 - b.a11,
            self.a12 - b.a12,
            self.a21 - b.a21,
            self.a22 - b.a22,
        )
    }
}

impl<T: Scalar> Neg for Mat2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|x| -x)
    }
}

impl Mat2R {
    /// Horocycle shear `H(t) = ((1, t), (0, 1))`.
    pub fn shear(t: f64) -> Self {
        Self::upper_shear(t)
    }

    /// Kick `M(c) = ((1, 0), (c, 1))`.
    pub fn kick(c: f64) -> Self {
        Self::lower_shear(c)
    }

    /// `diag(lambda, 1/lambda)`.
    pub fn dilation(lambda: f64) -> Self {
        Self::new(lambda, 0.0, 0.0, 1.0 / lambda)
    }

    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn to_complex(&self) -> Mat2C {
        self.map_into(Complex64::from_real)
    }

    fn map_into(&self, f: impl Fn(f64) -> Complex64) -> Mat2C {
        Mat2::new(f(self.a11), f(self.a12), f(self.a21), f(self.a22))
    }
}

impl Mat2C {
    pub fn shear(z: Complex64) -> Self {
        Self::upper_shear(z)
    }

    pub fn conj_transpose(&self) -> Self {
        Mat2::new(
            self.a11.conj(),
            self.a21.conj(),
            self.a12.conj(),
            self.a22.conj(),
        )
    }
}

/// Column vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x1: T,
    pub x2: T,
}

pub type Vec2C = Vec2<Complex64>;

impl<T: Scalar> Vec2<T> {
    pub fn new(x1: T, x2: T) -> Self {
        Vec2 { x1, x2 }
    }

    pub fn norm_sq(&self) -> f64 {
        self.x1.abs_sq() + self.x2.abs_sq()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Vec2::new(self.x1.scale(s), self.x2.scale(s))
    }
}

impl Vec2C {
    /// `Im(x1 · conj(x2))`.
    pub fn q_form(&self) -> f64 {
        (self.x1 * self.x2.conj()).im
    }

    /// The probe vector `(i/√2, 1/√2)` with `2Q = |x|² = 1`.
    pub fn probe() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Vec2::new(Complex64::new(0.0, h), Complex64::new(h, 0.0))
    }
}

pub fn q_form(x: &Vec2C) -> f64 {
    x.q_form()
}

/// Factors of `phi = shear(shear) · dilation(scale) · rotation(angle)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iwasawa {
    pub shear: f64,
    pub scale: f64,
    pub angle: f64,
}

impl Iwasawa {
    pub fn of(phi: &Mat2R) -> Result<Self, MatError> {
        phi.check_unimodular()?;
        let (a, b, c, d) = (phi.a11, phi.a12, phi.a21, phi.a22);
        let sign_d = if d < 0.0 { -1.0 } else { 1.0 };
        let rr = c * c + d * d;
        let r = c.hypot(d);
        Ok(Iwasawa {
            shear: (a * c + b * d) / rr,
            scale: sign_d / r,
            angle: (c * sign_d).atan2(d.abs()),
        })
    }

    pub fn matrix(&self) -> Mat2R {
        Mat2R::shear(self.shear) * Mat2R::dilation(self.scale) * Mat2R::rotation(self.angle)
    }
}

pub fn iwasawa(phi: &Mat2R) -> Result<Iwasawa, MatError> {
    Iwasawa::of(phi)
}
