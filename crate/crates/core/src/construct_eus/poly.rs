//! Real polynomials in `t` and 2×2 polynomial matrices.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::mat2::Mat2R;

/// Coefficients in ascending order, trailing zeros trimmed.
///
/// Sums drop a coefficient when it cancels to within `1e-14` of the
/// operands' coefficients; products never cancel in the leading term.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

const TRIM_REL: f64 = 1e-14;

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// The identity polynomial `t`.
    pub fn variable() -> Self {
        Poly::new(vec![0.0, 1.0])
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// `Σ |c_k| |t|^k`, the scale of rounding error in `eval`.
    pub fn eval_abs(&self, t: f64) -> f64 {
        let t = t.abs();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * t + c.abs())
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Coefficientwise absolute value.
    pub fn abs(&self) -> Poly {
        Poly {
            coeffs: self.coeffs.iter().map(|c| c.abs()).collect(),
        }
    }

    /// Untrimmed product, used for error scales.
    fn raw_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    fn raw_add(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
        let n = a.len().max(b.len());
        (0..n)
            .map(|k| {
                let (x, y) = (
                    a.get(k).copied().unwrap_or(0.0),
                    b.get(k).copied().unwrap_or(0.0),
                );
                let sum = x + sign * y;
                if sum.abs() <= TRIM_REL * (x.abs() + y.abs()) {
                    0.0
                } else {
                    sum
                }
            })
            .collect()
    }

    /// Sign changes of the polynomial on `[lo, hi]`, found on a uniform grid of
    /// `grid` cells and refined by bisection to `tol`.
    pub fn roots_in(&self, lo: f64, hi: f64, grid: usize, tol: f64) -> Vec<f64> {
        sign_changes(|t| self.eval(t), lo, hi, grid, tol)
    }
}

/// Grid scan plus bisection for sign changes of `f` on `[lo, hi]`.
pub fn sign_changes(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize, tol: f64) -> Vec<f64> {
    let grid = grid.max(1);
    let step = (hi - lo) / grid as f64;
    let mut out = Vec::new();
    let mut x0 = lo;
    let mut f0 = f(x0);
    if f0 == 0.0 {
        out.push(x0);
    }
    for i in 1..=grid {
        let x1 = if i == grid { hi } else { lo + step * i as f64 };
        let f1 = f(x1);
        if f1 == 0.0 {
            out.push(x1);
        } else if f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
            out.push(bisect(&f, x0, x1, tol));
        }
        x0 = x1;
        f0 = f1;
    }
    out
}

/// Bisection on a bracket with a sign change; stops at width `tol·max(1,|x|)`.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if b - a <= tol * a.abs().max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, b: &Poly) -> Poly {
        Poly::new(Poly::raw_add(&self.coeffs, &b.coeffs, 1.0))
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, b: &Poly) -> Poly {
        Poly::new(Poly::raw_add(&self.coeffs, &b.coeffs, -1.0))
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, b: &Poly) -> Poly {
        Poly::new(Poly::raw_mul(&self.coeffs, &b.coeffs))
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

/// A 2×2 matrix of polynomials in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyMat2 {
    pub p11: Poly,
    pub p12: Poly,
    pub p21: Poly,
    pub p22: Poly,
}

impl PolyMat2 {
    /// `H(t)`.
    pub fn shear() -> Self {
        PolyMat2 {
            p11: Poly::constant(1.0),
            p12: Poly::variable(),
            p21: Poly::zero(),
            p22: Poly::constant(1.0),
        }
    }

    pub fn constant(m: &Mat2R) -> Self {
        PolyMat2 {
            p11: Poly::constant(m.a11),
            p12: Poly::constant(m.a12),
            p21: Poly::constant(m.a21),
            p22: Poly::constant(m.a22),
        }
    }

    pub fn trace(&self) -> Poly {
        &self.p11 + &self.p22
    }

    pub fn det(&self) -> Poly {
        &(&self.p11 * &self.p22) - &(&self.p12 * &self.p21)
    }

    /// Coefficient scale of `det`: `|p11||p22| + |p12||p21|`.
    pub fn det_scale(&self) -> Poly {
        &(&self.p11.abs() * &self.p22.abs()) + &(&self.p12.abs() * &self.p21.abs())
    }

    pub fn eval(&self, t: f64) -> Mat2R {
        Mat2R::new(
            self.p11.eval(t),
            self.p12.eval(t),
            self.p21.eval(t),
            self.p22.eval(t),
        )
    }

    /// Degrees as `[[d11, d12], [d21, d22]]`, `None` for zero entries.
    pub fn degrees(&self) -> [[Option<usize>; 2]; 2] {
        [
            [self.p11.degree(), self.p12.degree()],
            [self.p21.degree(), self.p22.degree()],
        ]
    }

    /// The upper-right entry has strictly the largest degree.
    pub fn upper_right_dominating(&self) -> bool {
        let d12 = self.p12.degree();
        [self.p11.degree(), self.p21.degree(), self.p22.degree()]
            .iter()
            .all(|d| d12 > *d)
    }

    pub fn abs(&self) -> PolyMat2 {
        PolyMat2 {
            p11: self.p11.abs(),
            p12: self.p12.abs(),
            p21: self.p21.abs(),
            p22: self.p22.abs(),
        }
    }
}

impl Mul for &PolyMat2 {
    type Output = PolyMat2;
    fn mul(self, b: &PolyMat2) -> PolyMat2 {
        PolyMat2 {
            p11: &(&self.p11 * &b.p11) + &(&self.p12 * &b.p21),
            p12: &(&self.p11 * &b.p12) + &(&self.p12 * &b.p22),
            p21: &(&self.p21 * &b.p11) + &(&self.p22 * &b.p21),
            p22: &(&self.p21 * &b.p12) + &(&self.p22 * &b.p22),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_product() {
        let p = &Poly::new(vec![-1.0, 1.0]) * &Poly::new(vec![-3.0, 1.0]);
        let roots = p.roots_in(0.0, 4.0, 64, 1e-12);
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - 1.0).abs() < 1e-10 && (roots[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn trimming_and_degree() {
        let p = Poly::new(vec![1.0, 2.0, 1e-20]);
        assert_eq!(p.degree(), Some(2));
        let q = &p - &Poly::new(vec![0.0, 0.0, 1e-20 * (1.0 + 1e-15)]);
        assert_eq!(q.degree(), Some(1));
        assert_eq!(Poly::zero().degree(), None);
        assert_eq!(q.derivative(), Poly::constant(2.0));
    }

    #[test]
    fn shear_squared() {
        let h = PolyMat2::shear();
        let h2 = &h * &h;
        assert_eq!(h2.p12, Poly::new(vec![0.0, 2.0]));
        assert_eq!(h2.det(), Poly::constant(1.0));
    }
}
