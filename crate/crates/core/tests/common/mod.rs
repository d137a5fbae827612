//! Shared helpers and independent oracles for the integration tests.
#![allow(dead_code)]

use kicklab::mat2::Mat2R;
use rand::Rng;

/// A unimodular matrix with entries of magnitude at most `max`.
pub fn random_unimodular<R: Rng>(rng: &mut R, max: f64) -> Mat2R {
    loop {
        let a: f64 = rng.gen_range(-max..=max);
        let b: f64 = rng.gen_range(-max..=max);
        let c: f64 = rng.gen_range(-max..=max);
        if a.abs() < 1e-3 {
            continue;
        }
        let d = (1.0 + b * c) / a;
        if d.abs() <= max {
            return Mat2R::new(a, b, c, d);
        }
    }
}

/// Plain 2×2 product kept as `(entries, log scale)`, renormalized by the
/// largest entry every step. Independent of the library's scaled products.
#[derive(Debug, Clone, Copy)]
pub struct Direct {
    pub m: [[f64; 2]; 2],
    pub log_scale: f64,
}

impl Direct {
    pub fn identity() -> Self {
        Direct {
            m: [[1.0, 0.0], [0.0, 1.0]],
            log_scale: 0.0,
        }
    }

    /// `self ← a · self`.
    pub fn push(&mut self, a: [[f64; 2]; 2]) {
        let m = self.m;
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * m[0][j] + a[i][1] * m[1][j];
            }
        }
        let big = out.iter().flatten().fold(0f64, |acc, x| acc.max(x.abs()));
        for row in &mut out {
            for x in row {
                *x /= big;
            }
        }
        self.m = out;
        self.log_scale += big.ln();
    }

    /// Largest singular value, from the eigenvalues of `M Mᵀ`.
    pub fn log_norm(&self) -> f64 {
        let [[a, b], [c, d]] = self.m;
        let s = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
        0.5 * (0.5 * (s + disc)).ln() + self.log_scale
    }

    /// Entries divided by the norm.
    pub fn unit(&self) -> Mat2R {
        let scale = (self.log_scale - self.log_norm()).exp();
        let [[a, b], [c, d]] = self.m;
        Mat2R::new(a * scale, b * scale, c * scale, d * scale)
    }
}

pub fn entries(m: &Mat2R) -> [[f64; 2]; 2] {
    [[m.a11, m.a12], [m.a21, m.a22]]
}

/// `((1, t), (0, 1))` written out.
pub fn shear(t: f64) -> [[f64; 2]; 2] {
    [[1.0, t], [0.0, 1.0]]
}

/// `((1, 0), (c, 1))` written out.
pub fn lower(c: f64) -> [[f64; 2]; 2] {
    [[1.0, 0.0], [c, 1.0]]
}

/// Number of trailing zero bits of `k ≥ 1`, by repeated halving.
pub fn two_adic(mut k: u64) -> usize {
    let mut j = 0;
    while k & 1 == 0 {
        k /= 2;
        j += 1;
    }
    j
}

/// `∏_{k ≤ count} M(c_{v(k)}) H(t)` by direct multiplication.
pub fn ruler_product(coeffs: &[f64], t: f64, count: u64) -> Direct {
    let mut p = Direct::identity();
    for k in 1..=count {
        p.push(shear(t));
        p.push(lower(coeffs[two_adic(k)]));
    }
    p
}
