//! Overflow-safe kicked products `P_n = Φ_n H(z) ··· Φ_1 H(z)`, growth traces,
//! and the per-step `Q`-form growth certificate.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mat2::{Iwasawa, Mat2, Mat2C, Mat2R, MatError, Scalar, Vec2C};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KickError {
    #[error("no kick at index {index}: {reason}")]
    Unavailable { index: u64, reason: String },
    #[error("kick at index {index} is not unimodular")]
    NotUnimodular { index: u64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolveError {
    #[error(transparent)]
    Kick(#[from] KickError),
    #[error("kick source declares no bound; a bound C is required here")]
    MissingBound,
    #[error("growth certificate needs Im z > 0, got {0}")]
    NotUpperHalfPlane(f64),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// Indexed provider of kicks, 1-based. Must be readable from many threads.
#[allow(clippy::len_without_is_empty)]
pub trait KickSource: Send + Sync {
    fn kick(&self, index: u64) -> Result<Mat2R, KickError>;

    /// Declared `C ≥ sup ‖Φ_k‖`, if known.
    fn bound(&self) -> Option<f64> {
        None
    }

    /// Number of available kicks, if finite.
    fn len(&self) -> Option<u64> {
        None
    }
}

impl<K: KickSource + ?Sized> KickSource for &K {
    fn kick(&self, index: u64) -> Result<Mat2R, KickError> {
        (**self).kick(index)
    }
    fn bound(&self) -> Option<f64> {
        (**self).bound()
    }
    fn len(&self) -> Option<u64> {
        (**self).len()
    }
}

impl<K: KickSource + ?Sized> KickSource for Box<K> {
    fn kick(&self, index: u64) -> Result<Mat2R, KickError> {
        (**self).kick(index)
    }
    fn bound(&self) -> Option<f64> {
        (**self).bound()
    }
    fn len(&self) -> Option<u64> {
        (**self).len()
    }
}

/// Growth constant `k = max(1, C²)`.
pub fn growth_constant(bound: f64) -> f64 {
    (bound * bound).max(1.0)
}

/// The same kick at every index.
#[derive(Debug, Clone)]
pub struct ConstantKicks {
    kick: Mat2R,
    bound: f64,
}

impl ConstantKicks {
    pub fn new(kick: Mat2R) -> Result<Self, MatError> {
        kick.check_unimodular()?;
        Ok(ConstantKicks {
            kick,
            bound: kick.op_norm(),
        })
    }

    pub fn identity() -> Self {
        ConstantKicks {
            kick: Mat2R::identity(),
            bound: 1.0,
        }
    }
}

impl KickSource for ConstantKicks {
    fn kick(&self, _index: u64) -> Result<Mat2R, KickError> {
        Ok(self.kick)
    }
    fn bound(&self) -> Option<f64> {
        Some(self.bound)
    }
}

/// A finite list of kicks; index `k` reads entry `k - 1`.
#[derive(Debug, Clone)]
pub struct FiniteKicks {
    kicks: Vec<Mat2R>,
    bound: f64,
}

impl FiniteKicks {
    pub fn new(kicks: Vec<Mat2R>) -> Result<Self, KickError> {
        for (i, k) in kicks.iter().enumerate() {
            if !k.is_unimodular() {
                return Err(KickError::NotUnimodular {
                    index: i as u64 + 1,
                });
            }
        }
        let bound = kicks.iter().map(Mat2R::op_norm).fold(1.0, f64::max);
        Ok(FiniteKicks { kicks, bound })
    }
}

impl KickSource for FiniteKicks {
    fn kick(&self, index: u64) -> Result<Mat2R, KickError> {
        index
            .checked_sub(1)
            .and_then(|i| self.kicks.get(i as usize))
            .copied()
            .ok_or(KickError::Unavailable {
                index,
                reason: format!("only {} kicks", self.kicks.len()),
            })
    }
    fn bound(&self) -> Option<f64> {
        Some(self.bound)
    }
    fn len(&self) -> Option<u64> {
        Some(self.kicks.len() as u64)
    }
}

/// Random kicks `H(s)·D(±λ)·R(α)` with `‖Φ‖ ≤ C` by construction.
///
/// Each index draws from its own ChaCha stream, so kicks can be read in any
/// order and from any thread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomBoundedKicks {
    pub seed: u64,
    pub bound: f64,
}

impl RandomBoundedKicks {
    pub fn new(seed: u64, bound: f64) -> Self {
        assert!(bound >= 1.0, "kick bound must be at least 1");
        RandomBoundedKicks { seed, bound }
    }

    pub fn factors(&self, index: u64) -> (f64, f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let root = self.bound.sqrt();
        let half_log = 0.5 * self.bound.ln();
        let shear_max = root - 1.0 / root;
        let shear = if shear_max > 0.0 {
            rng.gen_range(-shear_max..=shear_max)
        } else {
            0.0
        };
        let log_scale = if half_log > 0.0 {
            rng.gen_range(-half_log..=half_log)
        } else {
            0.0
        };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let angle = rng.gen_range(-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2);
        (shear, sign * log_scale.exp(), angle)
    }
}

impl KickSource for RandomBoundedKicks {
    fn kick(&self, index: u64) -> Result<Mat2R, KickError> {
        let (shear, scale, angle) = self.factors(index);
        Ok(Mat2R::shear(shear) * Mat2R::dilation(scale) * Mat2R::rotation(angle))
    }
    fn bound(&self) -> Option<f64> {
        Some(self.bound)
    }
}

/// `exp(lognorm) · m` with `‖m‖ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledProduct<T> {
    m: Mat2<T>,
    lognorm: f64,
    carry: f64,
}

impl<T: Scalar> ScaledProduct<T> {
    pub fn identity() -> Self {
        ScaledProduct {
            m: Mat2::identity(),
            lognorm: 0.0,
            carry: 0.0,
        }
    }

    pub fn from_matrix(m: Mat2<T>) -> Self {
        let mut p = ScaledProduct {
            m,
            lognorm: 0.0,
            carry: 0.0,
        };
        p.renormalize();
        p
    }

    /// Unit-norm factor.
    pub fn normalized(&self) -> Mat2<T> {
        self.m
    }

    pub fn lognorm(&self) -> f64 {
        self.lognorm
    }

    /// The represented matrix; overflows for large lognorm.
    pub fn to_matrix(&self) -> Mat2<T> {
        self.m.scale(self.lognorm.exp())
    }

    /// Sign and log-magnitude of the trace.
    pub fn trace(&self) -> (T, f64) {
        (self.m.trace(), self.lognorm)
    }

    pub fn left_mul(&mut self, a: &Mat2<T>) {
        self.m = *a * self.m;
        self.renormalize();
    }

    pub fn right_mul(&mut self, a: &Mat2<T>) {
        self.m = self.m * *a;
        self.renormalize();
    }

    /// `self · other`.
    pub fn then(&self, other: &Self) -> Self {
        let mut p = ScaledProduct {
            m: self.m * other.m,
            lognorm: self.lognorm,
            carry: self.carry,
        };
        p.add_log(other.lognorm);
        p.add_log(-other.carry);
        p.renormalize();
        p
    }

    /// Normalized-matrix distance plus lognorm difference.
    pub fn relative_distance(&self, other: &Self) -> f64 {
        self.m.distance(&other.m) + (self.lognorm - other.lognorm).abs()
    }

    fn renormalize(&mut self) {
        let norm = self.m.op_norm();
        if norm > 0.0 && norm.is_finite() {
            self.m = self.m.scale(1.0 / norm);
            self.add_log(norm.ln());
        }
    }

    // Kahan-compensated accumulation of the log scale.
    fn add_log(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.lognorm + y;
        self.carry = (t - self.lognorm) - y;
        self.lognorm = t;
    }
}

impl<T: Scalar> Default for ScaledProduct<T> {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub n: u64,
    pub lognorm: f64,
}

impl TracePoint {
    /// Growth exponent `u_n = log‖P_n‖ / n`.
    pub fn exponent(&self) -> f64 {
        self.lognorm / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTrace {
    pub points: Vec<TracePoint>,
    pub sup_lognorm: f64,
    pub final_lognorm: f64,
    pub steps: u64,
}

/// Visits `(n, log‖P_n(z)‖)` for `n = 1..=n_max`; returns the final product.
///
/// Uses the real path when `Im z == 0`.
pub fn evolve_each<F>(
    kicks: &dyn KickSource,
    z: Complex64,
    n_max: u64,
    visit: F,
) -> Result<ScaledProduct<Complex64>, EvolveError>
where
    F: FnMut(u64, f64),
{
    if z.im == 0.0 {
        let p = run(kicks, Mat2R::shear(z.re), n_max, visit, |m| m)?;
        let m = p.normalized().to_complex();
        let mut out = ScaledProduct::from_matrix(m);
        out.add_log(p.lognorm());
        Ok(out)
    } else {
        run(kicks, Mat2C::shear(z), n_max, visit, |m: Mat2R| {
            m.to_complex()
        })
    }
}

fn run<T, F, C>(
    kicks: &dyn KickSource,
    shear: Mat2<T>,
    n_max: u64,
    mut visit: F,
    convert: C,
) -> Result<ScaledProduct<T>, EvolveError>
where
    T: Scalar,
    F: FnMut(u64, f64),
    C: Fn(Mat2R) -> Mat2<T>,
{
    let mut p = ScaledProduct::identity();
    for n in 1..=n_max {
        let kick = convert(kicks.kick(n)?);
        p.left_mul(&(kick * shear));
        visit(n, p.lognorm());
    }
    Ok(p)
}

/// Records every `record_every`-th step (and the last one).
pub fn evolve(
    kicks: &dyn KickSource,
    z: Complex64,
    n_max: u64,
    record_every: u64,
) -> Result<GrowthTrace, EvolveError> {
    if n_max == 0 {
        return Err(EvolveError::EmptyHorizon);
    }
    let every = record_every.max(1);
    let mut points = Vec::new();
    let mut sup = 0f64;
    let p = evolve_each(kicks, z, n_max, |n, l| {
        sup = sup.max(l);
        if n % every == 0 || n == n_max {
            points.push(TracePoint { n, lognorm: l });
        }
    })?;
    Ok(GrowthTrace {
        points,
        sup_lognorm: sup,
        final_lognorm: p.lognorm(),
        steps: n_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub steps: u64,
    pub k: f64,
    /// First step where the per-step `Q` growth factor fell short.
    pub first_violation: Option<u64>,
    pub violations: u64,
    /// Smallest `ln(Q_n/Q_{n-1}) − ln(required factor)` over all steps.
    pub min_margin: f64,
    /// First step where `log‖B_n‖` fell below the telescoped bound.
    pub first_telescope_failure: Option<u64>,
    pub log_norm_b: f64,
    pub telescoped_bound: f64,
    pub log_q: f64,
}

impl CertificateReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none() && self.first_telescope_failure.is_none()
    }
}

fn per_step_gain(angle: f64, w: Complex64, k: f64) -> f64 {
    (angle.abs() * w.im / (2.0 * k * (1.0 + w.norm()))).ln_1p()
}

/// Runs `y ↦ H(z/2) Φ_n H(z/2) y` from the probe vector and checks the `Q`
/// growth factor at every step, plus the telescoped bound on `‖B_n‖`.
pub fn q_growth_certificate(
    kicks: &dyn KickSource,
    z: Complex64,
    n_max: u64,
) -> Result<CertificateReport, EvolveError> {
    const TOL: f64 = 1e-12;
    if z.im <= 0.0 {
        return Err(EvolveError::NotUpperHalfPlane(z.im));
    }
    let k = growth_constant(kicks.bound().ok_or(EvolveError::MissingBound)?);
    let w = z / 2.0;
    let half = Mat2C::shear(w);

    let mut y = Vec2C::probe();
    let mut log_y = 0.0;
    let mut log_q = y.q_form().ln();
    let mut b = ScaledProduct::<Complex64>::identity();
    let mut telescoped = 0.0;
    let mut report = CertificateReport {
        steps: n_max,
        k,
        first_violation: None,
        violations: 0,
        min_margin: f64::INFINITY,
        first_telescope_failure: None,
        log_norm_b: 0.0,
        telescoped_bound: 0.0,
        log_q,
    };

    for n in 1..=n_max {
        let kick = kicks.kick(n)?;
        let angle = Iwasawa::of(&kick)?.angle;
        let phi = kick.to_complex();

        let u = half.apply(y);
        let v = phi.apply(u);
        let out = half.apply(v);
        // Q grows only through the two shears; the real kick preserves it.
        let gain = w.im * (y.x2.norm_sqr() + v.x2.norm_sqr()) * (2.0 * log_y - log_q).exp();
        let step = gain.ln_1p();
        log_q += step;

        let required = per_step_gain(angle, w, k);
        let margin = step - required;
        report.min_margin = report.min_margin.min(margin);
        if margin < -TOL {
            report.violations += 1;
            report.first_violation.get_or_insert(n);
        }

        let size = out.norm();
        y = out.scale(1.0 / size);
        log_y += size.ln();

        b.left_mul(&(half * phi * half));
        telescoped += 0.5 * required;
        if b.lognorm() < telescoped - TOL * (1.0 + telescoped) {
            report.first_telescope_failure.get_or_insert(n);
        }
    }
    report.log_norm_b = b.lognorm();
    report.telescoped_bound = telescoped;
    report.log_q = log_q;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    /// `Im(z/2) / (8k(1+|z/2|)) · Σ_{j≤n} |α_j|`.
    pub bound: f64,
    /// `log‖H(z/2)‖ + log‖H(z/2)⁻¹‖`, lost when passing from `B_n` to `P_n`.
    pub slack: f64,
    pub k: f64,
    pub angle_sum: f64,
}

pub fn growth_lower_bound(
    kicks: &dyn KickSource,
    z: Complex64,
    n: u64,
) -> Result<LowerBound, EvolveError> {
    if z.im <= 0.0 {
        return Err(EvolveError::NotUpperHalfPlane(z.im));
    }
    let k = growth_constant(kicks.bound().ok_or(EvolveError::MissingBound)?);
    let mut angle_sum = 0.0;
    for j in 1..=n {
        angle_sum += Iwasawa::of(&kicks.kick(j)?)?.angle.abs();
    }
    Ok(lower_bound_from_angles(angle_sum, z, k))
}

pub fn lower_bound_from_angles(angle_sum: f64, z: Complex64, k: f64) -> LowerBound {
    let w = z / 2.0;
    LowerBound {
        bound: w.im / (8.0 * k * (1.0 + w.norm())) * angle_sum,
        slack: 2.0 * Mat2C::shear(w).op_norm().ln(),
        k,
        angle_sum,
    }
}

/// First 1-based start `i ≤ horizon − window` whose next `window` values all
/// have modulus below `eps`.
pub fn condition_star_check(
    values: &[f64],
    eps: f64,
    window: usize,
    horizon: usize,
) -> Option<usize> {
    if window == 0 || horizon < window {
        return None;
    }
    (1..=horizon - window).find(|&i| {
        values
            .get(i..i + window)
            .is_some_and(|w| w.iter().all(|v| v.abs() < eps))
    })
}
