//! Kick sequences whose exceptional set contains prescribed points.
//!
//! Rotations `R_k` are chosen so that `(R_k A_k(t_k))² = −I`, with
//! `A_1 = H(t)` and `A_{n+1} = (R_n A_n)²`; the kicks are
//! `Φ_n = R_{j(n)+1} ··· R_1` where `j` is the ruler function.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::ruler;
use crate::evolution::{evolve_each, EvolveError, KickError, KickSource, ScaledProduct};
use crate::mat2::{Mat2R, MatError};

/// Budget for `‖(R_k A_k(t_k))² + I‖ / max(1, ‖A_k(t_k)‖²)`.
pub const SQUARE_TOL: f64 = 1e-9;
const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeqError {
    #[error("targets must be finite and positive; got {0}")]
    BadTarget(f64),
    #[error("no targets given")]
    NoTargets,
    #[error("rotation failed to annihilate the trace: |tr(RA)| = {residual}")]
    Degenerate { residual: f64 },
    #[error("(R_{level} A_{level})² + I has norm {residual}")]
    SquareDefect { level: usize, residual: f64 },
    #[error("target index {0} out of range")]
    NoSuchTarget(usize),
    #[error(transparent)]
    Matrix(#[from] MatError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
}

/// Angle in `(−π/2, π/2]` with `tr(R(angle)·a) = 0`.
///
/// `tr(R(α)A) = cos α (a11 + a22) + sin α (a12 − a21)`.
pub fn annihilating_angle(a: &Mat2R) -> Result<f64, SeqError> {
    a.check_unimodular()?;
    angle_for(a)
}

/// As [`annihilating_angle`] for any positive multiple of a unimodular matrix.
fn angle_for(a: &Mat2R) -> Result<f64, SeqError> {
    let mut angle = a.trace().atan2(a.a21 - a.a12);
    if angle > std::f64::consts::FRAC_PI_2 {
        angle -= std::f64::consts::PI;
    } else if angle <= -std::f64::consts::FRAC_PI_2 {
        angle += std::f64::consts::PI;
    }
    let residual = (Mat2R::rotation(angle) * *a).trace().abs();
    if !(residual <= TRACE_TOL * a.op_norm().max(1.0)) {
        return Err(SeqError::Degenerate { residual });
    }
    Ok(angle)
}

/// `R(α)` with `tr(R(α)·a) = 0`, hence `(R(α)a)² = −I`.
pub fn trace_annihilating_rotation(a: &Mat2R) -> Result<Mat2R, SeqError> {
    annihilating_angle(a).map(Mat2R::rotation)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeqConstruction {
    targets: Vec<f64>,
    angles: Vec<f64>,
    /// `prefixes[k] = R_{k+1} ··· R_1`.
    prefixes: Vec<Mat2R>,
    square_defects: Vec<f64>,
}

impl SeqConstruction {
    pub fn build(targets: &[f64]) -> Result<Self, SeqError> {
        if targets.is_empty() {
            return Err(SeqError::NoTargets);
        }
        if let Some(&bad) = targets.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(SeqError::BadTarget(bad));
        }
        let mut out = SeqConstruction {
            targets: targets.to_vec(),
            angles: Vec::with_capacity(targets.len()),
            prefixes: Vec::with_capacity(targets.len()),
            square_defects: Vec::with_capacity(targets.len()),
        };
        for (i, &t) in targets.iter().enumerate() {
            let level = i + 1;
            let a = out.a_matrix(level, t);
            let angle = angle_for(&a.normalized())?;
            let rotated = Mat2R::rotation(angle) * a.normalized();
            // ‖A‖ ≥ 1, so this is ‖(RA)² + I‖ / ‖A‖²
            let residual =
                (rotated * rotated + Mat2R::identity().scale((-2.0 * a.lognorm()).exp())).op_norm();
            if !(residual <= SQUARE_TOL) {
                return Err(SeqError::SquareDefect { level, residual });
            }
            let previous = out.prefixes.last().copied().unwrap_or_else(Mat2R::identity);
            out.angles.push(angle);
            out.prefixes.push(Mat2R::rotation(angle) * previous);
            out.square_defects.push(residual);
        }
        Ok(out)
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn depth(&self) -> usize {
        self.targets.len()
    }

    /// `R_level`, or the identity beyond the built depth.
    pub fn rotation(&self, level: usize) -> Mat2R {
        match level.checked_sub(1).and_then(|i| self.angles.get(i)) {
            Some(&a) => Mat2R::rotation(a),
            None => Mat2R::identity(),
        }
    }

    /// `‖(R_k A_k(t_k))² + I‖ / ‖A_k(t_k)‖²` per level, as measured during the build.
    pub fn square_defects(&self) -> &[f64] {
        &self.square_defects
    }

    /// `A_level(t)`, `level ≥ 1`, via `A_{n+1} = (R_n A_n)²`.
    pub fn a_matrix(&self, level: usize, t: f64) -> ScaledProduct<f64> {
        let mut a = ScaledProduct::from_matrix(Mat2R::shear(t));
        for n in 1..level.max(1) {
            let mut ra = a;
            ra.left_mul(&self.rotation(n));
            a = ra.then(&ra);
        }
        a
    }

    pub fn kicks(&self) -> SeqKicks {
        SeqKicks {
            prefixes: self.prefixes.clone(),
        }
    }

    /// Running-max comparison of `log‖P_n(t_k)‖` over `[1, N/2]` and `(N/2, N]`.
    pub fn verify_bounded(
        &self,
        target: usize,
        horizon: u64,
        stabilization_factor: f64,
    ) -> Result<StabilityReport, SeqError> {
        let t = *target
            .checked_sub(1)
            .and_then(|i| self.targets.get(i))
            .ok_or(SeqError::NoSuchTarget(target))?;
        let report = stability(&self.kicks(), t, horizon, stabilization_factor.ln())?;
        Ok(report)
    }
}

/// `Φ_n = R_{min(j(n)+1, K)} ··· R_1`.
#[derive(Debug, Clone)]
pub struct SeqKicks {
    prefixes: Vec<Mat2R>,
}

impl KickSource for SeqKicks {
    fn kick(&self, index: u64) -> Result<Mat2R, KickError> {
        if index == 0 {
            return Err(KickError::Unavailable {
                index,
                reason: "kicks are 1-based".into(),
            });
        }
        let j = (ruler(index) as usize).min(self.prefixes.len() - 1);
        Ok(self.prefixes[j])
    }

    fn bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub target: f64,
    pub horizon: u64,
    pub sup_lognorm: f64,
    pub first_half_max: f64,
    pub second_half_max: f64,
    pub tolerance: f64,
    pub stabilized: bool,
    pub insufficient_horizon: bool,
}

/// Horizons below this are reported as passing but flagged.
pub const MIN_HORIZON: u64 = 16;

/// Stabilization test for `log‖P_n(t)‖`: the running max over `(N/2, N]`
/// must not exceed the max over `[1, N/2]` by more than `tolerance`.
pub fn stability(
    kicks: &dyn KickSource,
    t: f64,
    horizon: u64,
    tolerance: f64,
) -> Result<StabilityReport, EvolveError> {
    let half = horizon / 2;
    let (mut first, mut second) = (0f64, f64::NEG_INFINITY);
    evolve_each(kicks, Complex64::new(t, 0.0), horizon, |n, l| {
        if n <= half {
            first = first.max(l);
        } else {
            second = second.max(l);
        }
    })?;
    let insufficient = horizon < MIN_HORIZON;
    Ok(StabilityReport {
        target: t,
        horizon,
        sup_lognorm: first.max(second),
        first_half_max: first,
        second_half_max: second,
        tolerance,
        stabilized: insufficient || second <= first + tolerance,
        insufficient_horizon: insufficient,
    })
}
