//! Ruler-ordered kicks `Φ_k = M(c_{j(k)})`, the doubling recurrence
//! `A_{m+1} = A_m M(c_{m+1}) A_m`, and partial products from binary digits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::{KickError, KickSource, ScaledProduct};
use crate::mat2::{Mat2, Mat2R, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DyadicError {
    #[error("coefficient c_{index} = {value} must be finite and nonzero")]
    BadCoefficient { index: usize, value: f64 },
    #[error("coefficient c_{0} is not available")]
    Missing(usize),
    #[error("partial products start at K = 1")]
    ZeroLength,
}

/// 2-adic valuation of `k ≥ 1`.
///
/// # Panics
/// Panics for `k = 0`.
pub fn ruler(k: u64) -> u32 {
    assert!(k >= 1, "ruler index starts at 1");
    k.trailing_zeros()
}

/// Kick coefficients `c_0, c_1, …`; kick `k` is `M(c_{ruler(k)})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicKicks {
    coeffs: Vec<f64>,
}

impl DyadicKicks {
    pub fn new(coeffs: Vec<f64>) -> Result<Self, DyadicError> {
        if let Some((index, &value)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| !c.is_finite() || **c == 0.0)
        {
            return Err(DyadicError::BadCoefficient { index, value });
        }
        Ok(DyadicKicks { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> Result<f64, DyadicError> {
        self.coeffs.get(j).copied().ok_or(DyadicError::Missing(j))
    }

    pub fn kick_matrix(&self, j: usize) -> Result<Mat2R, DyadicError> {
        Ok(Mat2R::kick(self.coeff(j)?))
    }
}

impl KickSource for DyadicKicks {
    fn kick(&self, index: u64) -> Result<Mat2R, KickError> {
        if index == 0 {
            return Err(KickError::Unavailable {
                index,
                reason: "kicks are 1-based".into(),
            });
        }
        let j = ruler(index) as usize;
        self.kick_matrix(j).map_err(|e| KickError::Unavailable {
            index,
            reason: e.to_string(),
        })
    }

    fn bound(&self) -> Option<f64> {
        Some(
            self.coeffs
                .iter()
                .map(|&c| Mat2R::kick(c).op_norm())
                .fold(1.0, f64::max),
        )
    }

    fn len(&self) -> Option<u64> {
        // every k < 2^len has ruler(k) < len
        let n = self.coeffs.len() as u32;
        Some(if n >= 64 { u64::MAX } else { (1u64 << n) - 1 })
    }
}

/// Cached `A_{-1}, A_0, …, A_depth` at a fixed shear parameter.
#[derive(Debug, Clone)]
pub struct DyadicState<T> {
    kicks: Vec<Mat2<T>>,
    levels: Vec<ScaledProduct<T>>,
}

impl<T: Scalar> DyadicState<T> {
    /// Fills the cache up to `A_depth` (`depth ≥ -1`).
    pub fn new(kicks: &DyadicKicks, z: T, depth: i32) -> Result<Self, DyadicError> {
        let depth = depth.max(-1);
        let mut matrices = Vec::new();
        // kick c_{depth+1} is also kept so that M(c_{depth+1}) A_depth is available
        for j in 0..=(depth + 1) as usize {
            match kicks.coeff(j) {
                Ok(c) => matrices.push(Mat2::lower_shear(T::from_real(c))),
                Err(e) if j as i32 <= depth => return Err(e),
                Err(_) => {}
            }
        }
        let mut levels = Vec::with_capacity((depth + 2) as usize);
        levels.push(ScaledProduct::from_matrix(Mat2::upper_shear(z)));
        for j in 0..=depth {
            let a = levels[levels.len() - 1];
            let mut next = a;
            next.right_mul(&matrices[j as usize]);
            levels.push(next.then(&a));
        }
        Ok(DyadicState {
            kicks: matrices,
            levels,
        })
    }

    pub fn depth(&self) -> i32 {
        self.levels.len() as i32 - 2
    }

    /// `A_m` for `-1 ≤ m ≤ depth`.
    pub fn a(&self, m: i32) -> Option<&ScaledProduct<T>> {
        usize::try_from(m + 1).ok().and_then(|i| self.levels.get(i))
    }

    /// `M(c_j) A_{j-1} = ∏_{k ≤ 2^j} Φ_k H`.
    pub fn block(&self, j: u32) -> Result<ScaledProduct<T>, DyadicError> {
        let a = *self
            .a(j as i32 - 1)
            .ok_or(DyadicError::Missing(j as usize))?;
        let kick = self
            .kicks
            .get(j as usize)
            .ok_or(DyadicError::Missing(j as usize))?;
        let mut out = a;
        out.left_mul(kick);
        Ok(out)
    }

    /// `∏_{k ≤ K} Φ_k H` from the binary digits of `K`: the block of the lowest
    /// set bit stands leftmost.
    pub fn partial_product(&self, count: u64) -> Result<ScaledProduct<T>, DyadicError> {
        if count == 0 {
            return Err(DyadicError::ZeroLength);
        }
        let mut out = ScaledProduct::identity();
        let mut rest = count;
        while rest != 0 {
            let j = rest.trailing_zeros();
            out = out.then(&self.block(j)?);
            rest &= rest - 1;
        }
        Ok(out)
    }
}

/// `A_m(z)`; builds a cache up to `m`.
pub fn a_matrix<T: Scalar>(
    kicks: &DyadicKicks,
    z: T,
    m: i32,
) -> Result<ScaledProduct<T>, DyadicError> {
    let state = DyadicState::new(kicks, z, m)?;
    Ok(*state.a(m.max(-1)).expect("level filled"))
}

/// `∏_{1≤k≤K} Φ_k H(z)` in `O(log K)` products.
pub fn partial_product<T: Scalar>(
    kicks: &DyadicKicks,
    z: T,
    count: u64,
) -> Result<ScaledProduct<T>, DyadicError> {
    if count == 0 {
        return Err(DyadicError::ZeroLength);
    }
    let top = 63 - count.leading_zeros() as i32;
    DyadicState::new(kicks, z, top - 1)?.partial_product(count)
}
