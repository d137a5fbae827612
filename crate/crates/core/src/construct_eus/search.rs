//! Trace zeros beyond a floor and the elliptic windows around them.

use serde::{Deserialize, Serialize};

use super::frame::ladder;
use super::interval_set::Interval;
use super::pair::inner_crossing;
use super::poly::{bisect, Poly};
use super::EusError;

/// A trace value with its slope. `value` may be infinite when only its sign
/// and `step` (`max(|tr|, 2) / |tr'|`) are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub value: f64,
    pub slope: f64,
    pub sign: f64,
    pub step: f64,
}

pub trait TraceFn {
    fn sample(&self, t: f64) -> TraceSample;

    fn value(&self, t: f64) -> f64 {
        let s = self.sample(t);
        if s.value.is_finite() {
            s.value
        } else {
            s.sign * f64::MAX
        }
    }
}

impl TraceFn for Poly {
    fn sample(&self, t: f64) -> TraceSample {
        let (mut value, mut slope) = (0.0, 0.0);
        for &c in self.coeffs().iter().rev() {
            slope = slope * t + value;
            value = value * t + c;
        }
        TraceSample {
            value,
            slope,
            sign: value.signum(),
            step: value.abs().max(2.0) / slope.abs(),
        }
    }
}

/// `tr A_level(t)` for the kick coefficients `coeffs`.
#[derive(Debug, Clone, Copy)]
pub struct LadderTrace<'a> {
    pub coeffs: &'a [f64],
    pub level: usize,
}

impl TraceFn for LadderTrace<'_> {
    fn sample(&self, t: f64) -> TraceSample {
        let l = ladder(self.coeffs, t, self.level);
        TraceSample {
            value: l.trace(),
            slope: l.slope(),
            sign: l.trace_sign(),
            step: l.step_scale(),
        }
    }
}

/// Limits for scanning beyond a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchLimits {
    /// Scan up to `floor · 2^span_log2`.
    pub span_log2: i32,
    pub max_steps: u64,
    /// Window trimming level for `|tr|`.
    pub trim: f64,
    pub trim_samples: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            span_log2: 40,
            max_steps: 2_000_000,
            trim: 1.899,
            trim_samples: 4096,
        }
    }
}

/// First sign change of the trace beyond `floor`, scanning with steps a fifth
/// of `max(|tr|,2)/|tr'|`; falls back to doubling brackets `floor · 2^j`.
pub fn first_trace_zero(f: &dyn TraceFn, floor: f64, limits: &SearchLimits) -> Option<f64> {
    let base = floor.max(f64::MIN_POSITIVE);
    let limit = base * 2f64.powi(limits.span_log2);
    let mut x = base;
    let mut s = f.sample(x);
    let mut steps = 0u64;
    while x < limit && steps < limits.max_steps {
        let scale = x.abs().max(1.0);
        let mut h = 0.2 * s.step;
        if !h.is_finite() {
            h = 0.01 * scale;
        }
        let h = h.clamp(1e-12 * scale, 0.01 * scale);
        let y = x + h;
        let sy = f.sample(y);
        if sy.sign != s.sign {
            return Some(bisect(|t| f.value(t), x, y, 1e-15));
        }
        x = y;
        s = sy;
        steps += 1;
    }
    let start = f.sample(base).sign;
    let mut lo = base;
    for j in 1..=limits.span_log2 {
        let hi = base * 2f64.powi(j);
        if f.sample(hi).sign != start {
            return Some(bisect(|t| f.value(t), lo, hi, 1e-15));
        }
        lo = hi;
    }
    None
}

/// `I ⊂ (floor, ∞)` around a trace zero `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewInterval {
    pub trace_zero: f64,
    /// Component of `|tr| < 2` containing the zero, clipped at the floor.
    pub window: Interval,
    /// The run containing the zero where `|tr| ≤ trim`.
    pub interval: Interval,
}

fn window_edge(
    f: &dyn TraceFn,
    t0: f64,
    forward: bool,
    floor: f64,
    cap: f64,
    max_steps: u64,
) -> Result<f64, EusError> {
    let dir = if forward { 1.0 } else { -1.0 };
    let mut x = t0;
    for _ in 0..max_steps {
        let s = f.sample(x);
        let mut h = 0.25 * (2.05 - s.value.abs()).max(0.05) / s.slope.abs();
        if !h.is_finite() || h > cap {
            h = cap;
        }
        let h = h.max(1e-15 * x.abs().max(1.0));
        let y = x + dir * h;
        if !forward && y <= floor {
            return Ok(if f.value(floor).abs() < 2.0 {
                floor
            } else {
                inner_crossing(|t| f.value(t).abs() - 2.0, x, floor)
            });
        }
        if !(f.value(y).abs() < 2.0) {
            return Ok(inner_crossing(|t| f.value(t).abs() - 2.0, x, y));
        }
        x = y;
    }
    Err(EusError::OpenWindow { trace_zero: t0 })
}

/// Locates the first trace zero beyond `floor`, expands to its elliptic
/// window and trims it to `|tr| ≤ limits.trim`.
pub fn find_new_interval(
    f: &dyn TraceFn,
    floor: f64,
    limits: &SearchLimits,
) -> Result<NewInterval, EusError> {
    let t0 = first_trace_zero(f, floor, limits).ok_or(EusError::NoTraceZero { floor })?;
    let cap = 1.0 / f.sample(t0).slope.abs();
    let cap = if cap.is_finite() {
        cap
    } else {
        1e-3 * t0.abs().max(1.0)
    };
    let lo = window_edge(f, t0, false, floor, cap, limits.max_steps)?;
    let hi = window_edge(f, t0, true, floor, cap, limits.max_steps)?;
    let window = Interval::new(lo, hi);

    let n = limits.trim_samples.max(2);
    let grid: Vec<f64> = window.samples(n + 1).collect();
    let inside = |t: f64| f.value(t).abs() <= limits.trim;
    let centre = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t0).abs().total_cmp(&(b.1 - t0).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (mut i, mut j) = (centre, centre);
    let level = |t: f64| f.value(t).abs() - limits.trim;
    let (a, b) = if !inside(grid[centre]) {
        (t0, t0)
    } else {
        while i > 0 && inside(grid[i - 1]) {
            i -= 1;
        }
        while j + 1 < grid.len() && inside(grid[j + 1]) {
            j += 1;
        }
        let a = if i > 0 {
            inner_crossing(level, grid[i], grid[i - 1])
        } else {
            grid[0]
        };
        let b = if j + 1 < grid.len() {
            inner_crossing(level, grid[j], grid[j + 1])
        } else {
            grid[j]
        };
        (a, b)
    };
    let a = if a <= floor { floor.next_up() } else { a };
    if !(a < b) {
        return Err(EusError::EmptyWindow { trace_zero: t0 });
    }
    Ok(NewInterval {
        trace_zero: t0,
        window,
        interval: Interval::new(a, b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_trace() {
        let p = Poly::new(vec![100.0, -1.0]);
        let found = find_new_interval(&p, 10.0, &SearchLimits::default()).unwrap();
        assert!((found.trace_zero - 100.0).abs() < 1e-10);
        assert!((found.window.lo - 98.0).abs() < 1e-9 && (found.window.hi - 102.0).abs() < 1e-9);
        assert!(
            (found.interval.lo - 98.101).abs() < 1e-9 && (found.interval.hi - 101.899).abs() < 1e-9
        );
    }

    #[test]
    fn sign_flip_moves_the_zero() {
        // 1 + c·t² crosses zero beyond 1 only for c < 0
        let down = Poly::new(vec![1.0, 0.0, -0.01]);
        let up = Poly::new(vec![1.0, 0.0, 0.01]);
        let limits = SearchLimits {
            span_log2: 10,
            max_steps: 100_000,
            ..Default::default()
        };
        assert!((first_trace_zero(&down, 1.0, &limits).unwrap() - 10.0).abs() < 1e-9);
        assert!(first_trace_zero(&up, 1.0, &limits).is_none());
    }

    #[test]
    fn poly_sample_slope() {
        let p = Poly::new(vec![1.0, 2.0, 3.0]);
        let s = p.sample(2.0);
        assert_eq!((s.value, s.slope), (17.0, 14.0));
    }
}
