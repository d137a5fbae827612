//! Parameter-space experiments: boundedness scans over real `t`, growth maps
//! over complex `z`, upper-triangular window bounds, and the second-order
//! recurrence `q_{k+1} = (2 + t c_k) q_k − q_{k−1}`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::{
    evolve_each, growth_constant, lower_bound_from_angles, EvolveError, KickError, KickSource,
};
use crate::mat2::{Iwasawa, Mat2R, MatError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("t = {t} does not exceed the threshold {threshold}")]
    BelowThreshold { t: f64, threshold: f64 },
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Kick(#[from] KickError),
    #[error(transparent)]
    Matrix(#[from] MatError),
}

/// Streaming `sup` and least-squares slope of `log‖P_n‖` over the last half.
#[derive(Debug, Clone, Copy)]
struct Tracker {
    half: u64,
    centre: f64,
    sup: f64,
    sxy: f64,
    sxx: f64,
}

impl Tracker {
    fn new(horizon: u64) -> Self {
        let half = horizon / 2;
        Tracker {
            half,
            centre: 0.5 * ((half + 1) + horizon) as f64,
            sup: 0.0,
            sxy: 0.0,
            sxx: 0.0,
        }
    }

    fn push(&mut self, n: u64, l: f64) {
        self.sup = self.sup.max(l);
        if n > self.half {
            let x = n as f64 - self.centre;
            self.sxy += x * l;
            self.sxx += x * x;
        }
    }

    fn slope(&self) -> f64 {
        if self.sxx > 0.0 {
            self.sxy / self.sxx
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub cells: usize,
    pub horizon: u64,
    /// Norm threshold `M`.
    pub threshold: f64,
    /// Largest growth slope, in nats per step, still called bounded.
    pub slope_tol: f64,
    /// Re-classify cells at verdict boundaries on two half-cells.
    pub refine: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            t_min: 0.0,
            t_max: 10.0,
            cells: 1000,
            horizon: 1 << 16,
            threshold: 1e6,
            slope_tol: 1e-4,
            refine: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellVerdict {
    pub t: f64,
    pub sup_lognorm: f64,
    pub slope: f64,
    /// `sup_n ‖P_n‖ ≤ M`.
    pub bounded_sup: bool,
    /// Fitted slope `≤ slope_tol`.
    pub bounded_slope: bool,
    /// Both of the above.
    pub bounded: bool,
    /// Share of the cell this verdict stands for.
    pub weight: f64,
    /// For `bounded_sup` cells: every `‖Φ_n‖ ≤ M² ‖H(t)‖`, as a bounded
    /// product forces.
    pub kicks_consistent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub config: ScanConfig,
    pub cell_width: f64,
    pub cells: Vec<CellVerdict>,
    pub bounded_cells: f64,
    /// Width times weighted bounded-cell count.
    pub measure: f64,
    pub measure_sup: f64,
    pub measure_slope: f64,
}

/// Classifies `P_n(t)` for `n ≤ horizon`.
pub fn classify(
    kicks: &dyn KickSource,
    t: f64,
    cfg: &ScanConfig,
) -> Result<CellVerdict, AnalysisError> {
    let mut tracker = Tracker::new(cfg.horizon);
    evolve_each(kicks, Complex64::new(t, 0.0), cfg.horizon, |n, l| {
        tracker.push(n, l)
    })?;
    let slope = tracker.slope();
    let bounded_sup = tracker.sup <= cfg.threshold.ln();
    let bounded_slope = slope <= cfg.slope_tol;
    let kicks_consistent = if bounded_sup {
        let cap = cfg.threshold * cfg.threshold * Mat2R::shear(t).op_norm();
        let mut ok = true;
        for n in 1..=cfg.horizon {
            ok &= kicks.kick(n)?.op_norm() <= cap;
        }
        Some(ok)
    } else {
        None
    };
    Ok(CellVerdict {
        t,
        sup_lognorm: tracker.sup,
        slope,
        bounded_sup,
        bounded_slope,
        bounded: bounded_sup && bounded_slope,
        weight: 1.0,
        kicks_consistent,
    })
}

/// Midpoint classification of `cells` equal cells of `[t_min, t_max]`.
pub fn scan(kicks: &dyn KickSource, cfg: &ScanConfig) -> Result<ScanResult, AnalysisError> {
    if !(cfg.t_max > cfg.t_min) || cfg.cells == 0 || cfg.horizon == 0 || !(cfg.threshold > 0.0) {
        return Err(AnalysisError::Invalid(
            "scan needs t_max > t_min, cells ≥ 1, horizon ≥ 1, M > 0".into(),
        ));
    }
    let width = (cfg.t_max - cfg.t_min) / cfg.cells as f64;
    let centre = |i: usize| cfg.t_min + width * (i as f64 + 0.5);
    let coarse: Vec<CellVerdict> = (0..cfg.cells)
        .into_par_iter()
        .map(|i| classify(kicks, centre(i), cfg))
        .collect::<Result<_, _>>()?;

    let cells = if cfg.refine {
        let boundary = |i: usize| {
            let b = coarse[i].bounded;
            (i > 0 && coarse[i - 1].bounded != b)
                || (i + 1 < coarse.len() && coarse[i + 1].bounded != b)
        };
        let refined: Vec<Vec<CellVerdict>> = (0..cfg.cells)
            .into_par_iter()
            .map(|i| {
                if !boundary(i) {
                    return Ok(vec![coarse[i]]);
                }
                [0.25, 0.75]
                    .iter()
                    .map(|f| {
                        classify(kicks, cfg.t_min + width * (i as f64 + f), cfg)
                            .map(|v| CellVerdict { weight: 0.5, ..v })
                    })
                    .collect()
            })
            .collect::<Result<_, AnalysisError>>()?;
        refined.into_iter().flatten().collect()
    } else {
        coarse
    };

    let count =
        |f: fn(&CellVerdict) -> bool| cells.iter().filter(|c| f(c)).map(|c| c.weight).sum::<f64>();
    let bounded_cells = count(|c| c.bounded);
    Ok(ScanResult {
        config: *cfg,
        cell_width: width,
        bounded_cells,
        measure: width * bounded_cells,
        measure_sup: width * count(|c| c.bounded_sup),
        measure_slope: width * count(|c| c.bounded_slope),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub re_points: usize,
    pub im_points: usize,
}

impl GridSpec {
    fn axis(lo: f64, hi: f64, count: usize, i: usize) -> f64 {
        if count <= 1 {
            lo
        } else if i + 1 == count {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (count - 1) as f64
        }
    }

    /// Row-major points, imaginary part outermost.
    pub fn points(&self) -> Vec<Complex64> {
        (0..self.im_points)
            .flat_map(|j| {
                let im = Self::axis(self.im_min, self.im_max, self.im_points, j);
                (0..self.re_points).map(move |i| {
                    Complex64::new(Self::axis(self.re_min, self.re_max, self.re_points, i), im)
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub z: Complex64,
    /// `u_N(z) = log‖P_N(z)‖ / N`.
    pub u: f64,
    /// `log(1 + |z|) + log k`.
    pub majorant: f64,
    /// `(certified lower bound − slack) / N` for `Im z > 0`.
    pub lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthMap {
    pub grid: GridSpec,
    pub horizon: u64,
    pub k: f64,
    pub points: Vec<GrowthPoint>,
    /// Points with `u_N > majorant + 1e-9`.
    pub violations: usize,
    /// `min (u_N − lower)` over points off the real axis.
    pub min_excess: Option<f64>,
}

/// `u_N(z)` on a rectangular grid, with the upper majorant and, off the real
/// axis, the angle-sum lower bound.
pub fn growth_map(
    kicks: &dyn KickSource,
    grid: &GridSpec,
    horizon: u64,
) -> Result<GrowthMap, AnalysisError> {
    if horizon == 0 {
        return Err(AnalysisError::Invalid("horizon must be positive".into()));
    }
    let k = growth_constant(kicks.bound().ok_or(EvolveError::MissingBound)?);
    let mut angle_sum = 0.0;
    for j in 1..=horizon {
        angle_sum += Iwasawa::of(&kicks.kick(j)?)?.angle.abs();
    }
    let n = horizon as f64;
    let points: Vec<GrowthPoint> = grid
        .points()
        .into_par_iter()
        .map(|z| {
            let p = evolve_each(kicks, z, horizon, |_, _| {})?;
            let lower = (z.im > 0.0).then(|| {
                let lb = lower_bound_from_angles(angle_sum, z, k);
                (lb.bound - lb.slack) / n
            });
            Ok(GrowthPoint {
                z,
                u: p.lognorm() / n,
                majorant: (1.0 + z.norm()).ln() + k.ln(),
                lower,
            })
        })
        .collect::<Result<_, AnalysisError>>()?;
    let violations = points.iter().filter(|p| p.u > p.majorant + 1e-9).count();
    let min_excess = points
        .iter()
        .filter_map(|p| p.lower.map(|l| p.u - l))
        .fold(None, |acc: Option<f64>, e| {
            Some(acc.map_or(e, |a| a.min(e)))
        });
    Ok(GrowthMap {
        grid: *grid,
        horizon,
        k,
        points,
        violations,
        min_excess,
    })
}

/// Upper-triangular kicks `Ψ_n = ((λ_n, s_n), (0, 1/λ_n))`, `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriKicks {
    scales: Vec<f64>,
    shears: Vec<f64>,
}

impl TriKicks {
    pub fn new(scales: Vec<f64>, shears: Vec<f64>) -> Result<Self, AnalysisError> {
        if scales.len() != shears.len() || scales.is_empty() {
            return Err(AnalysisError::Invalid(
                "need equally many nonzero scales and shears".into(),
            ));
        }
        if scales.iter().chain(&shears).any(|x| !x.is_finite()) || scales.contains(&0.0) {
            return Err(AnalysisError::Invalid(
                "scales must be finite and nonzero".into(),
            ));
        }
        Ok(TriKicks { scales, shears })
    }

    /// `length` kicks with `λ` uniform in `[1/2, 2]` and `s` uniform in `[−1, 1]`.
    pub fn random(seed: u64, length: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scales, shears) = (0..length)
            .map(|_| (rng.gen_range(0.5..=2.0), rng.gen_range(-1.0..=1.0)))
            .unzip();
        TriKicks { scales, shears }
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn shears(&self) -> &[f64] {
        &self.shears
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// `max |s_n / λ_n|`.
    pub fn threshold(&self) -> f64 {
        self.scales
            .iter()
            .zip(&self.shears)
            .map(|(l, s)| (s / l).abs())
            .fold(0.0, f64::max)
    }

    pub fn matrix(&self, n: usize) -> Mat2R {
        let (l, s) = (self.scales[n - 1], self.shears[n - 1]);
        Mat2R::new(l, s, 0.0, 1.0 / l)
    }

    /// `Ψ_{j+m} H(t) ··· Ψ_{j+1} H(t)` in the closed form `((Π, Π S), (0, 1/Π))`.
    pub fn closed_form(&self, j: usize, m: usize, t: f64) -> Mat2R {
        let (mut pi, mut sum) = (1.0, 0.0);
        for i in j + 1..=j + m {
            let (l, s) = (self.scales[i - 1], self.shears[i - 1]);
            sum += (t + s / l) / (pi * pi);
            pi *= l;
        }
        Mat2R::new(pi, pi * sum, 0.0, 1.0 / pi)
    }

    /// The same product by direct multiplication.
    pub fn direct_product(&self, j: usize, m: usize, t: f64) -> Mat2R {
        (j + 1..=j + m).fold(Mat2R::identity(), |acc, i| {
            self.matrix(i) * Mat2R::shear(t) * acc
        })
    }
}

impl KickSource for TriKicks {
    fn kick(&self, index: u64) -> Result<Mat2R, KickError> {
        if index == 0 || index as usize > self.len() {
            return Err(KickError::Unavailable {
                index,
                reason: format!("{} triangular kicks", self.len()),
            });
        }
        Ok(self.matrix(index as usize))
    }

    fn bound(&self) -> Option<f64> {
        Some(
            (1..=self.len())
                .map(|n| self.matrix(n).op_norm())
                .fold(1.0, f64::max),
        )
    }

    fn len(&self) -> Option<u64> {
        Some(self.scales.len() as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub t: f64,
    pub threshold: f64,
    pub level: f64,
    /// Starts `j = 0, …, starts − 1` were probed.
    pub starts: usize,
    /// Smallest `N` such that every probed start exceeds `level` within `N`.
    pub window: Option<usize>,
    /// Per start, the first `m` with `‖product‖ > level`.
    pub first_exits: Vec<Option<usize>>,
    /// `level⁴ / (t − t₀)`.
    pub bound: f64,
}

/// The minimal window over starts `0..starts` in which the products leave the
/// ball of radius `level`. Needs `t > t₀`.
pub fn exit_window(
    tri: &TriKicks,
    t: f64,
    level: f64,
    n_max: usize,
    starts: usize,
) -> Result<WindowReport, AnalysisError> {
    let threshold = tri.threshold();
    if !(t > threshold) {
        return Err(AnalysisError::BelowThreshold { t, threshold });
    }
    let first_exits: Vec<Option<usize>> = (0..starts.min(tri.len()))
        .map(|j| {
            let (mut pi, mut sum) = (1.0f64, 0.0f64);
            (1..=n_max.min(tri.len() - j)).find(|&m| {
                let (l, s) = (tri.scales[j + m - 1], tri.shears[j + m - 1]);
                sum += (t + s / l) / (pi * pi);
                pi *= l;
                Mat2R::new(pi, pi * sum, 0.0, 1.0 / pi).op_norm() > level
            })
        })
        .collect();
    let window = first_exits
        .iter()
        .try_fold(0usize, |acc, m| m.map(|m| acc.max(m)));
    Ok(WindowReport {
        t,
        threshold,
        level,
        starts: first_exits.len(),
        window,
        first_exits,
        bound: level.powi(4) / (t - threshold),
    })
}

/// `max |s_n / λ_n²|` over the Iwasawa factors `Φ_n = H(s) D(λ) R(α)`,
/// `n = 1, …, count`.
pub fn triangular_threshold(kicks: &dyn KickSource, count: u64) -> Result<f64, AnalysisError> {
    let mut out = 0f64;
    for n in 1..=count {
        let f = Iwasawa::of(&kicks.kick(n)?)?;
        out = out.max((f.shear / (f.scale * f.scale)).abs());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchrodingerReport {
    pub t: f64,
    pub horizon: u64,
    /// `max log ‖(q_k, q_{k−1})‖` over `k ≤ K/2` and over `K/2 < k ≤ K`.
    pub first_half_max: f64,
    pub second_half_max: f64,
    pub tolerance: f64,
    pub bounded: bool,
    /// Least-squares slope of `log ‖(q_k, q_{k−1})‖` over the last half.
    pub slope: f64,
    /// `q_0, …` up to the first `keep` terms, unscaled.
    pub head: Vec<f64>,
}

/// Solves `q_{k+1} = (2 + t c_k) q_k − q_{k−1}` for `k = 1, …, K−1`, with
/// `c_k = coeffs[(k − 1) mod len]`, tracking the pair `(q_k, q_{k−1})` in
/// log scale.
pub fn schrodinger(
    coeffs: &[f64],
    t: f64,
    q0: f64,
    q1: f64,
    horizon: u64,
    tolerance: f64,
    keep: usize,
) -> Result<SchrodingerReport, AnalysisError> {
    if horizon < 2 {
        return Err(AnalysisError::Invalid("horizon must be at least 2".into()));
    }
    if coeffs.is_empty() {
        return Err(AnalysisError::Invalid("empty coefficient sequence".into()));
    }
    if q0 == 0.0 && q1 == 0.0 {
        return Err(AnalysisError::Invalid("zero initial data".into()));
    }
    let mut head = vec![q0, q1];
    head.truncate(keep);
    let (mut prev, mut cur) = (q0, q1);
    let mut log_scale = 0f64;
    let half = horizon / 2;
    let mut tracker = Tracker::new(horizon);
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut record = |k: u64, l: f64| {
        if k <= half {
            first = first.max(l);
        } else {
            second = second.max(l);
        }
    };
    let pair_log = |prev: f64, cur: f64, scale: f64| prev.hypot(cur).ln() + scale;
    let l1 = pair_log(q0, q1, 0.0);
    record(1, l1);
    tracker.push(1, l1);
    for k in 1..horizon {
        let c = coeffs[((k - 1) as usize) % coeffs.len()];
        let next = (2.0 + t * c) * cur - prev;
        prev = cur;
        cur = next;
        if head.len() < keep {
            head.push(cur * log_scale.exp());
        }
        let size = prev.abs().max(cur.abs());
        if size > 1e150 {
            prev /= size;
            cur /= size;
            log_scale += size.ln();
        }
        let l = pair_log(prev, cur, log_scale);
        record(k + 1, l);
        tracker.push(k + 1, l);
    }
    Ok(SchrodingerReport {
        t,
        horizon,
        first_half_max: first,
        second_half_max: second,
        tolerance,
        bounded: second <= first + tolerance,
        slope: tracker.slope(),
        head,
    })
}

/// The matching matrix verdict: `Φ_k = M(c_k)`, running max of `log‖P_n(t)‖`
/// over `(K/2, K]` against `[1, K/2]`.
pub fn matrix_verdict(
    coeffs: &[f64],
    t: f64,
    horizon: u64,
    tolerance: f64,
) -> Result<bool, AnalysisError> {
    struct Periodic<'a>(&'a [f64]);
    impl KickSource for Periodic<'_> {
        fn kick(&self, index: u64) -> Result<Mat2R, KickError> {
            if index == 0 {
                return Err(KickError::Unavailable {
                    index,
                    reason: "kicks are 1-based".into(),
                });
            }
            Ok(Mat2R::kick(self.0[((index - 1) as usize) % self.0.len()]))
        }
    }
    if coeffs.is_empty() {
        return Err(AnalysisError::Invalid("empty coefficient sequence".into()));
    }
    let half = horizon / 2;
    let (mut first, mut second) = (0f64, f64::NEG_INFINITY);
    evolve_each(
        &Periodic(coeffs),
        Complex64::new(t, 0.0),
        horizon,
        |n, l| {
            if n <= half {
                first = first.max(l);
            } else {
                second = second.max(l);
            }
        },
    )?;
    Ok(second <= first + tolerance)
}
