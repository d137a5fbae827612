//! Inductive construction of ruler-ordered kicks `M(c_j)` whose exceptional
//! set meets every ray `[a, ∞)` in positive measure.
//!
//! Level `n` keeps `Ẽ_{n−1}` (the previous set minus small neighborhoods of
//! the zeros of `tr A_{n−1}`), picks `c_n` so that `A_n = A_{n−1} M(c_n) A_{n−1}`
//! stays elliptic there with diagonalizers that move by less than `ε_n`, and
//! adds a fresh elliptic window `I_n` beyond `t = n`.

pub mod frame;
pub mod interval_set;
pub mod pair;
pub mod poly;
pub mod search;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::{partial_product, DyadicError, DyadicKicks};
use crate::evolution::{evolve_each, EvolveError};
use crate::mat2::Mat2R;

pub use frame::{
    continue_frame, continue_kicked, fresh_frame, ladder, ladder_values, Continuation, Frame,
    Ladder,
};
pub use interval_set::{Interval, IntervalSet};
pub use pair::{
    det_defect, diagonalize_on, good_region, has_square_degree_pattern, kick_step, poly_ladder,
    FrameSample, GoodPair, RegionPiece, TrackedPoly,
};
pub use poly::{Poly, PolyMat2};
pub use search::{
    find_new_interval, first_trace_zero, LadderTrace, NewInterval, SearchLimits, TraceFn,
    TraceSample,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EusError {
    #[error("c0 must be negative and finite; got {0}")]
    BadSeed(f64),
    #[error("kick coefficient must be finite and nonzero; got {0}")]
    BadCoefficient(f64),
    #[error("trace identity of the kick step fails: coefficient defect {defect:e}")]
    TraceIdentity { defect: f64 },
    #[error("trace is constant")]
    ConstantTrace,
    #[error("A_0 has no elliptic window")]
    NoSeedWindow,
    #[error("matrix at t = {t} is not elliptic (trace {trace})")]
    NotElliptic { t: f64, trace: f64 },
    #[error("diagonalizer continuation broke down at t = {t}, level {level}")]
    Continuation { t: f64, level: usize },
    #[error("reconstruction error {residual:e} exceeds tolerance")]
    Reconstruction { residual: f64 },
    #[error(
        "level {level}: no coefficient passed after {halvings} halvings \
         (last c = {last:e}, worst margin use {margin_use:.3}, drift {drift:e}, eps {eps:e})"
    )]
    NoCoefficient {
        level: usize,
        halvings: u32,
        last: f64,
        margin_use: f64,
        drift: f64,
        eps: f64,
    },
    #[error("no trace zero found beyond {floor}")]
    NoTraceZero { floor: f64 },
    #[error("elliptic window around {trace_zero} does not close")]
    OpenWindow { trace_zero: f64 },
    #[error("trimmed window around {trace_zero} is empty")]
    EmptyWindow { trace_zero: f64 },
    #[error("t = {t} is not in the constructed set")]
    NotMember { t: f64 },
    #[error("malformed build: {0}")]
    Malformed(String),
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EusConfig {
    pub depth: usize,
    pub c0: f64,
    /// Samples per interval for every sampled check.
    pub samples: usize,
    pub max_halvings: u32,
    /// The kick may use this share of the room `2 − |tr(A²)|`.
    pub slack: f64,
    /// Share of `ε_n` removed around trace zeros.
    pub excision: f64,
    /// Root grid cells per piece at level 1; doubles per level.
    pub root_grid: usize,
    pub search: SearchLimits,
    /// Coefficients past the depth decay by this ratio per level.
    pub tail_ratio: f64,
}

impl Default for EusConfig {
    fn default() -> Self {
        EusConfig {
            depth: 6,
            c0: -1.0,
            samples: 64,
            max_halvings: 60,
            slack: 0.1,
            excision: 0.9,
            root_grid: 64,
            search: SearchLimits::default(),
            tail_ratio: 2f64.powi(-10),
        }
    }
}

/// An interval of `E_n` and the level whose `A` first diagonalized it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub span: Interval,
    pub born: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub n: usize,
    pub eps: f64,
    pub coeff: f64,
    /// `I_n`; for level 0 this is `E_0`.
    pub window: Interval,
    pub trace_zero: Option<f64>,
    /// Zeros of `tr A_{n−1}` removed from `E_{n−1}`.
    pub roots: Vec<f64>,
    pub excised: Vec<Interval>,
    /// `Ẽ_{n−1}` as pieces.
    pub kept: Vec<Piece>,
    /// `E_n` as pieces.
    pub pieces: Vec<Piece>,
    pub set: IntervalSet,
    /// Largest `‖S_n − S_{n−1}‖` over samples of `Ẽ_{n−1}`.
    pub drift: f64,
    /// Least `2 − |tr A_n|` over samples of `Ẽ_{n−1}`.
    pub margin: f64,
    pub halvings: u32,
    /// `A_{n−1}²` has entry degrees `(p, p+1; p−1, p)`.
    pub dominant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EusBuild {
    pub config: EusConfig,
    pub coeffs: Vec<f64>,
    pub levels: Vec<Level>,
}

impl EusBuild {
    pub fn from_json(text: &str) -> Result<Self, EusError> {
        let build: EusBuild =
            serde_json::from_str(text).map_err(|e| EusError::Malformed(e.to_string()))?;
        if build.levels.is_empty() || build.levels.len() != build.coeffs.len() {
            return Err(EusError::Malformed(
                "levels and coefficients disagree".into(),
            ));
        }
        Ok(build)
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// `E_depth`.
    pub fn final_set(&self) -> &IntervalSet {
        &self.levels[self.depth()].set
    }

    /// `⋂_{n ≤ depth} E_n`.
    pub fn core_set(&self) -> IntervalSet {
        self.levels
            .iter()
            .skip(1)
            .fold(self.levels[0].set.clone(), |acc, l| {
                acc.intersection(&l.set)
            })
    }

    pub fn eps(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.eps).collect()
    }

    /// `I_0 = E_0, I_1, …`.
    pub fn windows(&self) -> Vec<Interval> {
        self.levels.iter().map(|l| l.window).collect()
    }

    /// Coefficients extended geometrically so that `horizon` kicks are defined.
    pub fn coefficients_for(&self, horizon: u64) -> Vec<f64> {
        let needed = (64 - horizon.leading_zeros()) as usize;
        let mut out = self.coeffs.clone();
        let last = *out.last().expect("non-empty build");
        let depth = out.len() - 1;
        while out.len() < needed {
            let k = (out.len() - depth) as i32;
            out.push(last * self.config.tail_ratio.powi(k));
        }
        out
    }

    pub fn kicks(&self, horizon: u64) -> Result<DyadicKicks, EusError> {
        Ok(DyadicKicks::new(self.coefficients_for(horizon))?)
    }

    /// The piece of `E_depth` containing `t`, preferring the oldest.
    pub fn piece_of(&self, t: f64) -> Option<Piece> {
        self.levels[self.depth()]
            .pieces
            .iter()
            .filter(|p| p.span.contains(t))
            .min_by_key(|p| p.born)
            .copied()
    }
}

/// Diagonalizers `S_born, …, S_level` at `t`, with the drifts between them.
pub fn frame_chain(
    coeffs: &[f64],
    t: f64,
    born: usize,
    level: usize,
) -> Result<(Vec<Frame>, Vec<f64>), EusError> {
    let values = ladder_values(coeffs, t, level);
    let first = fresh_frame(&values[born]).ok_or(EusError::NotElliptic {
        t,
        trace: values[born].trace(),
    })?;
    let mut frames = vec![first];
    let mut drifts = Vec::new();
    for j in born + 1..=level {
        let prev = frames.last().expect("seeded");
        let step = continue_kicked(prev, &values[j - 1], coeffs[j])
            .ok_or(EusError::Continuation { t, level: j })?;
        frames.push(step.frame);
        drifts.push(step.drift);
    }
    Ok((frames, drifts))
}

/// `A_{n−1}(t)` and `S_{n−1}(t)` at a sample of `Ẽ_{n−1}`.
#[derive(Debug, Clone, Copy)]
struct SamplePoint {
    a: Mat2R,
    frame: Frame,
}

fn level_samples(
    coeffs: &[f64],
    pieces: &[Piece],
    level: usize,
    per_piece: usize,
) -> Result<Vec<SamplePoint>, EusError> {
    let mut out = Vec::with_capacity(pieces.len() * per_piece);
    for p in pieces {
        for t in p.span.samples(per_piece) {
            let (frames, _) = frame_chain(coeffs, t, p.born, level)?;
            let a = ladder_values(coeffs, t, level)[level];
            out.push(SamplePoint {
                a,
                frame: *frames.last().expect("non-empty"),
            });
        }
    }
    Ok(out)
}

/// Outcome of one candidate coefficient on the samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Closeness {
    pub coeff: f64,
    pub drift: f64,
    pub margin: f64,
    pub halvings: u32,
}

/// `(passed, drift, least margin 2 − |tr|, largest share of the slack used)`.
fn certify(samples: &[SamplePoint], c: f64, eps: f64, slack: f64) -> (bool, f64, f64, f64) {
    let (mut drift, mut margin, mut used) = (0f64, f64::INFINITY, 0f64);
    for p in samples {
        let tr = p.a.trace();
        let square = tr * tr - 2.0;
        let shift = c * tr * p.a.a12;
        let room = 2.0 - square.abs();
        used = used.max(shift.abs() / room);
        let next_trace = square + shift;
        margin = margin.min(2.0 - next_trace.abs());
        if !(shift.abs() <= slack * room && next_trace.abs() < 2.0) {
            return (false, drift, margin, used / slack);
        }
        match continue_kicked(&p.frame, &p.a, c) {
            Some(step) if step.drift < eps => drift = drift.max(step.drift),
            Some(step) => return (false, drift.max(step.drift), margin, used / slack),
            None => return (false, f64::INFINITY, margin, used / slack),
        }
    }
    (true, drift, margin, used / slack)
}

/// Halves `|c|` from `start` until the kicked matrices stay elliptic with
/// diagonalizers within `eps` of the current ones at every sample.
fn shrink_for_closeness(
    samples: &[SamplePoint],
    start: f64,
    eps: f64,
    cfg: &EusConfig,
    level: usize,
) -> Result<Closeness, EusError> {
    let mut c = start;
    let mut last = (0.0, 0.0);
    for halvings in 0..=cfg.max_halvings {
        let (ok, drift, margin, used) = certify(samples, c, eps, cfg.slack);
        if ok {
            return Ok(Closeness {
                coeff: c,
                drift,
                margin,
                halvings,
            });
        }
        last = (drift, used);
        c *= 0.5;
    }
    Err(EusError::NoCoefficient {
        level,
        halvings: cfg.max_halvings,
        last: 2.0 * c,
        margin_use: last.1,
        drift: last.0,
        eps,
    })
}

/// Removes `[r − w/2, r + w/2]` around each root from the pieces.
fn excise(pieces: &[Piece], roots: &[f64], width: f64) -> (Vec<Piece>, Vec<Interval>) {
    let half = 0.5 * width;
    let cuts: Vec<Interval> = roots
        .iter()
        .map(|&r| Interval::new(r - half, r + half))
        .collect();
    let cut_set = IntervalSet::from_intervals(cuts.iter().copied());
    let mut kept = Vec::new();
    for p in pieces {
        for span in IntervalSet::single(p.span.lo, p.span.hi)
            .difference(&cut_set)
            .intervals()
        {
            if !span.is_empty() {
                kept.push(Piece {
                    span: *span,
                    born: p.born,
                });
            }
        }
    }
    (kept, cuts)
}

fn set_of(pieces: &[Piece]) -> IntervalSet {
    IntervalSet::from_intervals(pieces.iter().map(|p| p.span))
}

/// Candidate for one sign of `c_n`.
struct Candidate {
    closeness: Closeness,
    zero: Option<f64>,
    lookahead: Option<f64>,
}

/// Runs the induction up to `cfg.depth`.
pub fn build_eus(cfg: &EusConfig) -> Result<EusBuild, EusError> {
    let c0 = cfg.c0;
    if !(c0.is_finite() && c0 < 0.0) {
        return Err(EusError::BadSeed(c0));
    }
    let mut poly = kick_step(&TrackedPoly::shear(), c0)?;
    let region = good_region(&poly.value, Interval::new(0.0, -4.0 / c0))?;
    let seed = region.first().ok_or(EusError::NoSeedWindow)?.span;
    let third = seed.len() / 3.0;
    let e0 = Interval::new(seed.lo + third, seed.hi - third);
    let first_piece = Piece { span: e0, born: 0 };
    let mut coeffs = vec![c0];
    let mut levels = vec![Level {
        n: 0,
        eps: e0.len() / 3.0,
        coeff: c0,
        window: e0,
        trace_zero: None,
        roots: Vec::new(),
        excised: Vec::new(),
        kept: Vec::new(),
        pieces: vec![first_piece],
        set: IntervalSet::single(e0.lo, e0.hi),
        drift: 0.0,
        margin: e0
            .samples(cfg.samples)
            .map(|t| 2.0 - poly.value.eval(t).trace().abs())
            .fold(f64::INFINITY, f64::min),
        halvings: 0,
        dominant: true,
    }];

    for n in 1..=cfg.depth {
        let eps = levels
            .iter()
            .map(|l| l.window.len())
            .fold(f64::INFINITY, f64::min)
            / 3f64.powi(n as i32);
        let previous = levels.last().expect("level 0 exists");

        let grid = cfg.root_grid << n.min(20);
        let mut roots: Vec<f64> = Vec::new();
        for p in &previous.pieces {
            let trace = LadderTrace {
                coeffs: &coeffs,
                level: n - 1,
            };
            roots.extend(pair::roots_on(|t| trace.value(t), p.span, grid));
        }
        roots.sort_by(f64::total_cmp);
        roots.dedup();
        let width = cfg.excision * eps / roots.len().max(1) as f64;
        let (kept, excised) = excise(&previous.pieces, &roots, width);
        let samples = level_samples(&coeffs, &kept, n - 1, cfg.samples)?;

        let square = &poly.value * &poly.value;
        let dominant = has_square_degree_pattern(&square);
        let floor = n as f64;
        let at_floor = ladder(&coeffs, floor, n - 1);
        let square_at_floor = if at_floor.log_abs_trace() > 1.0 {
            1.0
        } else {
            at_floor.trace().powi(2) - 2.0
        };
        let lead = square.p12.leading();
        let preferred = if lead == 0.0 {
            -1.0
        } else {
            -square_at_floor.signum() * lead.signum()
        };

        let start = if n == 1 { 0.5 } else { coeffs[n - 1].abs() };
        let mut candidates: Vec<(f64, Candidate)> = Vec::new();
        let mut failure = None;
        for sign in [-1.0, 1.0] {
            match shrink_for_closeness(&samples, sign * start, eps, cfg, n) {
                Ok(closeness) => {
                    let mut trial = coeffs.clone();
                    trial.push(closeness.coeff);
                    let trace = LadderTrace {
                        coeffs: &trial,
                        level: n,
                    };
                    let zero = first_trace_zero(&trace, floor, &cfg.search);
                    let lookahead = first_trace_zero(&trace, floor + 1.0, &cfg.search);
                    candidates.push((
                        sign,
                        Candidate {
                            closeness,
                            zero,
                            lookahead,
                        },
                    ));
                }
                Err(e) => failure = Some(e),
            }
        }
        let key = |c: &Candidate| {
            (
                c.lookahead.unwrap_or(f64::INFINITY),
                c.zero.unwrap_or(f64::INFINITY),
            )
        };
        candidates.retain(|(_, c)| c.zero.is_some());
        let (_, chosen) = match candidates.len() {
            0 => return Err(failure.unwrap_or(EusError::NoTraceZero { floor })),
            _ => candidates
                .into_iter()
                .min_by(|(sa, a), (sb, b)| {
                    key(a)
                        .partial_cmp(&key(b))
                        .expect("keys are not NaN")
                        .then_with(|| ((*sa != preferred) as u8).cmp(&((*sb != preferred) as u8)))
                })
                .expect("non-empty"),
        };
        let c = chosen.closeness.coeff;
        coeffs.push(c);
        poly = kick_step(&poly, c)?;

        let found = find_new_interval(
            &LadderTrace {
                coeffs: &coeffs,
                level: n,
            },
            floor,
            &cfg.search,
        )?;
        let kept_set = set_of(&kept);
        let fresh = IntervalSet::single(found.interval.lo, found.interval.hi).difference(&kept_set);
        let mut pieces = kept.clone();
        pieces.extend(
            fresh
                .intervals()
                .iter()
                .map(|&span| Piece { span, born: n }),
        );
        pieces.sort_by(|a, b| a.span.lo.total_cmp(&b.span.lo).then(a.born.cmp(&b.born)));
        let set = kept_set.union(&IntervalSet::single(found.interval.lo, found.interval.hi));

        levels.push(Level {
            n,
            eps,
            coeff: c,
            window: found.interval,
            trace_zero: Some(found.trace_zero),
            roots,
            excised,
            kept,
            pieces,
            set,
            drift: chosen.closeness.drift,
            margin: chosen.closeness.margin,
            halvings: chosen.closeness.halvings,
            dominant,
        });
    }
    Ok(EusBuild {
        config: *cfg,
        coeffs,
        levels,
    })
}

/// Recomputed checks of a build; every check is on `config.samples` samples
/// per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub samples: usize,
    /// Largest relative deviation from `ε_n = 3^{−n} min_{j<n} |I_j|`.
    pub eps_defect: f64,
    pub windows_beyond_floor: bool,
    /// Largest `drift / ε_n`.
    pub drift_ratio: f64,
    /// Least `2 − |tr A_n|` on the samples of `Ẽ_{n−1}`.
    pub kept_margin: f64,
    /// Least `2 − |tr A_n|` on the samples of `I_n`.
    pub window_margin: f64,
    /// Largest `|E_{n−1} \ Ẽ_{n−1}| / ε_n`.
    pub excised_ratio: f64,
    /// Least `|E_depth ∩ I_m| / |I_m|`.
    pub measure_ratio: f64,
    pub reconstruction: f64,
    pub det_defect: f64,
    pub dominant: bool,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.eps_defect <= 1e-12
            && self.windows_beyond_floor
            && self.drift_ratio < 1.0
            && self.kept_margin > 0.0
            && self.window_margin >= 0.1 - 1e-12
            && self.excised_ratio < 1.0
            && self.measure_ratio > 2.0 / 3.0
            && self.reconstruction <= pair::RECONSTRUCTION_TOL
            && self.det_defect <= 1e-8
            && self.dominant
    }
}

pub fn check_invariants(build: &EusBuild) -> Result<InvariantReport, EusError> {
    let per = build.config.samples;
    let coeffs = &build.coeffs;
    let depth = build.depth();
    let windows = build.windows();

    let mut eps_defect = 0f64;
    for (n, level) in build.levels.iter().enumerate() {
        let expected = if n == 0 {
            windows[0].len() / 3.0
        } else {
            windows[..n]
                .iter()
                .map(|w| w.len())
                .fold(f64::INFINITY, f64::min)
                / 3f64.powi(n as i32)
        };
        eps_defect = eps_defect.max((level.eps - expected).abs() / expected);
    }
    let windows_beyond_floor = build
        .levels
        .iter()
        .skip(1)
        .all(|l| l.window.lo > l.n as f64);

    let (mut drift_ratio, mut kept_margin, mut window_margin, mut excised_ratio) =
        (0f64, f64::INFINITY, f64::INFINITY, 0f64);
    for n in 1..=depth {
        let level = &build.levels[n];
        let before = build.levels[n - 1].set.measure();
        excised_ratio = excised_ratio.max((before - set_of(&level.kept).measure()) / level.eps);
        for p in &level.kept {
            for t in p.span.samples(per) {
                let (_, drifts) = frame_chain(coeffs, t, p.born, n)?;
                drift_ratio = drift_ratio.max(drifts.last().copied().unwrap_or(0.0) / level.eps);
                let trace = ladder_values(coeffs, t, n)[n].trace();
                kept_margin = kept_margin.min(2.0 - trace.abs());
            }
        }
        for t in level.window.samples(per) {
            window_margin = window_margin.min(2.0 - ladder_values(coeffs, t, n)[n].trace().abs());
        }
    }

    let last = &build.levels[depth];
    let measure_ratio = windows
        .iter()
        .map(|w| {
            last.set
                .intersection(&IntervalSet::single(w.lo, w.hi))
                .measure()
                / w.len()
        })
        .fold(f64::INFINITY, f64::min);

    let mut reconstruction = 0f64;
    for p in &last.pieces {
        for t in p.span.samples(per) {
            let (frames, _) = frame_chain(coeffs, t, p.born, depth)?;
            let a = ladder_values(coeffs, t, depth)[depth];
            let f = frames.last().expect("non-empty");
            reconstruction =
                reconstruction.max((f.reconstruct() - a.to_complex()).op_norm() / a.op_norm());
        }
    }

    let polys = poly_ladder(coeffs, depth)?;
    let det_defect = polys.iter().map(pair::det_defect).fold(0.0, f64::max);
    let dominant = polys[..depth]
        .iter()
        .all(|a| has_square_degree_pattern(&(&a.value * &a.value)));

    Ok(InvariantReport {
        samples: per,
        eps_defect,
        windows_beyond_floor,
        drift_ratio,
        kept_margin,
        window_margin,
        excised_ratio,
        measure_ratio,
        reconstruction,
        det_defect,
        dominant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub t: f64,
    pub horizon: u64,
    pub born: usize,
    pub first_half_max: f64,
    pub second_half_max: f64,
    pub tolerance: f64,
    pub stabilized: bool,
    /// `tr A_n(t)` for `n = 0, …, depth`.
    pub traces: Vec<f64>,
    /// `|tr A_n(t)| < 2` for `born ≤ n ≤ depth`.
    pub elliptic: bool,
    /// `max_j ‖S_j(t)‖`.
    pub frame_bound: f64,
    /// `log(C² exp{C(CΣ|c_j| + Σε_j)})`.
    pub proof_log_bound: f64,
    /// Relative distance between the streamed product and the dyadic
    /// partial product at the horizon.
    pub dyadic_agreement: f64,
}

impl MembershipReport {
    pub fn passed(&self) -> bool {
        self.stabilized && self.elliptic
    }
}

/// Evolves `P_K(t)` for `K ≤ horizon` with the built kicks and checks that
/// the running max of `log‖P_K‖` over `(horizon/2, horizon]` exceeds the one
/// over `[1, horizon/2]` by at most `tolerance`.
pub fn verify_membership(
    build: &EusBuild,
    t: f64,
    horizon: u64,
    tolerance: f64,
) -> Result<MembershipReport, EusError> {
    let piece = build.piece_of(t).ok_or(EusError::NotMember { t })?;
    let depth = build.depth();
    let kicks = build.kicks(horizon.max(2))?;
    let half = horizon / 2;
    let (mut first, mut second) = (0f64, f64::NEG_INFINITY);
    let streamed = evolve_each(&kicks, Complex64::new(t, 0.0), horizon, |k, l| {
        if k <= half {
            first = first.max(l);
        } else {
            second = second.max(l);
        }
    })?;
    let dyadic = partial_product(&kicks, Complex64::new(t, 0.0), horizon.max(1))?;
    let dyadic_agreement = streamed.relative_distance(&dyadic);

    let traces: Vec<f64> = ladder_values(&build.coeffs, t, depth)
        .iter()
        .map(Mat2R::trace)
        .collect();
    let elliptic = traces[piece.born..].iter().all(|tr| tr.abs() < 2.0);
    let (frames, _) = frame_chain(&build.coeffs, t, piece.born, depth)?;
    let frame_bound = frames.iter().map(|f| f.s.op_norm()).fold(1.0, f64::max);
    let coeff_sum: f64 = build.coeffs[1..].iter().map(|c| c.abs()).sum();
    let eps_sum: f64 = build.levels[1..].iter().map(|l| l.eps).sum();
    let proof_log_bound =
        2.0 * frame_bound.ln() + frame_bound * (frame_bound * coeff_sum + eps_sum);

    Ok(MembershipReport {
        t,
        horizon,
        born: piece.born,
        first_half_max: first,
        second_half_max: second,
        tolerance,
        stabilized: second <= first + tolerance,
        traces,
        elliptic,
        frame_bound,
        proof_log_bound,
        dyadic_agreement,
    })
}
