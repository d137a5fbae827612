//! The acceptance suite. Every criterion prints one `PASS`/`FAIL` line with
//! its wall time; criteria run one at a time so the timings are meaningful.

mod common;

use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use common::{entries, shear, two_adic, Direct};
use kicklab::analysis::{
    exit_window, growth_map, matrix_verdict, scan, schrodinger, GridSpec, ScanConfig, TriKicks,
};
use kicklab::construct_eus::{build_eus, check_invariants, verify_membership, EusConfig};
use kicklab::construct_seq::{stability, SeqConstruction};
use kicklab::dyadic::{DyadicKicks, DyadicState};
use kicklab::evolution::{
    growth_constant, q_growth_certificate, ConstantKicks, KickSource, RandomBoundedKicks,
};
use kicklab::mat2::{Iwasawa, Mat2C, Mat2R, Vec2, Vec2C};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

/// A criterion's findings: every failed check, plus the runtime budget.
struct Criterion {
    number: u32,
    title: &'static str,
    budget: Option<Duration>,
    failures: Vec<String>,
}

impl Criterion {
    fn new(number: u32, title: &'static str, budget: Option<Duration>) -> Self {
        Criterion {
            number,
            title,
            budget,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok && self.failures.len() < 10 {
            self.failures.push(what());
        }
    }

    /// Runs `body`, prints the verdict line and panics on failure.
    fn run(mut self, body: impl FnOnce(&mut Self)) {
        let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
        let start = Instant::now();
        body(&mut self);
        let elapsed = start.elapsed();
        if let Some(budget) = self.budget {
            self.check(elapsed <= budget, || {
                format!("took {elapsed:.2?}, budget {budget:.0?}")
            });
        }
        let verdict = if self.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        // written past the test harness's capture so the line always shows
        let line = format!(
            "criterion {:>2} {:<46} {verdict} ({:.2?})\n",
            self.number, self.title, elapsed
        );
        let mut out = std::io::stdout().lock();
        out.write_all(line.as_bytes()).unwrap();
        for f in &self.failures {
            writeln!(out, "    {f}").unwrap();
        }
        out.flush().unwrap();
        assert!(
            self.failures.is_empty(),
            "criterion {} failed: {:?}",
            self.number,
            self.failures
        );
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn complex<R: Rng>(rng: &mut R, r: f64) -> Complex64 {
    Complex64::new(rng.gen_range(-r..r), rng.gen_range(-r..r))
}

#[test]
fn criterion_01_iwasawa_suite() {
    Criterion::new(1, "Iwasawa decomposition suite", secs(5)).run(|c| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let m = common::random_unimodular(&mut rng, 1e3);
            let f = Iwasawa::of(&m).unwrap();
            let err = f.matrix().distance(&m);
            c.check(err <= 1e-10, || format!("reconstruction {err:e} for {m:?}"));
            c.check(
                (-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2).contains(&f.angle),
                || format!("angle {} out of range", f.angle),
            );
            let gap = (m.op_norm() - m.inverse().unwrap().op_norm()).abs();
            c.check(gap <= 1e-10, || format!("norm asymmetry {gap:e} for {m:?}"));
        }
    });
}

#[test]
fn criterion_02_q_form_suite() {
    Criterion::new(2, "Q-form invariance, shear identity, 2Q bound", None).run(|c| {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let m = common::random_unimodular(&mut rng, 10.0);
            let x: Vec2C = Vec2::new(complex(&mut rng, 5.0), complex(&mut rng, 5.0));
            let y = m.to_complex().apply(x);
            let scale = x.norm_sq() * m.op_norm().powi(2);
            let gap = (y.q_form() - x.q_form()).abs();
            c.check(gap <= 1e-12 * scale, || {
                format!("Q changed by {gap:e} (scale {scale:e})")
            });

            let z = complex(&mut rng, 5.0);
            let sheared = Mat2C::shear(z).apply(x);
            let expected = x.q_form() + z.im * x.x2.norm_sqr();
            let rounding = 8.0 * f64::EPSILON * (x.norm_sq() * (1.0 + z.norm()) + 1.0);
            c.check((sheared.q_form() - expected).abs() <= rounding, || {
                format!(
                    "shear identity off by {:e}",
                    (sheared.q_form() - expected).abs()
                )
            });
            for v in [x, y, sheared] {
                c.check(
                    v.norm_sq() >= 2.0 * v.q_form() - 4.0 * f64::EPSILON * v.norm_sq(),
                    || format!("|y|² = {} < 2Q = {}", v.norm_sq(), 2.0 * v.q_form()),
                );
            }
        }
    });
}

#[test]
fn criterion_03_growth_certificate() {
    Criterion::new(3, "per-step Q growth and telescoped bound", secs(60)).run(|c| {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points = [
            Complex64::new(0.5, 0.5),
            Complex64::new(1.0, 1.0),
            Complex64::new(2.0, 0.25),
        ];
        for _ in 0..100 {
            let kicks = RandomBoundedKicks::new(rng.gen(), rng.gen_range(1.0..=4.0));
            for z in points {
                let report = q_growth_certificate(&kicks, z, 2000).unwrap();
                c.check(report.violations == 0, || {
                    format!("{} violations at z = {z}", report.violations)
                });
                c.check(report.first_telescope_failure.is_none(), || {
                    format!(
                        "telescoped bound fails at n = {:?}, z = {z}",
                        report.first_telescope_failure
                    )
                });
            }
        }
    });
}

#[test]
fn criterion_04_majorization() {
    Criterion::new(4, "growth majorant on a 64x64 grid", None).run(|c| {
        let kicks = RandomBoundedKicks::new(4, 3.0);
        let grid = GridSpec {
            re_min: 0.0,
            re_max: 8.0,
            im_min: 0.0,
            im_max: 2.0,
            re_points: 64,
            im_points: 64,
        };
        let map = growth_map(&kicks, &grid, 2000).unwrap();
        c.check(map.points.len() == 4096, || {
            format!("{} grid points", map.points.len())
        });
        c.check(map.violations == 0, || {
            format!("{} majorant violations", map.violations)
        });
        // the majorant recomputed here from |z| and the kick bound
        let k = growth_constant(kicks.bound().unwrap());
        for p in &map.points {
            let majorant = (1.0 + p.z.norm()).ln() + k.ln() + 1e-9;
            c.check(p.u <= majorant, || {
                format!("u = {} > {majorant} at z = {}", p.u, p.z)
            });
        }
    });
}

#[test]
fn criterion_05_dyadic_partial_products() {
    Criterion::new(5, "dyadic partial products, K = 1..4096", secs(30)).run(|c| {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coeffs: Vec<f64> = (0..13).map(|_| rng.gen_range(-0.5..=-0.01)).collect();
        let kicks = DyadicKicks::new(coeffs.clone()).unwrap();
        let t = 1.21;
        let state = DyadicState::new(&kicks, t, 12).unwrap();

        // ordering: combining blocks highest set bit first must disagree
        for count in [3u64, 5, 6, 12, 84] {
            let oracle = common::ruler_product(&coeffs, t, count);
            let mut bits: Vec<u32> = (0..64).filter(|j| count >> j & 1 == 1).collect();
            bits.reverse();
            let reversed = bits
                .iter()
                .fold(kicklab::evolution::ScaledProduct::identity(), |acc, &j| {
                    acc.then(&state.block(j).unwrap())
                });
            let gap = reversed.normalized().distance(&oracle.unit())
                + (reversed.lognorm() - oracle.log_norm()).abs();
            c.check(gap > 1e-3, || {
                format!("K = {count}: both block orderings agree")
            });
        }

        let mut oracle = Direct::identity();
        for count in 1..=4096u64 {
            oracle.push(shear(t));
            oracle.push(common::lower(coeffs[two_adic(count)]));
            let p = state.partial_product(count).unwrap();
            let gap =
                p.normalized().distance(&oracle.unit()) + (p.lognorm() - oracle.log_norm()).abs();
            c.check(gap <= 1e-9, || format!("K = {count}: relative gap {gap:e}"));
        }
    });
}

#[test]
fn criterion_06_rotation_sequence() {
    Criterion::new(6, "rotation kicks bound the targets {1, 2.5, pi}", secs(60)).run(|c| {
        let targets = [1.0, 2.5, std::f64::consts::PI];
        let seq = SeqConstruction::build(&targets).unwrap();
        let kicks = seq.kicks();
        for (i, &t) in targets.iter().enumerate() {
            let report = stability(&kicks, t, 1 << 15, 1e-6).unwrap();
            c.check(
                report.second_half_max <= report.first_half_max + 1e-6,
                || {
                    format!(
                        "t = {t}: max over (2^14, 2^15] {} vs {}",
                        report.second_half_max, report.first_half_max
                    )
                },
            );
            // R_k A_k(t_k) is the product of the first 2^{k−1} steps
            let mut p = Direct::identity();
            for n in 1..=(1u64 << i) {
                p.push(shear(t));
                p.push(entries(&kicks.kick(n).unwrap()));
            }
            let m = p.unit().scale(p.log_norm().exp());
            let defect = (m * m + Mat2R::identity()).op_norm();
            c.check(defect <= 1e-9, || {
                format!("level {}: |(R A)^2 + I| = {defect:e}", i + 1)
            });
        }
    });
}

#[test]
fn criterion_07_exceptional_set_construction() {
    Criterion::new(7, "construction to depth 6 with c0 = -1", secs(600)).run(|c| {
        let build = build_eus(&EusConfig {
            depth: 6,
            c0: -1.0,
            ..Default::default()
        })
        .unwrap();
        let report = check_invariants(&build).unwrap();
        c.check(report.holds(), || format!("invariants: {report:?}"));
        c.check(report.eps_defect <= 1e-12, || {
            format!("eps formula off by {:e}", report.eps_defect)
        });
        c.check(report.drift_ratio < 1.0, || {
            format!("drift / eps = {}", report.drift_ratio)
        });
        c.check(report.window_margin >= 0.1 - 1e-12, || {
            format!("window margin {}", report.window_margin)
        });
        for (n, level) in build.levels.iter().enumerate().skip(1) {
            c.check(level.window.lo > n as f64, || {
                format!("I_{n} = {:?} not beyond {n}", level.window)
            });
        }

        let core = build.core_set();
        let points = core.spread(20);
        c.check(points.len() == 20, || {
            format!("only {} sample points", points.len())
        });
        for t in points {
            let m = verify_membership(&build, t, 1 << 14, std::f64::consts::LN_2).unwrap();
            c.check(m.stabilized, || {
                format!(
                    "t = {t}: running max grew {}",
                    m.second_half_max - m.first_half_max
                )
            });
            // traces by direct multiplication, A_n = A_{n−1} M(c_n) A_{n−1}
            let mut a = Mat2R::shear(t);
            for (n, &coeff) in build.coeffs.iter().enumerate() {
                a = a * Mat2R::kick(coeff) * a;
                c.check(a.trace().abs() < 2.0, || {
                    format!("t = {t}: tr A_{n} = {}", a.trace())
                });
            }
        }
    });
}

#[test]
fn criterion_08_constant_kick_measure() {
    Criterion::new(8, "bounded measure of constant kicks M(-1)", secs(120)).run(|c| {
        let kicks = ConstantKicks::new(Mat2R::kick(-1.0)).unwrap();
        let cfg = ScanConfig {
            t_min: 0.0,
            t_max: 10.0,
            cells: 4000,
            horizon: 1 << 16,
            threshold: 1e6,
            ..Default::default()
        };
        let result = scan(&kicks, &cfg).unwrap();
        c.check((result.measure - 4.0).abs() <= 0.01, || {
            format!("measure {}", result.measure)
        });
    });
}

#[test]
fn criterion_09_triangular_closed_forms() {
    Criterion::new(9, "triangular closed forms and exit windows", None).run(|c| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tri = TriKicks::random(rng.gen(), 400);
        for _ in 0..1000 {
            let (j, m, t) = (
                rng.gen_range(0..200),
                rng.gen_range(1..=200),
                rng.gen_range(-3.0..3.0),
            );
            let closed = tri.closed_form(j, m, t);
            let mut direct = Direct::identity();
            for i in j..j + m {
                direct.push(shear(t));
                direct.push([
                    [tri.scales()[i], tri.shears()[i]],
                    [0.0, 1.0 / tri.scales()[i]],
                ]);
            }
            let norm = closed.op_norm();
            let gap = closed.scale(1.0 / norm).distance(&direct.unit())
                + (norm.ln() - direct.log_norm()).abs();
            c.check(gap <= 1e-10, || {
                format!("(j, m) = ({j}, {m}), t = {t}: gap {gap:e}")
            });
        }
        for _ in 0..50 {
            let tri = TriKicks::random(rng.gen(), 5000);
            let t = tri.threshold() + rng.gen_range(0.1..3.0);
            let report = exit_window(&tri, t, 4.0, 4000, 500).unwrap();
            c.check(report.window.is_some(), || {
                format!("no window at t = {t}, t0 = {}", report.threshold)
            });
        }
    });
}

#[test]
fn criterion_10_schrodinger_bridge() {
    Criterion::new(10, "recurrence and matrix verdicts agree", None).run(|c| {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut agree = 0;
        let mut disagreements = Vec::new();
        for _ in 0..100 {
            let len = rng.gen_range(1..=6);
            let coeffs: Vec<f64> = (0..len).map(|_| rng.gen_range(-2.0..0.0)).collect();
            let t = rng.gen_range(0.05..5.0);
            let (q0, q1) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let rec = schrodinger(&coeffs, t, q0, q1, 10_000, 0.5, 0)
                .unwrap()
                .bounded;
            let mat = matrix_verdict(&coeffs, t, 10_000, 0.5).unwrap();
            if rec == mat {
                agree += 1;
            } else {
                disagreements.push((coeffs, t));
            }
        }
        c.check(agree >= 99, || {
            format!("{agree}/100 agree; disagreements {disagreements:?}")
        });

        let periodic = schrodinger(&[-1.0], 1.0, 0.0, 1.0, 10_000, 1e-9, 14).unwrap();
        c.check(periodic.bounded, || "c = -1, t = 1 not bounded".into());
        c.check(periodic.head[..6] == periodic.head[6..12], || {
            format!("no period six: {:?}", periodic.head)
        });
        let growing = schrodinger(&[-1.0], 5.0, 0.0, 1.0, 10_000, 1e-9, 0).unwrap();
        let rate = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        c.check(!growing.bounded, || "c = -1, t = 5 not growing".into());
        c.check((growing.slope - rate).abs() <= 0.01 * rate, || {
            format!("slope {} vs {rate}", growing.slope)
        });
        c.check(!matrix_verdict(&[-1.0], 5.0, 10_000, 1e-9).unwrap(), || {
            "matrix verdict at t = 5".into()
        });
    });
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_kicklab"))
        .args(args)
        .arg("--quiet")
        .arg("--out-dir")
        .arg(dir)
        .env_remove("KICKLAB_OUT_DIR")
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

#[test]
fn criterion_11_determinism() {
    Criterion::new(11, "byte-identical outputs on repeated runs", None).run(|c| {
        let runs: [(&[&str], &[&str]); 4] = [
            (
                &[
                    "scan",
                    "--kicks",
                    "random:seed=7,bound=2",
                    "--cells",
                    "200",
                    "--horizon",
                    "2048",
                ],
                &["scan.json", "scan.csv"],
            ),
            (
                &[
                    "growth-map",
                    "--kicks",
                    "random:seed=3,bound=3",
                    "--re-points",
                    "16",
                    "--im-points",
                    "8",
                ],
                &["growth-map.json", "growth-map.csv"],
            ),
            (
                &[
                    "schrodinger",
                    "--coeffs",
                    "-1,-0.3,-0.7",
                    "--t",
                    "2.2",
                    "--keep",
                    "50",
                ],
                &["schrodinger.json", "schrodinger.csv"],
            ),
            (
                &["exit-window", "--seed", "11", "--length", "2000"],
                &["exit-window.json", "exit-window.csv"],
            ),
        ];
        for (args, files) in runs {
            let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
            for d in &dirs {
                c.check(run_cli(d.path(), args), || format!("{args:?} failed"));
            }
            for f in files {
                let a = std::fs::read(dirs[0].path().join(f)).unwrap_or_default();
                let b = std::fs::read(dirs[1].path().join(f)).unwrap_or_default();
                c.check(!a.is_empty() && a == b, || {
                    format!("{args:?}: {f} differs between runs")
                });
            }
        }
    });
}
