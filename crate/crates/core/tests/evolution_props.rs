mod common;

use common::{entries, shear, Direct};
use kicklab::evolution::{
    evolve, evolve_each, growth_constant, growth_lower_bound, q_growth_certificate, ConstantKicks,
    FiniteKicks, KickSource, RandomBoundedKicks,
};
use kicklab::mat2::Mat2R;
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaled_product_matches_direct_product(seed in any::<u64>(), bound in 1.0f64..4.0, t in -5.0f64..5.0, n in 1u64..=64) {
        let kicks = RandomBoundedKicks::new(seed, bound);
        let mut direct = Direct::identity();
        for k in 1..=n {
            direct.push(shear(t));
            direct.push(entries(&kicks.kick(k).unwrap()));
        }
        let p = evolve_each(&kicks, Complex64::new(t, 0.0), n, |_, _| {}).unwrap();
        let unit = p.normalized();
        let mine = Mat2R::new(unit.a11.re, unit.a12.re, unit.a21.re, unit.a22.re);
        let rel = mine.distance(&direct.unit()) + (p.lognorm() - direct.log_norm()).abs();
        prop_assert!(rel <= 1e-9, "relative distance {rel}");
    }

    #[test]
    fn determinant_stays_one(seed in any::<u64>(), t in 0.0f64..6.0) {
        let kicks = RandomBoundedKicks::new(seed, 3.0);
        let trace = evolve(&kicks, Complex64::new(t, 0.0), 400, 50).unwrap();
        for point in &trace.points {
            prop_assert!(point.lognorm >= -1e-12, "norm of a unimodular product is at least 1");
        }
        let p = evolve_each(&kicks, Complex64::new(t, 0.0), 400, |_, _| {}).unwrap();
        let m = p.normalized();
        // det of the unit factor is exp(-2 lognorm); below the rounding
        // floor, about one ulp per step, only that floor is testable
        let det = m.a11 * m.a22 - m.a12 * m.a21;
        let expected = (-2.0 * p.lognorm()).exp();
        prop_assert!((det - expected).norm() <= 1e-6 * 400.0 * expected + 400.0 * f64::EPSILON, "det {det} expected {expected} L {}", p.lognorm());
    }

    #[test]
    fn certificate_holds(seed in any::<u64>(), bound in 1.0f64..4.0, re in -4.0f64..4.0, im in 0.05f64..3.0) {
        let kicks = RandomBoundedKicks::new(seed, bound);
        let report = q_growth_certificate(&kicks, Complex64::new(re, im), 300).unwrap();
        prop_assert!(report.holds(), "{report:?}");
        prop_assert!(report.log_norm_b + 1e-9 >= report.telescoped_bound);
    }

    #[test]
    fn growth_below_majorant(seed in any::<u64>(), bound in 1.0f64..4.0, re in 0.0f64..8.0, im in 0.0f64..2.0) {
        let kicks = RandomBoundedKicks::new(seed, bound);
        let z = Complex64::new(re, im);
        let k = growth_constant(bound);
        let majorant = (1.0 + z.norm()).ln() + k.ln() + 1e-9;
        let mut worst = f64::NEG_INFINITY;
        evolve_each(&kicks, z, 300, |n, l| worst = worst.max(l / n as f64 - majorant)).unwrap();
        prop_assert!(worst <= 0.0);
    }

    #[test]
    fn lower_bound_is_respected(seed in any::<u64>(), re in -3.0f64..3.0, im in 0.1f64..2.0) {
        let kicks = RandomBoundedKicks::new(seed, 2.5);
        let z = Complex64::new(re, im);
        let n = 500;
        let lb = growth_lower_bound(&kicks, z, n).unwrap();
        let p = evolve_each(&kicks, z, n, |_, _| {}).unwrap();
        prop_assert!(p.lognorm() >= lb.bound - lb.slack - 1e-9);
    }
}

#[test]
fn finite_kicks_report_exhaustion() {
    let kicks = FiniteKicks::new(vec![Mat2R::identity(); 3]).unwrap();
    assert!(evolve_each(&kicks, Complex64::new(1.0, 0.0), 4, |_, _| {}).is_err());
    assert!(evolve_each(&kicks, Complex64::new(1.0, 0.0), 3, |_, _| {}).is_ok());
}

#[test]
fn long_chain_does_not_drift() {
    // M(-1)H(1) has order 6, so every sixth product is the identity
    let kicks = ConstantKicks::new(Mat2R::kick(-1.0)).unwrap();
    let mut at_multiples = Vec::new();
    evolve_each(&kicks, Complex64::new(1.0, 0.0), 1_000_000, |n, l| {
        if n % 6 == 0 {
            at_multiples.push(l);
        }
    })
    .unwrap();
    assert!(at_multiples.iter().all(|l| l.abs() < 1e-9));
}
