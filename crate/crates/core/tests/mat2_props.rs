mod common;

use kicklab::mat2::{Iwasawa, Mat2C, Mat2R, Vec2, Vec2C};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

fn unimodular() -> impl Strategy<Value = Mat2R> {
    (-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3).prop_filter_map("d out of range", |(a, b, c)| {
        let d = (1.0 + b * c) / a;
        (a.abs() > 1e-3 && d.abs() <= 1e3).then(|| Mat2R::new(a, b, c, d))
    })
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-50f64..50.0, -50f64..50.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn vector() -> impl Strategy<Value = Vec2C> {
    (complex(), complex()).prop_map(|(x1, x2)| Vec2::new(x1, x2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn decomposition_reconstructs(m in unimodular()) {
        let f = Iwasawa::of(&m).unwrap();
        prop_assert!(f.matrix().distance(&m) <= 1e-10 * m.op_norm().max(1.0));
        prop_assert!((-FRAC_PI_2..=FRAC_PI_2).contains(&f.angle));
        prop_assert!(f.scale != 0.0);
    }

    #[test]
    fn norm_of_inverse_matches(m in unimodular()) {
        let inv = m.inverse().unwrap();
        prop_assert!((m.op_norm() - inv.op_norm()).abs() <= 1e-10);
    }

    #[test]
    fn real_unimodular_preserves_q(m in unimodular(), x in vector()) {
        let y = m.to_complex().apply(x);
        let scale = 1.0 + x.norm_sq() * m.op_norm().powi(2);
        prop_assert!((y.q_form() - x.q_form()).abs() <= 1e-12 * scale);
    }

    #[test]
    fn shear_shifts_q(z in complex(), x in vector()) {
        let y = Mat2C::shear(z).apply(x);
        let expected = x.q_form() + z.im * x.x2.norm_sqr();
        let scale = x.norm_sq() * (1.0 + z.norm()) + 1.0;
        prop_assert!((y.q_form() - expected).abs() <= 8.0 * f64::EPSILON * scale);
    }

    #[test]
    fn norm_dominates_twice_q(x in vector()) {
        prop_assert!(x.norm_sq() >= 2.0 * x.q_form() - 4.0 * f64::EPSILON * x.norm_sq());
    }

    #[test]
    fn real_norm_matches_complex_norm(m in unimodular()) {
        let real = m.op_norm();
        prop_assert!((real - m.to_complex().op_norm()).abs() <= 1e-12 * real);
    }
}

#[test]
fn large_suite_of_random_matrices() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let m = common::random_unimodular(&mut rng, 10.0);
        assert!(m.is_unimodular());
        let f = Iwasawa::of(&m).unwrap();
        assert!(f.matrix().distance(&m) <= 1e-12 * m.op_norm());
    }
}
