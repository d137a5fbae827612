mod common;

use common::{ruler_product, two_adic, Direct};
use kicklab::dyadic::{a_matrix, partial_product, ruler, DyadicKicks, DyadicState};
use kicklab::evolution::KickSource;
use kicklab::mat2::Mat2R;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(p: &kicklab::evolution::ScaledProduct<f64>) -> Mat2R {
    p.normalized()
}

fn gap(p: &kicklab::evolution::ScaledProduct<f64>, d: &Direct) -> f64 {
    unit(p).distance(&d.unit()) + (p.lognorm() - d.log_norm()).abs()
}

/// Combines the dyadic blocks of `count` with the block of the highest set
/// bit leftmost, the other candidate ordering.
fn highest_first(state: &DyadicState<f64>, count: u64) -> kicklab::evolution::ScaledProduct<f64> {
    let mut bits: Vec<u32> = (0..64).filter(|j| count >> j & 1 == 1).collect();
    bits.reverse();
    bits.iter()
        .fold(kicklab::evolution::ScaledProduct::identity(), |acc, &j| {
            acc.then(&state.block(j).unwrap())
        })
}

#[test]
fn block_ordering_decided_by_brute_force() {
    let coeffs = [-0.9, -0.45, -0.3, -0.2, -0.15, -0.12, -0.1, -0.08];
    let kicks = DyadicKicks::new(coeffs.to_vec()).unwrap();
    let t = 0.83;
    let state = DyadicState::new(&kicks, t, 7).unwrap();
    for count in [3u64, 5, 6, 12, 84] {
        let oracle = ruler_product(&coeffs, t, count);
        let lowest = state.partial_product(count).unwrap();
        let highest = highest_first(&state, count);
        assert!(gap(&lowest, &oracle) < 1e-12, "K = {count}");
        assert!(
            gap(&highest, &oracle) > 1e-3,
            "K = {count}: orderings coincide"
        );
    }
}

#[test]
fn partial_products_match_direct_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coeffs: Vec<f64> = (0..13).map(|_| rng.gen_range(-0.5..-0.01)).collect();
    let kicks = DyadicKicks::new(coeffs.clone()).unwrap();
    let t = 1.37;
    let state = DyadicState::new(&kicks, t, 12).unwrap();
    let mut oracle = Direct::identity();
    for count in 1..=4096u64 {
        oracle.push(common::shear(t));
        oracle.push(common::lower(coeffs[two_adic(count)]));
        let p = state.partial_product(count).unwrap();
        assert!(gap(&p, &oracle) < 1e-9, "K = {count}");
    }
}

#[test]
fn ruler_pattern_and_palindrome() {
    for k in 1..5000u64 {
        let j = ruler(k);
        assert_eq!(j as usize, two_adic(k));
        let shifted = k + (1 << (j + 1));
        assert_eq!(ruler(shifted), j);
    }
    for m in 1..12u32 {
        let len = (1u64 << m) - 1;
        for k in 1..=len {
            assert_eq!(ruler(k), ruler(len + 1 - k));
        }
    }
}

#[test]
fn kicks_follow_the_ruler() {
    let kicks = DyadicKicks::new(vec![-1.0, -0.5, -0.25]).unwrap();
    for k in 1..=7u64 {
        assert_eq!(
            kicks.kick(k).unwrap(),
            Mat2R::kick([-1.0, -0.5, -0.25][two_adic(k)])
        );
    }
    assert!(kicks.kick(8).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shifted_blocks_repeat(coeffs in prop::collection::vec(-0.5f64..-0.01, 9), t in 0.1f64..3.0, l in 1u32..8, m_off in 1u32..8) {
        // K ↦ 2^l + K for K ≤ 2^m repeats kicks exactly when m < l
        let m = m_off.min(l) - 1;
        let start = 1u64 << l;
        let width = 1u64 << m;
        let mut shifted = Direct::identity();
        for k in start + 1..=start + width {
            shifted.push(common::shear(t));
            shifted.push(common::lower(coeffs[two_adic(k)]));
        }
        let p = partial_product(&DyadicKicks::new(coeffs.clone()).unwrap(), t, width).unwrap();
        prop_assert!(gap(&p, &shifted) < 1e-9);
    }

    #[test]
    fn dyadic_levels_square_up(coeffs in prop::collection::vec(-0.5f64..-0.01, 8), t in 0.1f64..3.0, m in 0i32..7) {
        let kicks = DyadicKicks::new(coeffs.clone()).unwrap();
        let a = a_matrix(&kicks, t, m).unwrap();
        // A_m = H ∏_{k < 2^{m+1}} (M(c_{v(k)}) H)
        let mut oracle = Direct::identity();
        oracle.push(common::shear(t));
        for k in 1..(1u64 << (m + 1)) {
            oracle.push(common::lower(coeffs[two_adic(k)]));
            oracle.push(common::shear(t));
        }
        prop_assert!(gap(&a, &oracle) < 1e-9);
    }
}

#[test]
fn equal_width_shift_breaks_the_pattern() {
    // with m = l the shifted block ends on index 2^{l+1}, whose kick differs
    let coeffs = [-0.9, -0.45, -0.3, -0.2];
    let (l, t) = (1u32, 0.7);
    let start = 1u64 << l;
    let mut shifted = Direct::identity();
    for k in start + 1..=start + (1 << l) {
        shifted.push(common::shear(t));
        shifted.push(common::lower(coeffs[two_adic(k)]));
    }
    let p = partial_product(&DyadicKicks::new(coeffs.to_vec()).unwrap(), t, 1 << l).unwrap();
    assert!(gap(&p, &shifted) > 1e-3);
}
