//! Randomized invariants: algebraic identities of the conjugate map, the
//! pairing inequality, convexity of the penalized objective, and the
//! conservation laws of extreme-point pruning.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use representer::duality::{holder_pairing, lp_conjugate, lp_norm};
use representer::hilbert::tikhonov_fit;
use representer::lp::prune_to_extreme;

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..12)
}

fn vector_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
        )
    })
}

fn exponent() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![1.25f64, 1.5, 2.0, 3.0, 4.0])
}

proptest! {
    #![proptest_config(ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn conjugate_preserves_norm_and_saturates_the_pairing(x in vector(), p in exponent()) {
        prop_assume!(lp_norm(&x, 2.0) > 1e-6);
        let q = p / (p - 1.0);
        let norm = lp_norm(&x, p);
        let dual = lp_conjugate(&x, p).unwrap();
        let dual_norm = lp_norm(&dual, q);
        prop_assert!((dual_norm - norm).abs() <= 1e-9 * norm);
        let pairing: f64 = dual.iter().zip(&x).map(|(d, v)| d * v).sum();
        prop_assert!((pairing - norm * norm).abs() <= 1e-9 * norm * norm);
    }

    #[test]
    fn conjugate_round_trips_through_the_dual_exponent(x in vector(), p in exponent()) {
        prop_assume!(lp_norm(&x, 2.0) > 1e-6);
        let q = p / (p - 1.0);
        let back = lp_conjugate(&lp_conjugate(&x, p).unwrap(), q).unwrap();
        let peak = x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        for (b, v) in back.iter().zip(&x) {
            prop_assert!((b - v).abs() <= 1e-9 * peak);
        }
    }

    #[test]
    fn conjugate_is_homogeneous(x in vector(), p in exponent(), t in -3.0..3.0f64) {
        let dual = lp_conjugate(&x, p).unwrap();
        let scaled = lp_conjugate(&x.iter().map(|v| t * v).collect::<Vec<_>>(), p).unwrap();
        let peak = 1.0 + dual.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())) * t.abs();
        for (s, d) in scaled.iter().zip(&dual) {
            prop_assert!((s - t * d).abs() <= 1e-10 * peak);
        }
    }

    #[test]
    fn pairing_never_exceeds_the_norm_product(
        (x, y) in vector_pair(),
        p in exponent(),
    ) {
        let q = p / (p - 1.0);
        let (_, slack) = holder_pairing(&x, &y, p).unwrap();
        let scale = 1.0 + lp_norm(&x, p) * lp_norm(&y, q);
        prop_assert!(slack >= -1e-10 * scale);
    }

    #[test]
    fn penalized_objective_is_convex_along_segments(
        entries in prop::collection::vec(-3.0..3.0f64, 8),
        a in prop::collection::vec(-4.0..4.0f64, 4),
        b in prop::collection::vec(-4.0..4.0f64, 4),
        theta in 0.0..1.0f64,
        p in prop::sample::select(vec![1.0f64, 1.5, 2.0, 3.0]),
        lambda in 0.1..2.0f64,
    ) {
        let h = DMatrix::from_row_slice(2, 4, &entries);
        let y = DVector::from_column_slice(&[1.0, -0.5]);
        let objective = |s: &DVector<f64>| {
            (&y - &h * s).norm_squared()
                + lambda * s.iter().map(|v| v.abs().powf(p)).sum::<f64>()
        };
        let a = DVector::from_column_slice(&a);
        let b = DVector::from_column_slice(&b);
        let blend = &a * theta + &b * (1.0 - theta);
        let chord = theta * objective(&a) + (1.0 - theta) * objective(&b);
        prop_assert!(objective(&blend) <= chord + 1e-9 * (1.0 + chord.abs()));
    }

    #[test]
    fn pruning_conserves_measurements_and_l1_mass(
        entries in prop::collection::vec(-3.0..3.0f64, 24),
        coeffs in prop::collection::vec(-4.0..4.0f64, 8),
    ) {
        let h = DMatrix::from_row_slice(3, 8, &entries);
        let s = DVector::from_column_slice(&coeffs);
        let pruned = prune_to_extreme(&s, &h).unwrap();
        // Extreme points of the face of an arbitrary point can carry one more
        // nonzero than the row count; minimizers shed that extra coordinate
        // because their sign vector lies in the support row space.
        let nonzeros = pruned.iter().filter(|v| **v != 0.0).count();
        prop_assert!(nonzeros <= 4);
        let drift = ((&h * &s) - (&h * &pruned)).amax();
        prop_assert!(drift <= 1e-9 * (1.0 + (&h * &s).amax()));
        let l1_before: f64 = s.iter().map(|v| v.abs()).sum();
        let l1_after: f64 = pruned.iter().map(|v| v.abs()).sum();
        prop_assert!((l1_after - l1_before).abs() <= 1e-9 * (1.0 + l1_before));
    }

    #[test]
    fn ridge_solutions_satisfy_their_normal_equations(
        entries in prop::collection::vec(-2.0..2.0f64, 9),
        data in prop::collection::vec(-3.0..3.0f64, 3),
        lambda in 0.1..2.0f64,
    ) {
        let base = DMatrix::from_row_slice(3, 3, &entries);
        let h = &base * base.transpose() + DMatrix::identity(3, 3) * 0.1;
        let y = DVector::from_column_slice(&data);
        let (a, _) = tikhonov_fit(&h, &y, lambda).unwrap();
        let residual = (&h * &a + &a * lambda - &y).amax();
        prop_assert!(residual <= 1e-8 * (1.0 + y.amax()));
    }
}
