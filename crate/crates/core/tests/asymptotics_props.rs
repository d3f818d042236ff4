use std::f64::consts::PI;

use bergman_core::asymptotics::{limit_target, ratio_series, AsymptoticTarget};
use bergman_core::forms::GramOptions;
use bergman_core::hyperbolic::UhpPoint;
use proptest::prelude::*;

#[test]
fn ratios_stay_below_coarse_limsup_guard() {
    let weights: Vec<u32> = (6..=48).map(|h| 2 * h).collect();
    let guard = 10.0 / (4.0 * PI);
    for (x, y) in [(0.0, 1.0), (0.0, 2.0), (0.3, 1.5)] {
        let z = UhpPoint::new(x, y).unwrap();
        for row in ratio_series(&z, &weights, &GramOptions::default()).unwrap() {
            assert!(row.ratio.is_finite() && row.ratio >= 0.0);
            assert!(row.ratio <= guard, "z = {z}, k = {}: {}", row.k, row.ratio);
        }
    }
}

proptest! {
    #[test]
    fn limit_target_is_multiplicative(r in 1u32..5, d1 in 1u32..50, d2 in 1u32..50, rank in 1u32..10) {
        let t = |r, d, k| limit_target(&AsymptoticTarget::new(r, d, k).unwrap());
        let lhs = t(r, d1 * d2, rank);
        let rhs = (d1 * d2 * rank) as f64 * t(r, 1, 1);
        prop_assert!((lhs - rhs).abs() <= 1e-15 * rhs);
        prop_assert!(t(r + 1, d1, rank) < t(r, d1, rank));
    }
}
