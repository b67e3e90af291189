mod common;

use common::erf_reference;
use pathgame::stochastic::{erf, erf_inv, erfc, margin_from_risk, risk_from_margin};
use proptest::prelude::*;

#[test]
fn erf_matches_reference_grid() {
    let grid = erf_reference();
    assert_eq!(grid.len(), 1000);
    let worst = grid.iter().map(|&(x, v)| (erf(x) - v).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-12, "{worst:e}");
}

#[test]
fn margin_round_trip_at_listed_risks() {
    for g in [1e-6, 1e-4, 0.01, 0.1, 0.4] {
        let s = erf_inv(1.0 - 2.0 * g).unwrap();
        assert!((risk_from_margin(s) - g).abs() <= 1e-9, "{g}");
        assert!((margin_from_risk(g).unwrap() - s).abs() <= 1e-9, "{g}");
    }
}

proptest! {
    #[test]
    fn erf_is_odd_and_bounded(x in -10.0..10.0f64) {
        prop_assert_eq!(erf(-x), -erf(x));
        prop_assert!(erf(x).abs() <= 1.0);
        prop_assert!((erf(x) + erfc(x) - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn erf_is_monotone(x in -5.0..5.0f64, d in 1e-6..1.0f64) {
        prop_assert!(erf(x + d) >= erf(x));
    }

    #[test]
    fn erf_inv_inverts(y in -0.999_999..0.999_999f64) {
        let x = erf_inv(y).unwrap();
        prop_assert!((erf(x) - y).abs() <= 1e-13);
    }

    #[test]
    fn risk_decreases_with_margin(s in 0.0..5.0f64, d in 1e-3..1.0f64) {
        prop_assert!(risk_from_margin(s + d) < risk_from_margin(s));
        prop_assert!(risk_from_margin(s) <= 0.5);
    }
}
