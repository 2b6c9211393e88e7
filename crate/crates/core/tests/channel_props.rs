use coopd2d::channel::{cellular_rate, d2d_rate, effective_cu_rate, path_gain, relay_rate, LinkBudget};
use proptest::prelude::*;

fn budget() -> LinkBudget {
    LinkBudget::from_mw_dbm(20.0, 20.0, -100.0).unwrap()
}

// gains spanning the cell: 1e-16 (far, deep fade) to 1e-4 (10 m, strong)
fn gain() -> impl Strategy<Value = f64> {
    (-16.0f64..-4.0).prop_map(|e| 10f64.powf(e))
}

fn bump() -> impl Strategy<Value = f64> {
    1.0f64..100.0
}

proptest! {
    #[test]
    fn rates_are_monotone_in_every_gain(h1 in gain(), h2 in gain(), h3 in gain(), k in bump()) {
        let b = budget();
        prop_assert!(cellular_rate(h1 * k, &b) >= cellular_rate(h1, &b));
        prop_assert!(d2d_rate(h1 * k, &b) >= d2d_rate(h1, &b));
        let base = relay_rate(h1, h2, h3, &b);
        prop_assert!(relay_rate(h1 * k, h2, h3, &b) >= base);
        prop_assert!(relay_rate(h1, h2 * k, h3, &b) >= base);
        prop_assert!(relay_rate(h1, h2, h3 * k, &b) >= base);
    }

    #[test]
    fn relay_is_capped_by_the_decode_link(h_mn in gain(), h_mb in gain(), h_nb in gain()) {
        let b = budget();
        let cap = 0.5 * (b.p_cu * h_mn / b.noise).ln_1p();
        prop_assert!(relay_rate(h_mn, h_mb, h_nb, &b) <= cap);
    }

    #[test]
    fn cooperation_never_hurts(h_mn in gain(), h_mb in gain(), h_nb in gain()) {
        let b = budget();
        let direct = cellular_rate(h_mb, &b);
        prop_assert!(effective_cu_rate(direct, relay_rate(h_mn, h_mb, h_nb, &b)) >= direct);
    }

    #[test]
    fn gain_is_linear_in_fading(d in 1.0f64..2000.0, gamma in 2.0f64..5.0, eta in 0.0f64..20.0, k in 0.0f64..10.0) {
        let g = path_gain(d, gamma, eta).unwrap();
        let gk = path_gain(d, gamma, k * eta).unwrap();
        prop_assert!((gk - k * g).abs() <= 1e-12 * gk.abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn rates_are_finite_and_nonnegative(h1 in 0.0f64..1.0, h2 in 0.0f64..1.0, h3 in 0.0f64..1.0) {
        let b = budget();
        for r in [cellular_rate(h1, &b), d2d_rate(h1, &b), relay_rate(h1, h2, h3, &b)] {
            prop_assert!(r.is_finite() && r >= 0.0);
        }
    }
}

#[test]
fn nonpositive_distance_is_a_domain_error() {
    assert!(path_gain(0.0, 4.0, 1.0).is_err());
    assert!(path_gain(-3.0, 4.0, 1.0).is_err());
    assert!(path_gain(10.0, 4.0, -0.5).is_err());
}
