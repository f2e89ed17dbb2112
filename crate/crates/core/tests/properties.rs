use proptest::prelude::*;

use landau_hydro::burgers::{burgers_eval, WaveParams};
use landau_hydro::euler::{r3_state, GasState, RarefactionCurve};
use landau_hydro::fluid::{entropy_pair, to_cons, to_prim};
use landau_hydro::fmt17;
use landau_hydro::harness::rate_fit;

fn state() -> impl Strategy<Value = GasState> {
    (
        0.2f64..5.0,
        -2.0f64..2.0,
        -1.0f64..1.0,
        -1.0f64..1.0,
        0.3f64..4.0,
    )
        .prop_map(|(rho, a, b, c, theta)| GasState::new(rho, [a, b, c], theta).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn relative_entropy_is_nonnegative(s in state(), bar in state()) {
        let (eta, _) = entropy_pair(&s, &bar);
        prop_assert!(eta >= -1e-14 * (1.0 + s.rho * s.theta));
        let (zero, flux) = entropy_pair(&bar, &bar);
        prop_assert!(zero.abs() < 1e-14);
        prop_assert!(flux.abs() < 1e-13);
    }

    #[test]
    fn conservative_round_trip(s in state()) {
        let p = to_prim(&to_cons(&s));
        prop_assert!((p[0] - s.rho).abs() <= 1e-14 * s.rho);
        for j in 0..3 {
            prop_assert!((p[1 + j] - s.u[j]).abs() <= 1e-13);
        }
        prop_assert!((p[4] - s.theta).abs() <= 1e-12 * s.theta);
    }

    #[test]
    fn curve_keeps_both_invariants(left in state(), r in 1.0f64..2.0) {
        let curve = RarefactionCurve::through(&left).unwrap();
        let s = r3_state(&left, left.rho * r).unwrap();
        let (ds, dw) = curve.invariant_defects(&s);
        prop_assert!(ds <= 1e-12 && dw <= 1e-12, "{ds:e} {dw:e}");
        // the characteristic speed grows along the branch
        prop_assert!(s.lambda3() >= left.lambda3() - 1e-12);
    }

    #[test]
    fn burgers_stays_between_far_fields(
        delta in 0.01f64..1.0,
        wm in -1.0f64..1.0,
        jump in 0.01f64..1.0,
        t in 0.0f64..20.0,
        x in -10.0f64..30.0,
    ) {
        let p = WaveParams::new(delta, wm, wm + jump).unwrap();
        let b = burgers_eval(&p, t, x).unwrap();
        prop_assert!(b.value >= wm - 1e-14 && b.value <= wm + jump + 1e-14);
        prop_assert!(b.dx >= 0.0);
        prop_assert!((b.foot + t * b.value - x).abs() <= 1e-12 * (1.0 + x.abs() + t));
    }

    #[test]
    fn printed_floats_parse_back_exactly(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt17(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn rate_fit_recovers_log_corrected_laws(p in 0.05f64..1.5, c in 0.01f64..100.0) {
        let pts: Vec<(f64, f64)> = (4..=9)
            .map(|j| {
                let e = 2f64.powi(-j);
                (e, c * e.powf(p) * e.ln().abs())
            })
            .collect();
        let f = rate_fit(&pts, 2.0 / 3.0).unwrap();
        prop_assert!((f.p_hat - p).abs() < 1e-10);
        prop_assert!((f.c_hat / c - 1.0).abs() < 1e-9);
        // the log factor pulls the plain slope below p
        prop_assert!(f.p_plain < p);
    }
}
