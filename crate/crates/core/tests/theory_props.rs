use pnd_core::theory::{beta_exact, correction_threshold, epsilon_bound, q_star_exact, TheoryParams};
use proptest::prelude::*;

#[test]
fn epsilon_bound_is_monotone_in_h() {
    for k in [2usize, 3, 5, 7, 10] {
        let lo = 1.0 / k as f64;
        let mut prev = f64::NEG_INFINITY;
        for i in 1..=100 {
            let h = lo + (1.0 - lo) * i as f64 / 100.0;
            let e = epsilon_bound(h, k).unwrap();
            assert!(e > prev, "K={k} h={h}: {e} <= {prev}");
            assert!(e < 1.0);
            prev = e;
        }
    }
}

fn params() -> impl Strategy<Value = TheoryParams> {
    (3usize..8, 0.55f64..0.95, 0.05f64..0.95, 0.0f64..0.2).prop_flat_map(|(k, h, gamma, eps)| {
        let inv_k = 1.0 / k as f64;
        (inv_k + 0.05..1.0f64).prop_map(move |p| TheoryParams {
            h,
            p,
            num_classes: k,
            gamma,
            epsilon: eps,
            q: 0.0,
        })
    })
}

proptest! {
    /// The exact threshold separates the sign of β − β'.
    #[test]
    fn exact_threshold_separates_signs(t in params()) {
        let inv_k = 1.0 / t.num_classes as f64;
        let q = q_star_exact(&t).unwrap();
        prop_assert!((0.0..=inv_k).contains(&q));
        if q > 1e-6 {
            let (b, bp) = beta_exact(&t.with_q(q * 0.5)).unwrap();
            prop_assert!(b <= bp + 1e-12);
        }
        if q < inv_k - 1e-6 {
            let (b, bp) = beta_exact(&t.with_q((q + inv_k) * 0.5)).unwrap();
            prop_assert!(b > bp - 1e-12);
        }
    }

    /// Where propagation helps at all (threshold below 1/K), stronger
    /// propagation never raises the approximate threshold.
    #[test]
    fn threshold_falls_with_gamma(t in params(), dg in 0.0f64..0.5) {
        let g2 = (t.gamma + dg).min(0.99);
        let a = correction_threshold(t.h, t.p, t.num_classes, t.gamma, t.epsilon).unwrap();
        prop_assume!(a < 1.0 / t.num_classes as f64);
        let b = correction_threshold(t.h, t.p, t.num_classes, g2, t.epsilon).unwrap();
        prop_assert!(b <= a + 1e-12);
    }
}
