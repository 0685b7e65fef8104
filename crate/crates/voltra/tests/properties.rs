//! Property-based invariants of the public API.

use proptest::prelude::*;
use voltra::riccati::{ConvexNonlinearity, RLambda, Rv};
use voltra::simulate::{empirical_cgf, ks_two_sample, pairwise_sum};
use voltra::{ConvWeights, Error, ForwardCurve, JumpLaw, JumpSpec, Kernel, ScalingFamily};

fn any_kernel() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        (0.05..2.0).prop_map(|z| Kernel::constant(z).unwrap()),
        ((0.05..2.0), (0.1..3.0)).prop_map(|(z, l)| Kernel::exponential(z, l).unwrap()),
        ((0.05..2.0), (0.55..0.95)).prop_map(|(z, a)| Kernel::power_law(z, a).unwrap()),
        ((0.05..2.0), (0.55..0.95), (0.1..3.0))
            .prop_map(|(z, a, l)| Kernel::mittag_leffler(z, a, l).unwrap()),
    ]
}

fn any_law() -> impl Strategy<Value = JumpLaw> {
    prop_oneof![
        (0.05..3.0).prop_map(|s| JumpLaw::dirac(s).unwrap()),
        (0.05..0.9).prop_map(|m| JumpLaw::exponential(m).unwrap()),
        ((0.05..2.0), (0.05..2.0), (0.1..0.9)).prop_map(|(a, b, w)| {
            JumpLaw::discrete(vec![a, b], vec![w, 1.0 - w]).unwrap()
        }),
    ]
}

proptest! {
    #[test]
    fn w_star_matches_independent_bisection(u in 0.02..0.98f64, rho in -0.98..0.98f64) {
        let h = Rv::new(u, rho).unwrap();
        let ws = h.w_star().unwrap();
        prop_assert!(ws < 0.0);
        // bracket [lo, 0] with H(lo) > 0, then plain bisection
        let mut lo = -1.0f64;
        while h.eval(lo) <= 0.0 {
            lo *= 2.0;
            prop_assert!(lo > -1e6);
        }
        let mut hi = 0.0f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h.eval(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        prop_assert!((ws - root).abs() <= 1e-9 * root.abs().max(1.0),
            "closed form {ws} vs bisection {root}");
        prop_assert!(h.eval(ws).abs() <= 1e-9);
    }

    #[test]
    fn conv_weights_are_nonnegative_and_integrate_the_kernel(
        kernel in any_kernel(),
        n in 2..40usize,
        dt in 1e-3..0.05f64,
    ) {
        match ConvWeights::build(&kernel, n, dt) {
            Err(e) => prop_assert!(matches!(e, Error::Accuracy { .. }), "build failed: {e}"),
            Ok(w) => {
                for m in 0..n {
                    prop_assert!(w.a(m) >= 0.0 && w.b(m) >= 0.0, "negative weight at lag {m}");
                }
                for i in [1, n / 2 + 1, n] {
                    let want = kernel.primitive(dt * i as f64).unwrap();
                    prop_assert!((w.row_sum(i) - want).abs() <= 1e-10 * want.max(1.0),
                        "row {i}: {} vs {want}", w.row_sum(i));
                }
            }
        }
    }

    #[test]
    fn decreasing_kernels_decrease(kernel in any_kernel(), t1 in 0.01..5.0f64, dt in 0.01..2.0f64) {
        prop_assume!(kernel.is_decreasing());
        match (kernel.eval(t1), kernel.eval(t1 + dt)) {
            (Ok(a), Ok(b)) => {
                prop_assert!(a >= b && b >= 0.0, "kernel not decreasing: {a} then {b}");
            }
            // the Mittag-Leffler eval refuses outright in its series/asymptotic
            // crossover band rather than return degraded digits
            (ra, rb) => prop_assert!(
                matches!(&ra, Err(Error::Accuracy { .. })) || matches!(&rb, Err(Error::Accuracy { .. })),
                "unexpected eval failure: {ra:?} / {rb:?}"
            ),
        }
    }

    #[test]
    fn rv_is_convex_with_nonpositive_base(
        u in 0.0..1.0f64,
        rho in -1.0..1.0f64,
        w1 in -2.0..0.0f64,
        w2 in -2.0..0.0f64,
        lam in 0.0..1.0f64,
    ) {
        let h = Rv::new(u, rho).unwrap();
        prop_assert!(h.eval(0.0) <= 0.0);
        let mid = lam * w1 + (1.0 - lam) * w2;
        let chord = lam * h.eval(w1) + (1.0 - lam) * h.eval(w2);
        prop_assert!(h.eval(mid) <= chord + 1e-12, "convexity: {} > {}", h.eval(mid), chord);
    }

    #[test]
    fn r_lambda_base_point_is_nonpositive(
        u in 0.0..1.0f64,
        gp in 0.0..2.0f64,
        gm in 0.0..2.0f64,
        law_plus in any_law(),
        law_minus in any_law(),
    ) {
        let spec = JumpSpec::new(law_plus, law_minus, gp, gm).unwrap();
        let h = RLambda::new(u, spec).unwrap();
        prop_assert!(h.eval(0.0) <= 1e-12, "H(0) = {} > 0", h.eval(0.0));
    }

    #[test]
    fn scaled_marks_rescale_the_moments(
        law_plus in any_law(),
        law_minus in any_law(),
        gp in 0.0..2.0f64,
        gm in 0.0..2.0f64,
        // shrinking only: blowing marks up can push an exponential law's mean
        // past 1, where e^x stops being integrable and the constructor refuses
        c in 0.05..=1.0f64,
    ) {
        let spec = JumpSpec::new(law_plus, law_minus, gp, gm).unwrap();
        let scaled = spec.scaled_marks(c).unwrap();
        prop_assert!((scaled.impact_mean() - c * spec.impact_mean()).abs() <= 1e-12);
        prop_assert!((scaled.mean_plus() - c * spec.mean_plus()).abs() <= 1e-12);
        let m2 = spec.law_plus.second_moment() + spec.law_minus.second_moment();
        let m2s = scaled.law_plus.second_moment() + scaled.law_minus.second_moment();
        prop_assert!((m2s - c * c * m2).abs() <= 1e-12 * m2.max(1.0));
    }

    #[test]
    fn scaled_nonlinearity_gap_shrinks_with_eps(
        u in 0.05..0.95f64,
        w in -1.0..0.0f64,
    ) {
        let s = 0.5f64.sqrt();
        let fam = ScalingFamily::new(
            Kernel::exponential(1.0, 1.2).unwrap(),
            ForwardCurve::flat(0.04).unwrap(),
            JumpSpec::new(
                JumpLaw::dirac(s).unwrap(),
                JumpLaw::dirac(s).unwrap(),
                0.3,
                0.7,
            )
            .unwrap(),
        )
        .unwrap();
        let lim = fam.limit_params().unwrap();
        let rv = Rv::new(u, lim.rho).unwrap();
        let gap = |eps: f64| {
            let scaled = fam.scaled_nonlinearity(u, eps).unwrap();
            (scaled.eval(w) - rv.eval(lim.c * w)).abs()
        };
        prop_assert!(gap(1e-4) <= 0.5 * gap(1e-2) + 1e-6,
            "gap(1e-4) = {} vs gap(1e-2) = {}", gap(1e-4), gap(1e-2));
    }

    #[test]
    fn ks_statistic_is_a_symmetric_pseudometric_in_range(
        xs in prop::collection::vec(-10.0..10.0f64, 2..120),
        ys in prop::collection::vec(-10.0..10.0f64, 2..120),
    ) {
        let d = ks_two_sample(&xs, &ys).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - ks_two_sample(&ys, &xs).unwrap()).abs() <= 1e-15);
        prop_assert!(ks_two_sample(&xs, &xs).unwrap() == 0.0);
    }

    #[test]
    fn pairwise_sum_agrees_with_naive(xs in prop::collection::vec(-1e3..1e3f64, 0..400)) {
        let naive: f64 = xs.iter().sum();
        let abs: f64 = xs.iter().map(|x| x.abs()).sum();
        prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-10 * abs.max(1.0));
    }

    #[test]
    fn empirical_cgf_is_shift_equivariant(
        xs in prop::collection::vec(-2.0..2.0f64, 2..200),
        a in -1.0..1.0f64,
        u in 0.0..1.0f64,
    ) {
        let (base, _) = empirical_cgf(&xs, u).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|&x| x + a).collect();
        let (got, _) = empirical_cgf(&shifted, u).unwrap();
        prop_assert!((got - (base + u * a)).abs() <= 1e-9 * (1.0 + base.abs()),
            "shift equivariance: {got} vs {}", base + u * a);
    }
}
