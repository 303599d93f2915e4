use std::f64::consts::PI;

use kernelwave::cseries::{branch_residual, conjugate_coeffs, solve_branch, Sign, TruncatedSeries1, TruncatedSeries2};
use kernelwave::phase::{make_phase, poly_taylor_shift, PhaseKind, PhaseSpec};
use kernelwave::C64;
use proptest::prelude::*;

fn c64() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn series(order: usize) -> impl Strategy<Value = TruncatedSeries1> {
    proptest::collection::vec(c64(), order + 1).prop_map(|c| TruncatedSeries1::new(c).unwrap())
}

fn series2(order: usize) -> impl Strategy<Value = TruncatedSeries2> {
    proptest::collection::vec(c64(), (order + 1) * (order + 1))
        .prop_map(move |c| TruncatedSeries2::from_fn(order, |k, l| c[k * (order + 1) + l]))
}

proptest! {
    #[test]
    fn product_is_commutative_and_associative(a in series(8), b in series(8), c in series(8)) {
        prop_assert!(a.mul(&b).unwrap().max_abs_diff(&b.mul(&a).unwrap()) < 1e-13);
        let l = a.mul(&b).unwrap().mul(&c).unwrap();
        let r = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert!(l.max_abs_diff(&r) < 1e-12);
    }

    #[test]
    fn reciprocal_inverts(mut a in series(10)) {
        a.set(0, a.coeff(0) + C64::new(2.0, 0.0));
        let one = a.mul(&a.reciprocal().unwrap()).unwrap();
        prop_assert!(one.max_abs_diff(&TruncatedSeries1::constant(C64::new(1.0, 0.0), 10)) < 1e-12);
    }

    #[test]
    fn exp_turns_sums_into_products(a in series(9), b in series(9)) {
        let l = a.add(&b).unwrap().exp();
        let r = a.exp().mul(&b.exp()).unwrap();
        prop_assert!(l.max_abs_diff(&r) < 1e-11 * (1.0 + l.coeff(0).norm()));
    }

    #[test]
    fn composition_agrees_with_pointwise_evaluation(outer in series(12), mut inner in series(12), x in -0.2..0.2f64) {
        inner.set(0, C64::new(0.0, 0.0));
        let comp = TruncatedSeries1::compose(&outer, &inner).unwrap();
        // Truncation error is O(x^13) and negligible for |x| <= 0.2 with bounded coefficients.
        let direct = outer.eval(inner.eval(C64::from(x)));
        prop_assert!((comp.eval(C64::from(x)) - direct).norm() < 1e-5);
    }

    #[test]
    fn bivariate_reciprocal_and_exp(mut a in series2(6), b in series2(6)) {
        a.set(0, 0, a.coeff(0, 0) + C64::new(2.5, 0.0));
        let one = a.mul(&a.reciprocal().unwrap()).unwrap();
        prop_assert!(one.max_abs_diff(&TruncatedSeries2::constant(C64::new(1.0, 0.0), 6)) < 1e-11);
        let l = a.add(&b).unwrap().exp();
        let r = a.exp().mul(&b.exp()).unwrap();
        prop_assert!(l.max_abs_diff(&r) < 1e-9 * (1.0 + l.coeff(0, 0).norm()));
    }

    #[test]
    fn divided_difference_times_denominator(h in series(9), alpha in c64(), beta in c64(), x in -0.3..0.3f64, y in -0.3..0.3f64) {
        let d = TruncatedSeries2::divided_difference(&h, alpha, beta, 8).unwrap();
        let (x, y) = (C64::from(x), C64::from(y));
        let lhs = d.eval(x, y) * (alpha * x - beta * y);
        let rhs = h.eval(alpha * x) - h.eval(beta * y);
        prop_assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn series_json_round_trip(a in series(5), b in series2(4)) {
        let a2: TruncatedSeries1 = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        let b2: TruncatedSeries2 = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        prop_assert_eq!(a, a2);
        prop_assert_eq!(b, b2);
    }
}

/// `f(sigma h(alpha x))` minus its constant term, which for a branch variant
/// must be a pure multiple of `x^2`.
fn composed_variant(phase: &PhaseSpec, h: &TruncatedSeries1, sigma: f64, alpha: C64) -> TruncatedSeries1 {
    let inner = h.scale_arg(alpha).scale(C64::from(sigma));
    let z0 = inner.coeff(0);
    let mut shifted = inner.clone();
    shifted.set(0, C64::new(0.0, 0.0));
    let outer = TruncatedSeries1::from_prefix(&poly_taylor_shift(phase.coeffs(), z0), h.order());
    let mut comp = TruncatedSeries1::compose(&outer, &shifted).unwrap();
    comp.set(0, C64::new(0.0, 0.0));
    comp
}

#[test]
fn branch_variants_are_pure_quadratics() {
    let one = C64::new(1.0, 0.0);
    let i = C64::i();
    for (kind, sign, a1) in [
        (PhaseKind::AiryCubic, Sign::Minus, C64::from_polar(1.0, PI / 4.0)),
        (PhaseKind::PearceyQuartic, Sign::Plus, C64::from_polar((2.0f64 / 3.0).sqrt(), 2.0 * PI / 3.0)),
    ] {
        let phase = make_phase(kind);
        let (s, level) = phase.saddle(0).unwrap();
        let g = solve_branch(&phase, s, sign, level, a1, 14).unwrap();
        let residual = branch_residual(&phase, &g, level, sign).unwrap();
        assert!(residual.coeffs().iter().all(|c| c.norm() < 1e-12));
        let gb = conjugate_coeffs(&g);
        let variants: Vec<(&TruncatedSeries1, f64, C64)> = match kind {
            // g(x), g(ix), -g(-y), -g(-ix)
            PhaseKind::AiryCubic => vec![(&g, 1.0, one), (&g, 1.0, i), (&g, -1.0, -one), (&g, -1.0, -i)],
            // g(x), g(ix), conj-g(-x), conj-g(iy)
            _ => vec![(&g, 1.0, one), (&g, 1.0, i), (&gb, 1.0, -one), (&gb, 1.0, i)],
        };
        for (h, sigma, alpha) in variants {
            let comp = composed_variant(&phase, h, sigma, alpha);
            let c2 = comp.coeff(2);
            assert!((c2.norm() - 1.0).abs() < 1e-12, "{kind:?} variant ({sigma}, {alpha}) x^2 coefficient {c2}");
            for k in (1..=comp.order()).filter(|&k| k != 2) {
                assert!(comp.coeff(k).norm() < 1e-11, "{kind:?} ({sigma}, {alpha}) coefficient {k} = {}", comp.coeff(k));
            }
        }
    }
}

#[test]
fn branch_through_custom_phase() {
    // f(z) = z^3/3 - z has real saddles at +-1.
    let phase = PhaseSpec::custom(vec![C64::from(0.0), C64::from(-1.0), C64::from(0.0), C64::from(1.0 / 3.0)]).unwrap();
    let idx = phase.saddles.iter().position(|s| (s - 1.0).norm() < 1e-12).unwrap();
    let (s, level) = phase.saddle(idx).unwrap();
    let a1 = phase.first_coeff(idx, Sign::Plus, 0).unwrap();
    let g = solve_branch(&phase, s, Sign::Plus, level, a1, 10).unwrap();
    let r = branch_residual(&phase, &g, level, Sign::Plus).unwrap();
    assert!(r.coeffs().iter().all(|c| c.norm() < 1e-12));
}
