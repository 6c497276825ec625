use affsphere_core::birkhoff::{factor_explicit_h0, factor_truncated, improper_minus_frame, improper_plus_frame};
use affsphere_core::improper::{associated_family, build_discrete_from_curves};
use affsphere_core::lattice::{det2, signed_sum, DiscreteCurve, LatticeWindow, Point2, SphereKind};
use affsphere_core::loop_algebra::{verify_twisted, LaurentMatrix, Mat3};
use affsphere_core::proper::{minus_factor, plus_factor};
use affsphere_core::verify::{check_builder_data, check_lattice_equation, extract_data, Tolerances};
use proptest::prelude::*;

const OFFSET: i64 = 12;

fn int_sequence() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-40i32..40).prop_map(f64::from), 2 * OFFSET as usize + 1)
}

fn at(x: &[f64], k: i64) -> affsphere_core::Result<f64> {
    Ok(x[(k + OFFSET) as usize])
}

fn int_matrix() -> impl Strategy<Value = Mat3> {
    prop::array::uniform9(-5i32..5).prop_map(|e| Mat3::from_iterator(e.iter().map(|&v| f64::from(v))))
}

fn laurent() -> impl Strategy<Value = LaurentMatrix> {
    prop::collection::vec((-3i32..=3, int_matrix()), 1..4).prop_map(LaurentMatrix::from_terms)
}

/// Curve `t -> (t + a sin(k t + p), b t^2 + c cos t)` sampled with `step`.
fn curve(step: f64, c: [f64; 5]) -> DiscreteCurve {
    DiscreteCurve::from_fn(step, -6, 6, |k| {
        let t = step * k as f64;
        Point2::new(t + c[0] * (c[1] * t + c[2]).sin(), c[3] * t * t + c[4] * t.cos() + t * t * t / 6.0)
    })
    .unwrap()
}

fn curve_params() -> impl Strategy<Value = [f64; 5]> {
    (-0.4..0.4f64, 0.5..2.0f64, -3.0..3.0f64, -0.5..0.5f64, -0.5..0.5f64).prop_map(|(a, b, c, d, e)| [a, b, c, d, e])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signed_sum_telescopes(x in int_sequence(), n in -(OFFSET - 1)..=OFFSET) {
        let s = |n| signed_sum(|k| at(&x, k), n).unwrap();
        prop_assert_eq!(s(n) - s(n - 1), at(&x, n).unwrap());
        let shifted = signed_sum(|k| at(&x, k - 1), n).unwrap();
        prop_assert_eq!(s(n - 1) - shifted, -at(&x, 0).unwrap());
    }

    #[test]
    fn summation_by_parts(x in int_sequence(), y in int_sequence(), n in -(OFFSET - 1)..=OFFSET) {
        let lhs = signed_sum(|k| Ok(at(&x, k)? * (at(&y, k)? - at(&y, k - 1)?)), n).unwrap();
        let tail = signed_sum(|k| Ok((at(&x, k)? - at(&x, k - 1)?) * at(&y, k - 1)?), n).unwrap();
        let rhs = -at(&x, 0).unwrap() * at(&y, 0).unwrap() + at(&x, n).unwrap() * at(&y, n).unwrap() - tail;
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn loop_product_is_associative(a in laurent(), b in laurent(), c in laurent()) {
        let left = a.multiply(&b).multiply(&c);
        let right = a.multiply(&b.multiply(&c));
        prop_assert_eq!(left.sub(&right).coefficient_norm(), 0.0);
    }

    #[test]
    fn evaluation_is_multiplicative(a in laurent(), b in laurent(), lambda in 0.3..3.0f64) {
        let ab = a.multiply(&b).evaluate(lambda).unwrap();
        let product = a.evaluate(lambda).unwrap() * b.evaluate(lambda).unwrap();
        prop_assert!((ab - product).norm() <= 1e-12 * (1.0 + product.norm()));
    }

    #[test]
    fn twisted_patterns_close_under_products(
        params in prop::collection::vec((0.3..2.0f64, -1.0..1.0f64, any::<bool>()), 1..6),
        proper in any::<bool>(),
    ) {
        let kind = if proper { SphereKind::Proper } else { SphereKind::Improper };
        let h = kind.h();
        let product = params.iter().fold(LaurentMatrix::identity(), |acc, &(a, b, plus)| {
            let factor = if plus { plus_factor(a, b, 0.2, h) } else { minus_factor(a, b, 0.2, h) };
            acc.multiply(&factor)
        });
        let report = verify_twisted(&product, kind);
        let scale = 1.0 + product.coefficient_norm();
        prop_assert!(report.q_block_residual <= 1e-12 * scale, "{:?}", report);
        prop_assert!(report.det_residual <= 1e-9 * scale.powi(3), "{:?}", report);
    }

    #[test]
    fn truncated_factorization_matches_closed_form(
        v in prop::array::uniform6(-1.5..1.5f64),
    ) {
        let [a, b, c, r, s, t] = v;
        prop_assume!((1.0 - b * s).abs() > 0.1);
        let l = improper_minus_frame(r, s, t).inverse().unwrap().multiply(&improper_plus_frame(a, b, c));
        let exact = factor_explicit_h0(a, b, c, r, s, t).unwrap();
        let numeric = factor_truncated(&l, l.span() + 6).unwrap();
        prop_assert!(numeric.v_plus.sub(&exact.v_plus).coefficient_norm() <= 1e-9);
        prop_assert!(numeric.v_minus.sub(&exact.v_minus).coefficient_norm() <= 1e-9);
        prop_assert!(numeric.reconstruction <= 1e-8);
    }

    #[test]
    fn associated_family_scales_data(
        p1 in curve_params(),
        p2 in curve_params(),
        lambda in prop_oneof![0.4..2.5f64, -2.5..-0.4f64],
    ) {
        let (g1, g2) = (curve(0.2, p1), curve(0.15, p2));
        let w = LatticeWindow::square(-5, 5).unwrap();
        let (_, d) = build_discrete_from_curves(&g1, &g2, w).unwrap();
        let (h1, h2) = associated_family(&g1, &g2, lambda).unwrap();
        let (_, dl) = build_discrete_from_curves(&h1, &h2, w).unwrap();
        for (n, m) in w.sites() {
            prop_assert!((dl.omega_at(n, m).unwrap() - d.omega_at(n, m).unwrap()).abs() <= 1e-12);
            prop_assert!((dl.a_at(n, m).unwrap() - lambda.powi(3) * d.a_at(n, m).unwrap()).abs() <= 1e-12 * lambda.abs().powi(3).max(1.0));
            prop_assert!((dl.b_at(n, m).unwrap() - d.b_at(n, m).unwrap() / lambda.powi(3)).abs() <= 1e-12 * lambda.abs().powi(-3).max(1.0));
        }
    }

    #[test]
    fn height_satisfies_mixed_difference(p1 in curve_params(), p2 in curve_params()) {
        let (g1, g2) = (curve(0.25, p1), curve(0.1, p2));
        let w = LatticeWindow::square(-5, 5).unwrap();
        let (f, _) = build_discrete_from_curves(&g1, &g2, w).unwrap();
        for (n, m) in w.cells() {
            let z = |n, m| f.point(n, m).unwrap().z;
            let mixed = z(n + 1, m + 1) - z(n + 1, m) - z(n, m + 1) + z(n, m);
            let step1 = g1.point(n + 1).unwrap() - g1.point(n).unwrap();
            let step2 = g2.point(m + 1).unwrap() - g2.point(m).unwrap();
            prop_assert!((mixed - det2(&step1, &step2)).abs() <= 1e-12);
        }
    }

    #[test]
    fn extracted_data_matches_builder(p1 in curve_params(), p2 in curve_params()) {
        let (g1, g2) = (curve(0.2, p1), curve(0.3, p2));
        let w = LatticeWindow::square(-5, 5).unwrap();
        let (f, built) = build_discrete_from_curves(&g1, &g2, w).unwrap();
        let tol = Tolerances::default();
        let extracted = extract_data(&f, &tol).unwrap();
        for entry in check_builder_data(&built, &extracted.data, tol.data_agreement) {
            prop_assert!(entry.pass, "{:?}", entry);
        }
        for entry in check_lattice_equation(&extracted.data, tol.lattice) {
            prop_assert!(entry.pass, "{:?}", entry);
        }
    }
}
