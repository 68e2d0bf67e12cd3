use approx::relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cfwalker::curvature::CurvatureBundle;
use cfwalker::families::{build, FamilyId, FamilyParams, FamilySpec};
use cfwalker::holonomy::{curvature_span, default_base, sample_points};
use cfwalker::Jet;

// f(x, y) = (a x^2 y + b) / (1 + c x^2 + y^2) + x y^3
fn f_jet(x: &Jet, y: &Jet, a: f64, b: f64, c: f64) -> Jet {
    let num = x * x * y * a + b;
    let den = x * x * c + y * y + 1.0;
    num / den + x * y * y * y
}

fn f_val(x: f64, y: f64, a: f64, b: f64, c: f64) -> f64 {
    // same operation order as the jet version
    (x * x * y * a + b) / (x * x * c + y * y + 1.0) + x * y * y * y
}

fn seeded(x: f64, y: f64, order: usize) -> (Jet, Jet) {
    let v = Jet::seed_point(&[x, y], order).unwrap();
    (v[0].clone(), v[1].clone())
}

fn close(a: &Jet, b: &Jet) -> bool {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .all(|(p, q)| relative_eq!(*p, *q, epsilon = 1e-12, max_relative = 1e-12))
}

proptest! {
    #[test]
    fn jets_match_central_differences(
        x in -1.0..1.0f64, y in -1.0..1.0f64,
        a in -2.0..2.0f64, b in -2.0..2.0f64, c in 0.0..2.0f64,
    ) {
        let (jx, jy) = seeded(x, y, 2);
        let jet = f_jet(&jx, &jy, a, b, c);
        let h = 1e-5;
        let fx = (f_val(x + h, y, a, b, c) - f_val(x - h, y, a, b, c)) / (2.0 * h);
        let fy = (f_val(x, y + h, a, b, c) - f_val(x, y - h, a, b, c)) / (2.0 * h);
        for (exact, fd) in [(jet.derivative(&[0]), fx), (jet.derivative(&[1]), fy)] {
            prop_assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1.0));
        }
        // second derivative from differences of first-order jets
        let d1 = |xx: f64| f_jet(&seeded(xx, y, 1).0, &seeded(xx, y, 1).1, a, b, c).derivative(&[0]);
        let fxx = (d1(x + h) - d1(x - h)) / (2.0 * h);
        let exact = jet.derivative(&[0, 0]);
        prop_assert!((exact - fxx).abs() <= 1e-6 * exact.abs().max(1.0));
    }

    #[test]
    fn order_zero_is_bit_exact(
        x in -1.0..1.0f64, y in -1.0..1.0f64,
        a in -2.0..2.0f64, b in -2.0..2.0f64, c in 0.0..2.0f64,
    ) {
        let (jx, jy) = seeded(x, y, 0);
        prop_assert_eq!(f_jet(&jx, &jy, a, b, c).value().to_bits(), f_val(x, y, a, b, c).to_bits());
        let (jx, jy) = seeded(x, y, 3);
        prop_assert_eq!(f_jet(&jx, &jy, a, b, c).value().to_bits(), f_val(x, y, a, b, c).to_bits());
    }

    #[test]
    fn ring_laws(
        x in -1.0..1.0f64, y in -1.0..1.0f64, s in -3.0..3.0f64,
    ) {
        let (jx, jy) = seeded(x, y, 3);
        let p = &jx * &jy + s;
        let q = &jy * &jy - &jx + 3.0;
        let r = (&jx + 2.0) / (&jy * &jy + 1.0);
        prop_assert!(close(&(&p * &q), &(&q * &p)));
        prop_assert!(close(&(&p + &q), &(&q + &p)));
        prop_assert!(close(&((&p * &q) * &r), &(&p * (&q * &r))));
        prop_assert!(close(&(&p * (&q + &r)), &(&p * &q + &p * &r)));
        prop_assert!(close(&(&(&p * &q) / &q), &p));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn curvature_symmetries_on_random_families(seed in any::<u64>(), which in 0usize..4, n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let id = FamilyId::THEOREM_FAMILIES[which];
        let g = build(&FamilySpec::new(id, n, FamilyParams::random(&mut rng, n))).unwrap();
        let p = g.sample_point(&mut rng).unwrap();
        let b = CurvatureBundle::at(&g, &p).unwrap();
        let scale = 1.0 + b.riemann_lo.max_abs();
        prop_assert!(b.symmetry_defect() <= 1e-10 * scale);
        prop_assert!(b.weyl_trace_defect().unwrap() <= 1e-10 * scale);
        // Ricci operator is g-self-adjoint
        let lowered = &b.g * &b.ricci_op;
        prop_assert!((&lowered - lowered.transpose()).amax() <= 1e-10 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn curvature_span_is_metric_skew(seed in any::<u64>(), which in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let id = FamilyId::THEOREM_FAMILIES[which];
        let g = build(&FamilySpec::new(id, 2, FamilyParams::random(&mut rng, 2))).unwrap();
        let base = default_base(g.dim);
        let pts = sample_points(&g, &base, 6, 0.2, seed).unwrap();
        let span = curvature_span(&g, &base, &pts, seed).unwrap();
        prop_assert!(span.skew_defect() <= 1e-8);
        prop_assert!(span.flags.preserves_null_line);
    }
}
