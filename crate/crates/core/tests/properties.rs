use mhodge::domains::{build_domain, presets, read_domain_json, DomainDocument};
use mhodge::operators::{adjoint_system, classify_type, MixedSystem};
use mhodge::{Point, Poly2, PolyField};
use proptest::prelude::*;

fn poly() -> impl Strategy<Value = Poly2> {
    prop::collection::vec((0usize..3, 0usize..3, -2.0f64..2.0), 0..6).prop_map(Poly2::from_terms)
}

fn point() -> impl Strategy<Value = Point> {
    (-1.5f64..1.5, -1.5f64..1.5).prop_map(|(x, y)| Point::new(x, y))
}

fn systems() -> Vec<MixedSystem> {
    vec![
        MixedSystem::hodge(),
        MixedSystem::hodge_sign_flipped(),
        MixedSystem::symmetric(),
        MixedSystem::homogeneous(),
        MixedSystem::lavrentiev(),
    ]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Central-difference divergence of `p ↦ (f(p), g(p))`.
fn divergence(f: impl Fn(Point) -> f64, g: impl Fn(Point) -> f64, p: Point) -> f64 {
    let e = 1e-5;
    (f(Point::new(p.x + e, p.y)) - f(Point::new(p.x - e, p.y))) / (2.0 * e)
        + (g(Point::new(p.x, p.y + e)) - g(Point::new(p.x, p.y - e))) / (2.0 * e)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_evaluates_pointwise(a in poly(), b in poly(), p in point()) {
        let prod = &a * &b;
        prop_assert!(close(prod.eval(p), a.eval(p) * b.eval(p), 1e-12));
    }

    #[test]
    fn derivative_obeys_product_rule(a in poly(), b in poly()) {
        let lhs = (&a * &b).dx();
        let rhs = &(&a.dx() * &b) + &(&a * &b.dx());
        prop_assert!(lhs.approx_eq(&rhs, 1e-12));
    }

    #[test]
    fn adjoint_is_an_involution(p in point()) {
        for s in systems() {
            let back = adjoint_system(&adjoint_system(&s));
            for (m, n) in [(s.eval_a(p), back.eval_a(p)), (s.eval_b(p), back.eval_b(p)), (s.eval_z(p), back.eval_z(p))] {
                for i in 0..2 {
                    for j in 0..2 {
                        prop_assert!(close(m[i][j], n[i][j], 1e-12), "{}: {:?} vs {:?}", s.label, m, n);
                    }
                }
            }
        }
    }

    #[test]
    fn green_identity_holds_pointwise(w1 in poly(), w2 in poly(), u1 in poly(), u2 in poly(), p in point()) {
        let (w, u) = (PolyField::new(w1, w2), PolyField::new(u1, u2));
        for s in [MixedSystem::hodge(), MixedSystem::symmetric(), MixedSystem::homogeneous()] {
            let lw = adjoint_system(&s).apply_poly(&w).unwrap().eval(p);
            let lu = s.apply_poly(&u).unwrap().eval(p);
            let [wv, uv] = [w.eval(p), u.eval(p)];
            let lhs = lw[0] * uv[0] + lw[1] * uv[1] + wv[0] * lu[0] + wv[1] * lu[1];
            let flux = |q: Point| s.boundary_flux(w.eval(q), u.eval(q), q);
            let rhs = divergence(|q| flux(q).0, |q| flux(q).1, p);
            prop_assert!(close(lhs, rhs, 1e-6), "{}: {lhs} vs {rhs}", s.label);
        }
    }

    #[test]
    fn hodge_type_is_point_symmetric(p in point()) {
        let s = MixedSystem::hodge();
        let q = Point::new(-p.x, -p.y);
        prop_assert_eq!(classify_type(&s, p).ok(), classify_type(&s, q).ok());
    }

    #[test]
    fn domain_documents_round_trip(segments in 64usize..400) {
        let d = presets::omega_m(segments);
        let mut json = Vec::new();
        d.write_json(&mut json).unwrap();
        let back = read_domain_json(std::str::from_utf8(&json).unwrap()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn reflections_compose_to_identity(sx in prop::sample::select(vec![-1i8, 1]), sy in prop::sample::select(vec![-1i8, 1])) {
        let doc = presets::omega_m_document(96);
        let twice: DomainDocument = doc.reflected(sx, sy).reflected(sx, sy);
        prop_assert_eq!(&twice, &doc);
        prop_assert!(presets::omega_m_flipped(sx, sy, 96).is_ok());
        prop_assert!(build_domain(&twice).is_ok());
    }
}
