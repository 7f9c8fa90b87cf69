use proptest::prelude::*;

use fixdeg::admissibility::{point_data, residual_direct, split_tangent_normal, system_shape, FieldFrame, VariationField};
use fixdeg::area::{area_degree, density_theta};
use fixdeg::catalog::builtin;
use fixdeg::exprcore::parse;
use fixdeg::geom::TangentBasis;
use fixdeg::immersion::Immersion;
use fixdeg::manifold::Manifold;
use fixdeg::multivector::{dim_gt, dim_leq, GrowthVector};
use fixdeg::quadrature::QuadratureGrid;
use fixdeg::variation::first_variation;

fn entry(spec: &str) -> (Manifold, Immersion) {
    let e = builtin(spec).unwrap();
    (e.manifold, e.immersion.unwrap())
}

fn binom(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn coef() -> impl Strategy<Value = f64> {
    (-100i32..=100).prop_map(|k| k as f64 / 100.0)
}

fn poly(c: [f64; 4]) -> String {
    format!("({} + {}*x + {}*y + {}*x*y)", c[0], c[1], c[2], c[3])
}

fn growth() -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(1usize..4, 1..5).prop_map(|steps| {
        let mut acc = 0;
        steps.iter().map(|s| {
            acc += s;
            acc
        }).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dimensions_split_the_exterior_power(g in growth(), m in 0usize..6, d in 0usize..20) {
        let n = *g.last().unwrap();
        prop_assume!(m <= n);
        let gv = GrowthVector::new(g).unwrap();
        prop_assert_eq!(dim_gt(&gv, m, d) + dim_leq(&gv, m, d), binom(n, m));
        if d > 0 {
            prop_assert!(dim_leq(&gv, m, d - 1) <= dim_leq(&gv, m, d));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn theta_lies_in_unit_interval(c in proptest::array::uniform4(coef()), x in 0.0f64..1.0, y in 0.0f64..1.0, d in 2u32..6) {
        for spec in [format!("engel-graph:theta={}", poly(c)), format!("rt-graph:u={}", poly(c))] {
            let (man, imm) = entry(&spec);
            let t = density_theta(&man, &imm, &[x, y], d).unwrap();
            prop_assert!((-1e-15..=1.0 + 1e-12).contains(&t), "{} {}", spec, t);
        }
        // pure degree 3 everywhere
        let (man, imm) = entry("isolated-plane");
        prop_assert!((density_theta(&man, &imm, &[2.0 * x - 1.0, 2.0 * y - 1.0], 3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn area_is_invariant_under_reparametrization(c in proptest::array::uniform4(coef()), a in -0.9f64..0.9, b in -0.9f64..0.9) {
        let (man, imm) = entry(&format!("engel-graph:theta={}", poly(c)));
        // monotone maps of [0, 1] onto itself
        let psi = [
            parse(&format!("s + {}*s*(1-s)", a), &["s", "t"]).unwrap(),
            parse(&format!("t + {}*t*(1-t) + 0.1*s*(1-s)*t*(1-t)", b), &["s", "t"]).unwrap(),
        ];
        let re = imm.reparametrize(vec!["s".into(), "t".into()], &psi, vec![(0.0, 1.0); 2]).unwrap();
        let q = QuadratureGrid::uniform(&[(0.0, 1.0); 2], 32).unwrap();
        let a0 = area_degree(&man, &imm, 4, &q).unwrap().value;
        let a1 = area_degree(&man, &re, 4, &q).unwrap().value;
        prop_assert!((a0 - a1).abs() < 1e-8 * a0, "{} vs {}", a0, a1);
    }

    #[test]
    fn first_variation_is_linear(c1 in proptest::array::uniform4(coef()), c2 in proptest::array::uniform4(coef()), al in -2.0f64..2.0) {
        let (man, imm) = entry("engel-graph:theta=0.4*x+0.3*y^2");
        let q = QuadratureGrid::uniform(&imm.domain, 10).unwrap();
        let bump = "(16*x*(1-x)*y*(1-y))^2";
        let f = |c: &str| VariationField::parse(FieldFrame::Normal, &["0", "0", c, "0"], &["x", "y"]).unwrap();
        let v = format!("{}*{}", bump, poly(c1));
        let w = format!("{}*{}", bump, poly(c2));
        let vw = format!("{}*{} + {}", al, v, w);
        let fv = first_variation(&man, &imm, &f(&v), &q, 4).unwrap();
        let fw = first_variation(&man, &imm, &f(&w), &q, 4).unwrap();
        let fvw = first_variation(&man, &imm, &f(&vw), &q, 4).unwrap();
        prop_assert!((fvw - (al * fv + fw)).abs() < 1e-10 * (1.0 + fvw.abs()));
    }

    #[test]
    fn admissibility_ignores_tangent_parts(c in proptest::array::uniform4(coef()), k in proptest::array::uniform2(coef()), x in 0.05f64..0.95, y in 0.05f64..0.95) {
        let (man, imm) = entry("engel-graph:theta=0.5*x+0.2*x*y");
        let shape = system_shape(&man, &imm, &[vec![0.4, 0.4]], 4).unwrap();
        let pd = point_data(&man, &imm, &[x, y], &TangentBasis::Orthonormal).unwrap();
        let comps = [format!("sin{}", poly(c)), "x*y".to_string(), format!("cos{}", poly(c)), "1+y^2".to_string()];
        let refs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
        let v = VariationField::parse(FieldFrame::Coordinates, &refs, &["x", "y"]).unwrap().y_coefficients(&pd, None).unwrap();
        let (_, vn) = split_tangent_normal(&pd, &v).unwrap();
        let r = residual_direct(&pd, &shape, &v)[0];
        prop_assert!((r - residual_direct(&pd, &shape, &vn)[0]).abs() < 1e-8 * (1.0 + r.abs()));
        // and a pure tangent field is admissible
        let tf = format!("{}*(1+x)", k[0]);
        let tg = format!("{}*(1-y)", k[1]);
        let t = VariationField::parse(FieldFrame::Normal, &[&tf, &tg, "0", "0"], &["x", "y"]).unwrap().y_coefficients(&pd, None).unwrap();
        prop_assert!(residual_direct(&pd, &shape, &t)[0].abs() < 1e-8);
    }
}
