//! Acceptance criteria 1–12.
//!
//! Each criterion prints one line. Criteria 5 and 12 compare with printed
//! values that the generic pipeline contradicts; they print FAIL and the test
//! asserts the corrected identities instead.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fixdeg::admissibility::{
    assemble_adapted, assemble_normal, is_strongly_regular, metric_change_check, numeric_rank, point_data,
    system_shape, FieldFrame, VariationField,
};
use fixdeg::area::{area_degree, scaling_limit_probe};
use fixdeg::catalog::{
    builtin, contact_area_and_curvature, engel_coefficients, engel_el_residual_with, engel_graph, engel_kappa_along,
    engel_psi4, engel_structure, engel_x4_along, isolated_plane_probe,
};
use fixdeg::exprcore::{parse, Expr, Scalar};
use fixdeg::geom::TangentBasis;
use fixdeg::immersion::{pointwise_degree, tangent_flag, Immersion, UniformGrid};
use fixdeg::linalg::dot;
use fixdeg::manifold::Manifold;
use fixdeg::multivector::{dim_gt, dim_leq, GrowthVector};
use fixdeg::quadrature::QuadratureGrid;
use fixdeg::variation::{first_variation, mean_curvature_pairing};
use fixdeg::geom::PointData;

/// Criteria whose printed reference values are contradicted (see the README).
const KNOWN_DEVIATIONS: [usize; 2] = [5, 12];

struct Outcome {
    pass: bool,
    detail: String,
    /// For known deviations: the corrected identity holds.
    corrected: Option<bool>,
}

fn ok(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail, corrected: None }
}

fn entry(spec: &str) -> (Manifold, Immersion) {
    let e = builtin(spec).unwrap();
    (e.manifold, e.immersion.unwrap())
}

fn xy(s: &str) -> Expr {
    parse(s, &["x", "y"]).unwrap()
}

/// Composite Simpson on [a, b].
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn rand_poly(rng: &mut ChaCha8Rng, vars: (&str, &str)) -> String {
    let (a, b, c, d) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    format!("({:.3} + {:.3}*{u} + {:.3}*{v} + {:.3}*{u}*{v})", a, b, c, d, u = vars.0, v = vars.1)
}

fn rand_theta(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{:.3}*x + {:.3}*y + {:.3}*x*y + {:.3}*x^2",
        rng.gen_range(0.2..0.8),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.4..0.4),
        rng.gen_range(-0.4..0.4)
    )
}

/// Peak value 1 at the centre of the unit square.
const BUMP: &str = "(16*x*(1-x)*y*(1-y))^3";

fn c1_combinatorics() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for n in 1..=8usize {
        // growth vectors are the compositions of n
        for mask in 0u32..(1 << (n - 1)) {
            let mut g = Vec::new();
            for i in 1..n {
                if mask & (1 << (i - 1)) != 0 {
                    g.push(i);
                }
            }
            g.push(n);
            let gv = GrowthVector::new(g.clone()).unwrap();
            let w: Vec<usize> = (0..n).map(|i| g.iter().position(|&c| i < c).unwrap() + 1).collect();
            for m in 0..=n {
                let mut hist = vec![0u128; m * 8 + 2];
                for sub in 0u32..(1 << n) {
                    if sub.count_ones() as usize == m {
                        let deg: usize = (0..n).filter(|i| sub & (1 << i) != 0).map(|i| w[i]).sum();
                        hist[deg] += 1;
                    }
                }
                for d in 0..hist.len() {
                    let gt: u128 = hist[d + 1..].iter().sum();
                    let leq: u128 = hist[..=d].iter().sum();
                    checked += 1;
                    if dim_gt(&gv, m, d) != gt || dim_leq(&gv, m, d) != leq {
                        bad.push((g.clone(), m, d));
                    }
                }
            }
        }
    }
    let e = GrowthVector::new(vec![2, 3, 4]).unwrap();
    let engel = dim_gt(&e, 2, 3) == 3 && dim_gt(&e, 2, 4) == 1;
    ok(bad.is_empty() && engel, format!("{} (growth, m, d) cases, {} mismatches; Engel dim_gt(2,3)=3, dim_gt(2,4)=1: {}", checked, bad.len(), engel))
}

fn c2_degrees(rng: &mut ChaCha8Rng) -> Outcome {
    let mut fails = Vec::new();
    let pts = |rng: &mut ChaCha8Rng, dom: &[(f64, f64)], k: usize| -> Vec<Vec<f64>> {
        (0..k).map(|_| dom.iter().map(|&(a, b)| rng.gen_range(a..b)).collect()).collect()
    };
    let mut gromov_checked = 0;
    let mut gromov_bad = 0;
    let mut check_gromov = |man: &Manifold, imm: &Immersion, p: &[f64]| {
        gromov_checked += 1;
        if tangent_flag(man, imm, p).unwrap().gromov_degree != pointwise_degree(man, imm, p).unwrap() {
            gromov_bad += 1;
        }
    };
    for _ in 0..3 {
        let (man, imm) = entry(&format!("engel-graph:theta={}", rand_theta(rng)));
        for p in pts(rng, &imm.domain, 40) {
            if pointwise_degree(&man, &imm, &p).unwrap() != 4 {
                fails.push(format!("engel-graph {:?}", p));
            }
            check_gromov(&man, &imm, &p);
        }
    }
    let (man, imm) = entry("isolated-plane");
    for p in pts(rng, &imm.domain, 40) {
        if pointwise_degree(&man, &imm, &p).unwrap() != 3 {
            fails.push(format!("isolated-plane {:?}", p));
        }
        check_gromov(&man, &imm, &p);
    }
    // u_s = 0 exactly on s = 0 and s = 0.5
    let (man, imm) = entry("h1xh1-surface:u=s^2*(s-0.75)");
    let g = UniformGrid::new(&imm.domain, &[9, 9]).unwrap();
    for p in g.points() {
        let s = p[0];
        let expect = if s.abs() < 1e-12 || (s - 0.5).abs() < 1e-12 { 2 } else { 3 };
        if pointwise_degree(&man, &imm, &p).unwrap() != expect {
            fails.push(format!("h1xh1 {:?}", p));
        }
    }
    for p in pts(rng, &imm.domain, 100) {
        check_gromov(&man, &imm, &p);
    }
    for _ in 0..3 {
        let (man, imm) = entry(&format!("rt-graph:u={}", rand_poly(rng, ("x", "y"))));
        for p in pts(rng, &imm.domain, 40) {
            if pointwise_degree(&man, &imm, &p).unwrap() != 3 {
                fails.push(format!("rt-graph {:?}", p));
            }
            check_gromov(&man, &imm, &p);
        }
        let w = format!("{} + {:.3}*theta^2", rand_poly(rng, ("x", "y")), rng.gen_range(-0.5..0.5));
        let (man, imm) = entry(&format!("engel-hypersurface:w={}", w.replace(',', "")));
        for p in pts(rng, &imm.domain, 40) {
            if pointwise_degree(&man, &imm, &p).unwrap() != 6 {
                fails.push(format!("engel-hypersurface {:?}", p));
            }
            check_gromov(&man, &imm, &p);
        }
    }
    let gromov_ok = gromov_bad == 0 && gromov_checked >= 500;
    ok(
        fails.is_empty() && gromov_ok,
        format!("{} degree mismatches {:?}; Gromov vs wedge degree: {}/{} agree", fails.len(), &fails[..fails.len().min(4)], gromov_checked - gromov_bad, gromov_checked),
    )
}

fn c3_areas() -> Outcome {
    let tol = 1e-8;
    let q = QuadratureGrid::uniform(&[(0.0, 1.0); 2], 64).unwrap();
    let (rt, rti) = entry("rt-graph:u=x");
    let a3 = area_degree(&rt, &rti, 3, &q).unwrap().value;
    let o3 = simpson(|x| (1.0 + x.cos().powi(2)).sqrt(), 0.0, 1.0, 20000);
    let (e1, ei) = entry("engel-graph:theta=x");
    let (e2, _) = entry("engel-graph:theta=x,metric=euclidean");
    // κ = cos x, X_1(κ) = −sin x cos x
    let a4 = area_degree(&e1, &ei, 4, &q).unwrap().value;
    let o4 = simpson(|x| (1.0 + (x.sin() * x.cos()).powi(2)).sqrt(), 0.0, 1.0, 20000);
    let a4e = area_degree(&e2, &ei, 4, &q).unwrap().value;
    let o4e = simpson(|x| (1.0 + x.cos().powi(2) + (x.sin() * x.cos()).powi(2)).sqrt(), 0.0, 1.0, 20000);
    let errs = [(a3 - o3).abs() / o3, (a4 - o4).abs() / o4, (a4e - o4e).abs() / o4e];
    ok(errs.iter().all(|&e| e < tol), format!("relative errors A3 {:.1e}, A4 {:.1e}, A4(g0) {:.1e} (tol {:.0e})", errs[0], errs[1], errs[2], tol))
}

fn c4_scaling() -> Outcome {
    let (man, imm) = entry("engel-graph:theta=0.4*x+0.3*y^2");
    let q = QuadratureGrid::uniform(&imm.domain, 24).unwrap();
    let a4 = area_degree(&man, &imm, 4, &q).unwrap().value;
    let rs = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
    let p4 = scaling_limit_probe(&man, &imm, 4, &q, &rs).unwrap();
    let p3 = scaling_limit_probe(&man, &imm, 3, &q, &rs).unwrap();
    let p5 = scaling_limit_probe(&man, &imm, 5, &q, &rs).unwrap();
    let rel = (p4.limit - a4).abs() / a4;
    let pass = !p4.divergent && rel < 1e-3 && p3.divergent && !p5.divergent && p5.limit.abs() < 1e-6;
    ok(pass, format!("d=4 limit rel err {:.1e}; d=3 divergent {}; d=5 limit {:.1e}", rel, p3.divergent, p5.limit))
}

fn c5_admissibility(rng: &mut ChaCha8Rng) -> Outcome {
    let th_src = rand_theta(rng);
    let th = xy(&th_src);
    let (man, imm) = entry(&format!("engel-graph:theta={}", th_src));
    let c = engel_coefficients(&th);
    let x1k = engel_kappa_along(&th, &c.kappa);
    let x4t = engel_x4_along(&th, &th);
    let basis = TangentBasis::Fields { coeffs: vec![vec![th.cos(), th.sin()], vec![th.sin().neg_expr(), th.cos()]], orthonormalize: false };
    let pts: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen_range(0.02..0.98), rng.gen_range(0.02..0.98)]).collect();
    let shape = system_shape(&man, &imm, &pts[..5], 4).unwrap();
    // printed: A = (−X₁κ, 1), B = (−X₄θ, −κ²), C₁ = (1, X₄θ), a⊥ = α₁(1 + X₄κ²/(α₁²α₃²))
    let (mut ea, mut eb_printed, mut eb, mut ec, mut eap_printed, mut eap, mut ebp) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    let x4k = engel_x4_along(&th, &c.kappa);
    for p in &pts {
        let pd = point_data(&man, &imm, p, &basis).unwrap();
        let s = assemble_adapted(&pd, &shape);
        let (k, a, t4) = (c.kappa.eval(p), x1k.eval(p), x4t.eval(p));
        ea = ea.max((s.a[0][0] + a).abs()).max((s.a[0][1] - 1.0).abs());
        eb_printed = eb_printed.max((s.b[0][0] + t4).abs()).max((s.b[0][1] + k * k).abs());
        eb = eb.max((s.b[0][0] - t4).abs()).max((s.b[0][1] + k * k).abs());
        ec = ec.max((s.c[0][0][0] - 1.0).abs()).max((s.c[0][0][1] - t4).abs()).max(s.c[1][0][0].abs()).max(s.c[1][0][1].abs());
        let ns = assemble_normal(&pd, &shape).unwrap();
        let c1 = ns.c[0][0][0];
        // closed forms evaluated directly
        let a1 = (1.0 + a * a).sqrt();
        let a3sq = 1.0 + t4 * t4;
        let kk = x4k.eval(p);
        let printed = a1 * (1.0 + kk * kk / (a1 * a1 * a3sq));
        let a2 = (a1 * a1 * a3sq + kk * kk).sqrt() / a1;
        eap_printed = eap_printed.max((ns.a[0][0] / c1 - printed).abs());
        eap = eap.max((ns.a[0][0] / c1 - a1 * a2 / a3sq).abs());
        ebp = ebp.max((ns.b[0][0] / c1 - t4 * (1.0 - k * k) / a3sq).abs());
    }

    // θ-family evidence: V = d/dt (x, y, θ+tψ, X₁(θ+tψ)) is admissible, so its normal
    // components satisfy X̄₁ψ₃ + b⊥ψ₃ + a⊥ψ₄ = 0 for the true a⊥
    let psi = xy(&format!("{}*{}", BUMP, rand_poly(rng, ("x", "y"))));
    let v4 = engel_kappa_along(&th, &psi).add_expr(&psi.mul_expr(&x4t));
    let v = VariationField::new(FieldFrame::Coordinates, vec![Expr::zero(), Expr::zero(), psi.clone(), v4]);
    let (mut fam_true, mut fam_printed, mut fam_scale) = (0f64, 0f64, 0f64);
    for p in pts.iter().take(20) {
        let pd = PointData::new(&man, &imm, p, &basis, 2, true).unwrap();
        let nf = pd.normal_frame().unwrap();
        let y = v.y_coefficients(&pd, Some(&nf)).unwrap();
        let psi4 = dot(&nf.normals[0], &y);
        let psi3 = dot(&nf.normals[1], &y);
        let x1psi3 = pd.e_deriv(0, &psi3).value();
        let (p3, p4) = (psi3.value(), psi4.value());
        let base = x1psi3 + c.b_perp.eval(p) * p3;
        fam_true = fam_true.max((base + c.a_perp.eval(p) * p4).abs());
        fam_printed = fam_printed.max((base + c.a_perp_printed.eval(p) * p4).abs());
        fam_scale = fam_scale.max(x1psi3.abs());
    }

    // isolated plane: {∂f₄/∂x₃ + f₂, 0, −∂f₄/∂x₁}
    let (pm, pi) = entry("isolated-plane");
    let ps = system_shape(&pm, &pi, &[vec![0.1, 0.2]], 3).unwrap();
    let mut eplane = 0f64;
    for p in [[0.1, 0.2], [-0.6, 0.7], [0.9, -0.3]] {
        let pd = point_data(&pm, &pi, &p, &TangentBasis::Coordinate).unwrap();
        let s = assemble_adapted(&pd, &ps);
        let want_a = [[0.0, 1.0], [0.0, 0.0], [0.0, 0.0]];
        let want_c0 = [[0.0, 0.0], [0.0, 0.0], [0.0, -1.0]];
        let want_c1 = [[0.0, 1.0], [0.0, 0.0], [0.0, 0.0]];
        for i in 0..3 {
            for j in 0..2 {
                eplane = eplane.max((s.a[i][j] - want_a[i][j]).abs()).max(s.b[i][j].abs());
                eplane = eplane.max((s.c[0][i][j] - want_c0[i][j]).abs()).max((s.c[1][i][j] - want_c1[i][j]).abs());
            }
        }
    }
    let tol = 1e-8;
    let printed_ok = ea < tol && eb_printed < tol && ec < tol && eap_printed < tol && ebp < tol && eplane < 1e-12;
    let corrected = ea < tol
        && eb < tol
        && ec < tol
        && eap < tol
        && ebp < tol
        && eplane < 1e-12
        && fam_true < 1e-8
        && fam_printed > 1e-4 * fam_scale.max(1e-12);
    Outcome {
        pass: printed_ok,
        detail: format!(
            "vs printed: A {:.1e}, B {:.1e}, C {:.1e}, a_perp {:.1e}, b_perp {:.1e}, plane {:.1e}; corrected B {:.1e}, a_perp = a1 a2/a3^2 {:.1e}; family residual true {:.1e} vs printed {:.1e}",
            ea, eb_printed, ec, eap_printed, ebp, eplane, eb, eap, fam_true, fam_printed
        ),
        corrected: Some(corrected),
    }
}

fn c6_regularity() -> Outcome {
    let mut fails = Vec::new();
    let mut rank_mismatch = 0;
    let cases: [(&str, u32, bool, usize, usize); 4] = [
        ("engel-graph:theta=0.5*x+0.2*x*y", 4, true, 1, 1),
        ("isolated-plane", 3, false, 1, 3),
        ("rt-graph:u=0.3*x*y+0.2*y", 3, true, 0, 0),
        ("engel-hypersurface", 6, true, 0, 0),
    ];
    for (spec, d, flag, rank, ell) in cases {
        let (man, imm) = entry(spec);
        let pts = UniformGrid::new(&imm.domain, &vec![4; imm.m()]).unwrap().points();
        let shape = system_shape(&man, &imm, &pts, d).unwrap();
        for p in &pts {
            let pd = point_data(&man, &imm, p, &TangentBasis::Orthonormal).unwrap();
            let s = assemble_adapted(&pd, &shape);
            let r = is_strongly_regular(&s);
            if (r.flag, r.rank, r.ell) != (flag, rank, ell) {
                fails.push(format!("{} {:?}", spec, p));
            }
            if ell > 0 && numeric_rank(&s.a).0 != numeric_rank(&assemble_normal(&pd, &shape).unwrap().a).0 {
                rank_mismatch += 1;
            }
        }
    }
    ok(fails.is_empty() && rank_mismatch == 0, format!("{} flag/rank mismatches, {} rank(A) != rank(A_perp)", fails.len(), rank_mismatch))
}

fn c7_metric_independence(rng: &mut ChaCha8Rng) -> Outcome {
    let th = "0.5*x+0.2*x*y-0.1*y^2";
    let (man, imm) = entry(&format!("engel-graph:theta={}", th));
    let (man_e, _) = entry(&format!("engel-graph:theta={},metric=euclidean", th));
    let pts: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
    let shape = system_shape(&man, &imm, &pts[..3], 4).unwrap();
    let mut worst = 0f64;
    let mut ranks = true;
    for _ in 0..10 {
        let comps: Vec<String> = (0..4).map(|_| format!("sin({})", rand_poly(rng, ("x", "y")))).collect();
        let refs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
        let f = VariationField::parse(FieldFrame::Coordinates, &refs, &["x", "y"]).unwrap();
        for p in &pts {
            let r = metric_change_check(&man, &man_e, &imm, p, &shape, &f).unwrap();
            worst = worst.max(r.residual_error);
            ranks &= r.rank == r.rank_tilde;
        }
    }
    ok(worst < 1e-7 && ranks, format!("max transport error {:.1e} over 10 fields x 20 points (tol 1e-7); ranks equal {}", worst, ranks))
}

fn c8_duality(rng: &mut ChaCha8Rng) -> Outcome {
    let (man, imm) = entry("engel-graph:theta=0.4*x+0.3*y^2+0.2*x*y");
    let q = QuadratureGrid::uniform(&imm.domain, 16).unwrap();
    let mut worst = 0f64;
    for _ in 0..10 {
        let a = format!("{}*{}", BUMP, rand_poly(rng, ("x", "y")));
        let b = format!("{}*{}", BUMP, rand_poly(rng, ("x", "y")));
        let v = VariationField::parse(FieldFrame::Normal, &["0", "0", &a, &b], &["x", "y"]).unwrap();
        let fv = first_variation(&man, &imm, &v, &q, 4).unwrap();
        let hv = mean_curvature_pairing(&man, &imm, &v, &q, 4).unwrap();
        worst = worst.max((fv - hv).abs() / (1.0 + hv.abs()));
    }
    let mut tangent = 0f64;
    for _ in 0..3 {
        let a = format!("{}*{}", BUMP, rand_poly(rng, ("x", "y")));
        let b = format!("{}*{}", BUMP, rand_poly(rng, ("x", "y")));
        let v = VariationField::parse(FieldFrame::Normal, &[&a, &b, "0", "0"], &["x", "y"]).unwrap();
        tangent = tangent.max(first_variation(&man, &imm, &v, &q, 4).unwrap().abs());
    }
    ok(worst <= 1e-4 && tangent <= 1e-6, format!("max |FV - <V,H>|/(1+|<V,H>|) = {:.1e} (tol 1e-4); tangent |FV| = {:.1e} (tol 1e-6)", worst, tangent))
}

fn c9_family(rng: &mut ChaCha8Rng) -> Outcome {
    let th = xy("0.4*x+0.3*y^2+0.2*x*y");
    let man = engel_structure(false);
    let imm = engel_graph(&th).unwrap();
    let q = QuadratureGrid::uniform(&imm.domain, 20).unwrap();
    let x4t = engel_x4_along(&th, &th);
    let t = 1e-4;
    let mut worst = 0f64;
    for _ in 0..5 {
        let psi = xy(&format!("{}*{}", BUMP, rand_poly(rng, ("x", "y"))));
        let area = |s: f64| area_degree(&man, &engel_graph(&th.add_expr(&psi.mul_expr(&Expr::constant(s)))).unwrap(), 4, &q).unwrap().value;
        let fd = (area(t) - area(-t)) / (2.0 * t);
        let v4 = engel_kappa_along(&th, &psi).add_expr(&psi.mul_expr(&x4t));
        let v = VariationField::new(FieldFrame::Coordinates, vec![Expr::zero(), Expr::zero(), psi, v4]);
        let fv = first_variation(&man, &imm, &v, &q, 4).unwrap();
        worst = worst.max((fd - fv).abs() / fv.abs().max(1e-12));
    }
    ok(worst < 1e-4, format!("max relative |dA/dt - FV| = {:.1e} over 5 families (tol 1e-4)", worst))
}

fn c10_euler_lagrange(rng: &mut ChaCha8Rng) -> Outcome {
    let th = xy("0.4*x + 0.3*y^2 + 0.2*x*y");
    let c = engel_coefficients(&th);
    let man = engel_structure(false);
    let imm = engel_graph(&th).unwrap();
    let q = QuadratureGrid::uniform(&imm.domain, 16).unwrap();
    let el: Vec<(Vec<f64>, f64, f64)> = q
        .nodes()
        .into_iter()
        .map(|(p, w)| {
            let r = engel_el_residual_with(&c, &p).unwrap();
            (p, w, r.residual / r.a_perp)
        })
        .collect();
    let mut worst = 0f64;
    for _ in 0..5 {
        let psi3 = xy(&format!("{}*{}", BUMP, rand_poly(rng, ("x", "y"))));
        let psi4 = engel_psi4(&c, &psi3);
        let v = VariationField::new(FieldFrame::Normal, vec![Expr::zero(), Expr::zero(), psi4, psi3.clone()]);
        let lhs = mean_curvature_pairing(&man, &imm, &v, &q, 4).unwrap();
        let rhs: f64 = el.iter().map(|(p, w, r)| w * r * psi3.eval(p)).sum();
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    // one explicit step along −EL lifted through a⊥
    let basis: Vec<Expr> = ["1", "x", "y", "x*y"].iter().map(|s| xy(&format!("{}*({})", BUMP, s))).collect();
    let g = fixdeg::catalog::engel_area_gradient(&th, &basis, &QuadratureGrid::uniform(&imm.domain, 12).unwrap()).unwrap();
    let gn: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tau = 1e-4 / gn;
    let mut step = Expr::zero();
    for (gk, f) in g.iter().zip(&basis) {
        step = step.add_expr(&f.mul_expr(&Expr::constant(gk * tau)));
    }
    let a0 = area_degree(&man, &imm, 4, &q).unwrap().value;
    let a1 = area_degree(&man, &engel_graph(&th.sub_expr(&step)).unwrap(), 4, &q).unwrap().value;
    ok(worst < 1e-4 && a1 < a0, format!("weak-form max rel err {:.1e} (tol 1e-4); gradient step A4 {:.10} -> {:.10}", worst, a0, a1))
}

fn c11_isolation(rng: &mut ChaCha8Rng) -> Outcome {
    let vw = |s: &str| parse(s, &["v", "w"]).unwrap();
    let g = UniformGrid::new(&[(-1.0, 1.0); 2], &[64, 64]).unwrap();
    let bump = "((1-v^2)*(1-w^2))^4";
    let mut cases: Vec<(Expr, Expr)> = Vec::new();
    for _ in 0..12 {
        cases.push((vw(&format!("{}*{}", bump, rand_poly(rng, ("v", "w")))), vw(&format!("{}*{}", bump, rand_poly(rng, ("v", "w"))))));
    }
    cases.push((vw(bump), vw(&format!("-w*{}", bump))));
    cases.push((Expr::zero(), vw(bump)));
    cases.push((vw(bump), Expr::zero()));
    cases.push((vw(&format!("0.01*v*{}", bump)), Expr::zero()));
    // ψ_w = −wφ_w with ψ_v ≠ −wφ_v
    for f in ["v*(1-v^2)^4", "(1-v^2)^5", "sin(3*v)*(1-v^2)^4", "(v-0.3)*(1-v^2)^4"] {
        let f = vw(f);
        let h = vw("(1-w^2)^4");
        let hp = h.diff(1);
        cases.push((f.mul_expr(&hp), f.mul_expr(&vw("w").mul_expr(&hp).sub_expr(&h)).neg_expr()));
    }
    assert_eq!(cases.len(), 20);
    let reports: Vec<_> = cases.iter().map(|(a, b)| isolated_plane_probe(a, b, &g, 1e-3).unwrap()).collect();
    let weakest = reports.iter().map(|r| r.max_residual).fold(f64::INFINITY, f64::min);
    let zero = isolated_plane_probe(&Expr::zero(), &Expr::zero(), &g, 1e-3).unwrap();
    ok(
        reports.iter().all(|r| r.violated) && zero.max_residual == 0.0,
        format!("20 nonzero pairs, smallest max residual {:.2e} (threshold 1e-3); zero pair residual {}", weakest, zero.max_residual),
    )
}

fn c12_contact(rng: &mut ChaCha8Rng) -> Outcome {
    let q = QuadratureGrid::uniform(&[(0.0, 1.0); 2], 24).unwrap();
    let (mut dens, mut printed, mut corrected, mut area) = (0f64, 0f64, 0f64, 0f64);
    for _ in 0..4 {
        let u = xy(&format!("0.5*sin({})", rand_poly(rng, ("x", "y"))));
        let samples: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)]).collect();
        let r = contact_area_and_curvature(&u, &q, &samples).unwrap();
        dens = dens.max(r.max_density_error);
        printed = printed.max(r.max_h_error_as_printed);
        corrected = corrected.max(r.max_h_error);
        area = area.max((r.a3_contact - r.a3_generic).abs() / r.a3_generic);
    }
    Outcome {
        pass: dens < 1e-10 && area < 1e-8 && printed < 1e-6,
        detail: format!(
            "density err {:.1e}, A3 rel err {:.1e}; H vs printed -div^h nu_h + <[nu_h,T],T>: {:.1e}; vs div^h nu_h - <[nu_h,T],T>: {:.1e} (tol 1e-6)",
            dens, area, printed, corrected
        ),
        corrected: Some(dens < 1e-10 && area < 1e-8 && corrected < 1e-6),
    }
}

#[test]
fn acceptance_criteria() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let runs: Vec<(usize, &str, Outcome)> = vec![
        (1, "combinatorics", c1_combinatorics()),
        (2, "degrees", c2_degrees(&mut rng)),
        (3, "areas", c3_areas()),
        (4, "scaling limit", c4_scaling()),
        (5, "admissibility assembly", c5_admissibility(&mut rng)),
        (6, "regularity", c6_regularity()),
        (7, "metric independence", c7_metric_independence(&mut rng)),
        (8, "first variation duality", c8_duality(&mut rng)),
        (9, "degree-preserving family", c9_family(&mut rng)),
        (10, "Euler-Lagrange", c10_euler_lagrange(&mut rng)),
        (11, "isolation probe", c11_isolation(&mut rng)),
        (12, "contact cross-check", c12_contact(&mut rng)),
    ];
    let mut out = std::io::stdout().lock();
    let mut problems = Vec::new();
    for (id, name, o) in &runs {
        let mut line = format!("criterion {:>2} {:<26} {}  {}", id, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if let Some(c) = o.corrected {
            line.push_str(&format!("  [corrected identity: {}]", if c { "holds" } else { "FAILS" }));
        }
        writeln!(out, "{}", line).unwrap();
        let fine = if KNOWN_DEVIATIONS.contains(id) { o.corrected == Some(true) } else { o.pass };
        if !fine {
            problems.push(*id);
        }
    }
    out.flush().unwrap();
    assert!(problems.is_empty(), "criteria failing beyond the known deviations: {:?}", problems);
}
