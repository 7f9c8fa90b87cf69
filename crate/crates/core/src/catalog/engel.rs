//! Degree-4 Euler–Lagrange operator for `(θ, κ)`-graphs in the Engel structure.
//!
//! Along the graph of `θ(x, y)` the normals are `N_4` (horizontal) and `N_3`,
//! and a normal field `ψ_3 N_3 + ψ_4 N_4` is admissible iff
//! `X̄_1ψ_3 + b⊥ψ_3 + a⊥ψ_4 = 0`. Integrating by parts in `dx dy` with
//! `h_j = √det μ · H^j` leaves `∫ (EL/a⊥) ψ_3`, where
//! `EL = X̄_1(h_4) + a⊥h_3 + (X̄_4θ(κ² + X̄_4θ²)/α_3² − X̄_1(a⊥)/a⊥) h_4`.

use serde::Serialize;

use crate::error::Result;
use crate::exprcore::{Expr, Scalar};
use crate::geom::{PointData, TangentBasis};
use crate::jet::Jet;
use crate::quadrature::QuadratureGrid;
use crate::variation::mean_curvature_jets;

use super::{engel_graph, engel_kappa, engel_kappa_along, engel_structure};

/// `X̄_4(f) = −sinθ f_x + cosθ f_y`.
pub fn engel_x4_along(theta: &Expr, f: &Expr) -> Expr {
    theta.sin().neg_expr().mul_expr(&f.diff(0)).add_expr(&theta.cos().mul_expr(&f.diff(1)))
}

/// Symbolic coefficients of the normal admissibility equation.
#[derive(Clone, Debug)]
pub struct EngelCoefficients {
    pub theta: Expr,
    pub kappa: Expr,
    pub x4_theta: Expr,
    pub alpha1: Expr,
    pub alpha2: Expr,
    pub alpha3: Expr,
    /// `α_1α_2/α_3²`, the coefficient produced by the normal frame.
    pub a_perp: Expr,
    /// `α_1(1 + X_4(κ)²/(α_1²α_3²))` as printed with the worked example.
    pub a_perp_printed: Expr,
    pub b_perp: Expr,
}

pub fn engel_coefficients(theta: &Expr) -> EngelCoefficients {
    let one = Expr::one();
    let kappa = engel_kappa(theta);
    let k1 = engel_kappa_along(theta, &kappa);
    let k4 = engel_x4_along(theta, &kappa);
    let t4 = engel_x4_along(theta, theta);
    let a1s = one.add_expr(&k1.powi(2));
    let a3s = one.add_expr(&t4.powi(2));
    let alpha1 = a1s.sqrt();
    let alpha3 = a3s.sqrt();
    let num = a1s.mul_expr(&a3s).add_expr(&k4.powi(2));
    let alpha2 = num.sqrt().div_expr(&alpha1);
    let a_perp = num.sqrt().div_expr(&a3s);
    let a_perp_printed = num.div_expr(&alpha1.mul_expr(&a3s));
    let b_perp = t4.mul_expr(&one.sub_expr(&kappa.powi(2))).div_expr(&a3s);
    EngelCoefficients {
        theta: theta.clone(),
        kappa,
        x4_theta: t4,
        alpha1,
        alpha2,
        alpha3,
        a_perp,
        a_perp_printed,
        b_perp,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ElResidual {
    pub point: Vec<f64>,
    /// `√det μ · H^3` and `√det μ · H^4`.
    pub h3: f64,
    pub h4: f64,
    pub a_perp: f64,
    pub b_perp: f64,
    pub alpha3: f64,
    pub residual: f64,
}

/// The operator applied to given `h_3`, `h_4` (jets in the parameters `x, y`
/// carried by jet variables 0 and 1).
pub fn engel_el_operator(c: &EngelCoefficients, p: &[f64], h3: &Jet, h4: &Jet) -> ElResidual {
    let th = c.theta.eval(p);
    let x1h4 = th.cos() * h4.d1(0) + th.sin() * h4.d1(1);
    let a = c.a_perp.eval(p);
    let x1a = engel_kappa_along(&c.theta, &c.a_perp).eval(p);
    let t4 = c.x4_theta.eval(p);
    let k = c.kappa.eval(p);
    let a3 = c.alpha3.eval(p);
    let (h3v, h4v) = (h3.value(), h4.value());
    let coef = t4 * (k * k + t4 * t4) / (a3 * a3) - x1a / a;
    ElResidual {
        point: p.to_vec(),
        h3: h3v,
        h4: h4v,
        a_perp: a,
        b_perp: c.b_perp.eval(p),
        alpha3: a3,
        residual: x1h4 + a * h3v + coef * h4v,
    }
}

/// Euler–Lagrange residual of the graph of `θ` at `p`, with `H` from the generic
/// mean-curvature evaluation.
pub fn engel_el_residual(theta: &Expr, p: &[f64]) -> Result<ElResidual> {
    let c = engel_coefficients(theta);
    engel_el_residual_with(&c, p)
}

pub fn engel_el_residual_with(c: &EngelCoefficients, p: &[f64]) -> Result<ElResidual> {
    let man = engel_structure(false);
    let imm = engel_graph(&c.theta)?;
    let pd = PointData::new(&man, &imm, p, &TangentBasis::Orthonormal, 3, true)?;
    let nf = pd.normal_frame()?;
    let h = mean_curvature_jets(&pd, &nf, 4)?.total();
    let s = pd.sqrt_det_mu();
    // normals come ordered (N_4, N_3)
    let h4 = h[0].clone() * s.clone();
    let h3 = h[1].clone() * s;
    Ok(engel_el_operator(c, p, &h3, &h4))
}

/// `ψ_4 = −(X̄_1ψ_3 + b⊥ψ_3)/a⊥`.
pub fn engel_psi4(c: &EngelCoefficients, psi3: &Expr) -> Expr {
    engel_kappa_along(&c.theta, psi3).add_expr(&c.b_perp.mul_expr(psi3)).div_expr(&c.a_perp).neg_expr()
}

/// `d/dt A_4(θ + tφ_k)|₀ = −∫ EL·φ_k/(a⊥α_3) dx dy` for each basis function.
pub fn engel_area_gradient(theta: &Expr, basis: &[Expr], grid: &QuadratureGrid) -> Result<Vec<f64>> {
    let c = engel_coefficients(theta);
    grid.integrate_many(basis.len(), |p| {
        let r = engel_el_residual_with(&c, p)?;
        let w = -r.residual / (r.a_perp * r.alpha3);
        Ok(basis.iter().map(|f| w * f.eval(p)).collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprcore::parse;

    #[test]
    fn operator_vanishes_on_zero_curvature() {
        let th = parse("0.3*x + 0.2*y^2", &["x", "y"]).unwrap();
        let c = engel_coefficients(&th);
        let l = crate::jet::JetLayout::shared(2, 1);
        let z = Jet::constant(&l, 0.0);
        assert_eq!(engel_el_operator(&c, &[0.2, 0.5], &z, &z).residual, 0.0);
    }

    #[test]
    fn coefficients_against_closed_forms() {
        // θ = x: κ = cos x, X̄_4θ = −sin x, X̄_1κ = −sin x cos x, X̄_4κ = sin² x
        let th = parse("x", &["x", "y"]).unwrap();
        let c = engel_coefficients(&th);
        let x: f64 = 0.7;
        let (s, co) = (x.sin(), x.cos());
        let a1 = (1.0 + (s * co).powi(2)).sqrt();
        let a3 = (1.0 + s * s).sqrt();
        let a2 = ((a1 * a3).powi(2) + s.powi(4)).sqrt() / a1;
        let p = [x, 0.3];
        assert!((c.alpha2.eval(&p) - a2).abs() < 1e-14);
        assert!((c.a_perp.eval(&p) - a1 * a2 / (a3 * a3)).abs() < 1e-14);
        assert!((c.a_perp_printed.eval(&p) - a1 * a2 * a2 / (a3 * a3)).abs() < 1e-14);
        assert!((c.b_perp.eval(&p) + s * (1.0 - co * co) / (a3 * a3)).abs() < 1e-14);
    }

    const THETA: &str = "0.4*x + 0.3*y^2 + 0.2*x*y";
    const BUMP: &str = "(x*(1-x)*y*(1-y))^3";

    #[test]
    fn weak_form_matches_mean_curvature_pairing() {
        use crate::admissibility::{FieldFrame, VariationField};
        use crate::variation::{first_variation, mean_curvature_pairing};
        let th = parse(THETA, &["x", "y"]).unwrap();
        let c = engel_coefficients(&th);
        let man = engel_structure(false);
        let imm = engel_graph(&th).unwrap();
        let grid = QuadratureGrid::uniform(&[(0.0, 1.0); 2], 16).unwrap();
        let el: Vec<(Vec<f64>, f64, ElResidual)> =
            grid.nodes().into_iter().map(|(p, w)| { let r = engel_el_residual_with(&c, &p).unwrap(); (p, w, r) }).collect();
        for poly in ["1", "x - 2*y", "1 + 3*x*y"] {
            let psi3 = parse(&format!("{}*({})", BUMP, poly), &["x", "y"]).unwrap();
            let psi4 = engel_psi4(&c, &psi3);
            let v = VariationField::new(FieldFrame::Normal, vec![Expr::zero(), Expr::zero(), psi4, psi3.clone()]);
            let lhs = mean_curvature_pairing(&man, &imm, &v, &grid, 4).unwrap();
            let rhs: f64 = el.iter().map(|(p, w, r)| w * r.residual / r.a_perp * psi3.eval(p)).sum();
            let fv = first_variation(&man, &imm, &v, &grid, 4).unwrap();
            assert!((lhs - rhs).abs() < 1e-4 * (1.0 + lhs.abs()), "{}: {} vs {}", poly, lhs, rhs);
            assert!((fv - rhs).abs() < 1e-4 * (1.0 + fv.abs()), "{}: {} vs {}", poly, fv, rhs);
        }
    }

    #[test]
    fn gradient_step_decreases_area() {
        use crate::area::area_degree;
        let th = parse(THETA, &["x", "y"]).unwrap();
        let grid = QuadratureGrid::uniform(&[(0.0, 1.0); 2], 12).unwrap();
        let basis: Vec<Expr> =
            ["1", "x", "y"].iter().map(|q| parse(&format!("{}*({})", BUMP, q), &["x", "y"]).unwrap()).collect();
        let g = engel_area_gradient(&th, &basis, &grid).unwrap();
        let gn: f64 = g.iter().map(|x| x * x).sum();
        assert!(gn > 0.0);
        let man = engel_structure(false);
        let a0 = area_degree(&man, &engel_graph(&th).unwrap(), 4, &grid).unwrap().value;
        let tau = 1e-2 / gn.sqrt();
        let mut step = Expr::zero();
        for (gk, f) in g.iter().zip(&basis) {
            step = step.add_expr(&f.mul_expr(&Expr::constant(gk * tau)));
        }
        let a1 = area_degree(&man, &engel_graph(&th.sub_expr(&step)).unwrap(), 4, &grid).unwrap().value;
        assert!(a1 < a0);
        let predicted = -tau * gn;
        assert!(((a1 - a0) - predicted).abs() < 0.05 * predicted.abs(), "{} vs {}", a1 - a0, predicted);
    }
}
