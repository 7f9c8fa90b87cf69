//! Graphs `θ = u(x, y)` in the roto-translational group, seen as contact hypersurfaces.

use serde::Serialize;

use crate::area::{area_degree, area_integrand};
use crate::error::Result;
use crate::exprcore::{Expr, Scalar};
use crate::geom::{column, PointData, TangentBasis};
use crate::immersion::Immersion;
use crate::jet::Jet;
use crate::linalg;
use crate::manifold::{lie_bracket, Manifold};
use crate::quadrature::QuadratureGrid;
use crate::variation::mean_curvature;

use super::rototrans;

/// Contact-side quantities at one point.
#[derive(Clone, Debug, Serialize)]
pub struct ContactPoint {
    pub point: Vec<f64>,
    /// `|N_h|` for the unit normal `N`.
    pub nh: f64,
    /// `|N_h|·√det μ` and the generic degree-3 density.
    pub density_contact: f64,
    pub density_generic: f64,
    /// `−div^h_Σ ν_h`, `⟨[ν_h, T], T⟩` and their sum.
    pub minus_div_h: f64,
    pub reeb_term: f64,
    pub h_contact: f64,
    /// `H_d` on the same unit normal from the generic evaluation.
    pub h_generic: f64,
}

pub fn rt_graph(u: &Expr) -> Result<Immersion> {
    Immersion::new(
        vec!["x".into(), "y".into()],
        vec![Expr::var(0, "x"), Expr::var(1, "y"), u.clone()],
        vec![(0.0, 1.0); 2],
    )
}

/// `⟨[X_a, T], T⟩` at `x` with `T = X_3`.
fn reeb_coefficients(man: &Manifold, x: &[f64]) -> Result<[f64; 2]> {
    let amb = man.ambient_at(x)?;
    let f = &man.frame.fields;
    let c = |a: usize| -> f64 { linalg::dot(&amb.ycov[2], &lie_bracket(&f[a], &f[2], x)) };
    Ok([c(0), c(1)])
}

pub fn contact_point(man: &Manifold, imm: &Immersion, p: &[f64]) -> Result<ContactPoint> {
    let pd = PointData::new(man, imm, p, &TangentBasis::Orthonormal, 2, true)?;
    let nf = pd.normal_frame()?;
    let nn = &nf.normals[0];
    let nh2 = nn[0].clone() * nn[0].clone() + nn[1].clone() * nn[1].clone();
    let nh = nh2.sqrt();
    let inv = nh.recip();
    let nu: Vec<Jet> = vec![nn[0].clone() * inv.clone(), nn[1].clone() * inv, pd.zero()];
    // unit horizontal tangent
    let e = vec![nu[1].clone().scale(-1.0), nu[0].clone(), pd.zero()];
    let mut nab = vec![pd.zero(); 3];
    for i in 0..pd.m {
        let w = linalg::dot(&e, &column(&pd.ecoef, i));
        nab = nab.into_iter().zip(pd.nabla_e(i, &nu)).map(|(a, b)| a + w.clone() * b).collect();
    }
    let div_h = linalg::dot(&nab, &e).value();
    let x = imm.eval(p);
    let rc = reeb_coefficients(man, &x)?;
    let reeb_term = rc[0] * nu[0].value() + rc[1] * nu[1].value();
    let h = mean_curvature(man, imm, p, 3)?;
    Ok(ContactPoint {
        point: p.to_vec(),
        nh: nh.value(),
        density_contact: nh.value() * pd.sqrt_det_mu().value(),
        density_generic: area_integrand(man, imm, p, 3)?,
        minus_div_h: -div_h,
        reeb_term,
        h_contact: -div_h + reeb_term,
        h_generic: h.h[0],
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContactReport {
    pub a3_contact: f64,
    pub a3_generic: f64,
    pub max_density_error: f64,
    /// `max |H_d − (div^h_Σ ν_h − ⟨[ν_h,T],T⟩)|`, the contact formula in the
    /// sign convention where `d/dt A_d = ∫⟨V, H_d⟩ dμ`.
    pub max_h_error: f64,
    /// `max |H_d − (−div^h_Σ ν_h + ⟨[ν_h,T],T⟩)|`.
    pub max_h_error_as_printed: f64,
    pub points: Vec<ContactPoint>,
}

/// `A_3` through `|N_h|` and `H` through the contact formula, against the generic modules.
pub fn contact_area_and_curvature(u: &Expr, grid: &QuadratureGrid, samples: &[Vec<f64>]) -> Result<ContactReport> {
    let man = rototrans();
    let imm = rt_graph(u)?;
    let a3_contact = grid.integrate(|p| {
        let pd = PointData::new(&man, &imm, p, &TangentBasis::Orthonormal, 2, false)?;
        let nf = pd.normal_frame()?;
        let n = &nf.normals[0];
        Ok((n[0].value().powi(2) + n[1].value().powi(2)).sqrt() * pd.sqrt_det_mu().value())
    })?;
    let a3_generic = area_degree(&man, &imm, 3, grid)?.value;
    let points = samples.iter().map(|p| contact_point(&man, &imm, p)).collect::<Result<Vec<_>>>()?;
    let max_density_error = points.iter().map(|c| (c.density_contact - c.density_generic).abs()).fold(0.0, f64::max);
    let max_h_error = points.iter().map(|c| (c.h_contact + c.h_generic).abs()).fold(0.0, f64::max);
    let max_h_error_as_printed = points.iter().map(|c| (c.h_contact - c.h_generic).abs()).fold(0.0, f64::max);
    Ok(ContactReport { a3_contact, a3_generic, max_density_error, max_h_error, max_h_error_as_printed, points })
}
