//! Degree-3 constraints for graphs `(v, φ, w, ψ)` over the isolated plane in the Engel group.

use serde::Serialize;

use crate::error::Result;
use crate::exprcore::Expr;
use crate::immersion::{coordinate_mvector, Immersion, UniformGrid};
use crate::multivector::MultiIndex;

use super::engel_group;

/// The printed constraints `ψ_w + wφ_w`, `φ_vψ_w − ψ_vφ_w`,
/// `v(φ_vψ_w − ψ_vφ_w) − (ψ_v + wφ_v)` at `(v, w)`.
pub fn isolated_plane_constraints(phi: &Expr, psi: &Expr, p: &[f64]) -> [f64; 3] {
    let (v, w) = (p[0], p[1]);
    let (pv, pw) = (phi.diff(0).eval(p), phi.diff(1).eval(p));
    let (sv, sw) = (psi.diff(0).eval(p), psi.diff(1).eval(p));
    let jac = pv * sw - sv * pw;
    [sw + w * pw, jac, v * jac - (sv + w * pv)]
}

/// Coefficients of `Φ_v∧Φ_w` on `X_1∧X_4`, `X_2∧X_4`, `X_3∧X_4` (all of degree `> 3`).
pub fn isolated_plane_generic(phi: &Expr, psi: &Expr, p: &[f64]) -> Result<[f64; 3]> {
    let v = Expr::var(0, "v");
    let w = Expr::var(1, "w");
    let imm = Immersion::new(
        vec!["v".into(), "w".into()],
        vec![v, phi.clone(), w, psi.clone()],
        vec![(-1.0, 1.0); 2],
    )?;
    let tau = coordinate_mvector(&engel_group(), &imm, p)?;
    let c = |a: usize| tau.coeff(&MultiIndex::new(vec![a, 3]).unwrap());
    Ok([c(0), c(1), c(2)])
}

#[derive(Clone, Debug, Serialize)]
pub struct IsolationReport {
    pub points: usize,
    /// Maximum of each printed constraint over the grid.
    pub max_constraint: [f64; 3],
    pub max_residual: f64,
    /// Maximum of the degree `> 3` part of `Φ_v∧Φ_w` from the generic pipeline.
    pub generic_max: f64,
    pub tol: f64,
    pub violated: bool,
}

pub fn isolated_plane_probe(phi: &Expr, psi: &Expr, grid: &UniformGrid, tol: f64) -> Result<IsolationReport> {
    let mut mc = [0.0f64; 3];
    let mut gm = 0.0f64;
    for p in grid.points() {
        let c = isolated_plane_constraints(phi, psi, &p);
        for i in 0..3 {
            mc[i] = mc[i].max(c[i].abs());
        }
        for g in isolated_plane_generic(phi, psi, &p)? {
            gm = gm.max(g.abs());
        }
    }
    let max = mc.iter().cloned().fold(0.0, f64::max);
    Ok(IsolationReport {
        points: grid.len(),
        max_constraint: mc,
        max_residual: max,
        generic_max: gm,
        tol,
        violated: max >= tol,
    })
}
