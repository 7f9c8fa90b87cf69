//! First variation and mean curvature of the degree-d area.
//!
//! Pointwise quantities are computed on [`PointData`] jets with an orthonormal
//! tangent basis. `H_d` is returned as jets so that operators of higher order
//! (the critical-point residuals, the Engel Euler–Lagrange operator) can
//! differentiate it once more.

use serde::Serialize;

use crate::admissibility::{field_coefficient_jets, field_coefficients, higher_degree_basis, numeric_rank, VariationField};
use crate::error::{Error, Result};
use crate::exprcore::Scalar;
use crate::geom::{column, NormalFrame, PointData, TangentBasis};
use crate::immersion::Immersion;
use crate::jet::Jet;
use crate::linalg::{self, Mat};
use crate::manifold::{self, Manifold};
use crate::multivector::{all_indices, minor, MultiIndex};
use crate::quadrature::QuadratureGrid;

/// Density below which a point counts as singular for the first variation.
pub const THETA_MIN: f64 = 1e-10;

/// Multi-indices with `deg J = d`.
pub fn degree_d_indices(pd: &PointData, d: u32) -> Vec<MultiIndex> {
    all_indices(pd.n, pd.m).into_iter().filter(|j| j.indices().iter().map(|&i| pd.weight(i)).sum::<u32>() == d).collect()
}

fn sum(pd: &PointData, it: impl IntoIterator<Item = Jet>) -> Jet {
    it.into_iter().fold(pd.zero(), |a, b| a + b)
}

/// `Θ = |(E_1∧…∧E_m)_d|`.
pub fn density(pd: &PointData, js: &[MultiIndex]) -> Jet {
    sum(pd, js.iter().map(|j| {
        let t = pd.tau_jet(j);
        t.clone() * t
    }))
    .sqrt()
}

/// `div^d V = Σ_i ⟨E_1∧…∧∇_{E_i}V∧…∧E_m, (E_1∧…∧E_m)_d⟩`.
pub fn div_degree_d_jet(pd: &PointData, v: &[Jet], js: &[MultiIndex]) -> Jet {
    let taus: Vec<Jet> = js.iter().map(|j| pd.tau_jet(j)).collect();
    let mut s = pd.zero();
    for i in 0..pd.m {
        let nab = pd.nabla_e(i, v);
        for (j, t) in js.iter().zip(&taus) {
            s = s + pd.replaced_minor(j, i, &nab) * t.clone();
        }
    }
    s
}

/// `f(V) = Σ_{deg J = d} ⟨E_1∧…∧E_m, ∇_V X_J⟩⟨E_1∧…∧E_m, X_J⟩`.
pub fn f_linear_jet(pd: &PointData, v: &[Jet], js: &[MultiIndex]) -> Jet {
    sum(pd, js.iter().map(|j| pd.tau_nabla_yj(v, j) * pd.tau_jet(j)))
}

fn orthonormal_point(man: &Manifold, imm: &Immersion, p: &[f64], order: usize) -> Result<PointData> {
    PointData::new(man, imm, p, &TangentBasis::Orthonormal, order, true)
}

fn field_order(field: &VariationField) -> usize {
    match field.frame {
        crate::admissibility::FieldFrame::Normal => 2,
        _ => 1,
    }
}

pub fn div_degree_d(man: &Manifold, imm: &Immersion, field: &VariationField, p: &[f64], d: u32) -> Result<f64> {
    let pd = orthonormal_point(man, imm, p, field_order(field))?;
    let v = field.y_coefficients(&pd, None)?;
    Ok(div_degree_d_jet(&pd, &v, &degree_d_indices(&pd, d)).value())
}

/// `f(V_p)` for a vector given by its `Y` coefficients at `Φ(p̄)`.
pub fn f_linear(man: &Manifold, imm: &Immersion, vp: &[f64], p: &[f64], d: u32) -> Result<f64> {
    let pd = orthonormal_point(man, imm, p, 1, )?;
    if vp.len() != pd.n {
        return Err(Error::Dimension(format!("vector has {} components, expected {}", vp.len(), pd.n)));
    }
    let v: Vec<Jet> = vp.iter().map(|&c| pd.constant(c)).collect();
    Ok(f_linear_jet(&pd, &v, &degree_d_indices(&pd, d)).value())
}

/// `(div^d V + f(V))/Θ · √det μ` at one parameter point.
pub fn first_variation_integrand(man: &Manifold, imm: &Immersion, field: &VariationField, p: &[f64], d: u32) -> Result<f64> {
    let pd = orthonormal_point(man, imm, p, field_order(field))?;
    let v = field.y_coefficients(&pd, None)?;
    let js = degree_d_indices(&pd, d);
    let num = (div_degree_d_jet(&pd, &v, &js) + f_linear_jet(&pd, &v, &js)).value();
    let theta = density(&pd, &js).value();
    if theta < THETA_MIN {
        if num.abs() <= 1e-12 {
            return Ok(0.0);
        }
        return Err(Error::Singular(format!("Θ = {:.3e} at {:?} inside the support of V", theta, p)));
    }
    Ok(num / theta * pd.sqrt_det_mu().value())
}

/// `d/dt A_d(Φ_t)|₀ = ∫ (div^d V + f(V))/Θ dμ`.
pub fn first_variation(man: &Manifold, imm: &Immersion, field: &VariationField, grid: &QuadratureGrid, d: u32) -> Result<f64> {
    grid.integrate(|p| {
        if let Some(s) = &field.support {
            if p.iter().zip(s).any(|(x, (a, b))| x < a || x > b) {
                return Ok(0.0);
            }
        }
        first_variation_integrand(man, imm, field, p, d)
    })
}

/// The three groups of `H_d`, one jet per normal `N_{m+1}, …, N_n`.
#[derive(Clone, Debug)]
pub struct MeanCurvatureJets {
    pub h1: Vec<Jet>,
    pub h2: Vec<Jet>,
    pub h3: Vec<Jet>,
}

impl MeanCurvatureJets {
    pub fn total(&self) -> Vec<Jet> {
        self.h1.iter().zip(&self.h2).zip(&self.h3).map(|((a, b), c)| a.clone() + b.clone() + c.clone()).collect()
    }
}

/// `ξ_ij = ⟨E_1∧…∧N_j∧…∧E_m, (E_1∧…∧E_m)_d⟩/Θ` with `N_j` in slot `i`.
fn xi(pd: &PointData, normal: &[Jet], i: usize, js: &[MultiIndex], taus: &[Jet], inv_theta: &Jet) -> Jet {
    sum(pd, js.iter().zip(taus).map(|(j, t)| pd.replaced_minor(j, i, normal) * t.clone())) * inv_theta.clone()
}

/// `H_d` on the normal frame. Needs jets of order ≥ 2 with ambient variables.
pub fn mean_curvature_jets(pd: &PointData, nf: &NormalFrame, d: u32) -> Result<MeanCurvatureJets> {
    let js = degree_d_indices(pd, d);
    let theta = density(pd, &js);
    if theta.value() < THETA_MIN {
        return Err(Error::Singular(format!("Θ vanishes at {:?}", pd.pbar)));
    }
    let inv = theta.recip();
    let taus: Vec<Jet> = js.iter().map(|j| pd.tau_jet(j)).collect();
    let div_e: Vec<Jet> = (0..pd.m).map(|i| pd.div_m(&column(&pd.ecoef, i))).collect();
    let (mut h1, mut h2, mut h3) = (Vec::new(), Vec::new(), Vec::new());
    for nj in &nf.normals {
        let mut a = pd.zero();
        let mut b = pd.zero();
        for i in 0..pd.m {
            let x = xi(pd, nj, i, &js, &taus, &inv);
            a = a - (pd.e_deriv(i, &x) + x * div_e[i].clone());
            let nab = pd.nabla_e(i, nj);
            b = b + sum(pd, js.iter().zip(&taus).map(|(j, t)| pd.replaced_minor(j, i, &nab) * t.clone()));
        }
        h1.push(a);
        h2.push(b * inv.clone());
        h3.push(f_linear_jet(pd, nj, &js) * inv.clone());
    }
    Ok(MeanCurvatureJets { h1, h2, h3 })
}

/// Components of `H_d` split by an invertible column selection of `A⊥`.
#[derive(Clone, Debug, Serialize)]
pub struct HSplit {
    /// Columns of `A⊥` forming `Â⊥`.
    pub pivot: Vec<usize>,
    pub h: Vec<f64>,
    pub iota: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanCurvatureAtPoint {
    pub point: Vec<f64>,
    pub d: u32,
    /// `H_d^j` for the normals `N_{m+1}, …, N_n`.
    pub h: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub h3: Vec<f64>,
    pub layers: Vec<u32>,
    pub k: usize,
    /// Absent when the point is not strongly regular.
    pub split: Option<HSplit>,
}

/// Best-conditioned choice of `ℓ` columns of the `ℓ×k` matrix `a`.
pub fn choose_pivot(a: &Mat<f64>, k: usize) -> Option<Vec<usize>> {
    let ell = a.len();
    if ell == 0 {
        return Some(Vec::new());
    }
    let (rank, sv) = numeric_rank(a);
    if rank < ell {
        return None;
    }
    let tol = 1e-8 * sv[0].max(1.0);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for cols in all_indices(k, ell) {
        let sub: Mat<f64> = a.iter().map(|r| cols.indices().iter().map(|&c| r[c]).collect()).collect();
        let smin = *linalg::singular_values(&sub).last().unwrap();
        if smin > tol && best.as_ref().map_or(true, |(s, _)| smin > *s) {
            best = Some((smin, cols.indices().to_vec()));
        }
    }
    best.map(|(_, c)| c)
}

/// `A⊥` at the point, as an `ℓ×k` matrix of values.
fn a_perp(pd: &PointData, nf: &NormalFrame, basis: &[MultiIndex]) -> Mat<f64> {
    let fc = field_coefficients(pd, basis, &nf.normals[..nf.k]);
    fc.beta
}

pub fn mean_curvature(man: &Manifold, imm: &Immersion, p: &[f64], d: u32) -> Result<MeanCurvatureAtPoint> {
    let pd = orthonormal_point(man, imm, p, 2)?;
    let nf = pd.normal_frame()?;
    let mj = mean_curvature_jets(&pd, &nf, d)?;
    let vals = |v: &[Jet]| v.iter().map(|x| x.value()).collect::<Vec<f64>>();
    let h = vals(&mj.total());
    let basis = higher_degree_basis(man, pd.m, d);
    let a = a_perp(&pd, &nf, &basis);
    let split = choose_pivot(&a, nf.k).map(|pivot| HSplit {
        h: pivot.iter().map(|&c| h[c]).collect(),
        iota: (0..nf.k).filter(|c| !pivot.contains(c)).map(|c| h[c]).collect(),
        v: h[nf.k..].to_vec(),
        pivot,
    });
    Ok(MeanCurvatureAtPoint {
        point: p.to_vec(),
        d,
        h1: vals(&mj.h1),
        h2: vals(&mj.h2),
        h3: vals(&mj.h3),
        h,
        layers: nf.layers.clone(),
        k: nf.k,
        split,
    })
}

/// `H_d` through Lie brackets of an orthonormal extension of `E` and `N`:
/// `H^j = div_M(Θ N_j − Σ_i ξ_ij E_i) + N_j(Θ) + Σ_{i,k} ξ_ik ⟨[E_i, N_j], N_k⟩`.
///
/// The frames are extended off `M` as functions of the ambient coordinates and
/// re-orthonormalized with the metric at each nearby point. Only graphs are
/// supported.
pub fn mean_curvature_bracket(man: &Manifold, imm: &Immersion, p: &[f64], d: u32) -> Result<Vec<f64>> {
    let gc = imm.graph_coords().ok_or_else(|| Error::Invalid("bracket form needs a graph immersion".into()))?;
    let pe = PointData::new_extension(man, imm, p, &TangentBasis::Orthonormal, 2, &gc)?;
    let nf = pe.normal_frame()?;
    let (n, m) = (pe.n, pe.m);
    let q = n - m;
    let x0 = imm.eval(p);
    let z: Vec<Jet> = (0..n).map(|l| Jet::variable(&pe.layout, l, x0[l])).collect();
    let amb = man.ambient_at(&z)?;
    let vars: Vec<usize> = (0..n).collect();
    let gamma = manifold::christoffel_jets(&amb.g, &vars)?;
    let mut raw: Mat<Jet> = (0..m).map(|i| pe.to_coords(&column(&pe.ecoef, i))).collect();
    raw.extend(nf.normals.iter().map(|nj| pe.to_coords(nj)));
    let (frame, _) = manifold::gram_schmidt(&raw, &amb.g)?;
    let (e, nn) = frame.split_at(m);
    let zero = Jet::constant(&pe.layout, 0.0);
    let along = |v: &[Jet], f: &Jet| v.iter().enumerate().fold(zero.clone(), |s, (l, c)| s + c.clone() * f.partial(l));
    let inner = |a: &[Jet], b: &[Jet]| {
        let gb: Vec<Jet> = amb.g.iter().map(|r| linalg::dot(r, b)).collect();
        linalg::dot(a, &gb)
    };
    let nabla = |v: &[Jet], w: &[Jet]| -> Vec<Jet> {
        (0..n)
            .map(|l| {
                let mut s = along(v, &w[l]);
                for a in 0..n {
                    for b in 0..n {
                        s = s + gamma[l][a][b].clone() * v[a].clone() * w[b].clone();
                    }
                }
                s
            })
            .collect()
    };
    let div_m = |w: &[Jet]| (0..m).fold(zero.clone(), |s, k| s + inner(&nabla(&e[k], w), &e[k]));
    let ycoef = |v: &[Jet]| -> Vec<Jet> { (0..n).map(|i| linalg::dot(&amb.ycov[i], v)).collect() };
    let tmat: Mat<Jet> = {
        let cols: Vec<Vec<Jet>> = e.iter().map(|v| ycoef(v)).collect();
        (0..n).map(|i| (0..m).map(|a| cols[a][i].clone()).collect()).collect()
    };
    let js = degree_d_indices(&pe, d);
    let taus: Vec<Jet> = js.iter().map(|j| minor(&tmat, j)).collect();
    let theta = taus.iter().fold(zero.clone(), |s, t| s + t.clone() * t.clone()).sqrt();
    if theta.value() < THETA_MIN {
        return Err(Error::Singular(format!("Θ vanishes at {:?}", p)));
    }
    let inv = theta.recip();
    // ξ[i][j]
    let xi: Vec<Vec<Jet>> = (0..m)
        .map(|i| {
            (0..q)
                .map(|j| {
                    let mut mat = tmat.clone();
                    let nj = ycoef(&nn[j]);
                    for (r, row) in mat.iter_mut().enumerate() {
                        row[i] = nj[r].clone();
                    }
                    js.iter().zip(&taus).fold(zero.clone(), |s, (jj, t)| s + minor(&mat, jj) * t.clone()) * inv.clone()
                })
                .collect()
        })
        .collect();
    let bracket = |a: &[Jet], b: &[Jet]| -> Vec<Jet> { (0..n).map(|l| along(a, &b[l]) - along(b, &a[l])).collect() };
    let mut out = Vec::with_capacity(q);
    for j in 0..q {
        let w: Vec<Jet> = (0..n)
            .map(|l| (0..m).fold(theta.clone() * nn[j][l].clone(), |s, i| s - xi[i][j].clone() * e[i][l].clone()))
            .collect();
        let mut h = div_m(&w) + along(&nn[j], &theta);
        for i in 0..m {
            let br = bracket(&e[i], &nn[j]);
            for k in 0..q {
                h = h + xi[i][k].clone() * inner(&br, &nn[k]);
            }
        }
        out.push(h.value());
    }
    Ok(out)
}

/// `∫⟨V, H_d⟩ dμ`.
pub fn mean_curvature_pairing(
    man: &Manifold,
    imm: &Immersion,
    field: &VariationField,
    grid: &QuadratureGrid,
    d: u32,
) -> Result<f64> {
    grid.integrate(|p| {
        if let Some(s) = &field.support {
            if p.iter().zip(s).any(|(x, (a, b))| x < a || x > b) {
                return Ok(0.0);
            }
        }
        let pd = orthonormal_point(man, imm, p, 2)?;
        let nf = pd.normal_frame()?;
        let v = field.y_coefficients(&pd, Some(&nf))?;
        let h = mean_curvature_jets(&pd, &nf, d)?.total();
        let s: f64 = nf.normals.iter().zip(&h).map(|(nj, hj)| linalg::dot(nj, &v).value() * hj.value()).sum();
        Ok(s * pd.sqrt_det_mu().value())
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalResiduals {
    pub point: Vec<f64>,
    pub pivot: Vec<usize>,
    /// `H^ι − H^h Â⁻¹ Ã`.
    pub r1: Vec<f64>,
    /// `H^v − H^h Â⁻¹ B⊥ − Σ_j E_j*(H^h Â⁻¹ C⊥_j)`.
    pub r2: Vec<f64>,
}

/// Critical-point residuals for given normal components `h` of a mean-curvature
/// vector (jets of order ≥ 1) and a pivot of `A⊥`.
///
/// `pd` needs jets of order ≥ 3 so the system coefficients can be differentiated.
pub fn critical_residuals_with(
    pd: &PointData,
    nf: &NormalFrame,
    basis: &[MultiIndex],
    h: &[Jet],
    pivot: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (k, q, ell) = (nf.k, pd.n - pd.m, basis.len());
    if h.len() != q {
        return Err(Error::Dimension(format!("{} mean-curvature components, expected {}", h.len(), q)));
    }
    if pivot.len() != ell || pivot.iter().any(|&c| c >= k) {
        return Err(Error::Invalid(format!("pivot must pick {} of the first {} normal columns", ell, k)));
    }
    let fc = field_coefficient_jets(pd, basis, &nf.normals);
    let ahat: Mat<Jet> = (0..ell).map(|i| pivot.iter().map(|&c| fc.beta[i][c].clone()).collect()).collect();
    let inv = if ell == 0 {
        Vec::new()
    } else {
        linalg::inverse(&ahat).ok_or_else(|| Error::Singular("selected columns of A⊥ are not invertible".into()))?
    };
    // λ = H^h Â⁻¹
    let lam: Vec<Jet> = (0..ell).map(|i| sum(pd, (0..ell).map(|a| h[pivot[a]].clone() * inv[a][i].clone()))).collect();
    let proj = |c: usize| sum(pd, (0..ell).map(|i| lam[i].clone() * fc.beta[i][c].clone()));
    let r1 = (0..k).filter(|c| !pivot.contains(c)).map(|c| (h[c].clone() - proj(c)).value()).collect();
    let div_e: Vec<Jet> = (0..pd.m).map(|j| pd.div_m(&column(&pd.ecoef, j))).collect();
    let r2 = (k..q)
        .map(|c| {
            let mut r = h[c].clone() - proj(c);
            for j in 0..pd.m {
                let u = sum(pd, (0..ell).map(|i| lam[i].clone() * fc.c[i][j][c].clone()));
                // −E_j*(u) = E_j(u) + div_M(E_j) u
                r = r + pd.e_deriv(j, &u) + div_e[j].clone() * u;
            }
            r.value()
        })
        .collect();
    Ok((r1, r2))
}

pub fn critical_residuals(
    man: &Manifold,
    imm: &Immersion,
    p: &[f64],
    d: u32,
    pivot: Option<&[usize]>,
) -> Result<CriticalResiduals> {
    let pd = orthonormal_point(man, imm, p, 3)?;
    let nf = pd.normal_frame()?;
    let basis = higher_degree_basis(man, pd.m, d);
    let a = a_perp(&pd, &nf, &basis);
    let (rank, _) = if a.is_empty() { (0, Vec::new()) } else { numeric_rank(&a) };
    if rank < basis.len() {
        return Err(Error::NotStronglyRegular { rank, ell: basis.len() });
    }
    let pivot = match pivot {
        Some(p) => p.to_vec(),
        None => choose_pivot(&a, nf.k).ok_or(Error::NotStronglyRegular { rank, ell: basis.len() })?,
    };
    let h = mean_curvature_jets(&pd, &nf, d)?.total();
    let (r1, r2) = critical_residuals_with(&pd, &nf, &basis, &h, &pivot)?;
    Ok(CriticalResiduals { point: p.to_vec(), pivot, r1, r2 })
}
