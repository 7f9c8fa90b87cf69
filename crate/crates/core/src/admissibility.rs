//! First-order admissibility systems for variations of fixed degree.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exprcore::{Expr, Scalar};
use crate::geom::{column, unit, values, NormalFrame, PointData, TangentBasis};
use crate::immersion::Immersion;
use crate::jet::Jet;
use crate::linalg::{self, Mat};
use crate::manifold::Manifold;
use crate::multivector::{all_indices, degree_of_index, dim_gt, minor, MultiIndex};

/// Jet order used for assembling systems: normals need one derivative.
const ORDER: usize = 2;

#[derive(Clone, Debug, Serialize)]
pub struct SystemShape {
    pub d: u32,
    pub ell: usize,
    pub iota0: usize,
    pub rho: usize,
    pub k: usize,
    /// `J_1 < … < J_ℓ` in lexicographic order, all of degree `> d`.
    pub basis: Vec<MultiIndex>,
}

/// Multi-indices of degree above `d`, lexicographically ordered.
pub fn higher_degree_basis(man: &Manifold, m: usize, d: u32) -> Vec<MultiIndex> {
    all_indices(man.n(), m).into_iter().filter(|j| degree_of_index(j, man.weights()) > d).collect()
}

pub fn system_shape(man: &Manifold, imm: &Immersion, points: &[Vec<f64>], d: u32) -> Result<SystemShape> {
    if points.is_empty() {
        return Err(Error::Invalid("no sample points".into()));
    }
    let m = imm.m();
    let mut iota0 = 0;
    let mut flags = Vec::new();
    for p in points {
        let pd = PointData::new(man, imm, p, &TangentBasis::Orthonormal, 1, false)?;
        let mt = pd.tangent_flag();
        let i0 = (1..=mt.len()).find(|&a| mt[a - 1] > 0).unwrap_or(mt.len());
        iota0 = iota0.max(i0);
        flags.push(mt);
    }
    let growth = man.growth();
    let rho = growth.n_at(iota0);
    let mt = flags[0][iota0 - 1];
    if flags.iter().any(|f| f[iota0 - 1] != mt) {
        return Err(Error::Invalid(format!("m̃_{} varies over the sample points", iota0)));
    }
    let basis = higher_degree_basis(man, m, d);
    let ell = basis.len();
    debug_assert_eq!(ell as u128, dim_gt(&growth, m, d as usize));
    Ok(SystemShape { d, ell, iota0, rho, k: rho - mt, basis })
}

/// Coefficients of the admissibility operator on a family of fields `W_h`.
///
/// For `V = Σ_h f_h W_h` the residual is `Σ_h β_ih f_h + Σ_{j,h} c_ijh E_j(f_h)`.
#[derive(Clone, Debug, Serialize)]
pub struct FieldCoefficients {
    /// `c[i][j][h]`.
    pub c: Vec<Mat<f64>>,
    /// `beta[i][h]`.
    pub beta: Mat<f64>,
}

/// `R_i(W) = ⟨e∧, ∇_W X_{J_i}⟩ + Σ_j ⟨e_1∧…∇_{e_j}W…∧e_m, X_{J_i}⟩`.
fn admissibility_jet(pd: &PointData, jidx: &MultiIndex, w: &[Jet]) -> Jet {
    let mut r = pd.tau_nabla_yj(w, jidx);
    for j in 0..pd.m {
        r = r + pd.replaced_minor(jidx, j, &pd.nabla_e(j, w));
    }
    r
}

/// [`FieldCoefficients`] as jets, for operators that differentiate them.
#[derive(Clone, Debug)]
pub struct FieldCoefficientJets {
    pub c: Vec<Mat<Jet>>,
    pub beta: Mat<Jet>,
}

impl FieldCoefficientJets {
    pub fn values(&self) -> FieldCoefficients {
        FieldCoefficients { c: self.c.iter().map(values).collect(), beta: values(&self.beta) }
    }
}

pub fn field_coefficient_jets(pd: &PointData, basis: &[MultiIndex], fields: &[Vec<Jet>]) -> FieldCoefficientJets {
    let c = basis
        .iter()
        .map(|jidx| (0..pd.m).map(|j| fields.iter().map(|w| pd.replaced_minor(jidx, j, w)).collect()).collect())
        .collect();
    let beta = basis.iter().map(|jidx| fields.iter().map(|w| admissibility_jet(pd, jidx, w)).collect()).collect();
    FieldCoefficientJets { c, beta }
}

pub fn field_coefficients(pd: &PointData, basis: &[MultiIndex], fields: &[Vec<Jet>]) -> FieldCoefficients {
    field_coefficient_jets(pd, basis, fields).values()
}

/// Adapted-frame system `Σ_j C_j E_j(F) + B F + A G = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilitySystem {
    pub point: Vec<f64>,
    pub rho: usize,
    /// ℓ×ρ.
    pub a: Mat<f64>,
    /// ℓ×(n−ρ).
    pub b: Mat<f64>,
    /// `c[j]` is ℓ×(n−ρ).
    pub c: Vec<Mat<f64>>,
    pub full: FieldCoefficients,
}

fn cols(m: &Mat<f64>, r: std::ops::Range<usize>) -> Mat<f64> {
    m.iter().map(|row| row[r.clone()].to_vec()).collect()
}

/// `c[i][j][h]` → per-`j` matrices restricted to columns `r`.
fn c_blocks(c: &[Mat<f64>], m: usize, r: std::ops::Range<usize>) -> Vec<Mat<f64>> {
    (0..m).map(|j| c.iter().map(|ci| ci[j][r.clone()].to_vec()).collect()).collect()
}

pub fn point_data(man: &Manifold, imm: &Immersion, p: &[f64], basis: &TangentBasis) -> Result<PointData> {
    PointData::new(man, imm, p, basis, ORDER, true)
}

pub fn assemble_adapted(pd: &PointData, shape: &SystemShape) -> AdmissibilitySystem {
    let n = pd.n;
    let fields: Vec<Vec<Jet>> = (0..n).map(|h| unit(pd, h, n)).collect();
    let full = field_coefficients(pd, &shape.basis, &fields);
    let rho = shape.rho;
    AdmissibilitySystem {
        point: pd.pbar.clone(),
        rho,
        a: cols(&full.beta, 0..rho),
        b: cols(&full.beta, rho..n),
        c: c_blocks(&full.c, pd.m, rho..n),
        full,
    }
}

/// Tangent/normal system `Σ_j C⊥_j E_j(ψ) + B⊥ψ + A⊥φ = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct NormalAdmissibilitySystem {
    pub point: Vec<f64>,
    pub k: usize,
    /// Layer of each normal direction.
    pub layers: Vec<u32>,
    /// ℓ×k.
    pub a: Mat<f64>,
    /// ℓ×(n−m−k).
    pub b: Mat<f64>,
    pub c: Vec<Mat<f64>>,
    /// Coefficients on the normals `N_1, …, N_{n−m}`.
    pub normal: FieldCoefficients,
    /// Coefficients on the tangent fields `E_1, …, E_m`; they vanish identically.
    pub tangent: FieldCoefficients,
}

pub fn assemble_normal(pd: &PointData, shape: &SystemShape) -> Result<NormalAdmissibilitySystem> {
    let nf = pd.normal_frame()?;
    Ok(assemble_normal_with(pd, shape, &nf))
}

pub fn assemble_normal_with(pd: &PointData, shape: &SystemShape, nf: &NormalFrame) -> NormalAdmissibilitySystem {
    let normal = field_coefficients(pd, &shape.basis, &nf.normals);
    let tfields: Vec<Vec<Jet>> = (0..pd.m).map(|j| column(&pd.ecoef, j)).collect();
    let tangent = field_coefficients(pd, &shape.basis, &tfields);
    let k = nf.k;
    let q = pd.n - pd.m;
    NormalAdmissibilitySystem {
        point: pd.pbar.clone(),
        k,
        layers: nf.layers.clone(),
        a: cols(&normal.beta, 0..k),
        b: cols(&normal.beta, k..q),
        c: c_blocks(&normal.c, pd.m, k..q),
        normal,
        tangent,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFrame {
    /// Coefficients on the orthonormal adapted frame `Y_1, …, Y_n`.
    Adapted,
    /// Coefficients on `E_1, …, E_m, N_1, …, N_{n−m}`.
    Normal,
    /// Coefficients on the coordinate fields `∂_1, …, ∂_n`.
    Coordinates,
}

/// Variation field along the immersion, components given over the parameters.
#[derive(Clone, Debug)]
pub struct VariationField {
    pub frame: FieldFrame,
    pub components: Vec<Expr>,
    pub support: Option<Vec<(f64, f64)>>,
}

impl VariationField {
    pub fn new(frame: FieldFrame, components: Vec<Expr>) -> VariationField {
        VariationField { frame, components, support: None }
    }

    pub fn parse(frame: FieldFrame, components: &[&str], params: &[&str]) -> Result<VariationField> {
        let c = components.iter().map(|s| crate::exprcore::parse(s, params)).collect::<Result<Vec<_>>>()?;
        Ok(VariationField::new(frame, c))
    }

    /// Coefficient jets of the field in the declared frame.
    pub fn component_jets(&self, pd: &PointData) -> Result<Vec<Jet>> {
        if self.components.len() != pd.n {
            return Err(Error::Dimension(format!("field has {} components, expected {}", self.components.len(), pd.n)));
        }
        Ok(pd.eval_param_exprs(&self.components))
    }

    /// `Y` coefficients of the field.
    pub fn y_coefficients(&self, pd: &PointData, nf: Option<&NormalFrame>) -> Result<Vec<Jet>> {
        let f = self.component_jets(pd)?;
        Ok(match self.frame {
            FieldFrame::Adapted => f,
            FieldFrame::Coordinates => pd.from_coords(&f),
            FieldFrame::Normal => {
                let owned;
                let nf = match nf {
                    Some(nf) => nf,
                    None => {
                        owned = pd.normal_frame()?;
                        &owned
                    }
                };
                let mut v: Vec<Jet> = vec![pd.zero(); pd.n];
                for j in 0..pd.m {
                    let e = column(&pd.ecoef, j);
                    v = v.into_iter().zip(e).map(|(a, b)| a + f[j].clone() * b).collect();
                }
                for (r, nr) in nf.normals.iter().enumerate() {
                    v = v.into_iter().zip(nr).map(|(a, b)| a + f[pd.m + r].clone() * b.clone()).collect();
                }
                v
            }
        })
    }
}

/// Residual evaluated directly from the derivative of the tangent m-vector.
pub fn residual_direct(pd: &PointData, shape: &SystemShape, v: &[Jet]) -> Vec<f64> {
    shape.basis.iter().map(|j| admissibility_jet(pd, j, v).value()).collect()
}

/// `Σ_h β_ih f_h + Σ_{j,h} c_ijh E_j(f_h)` for given coefficient jets.
pub fn residual_from_coefficients(pd: &PointData, fc: &FieldCoefficients, f: &[Jet]) -> Vec<f64> {
    let ef: Vec<Vec<f64>> = (0..pd.m).map(|j| f.iter().map(|x| pd.e_deriv(j, x).value()).collect()).collect();
    fc.beta
        .iter()
        .zip(&fc.c)
        .map(|(b, c)| {
            let mut s = 0.0;
            for (h, fh) in f.iter().enumerate() {
                s += b[h] * fh.value();
                for j in 0..pd.m {
                    s += c[j][h] * ef[j][h];
                }
            }
            s
        })
        .collect()
}

/// Residual of the adapted system for a field, via `A`, `B`, `C_j`.
pub fn residual(pd: &PointData, system: &AdmissibilitySystem, field: &VariationField) -> Result<Vec<f64>> {
    let f = match field.frame {
        FieldFrame::Adapted => field.component_jets(pd)?,
        _ => field.y_coefficients(pd, None)?,
    };
    let rho = system.rho;
    let ell = system.a.len();
    let ef: Vec<Vec<f64>> = (0..pd.m).map(|j| f[rho..].iter().map(|x| pd.e_deriv(j, x).value()).collect()).collect();
    Ok((0..ell)
        .map(|i| {
            let mut s = 0.0;
            for h in 0..rho {
                s += system.a[i][h] * f[h].value();
            }
            for r in 0..pd.n - rho {
                s += system.b[i][r] * f[rho + r].value();
                for j in 0..pd.m {
                    s += system.c[j][i][r] * ef[j][r];
                }
            }
            s
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct Regularity {
    pub point: Vec<f64>,
    pub flag: bool,
    pub rank: usize,
    pub ell: usize,
    pub singular_values: Vec<f64>,
}

/// Numerical rank with tolerance `RANK_RTOL·max(1, σ_max)`.
pub fn numeric_rank(m: &Mat<f64>) -> (usize, Vec<f64>) {
    if m.is_empty() || m[0].is_empty() {
        return (0, Vec::new());
    }
    let sv = linalg::singular_values(m);
    let tol = linalg::RANK_RTOL * sv.first().copied().unwrap_or(0.0).max(1.0);
    (sv.iter().filter(|&&s| s > tol).count(), sv)
}

pub fn is_strongly_regular(system: &AdmissibilitySystem) -> Regularity {
    let ell = system.a.len();
    if ell == 0 {
        return Regularity { point: system.point.clone(), flag: true, rank: 0, ell, singular_values: Vec::new() };
    }
    let (rank, sv) = numeric_rank(&system.a);
    Regularity { point: system.point.clone(), flag: system.rho >= ell && rank == ell, rank, ell, singular_values: sv }
}

/// `(V⊤, V⊥)` as `Y` coefficients, split orthogonally along the tangent space.
pub fn split_tangent_normal(pd: &PointData, v: &[Jet]) -> Result<(Vec<Jet>, Vec<Jet>)> {
    let m = pd.m;
    // solve μ_E c = (⟨V, E_j⟩)_j for the tangent part
    let gram: Mat<Jet> =
        (0..m).map(|a| (0..m).map(|b| linalg::dot(&column(&pd.ecoef, a), &column(&pd.ecoef, b))).collect()).collect();
    let rhs: Mat<Jet> = (0..m).map(|a| vec![linalg::dot(&column(&pd.ecoef, a), v)]).collect();
    let c = linalg::solve(&gram, &rhs).ok_or_else(|| Error::Singular("tangent Gram matrix".into()))?;
    let mut t = vec![pd.zero(); pd.n];
    for j in 0..m {
        t = t.into_iter().zip(column(&pd.ecoef, j)).map(|(a, e)| a + c[j][0].clone() * e).collect();
    }
    let nrm = v.iter().zip(&t).map(|(a, b)| a.clone() - b.clone()).collect();
    Ok((t, nrm))
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricChangeReport {
    pub point: Vec<f64>,
    /// `max |R̃ − Λ_v^{-1} R|`.
    pub residual_error: f64,
    pub a_error: f64,
    pub b_error: f64,
    pub c_error: f64,
    pub rank: usize,
    pub rank_tilde: usize,
    /// `D` is block upper triangular with respect to the weights.
    pub adapted_change: bool,
}

/// Compare the systems of two metrics on the same manifold at one point.
///
/// Both use the coordinate tangent basis so that the tangent m-vector is common.
pub fn metric_change_check(
    man: &Manifold,
    man_t: &Manifold,
    imm: &Immersion,
    p: &[f64],
    shape: &SystemShape,
    field: &VariationField,
) -> Result<MetricChangeReport> {
    let basis = TangentBasis::Coordinate;
    let pd = point_data(man, imm, p, &basis)?;
    let pt = point_data(man_t, imm, p, &basis)?;
    let n = pd.n;
    let rho = shape.rho;
    // D[i][h] = Y-coefficient i of Ỹ_h
    let d: Mat<Jet> = (0..n).map(|i| (0..n).map(|h| linalg::dot(&pd.amb.ycov[i], &pt.amb.y[h])).collect()).collect();
    let dv = values(&d);
    let w = man.weights();
    let adapted_change = (0..n).all(|i| (0..n).all(|h| w.get(i) <= w.get(h) || dv[i][h].abs() < 1e-10));
    // Λ_v[J][K] = minor of D with rows J and columns K
    let lam: Mat<f64> = shape
        .basis
        .iter()
        .map(|jj| {
            shape
                .basis
                .iter()
                .map(|kk| {
                    let sub: Mat<f64> = dv.iter().map(|row| kk.indices().iter().map(|&c| row[c]).collect()).collect();
                    minor(&sub, jj)
                })
                .collect()
        })
        .collect();
    let lam_inv = linalg::inverse(&lam).ok_or_else(|| Error::Singular("Λ_v is singular".into()))?;
    let v = field.y_coefficients(&pd, None)?;
    let vt = match field.frame {
        FieldFrame::Adapted => {
            return Err(Error::Invalid("metric change check needs a coordinate or normal-frame field".into()))
        }
        _ => field.y_coefficients(&pt, None)?,
    };
    let r = residual_direct(&pd, shape, &v);
    let rt = residual_direct(&pt, shape, &vt);
    let mv = |m: &Mat<f64>, x: &[f64]| -> Vec<f64> { m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect() };
    let pred = mv(&lam_inv, &r);
    let residual_error = rt.iter().zip(&pred).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let s = assemble_adapted(&pd, shape);
    let st = assemble_adapted(&pt, shape);
    let block = |r0: std::ops::Range<usize>, c0: std::ops::Range<usize>| -> Mat<f64> {
        dv[r0].iter().map(|row| row[c0.clone()].to_vec()).collect()
    };
    let dhh = block(0..rho, 0..rho);
    let dhv = block(0..rho, rho..n);
    let dvv = block(rho..n, rho..n);
    let maxdiff = |a: &Mat<f64>, b: &Mat<f64>| -> f64 {
        a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let a_pred = linalg::matmul(&lam_inv, &linalg::matmul(&s.a, &dhh));
    let mut c_error: f64 = 0.0;
    let mut b_pred = linalg::matmul(&s.a, &dhv);
    let bd = linalg::matmul(&s.b, &dvv);
    for (x, y) in b_pred.iter_mut().flatten().zip(bd.iter().flatten()) {
        *x += y;
    }
    for j in 0..pd.m {
        c_error = c_error.max(maxdiff(&st.c[j], &linalg::matmul(&lam_inv, &linalg::matmul(&s.c[j], &dvv))));
        let ed: Mat<f64> = d[rho..n].iter().map(|row| row[rho..n].iter().map(|x| pd.e_deriv(j, x).value()).collect()).collect();
        let t = linalg::matmul(&s.c[j], &ed);
        for (x, y) in b_pred.iter_mut().flatten().zip(t.iter().flatten()) {
            *x += y;
        }
    }
    let b_pred = linalg::matmul(&lam_inv, &b_pred);
    Ok(MetricChangeReport {
        point: p.to_vec(),
        residual_error,
        a_error: maxdiff(&st.a, &a_pred),
        b_error: maxdiff(&st.b, &b_pred),
        c_error,
        rank: numeric_rank(&s.a).0,
        rank_tilde: numeric_rank(&st.a).0,
        adapted_change,
    })
}

/// `β` from brackets of coordinate extensions of the tangent fields.
#[derive(Clone, Debug, Serialize)]
pub struct BracketBeta {
    /// `Σ_j ⟨e_1∧…[E_j, X_h]…∧e_m, X_{J_i}⟩`.
    pub bracket: Mat<f64>,
    /// `X_h(⟨E∧, X_{J_i}⟩)` for the extension; zero when the extension keeps the degree.
    pub drift: Mat<f64>,
}

/// Bracket form of `β` for graph immersions, extending `E_j` constantly along the
/// coordinates that are not graph parameters.
///
/// Metric compatibility gives `∇-form = bracket + drift` exactly.
pub fn bracket_beta(
    man: &Manifold,
    imm: &Immersion,
    p: &[f64],
    basis: &TangentBasis,
    shape: &SystemShape,
) -> Result<BracketBeta> {
    let gc = imm.graph_coords().ok_or_else(|| Error::Invalid("immersion is not a coordinate graph".into()))?;
    let pd = PointData::new_extension(man, imm, p, basis, 2, &gc)?;
    let n = pd.n;
    let m = pd.m;
    let xbar = imm.eval(p);
    let z: Vec<Jet> = (0..n).map(|l| Jet::variable(&pd.layout, l, xbar[l])).collect();
    let amb = man.ambient_at(&z)?;
    // E_j in coordinates, constant along the complementary directions
    let ecoords: Vec<Vec<Jet>> = (0..m).map(|j| pd.to_coords(&column(&pd.ecoef, j))).collect();
    // Y-coefficients of E_j in the frame at z
    let ez: Mat<Jet> = (0..n).map(|i| (0..m).map(|j| linalg::dot(&amb.ycov[i], &ecoords[j])).collect()).collect();
    let along = |w: &[Jet], f: &Jet| -> Jet {
        let mut s = w[0].clone() * f.partial(0);
        for l in 1..n {
            s = s + w[l].clone() * f.partial(l);
        }
        s
    };
    let mut bracket = vec![vec![0.0; n]; shape.ell];
    let mut drift = vec![vec![0.0; n]; shape.ell];
    for (i, jidx) in shape.basis.iter().enumerate() {
        let tau = minor(&ez, jidx);
        for h in 0..n {
            let xh = &amb.y[h];
            drift[i][h] = along(xh, &tau).value();
            let mut s = 0.0;
            for j in 0..m {
                let br: Vec<Jet> = (0..n).map(|k| along(&ecoords[j], &xh[k]) - along(xh, &ecoords[j][k])).collect();
                let brc: Vec<Jet> = (0..n).map(|r| linalg::dot(&amb.ycov[r], &br)).collect();
                let mut mat = ez.clone();
                for (r, row) in mat.iter_mut().enumerate() {
                    row[j] = brc[r].clone();
                }
                s += minor(&mat, jidx).value();
            }
            bracket[i][h] = s;
        }
    }
    Ok(BracketBeta { bracket, drift })
}

/// Whether `c_ijh` vanishes for all `i, j`, for each column `h`.
pub fn zero_c_columns(system: &AdmissibilitySystem, tol: f64) -> Vec<bool> {
    let n = system.full.beta.first().map(|r| r.len()).unwrap_or(0);
    (0..n).map(|h| system.full.c.iter().all(|ci| ci.iter().all(|row| row[h].abs() <= tol))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::builtin;

    fn entry(spec: &str) -> (Manifold, Immersion) {
        let e = builtin(spec).unwrap();
        (e.manifold, e.immersion.unwrap())
    }

    fn engel_basis(theta: &str) -> TangentBasis {
        let t = crate::exprcore::parse(theta, &["x", "y"]).unwrap();
        TangentBasis::Fields {
            coeffs: vec![vec![t.cos(), t.sin()], vec![-t.sin(), t.cos()]],
            orthonormalize: false,
        }
    }

    fn close(a: &Mat<f64>, b: &Mat<f64>, tol: f64) -> bool {
        a.len() == b.len() && a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn engel_graph_matrices() {
        let th = "0.7*x^2 + 0.4*y - 0.3*x*y";
        let (man, imm) = entry(&format!("engel-graph:theta={}", th));
        let t = crate::exprcore::parse(th, &["x", "y"]).unwrap();
        let kappa = crate::catalog::engel_kappa(&t);
        // X̄₁ = cosθ∂x + sinθ∂y and X̄₄ = −sinθ∂x + cosθ∂y on graph functions
        let x1 = |f: &Expr| t.cos().mul_expr(&f.diff(0)).add_expr(&t.sin().mul_expr(&f.diff(1)));
        let x4 = |f: &Expr| t.cos().mul_expr(&f.diff(1)).sub_expr(&t.sin().mul_expr(&f.diff(0)));
        let shape = system_shape(&man, &imm, &[vec![0.3, 0.6]], 4).unwrap();
        assert_eq!((shape.iota0, shape.rho, shape.ell, shape.k), (1, 2, 1, 1));
        for p in [[0.3, 0.6], [0.8, 0.1], [0.55, 0.9]] {
            let pd = point_data(&man, &imm, &p, &engel_basis(th)).unwrap();
            let s = assemble_adapted(&pd, &shape);
            let k = kappa.eval(&p);
            let x1k = x1(&kappa).eval(&p);
            let x4t = x4(&t).eval(&p);
            assert!(close(&s.a, &vec![vec![-x1k, 1.0]], 1e-8), "{:?}", s.a);
            // the bracket expansion gives +X₄θ in the f₃ slot
            assert!(close(&s.b, &vec![vec![x4t, -k * k]], 1e-8), "{:?}", s.b);
            assert!(close(&s.c[0], &vec![vec![1.0, x4t]], 1e-8), "{:?}", s.c);
            assert!(close(&s.c[1], &vec![vec![0.0, 0.0]], 1e-8));
            assert!(is_strongly_regular(&s).flag);
            // V = X₃ gives X₄θ; f₄ ≡ c gives −κ²c
            let v3 = VariationField::parse(FieldFrame::Adapted, &["0", "0", "1", "0"], &["x", "y"]).unwrap();
            assert!((residual(&pd, &s, &v3).unwrap()[0] - x4t).abs() < 1e-8);
            let v4 = VariationField::parse(FieldFrame::Adapted, &["0", "0", "0", "2.5"], &["x", "y"]).unwrap();
            assert!((residual(&pd, &s, &v4).unwrap()[0] + 2.5 * k * k).abs() < 1e-8);
        }
    }

    #[test]
    fn engel_graph_normal_coefficients() {
        let th = "0.7*x^2 + 0.4*y - 0.3*x*y";
        let (man, imm) = entry(&format!("engel-graph:theta={}", th));
        let t = crate::exprcore::parse(th, &["x", "y"]).unwrap();
        let kappa = crate::catalog::engel_kappa(&t);
        let x1 = |f: &Expr| t.cos().mul_expr(&f.diff(0)).add_expr(&t.sin().mul_expr(&f.diff(1)));
        let x4 = |f: &Expr| t.cos().mul_expr(&f.diff(1)).sub_expr(&t.sin().mul_expr(&f.diff(0)));
        let shape = system_shape(&man, &imm, &[vec![0.3, 0.6]], 4).unwrap();
        for p in [[0.3, 0.6], [0.8, 0.1]] {
            let pd = point_data(&man, &imm, &p, &engel_basis(th)).unwrap();
            let ns = assemble_normal(&pd, &shape).unwrap();
            let a1 = (1.0 + x1(&kappa).eval(&p).powi(2)).sqrt();
            let x4t = x4(&t).eval(&p);
            let x4k = x4(&kappa).eval(&p);
            let k = kappa.eval(&p);
            let a3sq = 1.0 + x4t * x4t;
            let a2 = (a1 * a1 * a3sq + x4k * x4k).sqrt() / a1;
            assert_eq!(ns.k, 1);
            // normalize to a unit coefficient on X̄₁(ψ₃)
            let c1 = ns.c[0][0][0];
            assert!(ns.c[1][0][0].abs() < 1e-10);
            assert!((ns.b[0][0] / c1 - x4t * (1.0 - k * k) / a3sq).abs() < 1e-8);
            // exact bracket value α₁α₂/α₃²
            assert!((ns.a[0][0] / c1 - a1 * a2 / a3sq).abs() < 1e-8, "{}", ns.a[0][0] / c1);
            assert!(ns.tangent.beta.iter().flatten().all(|x| x.abs() < 1e-8));
            let s = assemble_adapted(&pd, &shape);
            assert_eq!(numeric_rank(&s.a).0, numeric_rank(&ns.a).0);
        }
    }

    #[test]
    fn isolated_plane_system() {
        let (man, imm) = entry("isolated-plane");
        let shape = system_shape(&man, &imm, &[vec![0.2, -0.4]], 3).unwrap();
        assert_eq!((shape.ell, shape.k, shape.rho), (3, 1, 2));
        let pd = point_data(&man, &imm, &[0.2, -0.4], &TangentBasis::Coordinate).unwrap();
        let s = assemble_adapted(&pd, &shape);
        assert!(close(&s.a, &vec![vec![0.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]], 1e-12), "{:?}", s.a);
        assert!(close(&s.b, &vec![vec![0.0; 2]; 3], 1e-12), "{:?}", s.b);
        assert!(close(&s.c[0], &vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, -1.0]], 1e-12), "{:?}", s.c[0]);
        assert!(close(&s.c[1], &vec![vec![0.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]], 1e-12), "{:?}", s.c[1]);
        let r = is_strongly_regular(&s);
        assert!(!r.flag && r.rank == 1);
        let ns = assemble_normal(&pd, &shape).unwrap();
        assert_eq!(ns.a.len(), 3);
        assert_eq!(numeric_rank(&ns.a).0, 1);
        let bb = bracket_beta(&man, &imm, &[0.2, -0.4], &TangentBasis::Coordinate, &shape).unwrap();
        assert!(close(&bb.bracket, &s.full.beta, 1e-10));
        assert!(bb.drift.iter().flatten().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn bracket_form_plus_drift_equals_nabla_form() {
        let (man, imm) = entry("engel-graph:theta=0.5*x+0.2*x*y");
        let shape = system_shape(&man, &imm, &[vec![0.4, 0.4]], 4).unwrap();
        for basis in [TangentBasis::Orthonormal, engel_basis("0.5*x+0.2*x*y")] {
            let pd = point_data(&man, &imm, &[0.4, 0.7], &basis).unwrap();
            let s = assemble_adapted(&pd, &shape);
            let bb = bracket_beta(&man, &imm, &[0.4, 0.7], &basis, &shape).unwrap();
            let sum: Mat<f64> =
                bb.bracket.iter().zip(&bb.drift).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
            assert!(close(&sum, &s.full.beta, 1e-7), "{:?} vs {:?}", sum, s.full.beta);
        }
    }

    #[test]
    fn tangent_fields_are_admissible_and_split_is_additive() {
        let (man, imm) = entry("engel-graph:theta=0.5*x+0.2*x*y");
        let shape = system_shape(&man, &imm, &[vec![0.4, 0.4]], 4).unwrap();
        let pd = point_data(&man, &imm, &[0.35, 0.6], &TangentBasis::Orthonormal).unwrap();
        let s = assemble_adapted(&pd, &shape);
        let e1 = VariationField::parse(FieldFrame::Normal, &["1", "0", "0", "0"], &["x", "y"]).unwrap();
        let v = e1.y_coefficients(&pd, None).unwrap();
        assert!(residual_direct(&pd, &shape, &v)[0].abs() < 1e-8);
        let rnd = VariationField::parse(FieldFrame::Coordinates, &["sin(x)", "x*y", "1+y^2", "cos(3*x)"], &["x", "y"]).unwrap();
        let v = rnd.y_coefficients(&pd, None).unwrap();
        let (_, vn) = split_tangent_normal(&pd, &v).unwrap();
        let r = residual_direct(&pd, &shape, &v);
        let rn = residual_direct(&pd, &shape, &vn);
        assert!((r[0] - rn[0]).abs() < 1e-8);
        assert!((residual(&pd, &s, &rnd).unwrap()[0] - r[0]).abs() < 1e-8);
    }

    #[test]
    fn engel_metric_change_transport() {
        let (man, imm) = entry("engel-graph:theta=0.5*x+0.2*x*y");
        let (man_e, _) = entry("engel-graph:theta=0.5*x+0.2*x*y,metric=euclidean");
        let shape = system_shape(&man, &imm, &[vec![0.4, 0.4]], 4).unwrap();
        let f = VariationField::parse(FieldFrame::Coordinates, &["sin(x)", "x*y", "1+y^2", "cos(3*x)"], &["x", "y"]).unwrap();
        for p in [[0.1, 0.2], [0.7, 0.9]] {
            let rep = metric_change_check(&man, &man_e, &imm, &p, &shape, &f).unwrap();
            assert!(rep.adapted_change);
            assert!(rep.residual_error < 1e-7, "{:?}", rep);
            assert!(rep.a_error < 1e-7 && rep.b_error < 1e-7 && rep.c_error < 1e-7, "{:?}", rep);
            assert_eq!(rep.rank, rep.rank_tilde);
        }
    }
}
