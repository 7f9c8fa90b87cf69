//! Pointwise differential geometry of an immersion, carried on jets.
//!
//! At a parameter point `p̄` every quantity is a [`Jet`] in the parameter offsets
//! `ε` (so tangential derivatives are exact), optionally together with ambient
//! offsets `y` placed at `x = Φ(p̄ + ε) + y`, which gives the ambient
//! derivatives needed for the Levi-Civita connection. Vectors are stored by
//! their coefficients in the orthonormal adapted frame `Y_1, …, Y_n`, in which
//! the metric is Euclidean.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exprcore::{Expr, Scalar, Tape};
use crate::immersion::Immersion;
use crate::jet::{Jet, JetLayout};
use crate::linalg::{self, Mat};
use crate::manifold::{self, AmbientPoint, Manifold};
use crate::multivector::{all_indices, minor, MVector, MultiIndex};

/// Absolute threshold for ranks of frame-coefficient matrices.
pub const FLAG_ATOL: f64 = 1e-8;

/// Choice of tangent vectors `E_j = Σ_a P_aj Φ_a`.
#[derive(Clone, Debug, Default)]
pub enum TangentBasis {
    /// μ-orthonormalization of `∂_1Φ, …, ∂_mΦ` in parameter order.
    #[default]
    Orthonormal,
    /// `E_j = ∂_jΦ`.
    Coordinate,
    /// `E_j = Σ_a coeffs[j][a] ∂_aΦ`, optionally μ-orthonormalized afterwards.
    Fields { coeffs: Vec<Vec<Expr>>, orthonormalize: bool },
}

impl TangentBasis {
    pub fn is_orthonormal(&self) -> bool {
        matches!(self, TangentBasis::Orthonormal | TangentBasis::Fields { orthonormalize: true, .. })
    }
}

/// Orthonormal normal frame ordered by layer.
#[derive(Clone, Debug)]
pub struct NormalFrame {
    /// `normals[r]` = coefficients of `N_{m+1+r}` in the `Y` frame.
    pub normals: Mat<Jet>,
    /// Layer of each normal.
    pub layers: Vec<u32>,
    /// `m̃_α` for `α = 1..s`.
    pub mtilde: Vec<usize>,
    pub iota0: usize,
    /// Number of normals in layers `≤ ι₀`.
    pub k: usize,
}

/// Jet data of the immersion at one parameter point.
pub struct PointData {
    pub m: usize,
    pub n: usize,
    pub layout: Arc<JetLayout>,
    pub pbar: Vec<f64>,
    /// Jet variable carrying each parameter offset.
    pub param_vars: Vec<usize>,
    /// Jet variable carrying each ambient offset, when present.
    pub amb_vars: Option<Vec<usize>>,
    pub params: Vec<Jet>,
    pub x: Vec<Jet>,
    pub amb: AmbientPoint<Jet>,
    pub omega: Option<Vec<Vec<Vec<Jet>>>>,
    /// `phic[a][i]`: `Y_i`-coefficient of `∂_aΦ`.
    pub phic: Mat<Jet>,
    /// Induced metric in parameter coordinates.
    pub mu: Mat<Jet>,
    /// `E_j = Σ_a p[a][j] ∂_aΦ`.
    pub p: Mat<Jet>,
    /// `ecoef[i][j]`: `Y_i`-coefficient of `E_j`.
    pub ecoef: Mat<Jet>,
    weights: Vec<u32>,
    growth: Vec<usize>,
}

fn jets_of(layout: &Arc<JetLayout>, pbar: &[f64], vars: &[usize]) -> Vec<Jet> {
    pbar.iter().zip(vars).map(|(&v, &i)| Jet::variable(layout, i, v)).collect()
}

impl PointData {
    /// Jets in `ε` (and `y` when `ambient` is set) of total order `order`.
    pub fn new(
        man: &Manifold,
        imm: &Immersion,
        pbar: &[f64],
        basis: &TangentBasis,
        order: usize,
        ambient: bool,
    ) -> Result<PointData> {
        let m = imm.m();
        let n = man.n();
        if imm.n() != n {
            return Err(Error::Dimension(format!("immersion has {} components, manifold dimension {}", imm.n(), n)));
        }
        let nvars = if ambient { m + n } else { m };
        let layout = JetLayout::shared(nvars, order);
        let param_vars: Vec<usize> = (0..m).collect();
        let params = jets_of(&layout, pbar, &param_vars);
        let mut x = imm.eval_jets(&params);
        let amb_vars = if ambient {
            let v: Vec<usize> = (m..m + n).collect();
            for l in 0..n {
                x[l] = x[l].clone() + Jet::variable(&layout, v[l], 0.0);
            }
            Some(v)
        } else {
            None
        };
        PointData::assemble(man, imm, pbar, basis, layout, param_vars, amb_vars, params, x)
    }

    /// Jets in the ambient coordinates `z`, with parameters read off `z[graph_coords]`.
    ///
    /// Surface quantities become functions on a neighbourhood in `N` that are
    /// constant along the complementary coordinate directions.
    pub fn new_extension(
        man: &Manifold,
        imm: &Immersion,
        pbar: &[f64],
        basis: &TangentBasis,
        order: usize,
        graph_coords: &[usize],
    ) -> Result<PointData> {
        let m = imm.m();
        let n = man.n();
        let layout = JetLayout::shared(n, order);
        let param_vars: Vec<usize> = graph_coords.to_vec();
        let params = jets_of(&layout, pbar, &param_vars);
        let x = imm.eval_jets(&params);
        let _ = m;
        PointData::assemble(man, imm, pbar, basis, layout, param_vars, None, params, x)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        man: &Manifold,
        imm: &Immersion,
        pbar: &[f64],
        basis: &TangentBasis,
        layout: Arc<JetLayout>,
        param_vars: Vec<usize>,
        amb_vars: Option<Vec<usize>>,
        params: Vec<Jet>,
        x: Vec<Jet>,
    ) -> Result<PointData> {
        let m = imm.m();
        let n = man.n();
        let amb = man.ambient_at(&x)?;
        let omega = match &amb_vars {
            Some(v) => Some(manifold::omega(&amb, v)?),
            None => None,
        };
        // ∂_aΦ = ∂_{ε_a} x
        let phi_a: Mat<Jet> = (0..m).map(|a| x.iter().map(|c| c.partial(param_vars[a])).collect()).collect();
        let phic: Mat<Jet> = phi_a.iter().map(|v| (0..n).map(|i| linalg::dot(&amb.ycov[i], v)).collect()).collect();
        let mu: Mat<Jet> = (0..m).map(|a| (0..m).map(|b| linalg::dot(&phic[a], &phic[b])).collect()).collect();
        let detmu = linalg::det(&mu).value();
        if !(detmu > 1e-24) {
            return Err(Error::RankDeficient(format!("immersion Jacobian has rank < {} at {:?}", m, pbar)));
        }
        let zero = Jet::constant(&layout, 0.0);
        let one = Jet::constant(&layout, 1.0);
        let identity: Mat<Jet> =
            (0..m).map(|a| (0..m).map(|b| if a == b { one.clone() } else { zero.clone() }).collect()).collect();
        let p = match basis {
            TangentBasis::Coordinate => identity,
            TangentBasis::Orthonormal => mu_gram_schmidt(&identity, &mu)?,
            TangentBasis::Fields { coeffs, orthonormalize } => {
                if coeffs.len() != m || coeffs.iter().any(|c| c.len() != m) {
                    return Err(Error::Dimension(format!("tangent basis needs {}×{} coefficients", m, m)));
                }
                let flat: Vec<Expr> = coeffs.iter().flatten().cloned().collect();
                let vals = Tape::compile(&flat).eval(&params, &zero);
                // p[a][j] = coeffs[j][a]
                let pm: Mat<Jet> = (0..m).map(|a| (0..m).map(|j| vals[j * m + a].clone()).collect()).collect();
                if *orthonormalize {
                    mu_gram_schmidt(&pm, &mu)?
                } else {
                    pm
                }
            }
        };
        let ecoef: Mat<Jet> = (0..n)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let mut s = p[0][j].clone() * phic[0][i].clone();
                        for a in 1..m {
                            s = s + p[a][j].clone() * phic[a][i].clone();
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        Ok(PointData {
            m,
            n,
            layout,
            pbar: pbar.to_vec(),
            param_vars,
            amb_vars,
            params,
            x,
            amb,
            omega,
            phic,
            mu,
            p,
            ecoef,
            weights: man.weights().0.clone(),
            growth: man.growth().0.clone(),
        })
    }

    pub fn zero(&self) -> Jet {
        Jet::constant(&self.layout, 0.0)
    }

    pub fn constant(&self, c: f64) -> Jet {
        Jet::constant(&self.layout, c)
    }

    pub fn weight(&self, i: usize) -> u32 {
        self.weights[i]
    }

    /// Evaluate expressions over the parameters as jets.
    pub fn eval_param_exprs(&self, exprs: &[Expr]) -> Vec<Jet> {
        Tape::compile(exprs).eval(&self.params, &self.zero())
    }

    /// Values of the tangent coefficient matrix.
    pub fn ecoef_values(&self) -> Mat<f64> {
        values(&self.ecoef)
    }

    /// `E_j(f) = Σ_a P_aj ∂_a f`.
    pub fn e_deriv(&self, j: usize, f: &Jet) -> Jet {
        let mut s = self.p[0][j].clone() * f.partial(self.param_vars[0]);
        for a in 1..self.m {
            s = s + self.p[a][j].clone() * f.partial(self.param_vars[a]);
        }
        s
    }

    fn omega(&self) -> &Vec<Vec<Vec<Jet>>> {
        self.omega.as_ref().expect("connection needs ambient jet variables")
    }

    /// `∇_V Y_c` for `V = Σ v_b Y_b`, as `Y` coefficients.
    pub fn nabla_amb(&self, v: &[Jet], c: usize) -> Vec<Jet> {
        let om = self.omega();
        (0..self.n)
            .map(|k| {
                let mut s = v[0].clone() * om[0][c][k].clone();
                for b in 1..self.n {
                    s = s + v[b].clone() * om[b][c][k].clone();
                }
                s
            })
            .collect()
    }

    /// `∇_{∂_aΦ} W` for `W = Σ w_c Y_c` along the immersion.
    pub fn d_along(&self, a: usize, w: &[Jet]) -> Vec<Jet> {
        let om = self.omega();
        let n = self.n;
        // u_c = Σ_b φ_b ω[b][c][·] applied to w_c
        (0..n)
            .map(|k| {
                let mut s = w[k].partial(self.param_vars[a]);
                for c in 0..n {
                    let mut t = self.phic[a][0].clone() * om[0][c][k].clone();
                    for b in 1..n {
                        t = t + self.phic[a][b].clone() * om[b][c][k].clone();
                    }
                    s = s + w[c].clone() * t;
                }
                s
            })
            .collect()
    }

    /// `∇_{E_j} W`.
    pub fn nabla_e(&self, j: usize, w: &[Jet]) -> Vec<Jet> {
        let mut out: Vec<Jet> = Vec::new();
        for a in 0..self.m {
            let d = self.d_along(a, w);
            if a == 0 {
                out = d.into_iter().map(|v| self.p[0][j].clone() * v).collect();
            } else {
                out = out.into_iter().zip(d).map(|(o, v)| o + self.p[a][j].clone() * v).collect();
            }
        }
        out
    }

    /// `⟨E_1∧…∧E_m, Z_1∧…∧Z_m⟩` for `Y`-coefficient columns `Z`.
    pub fn pair_with_tangent(&self, z: &[Vec<Jet>]) -> Jet {
        let m = self.m;
        let mat: Mat<Jet> = (0..m).map(|a| (0..m).map(|b| linalg::dot(&column(&self.ecoef, a), &z[b])).collect()).collect();
        linalg::det(&mat)
    }

    /// Minor `J` of the tangent matrix with column `j` replaced by `v`.
    pub fn replaced_minor(&self, jidx: &MultiIndex, j: usize, v: &[Jet]) -> Jet {
        let mut mat = self.ecoef.clone();
        for (i, row) in mat.iter_mut().enumerate() {
            row[j] = v[i].clone();
        }
        minor(&mat, jidx)
    }

    /// `τ_J = ⟨E_1∧…∧E_m, Y_J⟩` as a jet.
    pub fn tau_jet(&self, jidx: &MultiIndex) -> Jet {
        minor(&self.ecoef, jidx)
    }

    /// Tangent m-vector at the point.
    pub fn tau(&self) -> MVector {
        let vals = self.ecoef_values();
        let mut out = MVector::zero(self.m);
        for j in all_indices(self.n, self.m) {
            let c = minor(&vals, &j);
            out.add_term(j, c);
        }
        out
    }

    /// `⟨τ, ∇_V Y_J⟩` for `V = Σ v_b Y_b`.
    pub fn tau_nabla_yj(&self, v: &[Jet], jidx: &MultiIndex) -> Jet {
        let n = self.n;
        let mut total = self.zero();
        for (slot, &js) in jidx.indices().iter().enumerate() {
            let nab = self.nabla_amb(v, js);
            let cols: Vec<Vec<Jet>> = jidx
                .indices()
                .iter()
                .enumerate()
                .map(|(s, &ji)| if s == slot { nab.clone() } else { unit(self, ji, n) })
                .collect();
            total = total + self.pair_with_tangent(&cols);
        }
        total
    }

    /// `√det μ` times `|det P|`, the factor turning `dp` into the measure of the `E` frame.
    pub fn sqrt_det_mu(&self) -> Jet {
        linalg::det(&self.mu).sqrt()
    }

    /// `m̃_α = dim(T_pM ∩ H^α)` for `α = 1..s`.
    pub fn tangent_flag(&self) -> Vec<usize> {
        let vals = self.ecoef_values();
        let scale = linalg::singular_values(&vals).first().copied().unwrap_or(1.0);
        let s = *self.weights.last().unwrap();
        (1..=s)
            .map(|alpha| {
                let rows: Mat<f64> =
                    (0..self.n).filter(|&i| self.weights[i] > alpha).map(|i| vals[i].clone()).collect();
                if rows.is_empty() {
                    self.m
                } else {
                    self.m - linalg::rank_abs(&rows, FLAG_ATOL * scale)
                }
            })
            .collect()
    }

    /// Orthonormal normal frame, built layer by layer.
    pub fn normal_frame(&self) -> Result<NormalFrame> {
        let n = self.n;
        let m = self.m;
        let mtilde = self.tangent_flag();
        let s = mtilde.len();
        let iota0 = (1..=s).find(|&a| mtilde[a - 1] > 0).unwrap_or(s);
        // orthonormal tangent basis for projections
        let tang = orthonormal_columns(&self.ecoef)?;
        let mut normals: Mat<Jet> = Vec::new();
        let mut layers = Vec::new();
        let n_at = |a: usize| if a == 0 { 0 } else { self.growth[a - 1] };
        let mt = |a: usize| if a == 0 { 0 } else { mtilde[a - 1] };
        for alpha in 1..=s {
            let want = (n_at(alpha) - mt(alpha)) - (n_at(alpha - 1) - mt(alpha - 1));
            let mut got = 0;
            for i in (n_at(alpha - 1)..n_at(alpha)).rev() {
                if got == want {
                    break;
                }
                let mut v = unit(self, i, n);
                for t in tang.iter().chain(normals.iter()) {
                    let c = t[i].clone();
                    v = v.iter().zip(t).map(|(a, b)| a.clone() - c.clone() * b.clone()).collect();
                }
                let nn = linalg::dot(&v, &v);
                if nn.value() < 1e-12 {
                    continue;
                }
                let inv = nn.sqrt().recip();
                normals.push(v.into_iter().map(|a| a * inv.clone()).collect());
                layers.push(alpha as u32);
                got += 1;
            }
            if got < want {
                return Err(Error::Singular(format!("could not complete the normal frame in layer {}", alpha)));
            }
        }
        if normals.len() != n - m {
            return Err(Error::Singular(format!("normal frame has {} vectors, expected {}", normals.len(), n - m)));
        }
        let k = layers.iter().filter(|&&l| l as usize <= iota0).count();
        Ok(NormalFrame { normals, layers, mtilde, iota0, k })
    }

    /// `div_M W = Σ_k ⟨∇_{E_k} W, E_k⟩`; needs an orthonormal tangent basis.
    pub fn div_m(&self, w: &[Jet]) -> Jet {
        let mut s = self.zero();
        for k in 0..self.m {
            let nab = self.nabla_e(k, w);
            s = s + linalg::dot(&nab, &column(&self.ecoef, k));
        }
        s
    }

    /// Coordinates of a `Y`-coefficient vector.
    pub fn to_coords(&self, v: &[Jet]) -> Vec<Jet> {
        (0..self.n)
            .map(|k| {
                let mut s = v[0].clone() * self.amb.y[0][k].clone();
                for i in 1..self.n {
                    s = s + v[i].clone() * self.amb.y[i][k].clone();
                }
                s
            })
            .collect()
    }

    /// `Y` coefficients of a coordinate vector.
    pub fn from_coords(&self, v: &[Jet]) -> Vec<Jet> {
        (0..self.n).map(|i| linalg::dot(&self.amb.ycov[i], v)).collect()
    }
}

pub fn unit(pd: &PointData, i: usize, n: usize) -> Vec<Jet> {
    (0..n).map(|k| if k == i { pd.constant(1.0) } else { pd.zero() }).collect()
}

pub fn column<T: Clone>(m: &Mat<T>, j: usize) -> Vec<T> {
    m.iter().map(|r| r[j].clone()).collect()
}

pub fn values(m: &Mat<Jet>) -> Mat<f64> {
    m.iter().map(|r| r.iter().map(|e| e.value()).collect()).collect()
}

/// Columns of `p` made μ-orthonormal by Gram–Schmidt; `p[a][j]` is column `j`.
fn mu_gram_schmidt(p: &Mat<Jet>, mu: &Mat<Jet>) -> Result<Mat<Jet>> {
    let m = p.len();
    let mut cols: Vec<Vec<Jet>> = Vec::new();
    let inner = |u: &[Jet], v: &[Jet]| -> Jet {
        let mv: Vec<Jet> = mu.iter().map(|row| linalg::dot(row, v)).collect();
        linalg::dot(u, &mv)
    };
    for j in 0..m {
        let mut v = column(p, j);
        for c in &cols {
            let t = inner(&v, c);
            v = v.iter().zip(c).map(|(a, b)| a.clone() - t.clone() * b.clone()).collect();
        }
        let nn = inner(&v, &v);
        if nn.value() <= 1e-24 {
            return Err(Error::RankDeficient("tangent basis is dependent".into()));
        }
        let inv = nn.sqrt().recip();
        cols.push(v.into_iter().map(|a| a * inv.clone()).collect());
    }
    Ok((0..m).map(|a| (0..m).map(|j| cols[j][a].clone()).collect()).collect())
}

/// Euclidean Gram–Schmidt of the columns of an n×m matrix.
fn orthonormal_columns(mat: &Mat<Jet>) -> Result<Vec<Vec<Jet>>> {
    let m = mat[0].len();
    let mut out: Vec<Vec<Jet>> = Vec::new();
    for j in 0..m {
        let mut v = column(mat, j);
        for c in &out {
            let t = linalg::dot(&v, c);
            v = v.iter().zip(c).map(|(a, b)| a.clone() - t.clone() * b.clone()).collect();
        }
        let nn = linalg::dot(&v, &v);
        if nn.value() <= 1e-24 {
            return Err(Error::RankDeficient("tangent vectors are dependent".into()));
        }
        let inv = nn.sqrt().recip();
        out.push(v.into_iter().map(|a| a * inv.clone()).collect());
    }
    Ok(out)
}
