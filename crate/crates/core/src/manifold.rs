//! Graded manifolds: adapted frames, metrics, brackets and connections.

use crate::error::{Error, Result};
use crate::exprcore::{Expr, Scalar, Tape};
use crate::jet::{Jet, JetLayout};
use crate::linalg::{self, Mat};
use crate::multivector::{all_indices, minor, GrowthVector, MVector, MultiIndex, WeightVector};

/// Ordered frame `X_1, …, X_n` of coordinate vector fields with assigned degrees.
#[derive(Clone, Debug)]
pub struct AdaptedFrame {
    pub coords: Vec<String>,
    /// `fields[i][k]` is the `k`-th coordinate component of `X_i`.
    pub fields: Vec<Vec<Expr>>,
    pub weights: WeightVector,
    pub growth: GrowthVector,
}

impl AdaptedFrame {
    pub fn new(coords: Vec<String>, fields: Vec<Vec<Expr>>, weights: Vec<u32>) -> Result<AdaptedFrame> {
        let n = coords.len();
        if fields.len() != n {
            return Err(Error::Dimension(format!("{} fields for {} coordinates", fields.len(), n)));
        }
        if let Some(f) = fields.iter().find(|f| f.len() != n) {
            return Err(Error::Dimension(format!("field with {} components in dimension {}", f.len(), n)));
        }
        let weights = WeightVector::new(weights)?;
        if weights.n() != n {
            return Err(Error::Dimension(format!("{} weights for {} fields", weights.n(), n)));
        }
        let growth = weights.growth();
        Ok(AdaptedFrame { coords, fields, weights, growth })
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coord_names(&self) -> Vec<&str> {
        self.coords.iter().map(|s| s.as_str()).collect()
    }

    /// Components of all fields at `p`, `out[i][k] = X_i^k(p)`.
    pub fn eval(&self, p: &[f64]) -> Mat<f64> {
        self.fields.iter().map(|f| f.iter().map(|e| e.eval(p)).collect()).collect()
    }
}

/// Riemannian metric on the manifold.
#[derive(Clone, Debug)]
pub enum MetricField {
    /// The adapted frame is declared orthonormal.
    FrameOrthonormal,
    /// Coordinate matrix `g_{kl}(x)`.
    Coordinate(Vec<Vec<Expr>>),
    /// Gram matrix `g(X_i, X_j)` of the raw frame.
    FrameGram(Vec<Vec<Expr>>),
    /// The dilation `g_r` of another metric.
    Dilated { base: Box<MetricField>, r: f64 },
}

impl MetricField {
    fn matrix(&self) -> Option<&Vec<Vec<Expr>>> {
        match self {
            MetricField::FrameOrthonormal => None,
            MetricField::Coordinate(m) | MetricField::FrameGram(m) => Some(m),
            MetricField::Dilated { base, .. } => base.matrix(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MetricField::FrameOrthonormal => "frame-orthonormal".into(),
            MetricField::Coordinate(_) => "coordinate".into(),
            MetricField::FrameGram(_) => "frame-gram".into(),
            MetricField::Dilated { base, r } => format!("{} dilated r={:e}", base.label(), r),
        }
    }
}

/// Metric data at one point, in coordinates.
#[derive(Clone, Debug)]
pub struct AmbientPoint<T> {
    /// `raw[i]` = coordinates of the raw frame field `X_i`.
    pub raw: Mat<T>,
    pub g: Mat<T>,
    /// `y[i]` = coordinates of the orthonormal adapted field `Y_i`.
    pub y: Mat<T>,
    /// `ycov[i] = g·Y_i`, so the `Y_i`-coefficient of `v` is `ycov[i]·v`.
    pub ycov: Mat<T>,
}

/// Graded manifold with a metric.
#[derive(Clone, Debug)]
pub struct Manifold {
    pub frame: AdaptedFrame,
    pub metric: MetricField,
    frame_tape: Tape,
    metric_tape: Option<Tape>,
}

impl Manifold {
    pub fn new(frame: AdaptedFrame, metric: MetricField) -> Result<Manifold> {
        let n = frame.n();
        if let Some(m) = metric.matrix() {
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(Error::Dimension(format!("metric must be {}×{}", n, n)));
            }
        }
        if let MetricField::Dilated { r, .. } = &metric {
            if *r <= 0.0 {
                return Err(Error::Invalid(format!("dilation parameter r = {} must be positive", r)));
            }
        }
        let flat: Vec<Expr> = frame.fields.iter().flatten().cloned().collect();
        let frame_tape = Tape::compile(&flat);
        let metric_tape = metric.matrix().map(|m| Tape::compile(&m.iter().flatten().cloned().collect::<Vec<_>>()));
        Ok(Manifold { frame, metric, frame_tape, metric_tape })
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    pub fn weights(&self) -> &WeightVector {
        &self.frame.weights
    }

    pub fn growth(&self) -> &GrowthVector {
        &self.frame.growth
    }

    pub fn with_metric(&self, metric: MetricField) -> Result<Manifold> {
        Manifold::new(self.frame.clone(), metric)
    }

    /// Same frame with the dilated metric `g_r`.
    pub fn dilated(&self, r: f64) -> Result<Manifold> {
        if r <= 0.0 {
            return Err(Error::Invalid(format!("dilation parameter r = {} must be positive", r)));
        }
        let metric = match &self.metric {
            MetricField::Dilated { base, r: r0 } => MetricField::Dilated { base: base.clone(), r: r0 * r },
            other => MetricField::Dilated { base: Box::new(other.clone()), r },
        };
        self.with_metric(metric)
    }

    /// Raw frame, metric and orthonormal adapted frame at `x`.
    pub fn ambient_at<T: Scalar>(&self, x: &[T]) -> Result<AmbientPoint<T>> {
        let n = self.n();
        let proto = x[0].constant_like(0.0);
        let flat = self.frame_tape.eval(x, &proto);
        let raw: Mat<T> = (0..n).map(|i| flat[i * n..(i + 1) * n].to_vec()).collect();
        // fm[k][i] = X_i^k
        let fm = linalg::transpose(&raw);
        let finv = linalg::inverse(&fm).ok_or_else(|| Error::Singular("adapted frame is not a basis".into()))?;
        let (base, r) = match &self.metric {
            MetricField::Dilated { base, r } => (base.as_ref(), Some(*r)),
            m => (m, None),
        };
        let mut amb = match base {
            MetricField::FrameOrthonormal => {
                let g: Mat<T> = (0..n)
                    .map(|k| (0..n).map(|l| linalg::dot(&col(&finv, k), &col(&finv, l))).collect())
                    .collect();
                AmbientPoint { y: raw.clone(), ycov: finv.clone(), raw, g }
            }
            MetricField::Coordinate(_) | MetricField::FrameGram(_) => {
                let vals = self.metric_tape.as_ref().unwrap().eval(x, &proto);
                let mm: Mat<T> = (0..n).map(|i| vals[i * n..(i + 1) * n].to_vec()).collect();
                let g = if matches!(base, MetricField::Coordinate(_)) {
                    mm
                } else {
                    // g = F^{-T} G F^{-1}
                    linalg::matmul(&linalg::matmul(&linalg::transpose(&finv), &mm), &finv)
                };
                let (y, ycov) = gram_schmidt(&raw, &g)?;
                AmbientPoint { raw, g, y, ycov }
            }
            MetricField::Dilated { .. } => unreachable!("nested dilation is flattened"),
        };
        if let Some(r) = r {
            let w = &self.frame.weights;
            for i in 0..n {
                let e = w.get(i) as f64 - 1.0;
                amb.y[i] = amb.y[i].iter().map(|v| v.scale(r.powf(e / 2.0))).collect();
                amb.ycov[i] = amb.ycov[i].iter().map(|v| v.scale(r.powf(-e / 2.0))).collect();
            }
            amb.g = (0..n)
                .map(|k| {
                    (0..n)
                        .map(|l| {
                            let mut s = amb.ycov[0][k].clone() * amb.ycov[0][l].clone();
                            for i in 1..n {
                                s = s + amb.ycov[i][k].clone() * amb.ycov[i][l].clone();
                            }
                            s
                        })
                        .collect()
                })
                .collect();
        }
        Ok(amb)
    }

    /// Coordinate metric matrix at `p`.
    pub fn metric_at(&self, p: &[f64]) -> Result<Mat<f64>> {
        Ok(self.ambient_at(p)?.g)
    }

    /// `g(X_i, X_j)` for the raw frame at `p`.
    pub fn frame_gram_at(&self, p: &[f64]) -> Result<Mat<f64>> {
        let a = self.ambient_at(p)?;
        Ok(gram_of(&a.raw, &a.g))
    }

    /// Christoffel symbols `Γ^k_ij` at `p`, from exact first derivatives of `g`.
    pub fn christoffel(&self, p: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let n = self.n();
        let l = JetLayout::shared(n, 1);
        let x: Vec<Jet> = (0..n).map(|i| Jet::variable(&l, i, p[i])).collect();
        let amb = self.ambient_at(&x)?;
        let vars: Vec<usize> = (0..n).collect();
        let gam = christoffel_jets(&amb.g, &vars)?;
        Ok(gam.iter().map(|a| a.iter().map(|b| b.iter().map(|j| j.value()).collect()).collect()).collect())
    }

    /// Orthonormal adapted frame at `p` with the change matrix from the raw frame.
    pub fn orthonormalize(&self, p: &[f64]) -> Result<OrthoAdaptedFrame> {
        let a = self.ambient_at(p)?;
        let n = self.n();
        // Y_i = Σ_j change[j][i] X_j; change = F^{-1} Y
        let fm = linalg::transpose(&a.raw);
        let ym = linalg::transpose(&a.y);
        let change = linalg::solve(&fm, &ym).ok_or_else(|| Error::Singular("frame".into()))?;
        let layers = (1..=self.growth().step())
            .map(|i| (self.growth().n_at(i - 1)..self.growth().n_at(i)).collect())
            .collect();
        let _ = n;
        Ok(OrthoAdaptedFrame { change, fields: a.y, layers })
    }

    /// `∇_v (Y_{j_1} ∧ … ∧ Y_{j_m})` at `p` in the orthonormal adapted frame.
    pub fn covariant_derivative_simple_mvector(&self, v: &[f64], j: &MultiIndex, p: &[f64]) -> Result<MVector> {
        let n = self.n();
        let l = JetLayout::shared(n, 1);
        let x: Vec<Jet> = (0..n).map(|i| Jet::variable(&l, i, p[i])).collect();
        let amb = self.ambient_at(&x)?;
        let vars: Vec<usize> = (0..n).collect();
        let om = omega(&amb, &vars)?;
        let ycov: Mat<f64> = amb.ycov.iter().map(|r| r.iter().map(|t| t.value()).collect()).collect();
        let vc: Vec<f64> = (0..n).map(|i| linalg::dot(&ycov[i], v)).collect();
        let m = j.len();
        let mut out = MVector::zero(m);
        for slot in 0..m {
            // columns: unit vectors except slot, which gets ∇_v Y_{j_slot}
            let mut cols: Mat<f64> = vec![vec![0.0; m]; n];
            for (s, &ji) in j.indices().iter().enumerate() {
                if s == slot {
                    for c in 0..n {
                        cols[c][s] = (0..n).map(|b| vc[b] * om[b][ji][c].value()).sum();
                    }
                } else {
                    cols[ji][s] = 1.0;
                }
            }
            for k in all_indices(n, m) {
                out.add_term(k.clone(), minor(&cols, &k));
            }
        }
        Ok(out)
    }
}

fn col<T: Clone>(m: &Mat<T>, k: usize) -> Vec<T> {
    m.iter().map(|r| r[k].clone()).collect()
}

/// Gram matrix `⟨v_i, v_j⟩_g` of coordinate vectors.
pub fn gram_of<T: Scalar>(vs: &Mat<T>, g: &Mat<T>) -> Mat<T> {
    let gv: Mat<T> = vs.iter().map(|v| g.iter().map(|row| linalg::dot(row, v)).collect()).collect();
    vs.iter().map(|a| gv.iter().map(|b| linalg::dot(a, b)).collect()).collect()
}

/// Gram–Schmidt of the raw frame in adapted order; returns `(Y, g·Y)`.
pub fn gram_schmidt<T: Scalar>(raw: &Mat<T>, g: &Mat<T>) -> Result<(Mat<T>, Mat<T>)> {
    let n = raw.len();
    let mut y: Mat<T> = Vec::with_capacity(n);
    let mut ycov: Mat<T> = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = raw[i].clone();
        for j in 0..i {
            let c = linalg::dot(&ycov[j], &raw[i]);
            v = v.iter().zip(&y[j]).map(|(a, b)| a.clone() - c.clone() * b.clone()).collect();
        }
        let gv: Vec<T> = g.iter().map(|row| linalg::dot(row, &v)).collect();
        let nn = linalg::dot(&v, &gv);
        if nn.value() <= 1e-24 {
            return Err(Error::Singular(format!("frame field {} is dependent on the previous ones", i + 1)));
        }
        let inv = nn.sqrt().recip();
        y.push(v.iter().map(|a| a.clone() * inv.clone()).collect());
        ycov.push(gv.iter().map(|a| a.clone() * inv.clone()).collect());
    }
    Ok((y, ycov))
}

/// `Γ^k_ij` from a metric given as jets; `vars[l]` is the jet variable of coordinate `l`.
pub fn christoffel_jets(g: &Mat<Jet>, vars: &[usize]) -> Result<Vec<Vec<Vec<Jet>>>> {
    let n = g.len();
    let ginv = linalg::inverse(g).ok_or_else(|| Error::Singular("metric is singular".into()))?;
    // dg[l][i][j] = ∂_l g_ij
    let dg: Vec<Mat<Jet>> =
        (0..n).map(|l| g.iter().map(|row| row.iter().map(|e| e.partial(vars[l])).collect()).collect()).collect();
    let ginv: Mat<Jet> = ginv.iter().map(|r| r.iter().map(|e| e.truncate(dg[0][0][0].order())).collect()).collect();
    // first kind: Γ_{lij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut first = vec![vec![vec![None::<Jet>; n]; n]; n];
    for l in 0..n {
        for i in 0..n {
            for j in i..n {
                let t = (dg[i][j][l].clone() + dg[j][i][l].clone() - dg[l][i][j].clone()).scale(0.5);
                first[l][j][i] = Some(t.clone());
                first[l][i][j] = Some(t);
            }
        }
    }
    let mut out = vec![vec![vec![]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = ginv[k][0].clone() * first[0][i][j].clone().unwrap();
                for l in 1..n {
                    s = s + ginv[k][l].clone() * first[l][i][j].clone().unwrap();
                }
                out[k][i].push(s);
            }
        }
    }
    Ok(out)
}

/// Connection coefficients `ω[a][b][c] = ⟨∇_{Y_a} Y_b, Y_c⟩` in the orthonormal adapted frame.
pub fn omega(amb: &AmbientPoint<Jet>, vars: &[usize]) -> Result<Vec<Vec<Vec<Jet>>>> {
    let n = amb.g.len();
    let gam = christoffel_jets(&amb.g, vars)?;
    let ord = gam[0][0][0].order();
    let y: Mat<Jet> = amb.y.iter().map(|r| r.iter().map(|e| e.truncate(ord)).collect()).collect();
    let ycov: Mat<Jet> = amb.ycov.iter().map(|r| r.iter().map(|e| e.truncate(ord)).collect()).collect();
    // dy[l][b][k] = ∂_l Y_b^k
    let dy: Vec<Mat<Jet>> =
        (0..n).map(|l| amb.y.iter().map(|yb| yb.iter().map(|e| e.partial(vars[l])).collect()).collect()).collect();
    // t[a][k][j] = Σ_i Γ^k_ij Y_a^i
    let t: Vec<Mat<Jet>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|k| {
                    (0..n)
                        .map(|j| {
                            let mut s = gam[k][0][j].clone() * y[a][0].clone();
                            for i in 1..n {
                                s = s + gam[k][i][j].clone() * y[a][i].clone();
                            }
                            s
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut out = vec![vec![vec![]; n]; n];
    for a in 0..n {
        for b in 0..n {
            let nab: Vec<Jet> = (0..n)
                .map(|k| {
                    let mut s = y[a][0].clone() * dy[0][b][k].clone();
                    for l in 1..n {
                        s = s + y[a][l].clone() * dy[l][b][k].clone();
                    }
                    for j in 0..n {
                        s = s + t[a][k][j].clone() * y[b][j].clone();
                    }
                    s
                })
                .collect();
            for c in 0..n {
                out[a][b].push(linalg::dot(&ycov[c], &nab));
            }
        }
    }
    Ok(out)
}

/// Orthonormal adapted frame at a point.
#[derive(Clone, Debug)]
pub struct OrthoAdaptedFrame {
    /// `Y_i = Σ_j change[j][i] X_j`; upper triangular.
    pub change: Mat<f64>,
    /// Coordinates of `Y_i`.
    pub fields: Mat<f64>,
    /// Frame indices of each layer `K^i`.
    pub layers: Vec<Vec<usize>>,
}

/// Symbolic Lie bracket `[X, Y]^k = Σ_j X^j ∂_j Y^k − Y^j ∂_j X^k`.
pub fn lie_bracket_expr(x: &[Expr], y: &[Expr]) -> Vec<Expr> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut s = Expr::zero();
            for j in 0..n {
                s = s.add_expr(&x[j].mul_expr(&y[k].diff(j))).sub_expr(&y[j].mul_expr(&x[k].diff(j)));
            }
            s
        })
        .collect()
}

pub fn lie_bracket(x: &[Expr], y: &[Expr], p: &[f64]) -> Vec<f64> {
    lie_bracket_expr(x, y).iter().map(|e| e.eval(p)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiltrationViolation {
    pub point: Vec<f64>,
    /// 1-based field indices.
    pub fields: (usize, usize),
    pub degree: u32,
    pub residual: f64,
}

/// A frame field whose declared degree differs from the layer where brackets of
/// the degree-one fields first reach it.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMismatch {
    pub point: Vec<f64>,
    /// 1-based field index.
    pub field: usize,
    pub declared: u32,
    /// `None` when the bracket flag never reaches the field.
    pub generated: Option<u32>,
}

#[derive(Clone, Debug, Default)]
pub struct FiltrationReport {
    pub checked: usize,
    pub violations: Vec<FiltrationViolation>,
    pub weight_mismatches: Vec<WeightMismatch>,
}

impl FiltrationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.weight_mismatches.is_empty()
    }
}

/// Check `[H^i, H^j] ⊂ H^{i+j}` on the frame fields at the sample points, and that
/// every declared degree matches the bracket flag generated by the degree-one fields.
pub fn verify_filtration(frame: &AdaptedFrame, samples: &[Vec<f64>]) -> FiltrationReport {
    let n = frame.n();
    let w = &frame.weights;
    let s = w.step();
    let mut brackets = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let sum = w.get(a) + w.get(b);
            if sum > s {
                continue;
            }
            brackets.push((a, b, sum, lie_bracket_expr(&frame.fields[a], &frame.fields[b])));
        }
    }
    let horizontal: Vec<Vec<Expr>> = (0..n).filter(|&i| w.get(i) == 1).map(|i| frame.fields[i].clone()).collect();
    let mut report = FiltrationReport::default();
    for p in samples {
        let vals = frame.eval(p);
        for (a, b, sum, br) in &brackets {
            let v: Vec<f64> = br.iter().map(|e| e.eval(p)).collect();
            let span: Vec<Vec<f64>> = (0..n).filter(|&i| w.get(i) <= *sum).map(|i| vals[i].clone()).collect();
            let res = linalg::lsq_residual(&span, &v);
            let scale = 1.0 + v.iter().map(|x| x * x).sum::<f64>().sqrt();
            report.checked += 1;
            if res > 1e-8 * scale {
                report.violations.push(FiltrationViolation {
                    point: p.clone(),
                    fields: (a + 1, b + 1),
                    degree: *sum,
                    residual: res,
                });
            }
        }
        // declared degrees against the flag generated by the degree-one fields
        let flag = carnot_flag(&horizontal, p, s as usize);
        for i in 0..n {
            let generated = flag.spans.iter().position(|span| {
                let cols: Vec<Vec<f64>> = span.clone();
                let scale = 1.0 + vals[i].iter().map(|x| x * x).sum::<f64>().sqrt();
                linalg::lsq_residual(&cols, &vals[i]) <= 1e-8 * scale
            });
            let generated = generated.map(|j| j as u32 + 1);
            if generated != Some(w.get(i)) {
                report.weight_mismatches.push(WeightMismatch { point: p.clone(), field: i + 1, declared: w.get(i), generated });
            }
        }
    }
    report
}

#[derive(Clone, Debug, PartialEq)]
pub struct CarnotFlag {
    pub growth: Vec<usize>,
    pub hormander: bool,
    /// Vectors spanning each `H^j` at the point (cumulative).
    pub spans: Vec<Mat<f64>>,
}

/// Dimensions of `H^1 ⊂ H^2 ⊂ …` generated by brackets of the horizontal fields at `p`.
pub fn carnot_flag(horizontal: &[Vec<Expr>], p: &[f64], max_step: usize) -> CarnotFlag {
    let n = p.len();
    let eval = |f: &Vec<Expr>| -> Vec<f64> { f.iter().map(|e| e.eval(p)).collect() };
    let mut basis: Vec<Vec<Expr>> = Vec::new();
    let mut vals: Mat<f64> = Vec::new();
    let try_add = |f: Vec<Expr>, basis: &mut Vec<Vec<Expr>>, vals: &mut Mat<f64>| {
        let v = eval(&f);
        let mut cand = vals.clone();
        cand.push(v.clone());
        if linalg::rank_rel(&cand, linalg::RANK_RTOL) > vals.len() {
            vals.push(v);
            basis.push(f);
        }
    };
    for f in horizontal {
        try_add(f.clone(), &mut basis, &mut vals);
    }
    let mut growth = vec![vals.len()];
    let mut spans = vec![vals.clone()];
    let mut newest: Vec<Vec<Expr>> = basis.clone();
    while growth.len() < max_step && vals.len() < n {
        let mut added = Vec::new();
        for h in horizontal {
            for f in &newest {
                let before = basis.len();
                try_add(lie_bracket_expr(h, f), &mut basis, &mut vals);
                if basis.len() > before {
                    added.push(basis.last().unwrap().clone());
                }
            }
        }
        growth.push(vals.len());
        spans.push(vals.clone());
        if added.is_empty() {
            break;
        }
        newest = added;
    }
    CarnotFlag { hormander: vals.len() == n, growth, spans }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprcore::parse;

    fn fields(coords: &[&str], src: &[&[&str]]) -> Vec<Vec<Expr>> {
        src.iter().map(|f| f.iter().map(|s| parse(s, coords).unwrap()).collect()).collect()
    }

    fn engel_structure() -> AdaptedFrame {
        let c = ["x", "y", "theta", "k"];
        let f = fields(
            &c,
            &[&["cos(theta)", "sin(theta)", "k", "0"], &["0", "0", "0", "1"], &["0", "0", "-1", "0"], &["-sin(theta)", "cos(theta)", "0", "0"]],
        );
        AdaptedFrame::new(c.iter().map(|s| s.to_string()).collect(), f, vec![1, 1, 2, 3]).unwrap()
    }

    #[test]
    fn engel_brackets_and_flag() {
        let fr = engel_structure();
        let p = [0.1, 0.2, 0.3, 0.4];
        let b = lie_bracket(&fr.fields[0], &fr.fields[1], &p);
        assert_eq!(b, vec![0.0, 0.0, -1.0, 0.0]);
        let flag = carnot_flag(&fr.fields[..2], &p, 4);
        assert_eq!(flag.growth, vec![2, 3, 4]);
        assert!(flag.hormander);
        assert!(verify_filtration(&fr, &[p.to_vec()]).passed());
        let forged = AdaptedFrame::new(fr.coords.clone(), fr.fields.clone(), vec![1, 1, 2, 2]).unwrap();
        assert!(!verify_filtration(&forged, &[p.to_vec()]).passed());
    }

    #[test]
    fn commuting_fields_stall() {
        let c = ["x", "y", "z"];
        let f = fields(&c, &[&["1", "0", "0"], &["0", "1", "0"]]);
        let flag = carnot_flag(&f, &[0.0, 0.0, 0.0], 3);
        assert_eq!(flag.growth, vec![2, 2]);
        assert!(!flag.hormander);
    }

    #[test]
    fn christoffel_is_metric_compatible_and_torsion_free() {
        let man = Manifold::new(engel_structure(), MetricField::FrameOrthonormal).unwrap();
        let p = [0.3, -0.2, 0.7, 0.5];
        let gam = man.christoffel(&p).unwrap();
        let n = 4;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    assert!((gam[k][i][j] - gam[k][j][i]).abs() < 1e-12);
                }
            }
        }
        // ∂_l g_ij = Γ^m_li g_mj + Γ^m_lj g_im
        let g = man.metric_at(&p).unwrap();
        let h = 1e-5;
        for l in 0..n {
            let mut pp = p;
            pp[l] += h;
            let gp = man.metric_at(&pp).unwrap();
            pp[l] -= 2.0 * h;
            let gm = man.metric_at(&pp).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let fd = (gp[i][j] - gm[i][j]) / (2.0 * h);
                    let rhs: f64 = (0..n).map(|m| gam[m][l][i] * g[m][j] + gam[m][l][j] * g[i][m]).sum();
                    assert!((fd - rhs).abs() < 1e-8, "{} {} {}: {} vs {}", l, i, j, fd, rhs);
                }
            }
        }
    }
}
