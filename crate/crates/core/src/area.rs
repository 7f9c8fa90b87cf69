//! Degree-d area, Riemannian area under dilated metrics and the scaling limit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{PointData, TangentBasis};
use crate::immersion::{pointwise_degree, Immersion, UniformGrid};
use crate::manifold::Manifold;
use crate::multivector::{degree_of_index, MVector};
use crate::quadrature::{pairwise_sum, QuadratureGrid};

pub const DEFAULT_QUADRATURE_ORDER: usize = 32;

/// `∂_1Φ ∧ … ∧ ∂_mΦ` in the orthonormal adapted frame of `man`'s metric.
fn coordinate_tau(man: &Manifold, imm: &Immersion, p: &[f64]) -> Result<MVector> {
    Ok(PointData::new(man, imm, p, &TangentBasis::Coordinate, 1, false)?.tau())
}

/// `(Σ_{deg J = d} τ_J², Σ_J τ_J²)` of the coordinate m-vector.
fn split_norms(man: &Manifold, tau: &MVector, d: u32) -> (f64, f64) {
    let w = man.weights();
    let mut sd = 0.0;
    let mut all = 0.0;
    for (j, c) in &tau.terms {
        let c2 = c * c;
        all += c2;
        if degree_of_index(j, w) == d {
            sd += c2;
        }
    }
    (sd, all)
}

/// Θ = |(e_1∧…∧e_m)_d| for a μ-orthonormal tangent basis.
pub fn density_theta(man: &Manifold, imm: &Immersion, p: &[f64], d: u32) -> Result<f64> {
    let tau = coordinate_tau(man, imm, p)?;
    let (sd, all) = split_norms(man, &tau, d);
    if all <= 0.0 {
        return Err(Error::RankDeficient(format!("tangent vectors are dependent at {:?}", p)));
    }
    Ok((sd / all).sqrt())
}

/// Θ·√det μ, the integrand of `A_d` in parameter coordinates.
pub fn area_integrand(man: &Manifold, imm: &Immersion, p: &[f64], d: u32) -> Result<f64> {
    let tau = coordinate_tau(man, imm, p)?;
    Ok(split_norms(man, &tau, d).0.sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct AreaValue {
    pub d: u32,
    /// Quadrature value of `∫ Θ dμ`.
    pub value: f64,
    /// Largest pointwise degree seen on the quadrature nodes.
    pub immersion_degree: u32,
    /// `d` is below the degree of the immersion, so the true `A_d` is infinite.
    pub divergent_by_theory: bool,
}

pub fn area_degree(man: &Manifold, imm: &Immersion, d: u32, grid: &QuadratureGrid) -> Result<AreaValue> {
    let mut deg = 0;
    let value = grid.integrate(|p| {
        let tau = coordinate_tau(man, imm, p)?;
        deg = deg.max(crate::multivector::mvector_degree(&tau, man.weights(), crate::immersion::DEGREE_EPS)?);
        Ok(split_norms(man, &tau, d).0.sqrt())
    })?;
    Ok(AreaValue { d, value, immersion_degree: deg, divergent_by_theory: d < deg })
}

/// Riemannian area of the immersion for the dilated metric `g_r`.
pub fn riemannian_area(man: &Manifold, imm: &Immersion, r: f64, grid: &QuadratureGrid) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Invalid(format!("dilation parameter must be positive, got {}", r)));
    }
    let gr = man.dilated(r)?;
    grid.integrate(|p| Ok(coordinate_tau(&gr, imm, p)?.norm()))
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingProbe {
    pub d: u32,
    pub r: Vec<f64>,
    /// `v(r) = r^{(d−m)/2} A(g_r)`.
    pub values: Vec<f64>,
    /// Fitted limit of `v₀ + c r^β` on the last three points; `+∞` when divergent.
    pub limit: f64,
    pub beta: Option<f64>,
    pub divergent: bool,
    /// Successive differences keep one sign over the whole sequence.
    pub monotone_tail: bool,
    /// `|v_k − v_{k−1}|` for consecutive values.
    pub cauchy_gaps: Vec<f64>,
}

/// Three-point fit of `v = v₀ + c r^β` on a geometric sequence of `r`.
pub fn extrapolate(r: &[f64], v: &[f64]) -> (f64, Option<f64>) {
    let k = v.len();
    if k < 3 {
        return (*v.last().unwrap_or(&f64::NAN), None);
    }
    let (v1, v2, v3) = (v[k - 3], v[k - 2], v[k - 1]);
    let d1 = v2 - v1;
    let d2 = v3 - v2;
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() || d1 == d2 {
        return (v3, None);
    }
    let q = r[k - 1] / r[k - 2];
    let ratio = d2 / d1;
    let beta = ratio.ln() / q.ln();
    (v3 + d2 * d2 / (d1 - d2), Some(beta))
}

pub fn scaling_limit_probe(
    man: &Manifold,
    imm: &Immersion,
    d: u32,
    grid: &QuadratureGrid,
    rs: &[f64],
) -> Result<ScalingProbe> {
    if rs.is_empty() || rs.iter().any(|&r| !(r > 0.0)) || rs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Invalid("r sequence must be positive and strictly decreasing".into()));
    }
    let m = imm.m() as f64;
    let mut values = Vec::with_capacity(rs.len());
    for &r in rs {
        let a = riemannian_area(man, imm, r, grid)?;
        values.push(r.powf((d as f64 - m) / 2.0) * a);
    }
    let gaps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone_tail = gaps.iter().all(|g| *g >= 0.0) || gaps.iter().all(|g| *g <= 0.0);
    let (limit, beta) = extrapolate(rs, &values);
    let k = gaps.len();
    let divergent = k >= 2 && gaps[k - 1] > 0.0 && gaps[k - 2] > 0.0 && gaps[k - 1] >= gaps[k - 2];
    Ok(ScalingProbe {
        d,
        r: rs.to_vec(),
        values,
        limit: if divergent { f64::INFINITY } else { limit },
        beta,
        divergent,
        monotone_tail,
        cauchy_gaps: gaps.iter().map(|g| g.abs()).collect(),
    })
}

/// `∫ Θ dμ` over grid points whose degree is below the immersion degree (trapezoid weights).
pub fn area_singular_set(man: &Manifold, imm: &Immersion, d: u32, grid: &UniformGrid) -> Result<f64> {
    let pts = grid.points();
    let degs = pts.iter().map(|p| pointwise_degree(man, imm, p)).collect::<Result<Vec<_>>>()?;
    let top = degs.iter().copied().max().unwrap_or(0);
    let mut terms = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        if degs[i] >= top {
            continue;
        }
        let idx = grid.unflatten(i);
        let mut w = 1.0;
        for (ax, &k) in idx.iter().enumerate() {
            let (a, b) = grid.domain[ax];
            let c = grid.counts[ax];
            let h = if c > 1 { (b - a) / (c - 1) as f64 } else { b - a };
            w *= if c > 1 && (k == 0 || k == c - 1) { 0.5 * h } else { h };
        }
        terms.push(w * area_integrand(man, imm, p, d)?);
    }
    Ok(pairwise_sum(&terms))
}
