//! Parametrized immersions and their pointwise degree.

use crate::error::{Error, Result};
use crate::exprcore::{parse_with, Expr, Scalar, Tape};
use crate::geom::{PointData, TangentBasis};
use crate::jet::Jet;
use crate::linalg::Mat;
use crate::manifold::Manifold;
use crate::multivector::{mvector_degree, MVector};

/// Relative threshold for deciding which tangent coefficients count toward the degree.
pub const DEGREE_EPS: f64 = 1e-9;

/// `Φ: Ω ⊂ ℝ^m → N` given by component expressions over named parameters.
#[derive(Clone, Debug)]
pub struct Immersion {
    pub params: Vec<String>,
    pub components: Vec<Expr>,
    pub domain: Vec<(f64, f64)>,
    tape: Tape,
}

impl Immersion {
    pub fn new(params: Vec<String>, components: Vec<Expr>, domain: Vec<(f64, f64)>) -> Result<Immersion> {
        if params.is_empty() {
            return Err(Error::Invalid("immersion needs at least one parameter".into()));
        }
        if domain.len() != params.len() {
            return Err(Error::Dimension(format!("{} domain intervals for {} parameters", domain.len(), params.len())));
        }
        if let Some((a, b)) = domain.iter().find(|(a, b)| !(a < b)) {
            return Err(Error::Invalid(format!("empty domain interval [{}, {}]", a, b)));
        }
        if components.len() < params.len() {
            return Err(Error::Dimension("more parameters than target dimensions".into()));
        }
        if let Some(c) = components.iter().find(|c| c.arity() > params.len()) {
            return Err(Error::Invalid(format!("component `{}` uses an unknown parameter", c)));
        }
        let tape = Tape::compile(&components);
        Ok(Immersion { params, components, domain, tape })
    }

    /// Parse component strings over the given parameter names.
    pub fn parse(params: &[&str], components: &[&str], domain: Vec<(f64, f64)>) -> Result<Immersion> {
        let names: Vec<String> = params.iter().map(|s| s.to_string()).collect();
        let comps = components.iter().map(|c| parse_with(c, &names)).collect::<Result<Vec<_>>>()?;
        Immersion::new(names, comps, domain)
    }

    pub fn m(&self) -> usize {
        self.params.len()
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, p: &[f64]) -> Vec<f64> {
        self.tape.eval_f64(p)
    }

    pub fn eval_jets(&self, params: &[Jet]) -> Vec<Jet> {
        let proto = params[0].constant_like(0.0);
        self.tape.eval(params, &proto)
    }

    /// Coordinate indices `l` with `Φ^l = p_a`, one per parameter, if every parameter appears bare.
    pub fn graph_coords(&self) -> Option<Vec<usize>> {
        (0..self.m())
            .map(|a| self.components.iter().position(|c| c.as_var() == Some(a)))
            .collect()
    }

    /// Precompose with `p = ψ(q)`, where `psi` is written over the new parameters.
    pub fn reparametrize(&self, new_params: Vec<String>, psi: &[Expr], domain: Vec<(f64, f64)>) -> Result<Immersion> {
        if psi.len() != self.m() {
            return Err(Error::Dimension("reparametrization must give every old parameter".into()));
        }
        let comps = self.components.iter().map(|c| c.substitute(psi)).collect();
        Immersion::new(new_params, comps, domain)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(&self.domain).all(|(x, (a, b))| *x >= *a && *x <= *b)
    }
}

/// Uniform grid of points over a box, endpoints included.
#[derive(Clone, Debug)]
pub struct UniformGrid {
    pub counts: Vec<usize>,
    pub domain: Vec<(f64, f64)>,
}

impl UniformGrid {
    pub fn new(domain: &[(f64, f64)], counts: &[usize]) -> Result<UniformGrid> {
        if counts.len() != domain.len() || counts.iter().any(|&c| c < 2) {
            return Err(Error::Invalid("grid needs at least 2 points per parameter".into()));
        }
        Ok(UniformGrid { counts: counts.to_vec(), domain: domain.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of the flat position `i` (last axis fastest).
    pub fn unflatten(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.counts.len()];
        for ax in (0..self.counts.len()).rev() {
            idx[ax] = i % self.counts[ax];
            i /= self.counts[ax];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.unflatten(i)
            .iter()
            .zip(&self.counts)
            .zip(&self.domain)
            .map(|((&k, &c), &(a, b))| a + (b - a) * k as f64 / (c - 1) as f64)
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Flat indices of the axis neighbours of `i`.
    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        let idx = self.unflatten(i);
        let mut out = Vec::new();
        for ax in 0..idx.len() {
            for d in [-1i64, 1] {
                let k = idx[ax] as i64 + d;
                if k >= 0 && (k as usize) < self.counts[ax] {
                    let mut j = idx.clone();
                    j[ax] = k as usize;
                    out.push(self.flatten(&j));
                }
            }
        }
        out
    }
}

/// Tangent m-vector of a μ-orthonormal tangent basis in the orthonormal adapted frame.
pub fn tangent_mvector(man: &Manifold, imm: &Immersion, p: &[f64]) -> Result<MVector> {
    Ok(PointData::new(man, imm, p, &TangentBasis::Orthonormal, 1, false)?.tau())
}

/// `∂_1Φ ∧ … ∧ ∂_mΦ` in the orthonormal adapted frame.
pub fn coordinate_mvector(man: &Manifold, imm: &Immersion, p: &[f64]) -> Result<MVector> {
    Ok(PointData::new(man, imm, p, &TangentBasis::Coordinate, 1, false)?.tau())
}

pub fn pointwise_degree(man: &Manifold, imm: &Immersion, p: &[f64]) -> Result<u32> {
    mvector_degree(&tangent_mvector(man, imm, p)?, man.weights(), DEGREE_EPS)
}

pub fn induced_metric(man: &Manifold, imm: &Immersion, p: &[f64]) -> Result<Mat<f64>> {
    let pd = PointData::new(man, imm, p, &TangentBasis::Coordinate, 1, false)?;
    Ok(crate::geom::values(&pd.mu))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentFlag {
    /// `m̃_α` for `α = 1..s`.
    pub mtilde: Vec<usize>,
    pub gromov_degree: u32,
}

pub fn tangent_flag(man: &Manifold, imm: &Immersion, p: &[f64]) -> Result<TangentFlag> {
    let pd = PointData::new(man, imm, p, &TangentBasis::Orthonormal, 1, false)?;
    let mtilde = pd.tangent_flag();
    let mut deg = 0;
    let mut prev = 0;
    for (j, &mt) in mtilde.iter().enumerate() {
        deg += (j as u32 + 1) * (mt - prev) as u32;
        prev = mt;
    }
    Ok(TangentFlag { mtilde, gromov_degree: deg })
}

#[derive(Clone, Debug)]
pub struct DegreeScan {
    /// Maximum degree over the grid.
    pub degree: u32,
    pub points: Vec<Vec<f64>>,
    pub degrees: Vec<u32>,
    /// Points of degree below `degree`.
    pub singular: Vec<bool>,
    /// No grid point has a degree above all of its neighbours.
    pub semicontinuity_ok: bool,
}

impl DegreeScan {
    pub fn singular_count(&self) -> usize {
        self.singular.iter().filter(|&&s| s).count()
    }
}

pub fn degree_scan(man: &Manifold, imm: &Immersion, grid: &UniformGrid) -> Result<DegreeScan> {
    let points = grid.points();
    let degrees = points.iter().map(|p| pointwise_degree(man, imm, p)).collect::<Result<Vec<_>>>()?;
    let degree = *degrees.iter().max().unwrap();
    let singular: Vec<bool> = degrees.iter().map(|&d| d < degree).collect();
    let semicontinuity_ok = (0..points.len()).all(|i| {
        let nb = grid.neighbours(i);
        nb.is_empty() || degrees[i] <= nb.iter().map(|&j| degrees[j]).max().unwrap()
    });
    Ok(DegreeScan { degree, points, degrees, singular, semicontinuity_ok })
}
