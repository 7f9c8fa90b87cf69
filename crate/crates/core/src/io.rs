//! JSON input formats for manifolds, immersions and variation fields.
//!
//! ```json
//! {"coordinates": ["x", "y", "t"],
//!  "frame": [{"degree": 1, "components": ["1", "0", "-y/2"]}, …],
//!  "metric": "frame-orthonormal"}
//! ```
//!
//! `metric` may also be `{"matrix": [[…]]}` (coordinate metric) or
//! `{"frame_gram": [[…]]}` (Gram matrix of the frame fields).

use serde::Deserialize;

use crate::admissibility::{FieldFrame, VariationField};
use crate::error::{Error, Result};
use crate::exprcore::{parse_with, Expr};
use crate::immersion::Immersion;
use crate::manifold::{AdaptedFrame, Manifold, MetricField};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameFieldSpec {
    pub degree: u32,
    pub components: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Named(String),
    Matrix { matrix: Vec<Vec<String>> },
    FrameGram { frame_gram: Vec<Vec<String>> },
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec::Named("frame-orthonormal".into())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub coordinates: Vec<String>,
    pub frame: Vec<FrameFieldSpec>,
    #[serde(default)]
    pub metric: MetricSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionSpec {
    pub params: Vec<String>,
    pub components: Vec<String>,
    pub domain: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub frame: FieldFrame,
    pub components: Vec<String>,
    #[serde(default)]
    pub support: Option<Vec<[f64; 2]>>,
}

fn spec_err(field: impl Into<String>, e: impl std::fmt::Display) -> Error {
    Error::Spec { field: field.into(), msg: e.to_string() }
}

fn json<T: for<'de> Deserialize<'de>>(src: &str, what: &str) -> Result<T> {
    serde_json::from_str(src).map_err(|e| spec_err(what, e))
}

fn exprs(src: &[String], vars: &[String], field: &str) -> Result<Vec<Expr>> {
    src.iter()
        .enumerate()
        .map(|(i, s)| parse_with(s, vars).map_err(|e| spec_err(format!("{}[{}]", field, i), e)))
        .collect()
}

fn matrix(src: &[Vec<String>], vars: &[String], field: &str) -> Result<Vec<Vec<Expr>>> {
    let n = vars.len();
    if src.len() != n || src.iter().any(|r| r.len() != n) {
        return Err(spec_err(field, format!("expected a {}×{} matrix", n, n)));
    }
    src.iter().enumerate().map(|(i, r)| exprs(r, vars, &format!("{}[{}]", field, i))).collect()
}

pub fn metric_from_spec(spec: &MetricSpec, coords: &[String]) -> Result<MetricField> {
    match spec {
        MetricSpec::Named(s) if s == "frame-orthonormal" => Ok(MetricField::FrameOrthonormal),
        MetricSpec::Named(s) if s == "euclidean" => {
            let n = coords.len();
            Ok(MetricField::Coordinate(
                (0..n).map(|i| (0..n).map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 })).collect()).collect(),
            ))
        }
        MetricSpec::Named(s) => Err(spec_err("metric", format!("unknown metric `{}`", s))),
        MetricSpec::Matrix { matrix: m } => Ok(MetricField::Coordinate(matrix(m, coords, "metric.matrix")?)),
        MetricSpec::FrameGram { frame_gram: m } => Ok(MetricField::FrameGram(matrix(m, coords, "metric.frame_gram")?)),
    }
}

pub fn manifold_from_spec(spec: &ManifoldSpec) -> Result<Manifold> {
    let n = spec.coordinates.len();
    if spec.frame.len() != n {
        return Err(spec_err("frame", format!("{} frame fields for {} coordinates", spec.frame.len(), n)));
    }
    let mut fields = Vec::with_capacity(n);
    for (i, f) in spec.frame.iter().enumerate() {
        if f.components.len() != n {
            return Err(spec_err(format!("frame[{}].components", i), format!("expected {} components", n)));
        }
        fields.push(exprs(&f.components, &spec.coordinates, &format!("frame[{}].components", i))?);
    }
    let weights = spec.frame.iter().map(|f| f.degree).collect();
    let frame = AdaptedFrame::new(spec.coordinates.clone(), fields, weights).map_err(|e| spec_err("frame", e))?;
    let metric = metric_from_spec(&spec.metric, &spec.coordinates)?;
    Manifold::new(frame, metric).map_err(|e| spec_err("metric", e))
}

pub fn manifold_from_json(src: &str) -> Result<Manifold> {
    manifold_from_spec(&json(src, "manifold")?)
}

pub fn metric_from_json(src: &str, coords: &[String]) -> Result<MetricField> {
    metric_from_spec(&json(src, "metric")?, coords)
}

pub fn immersion_from_spec(spec: &ImmersionSpec) -> Result<Immersion> {
    let comps = exprs(&spec.components, &spec.params, "components")?;
    let domain = spec.domain.iter().map(|d| (d[0], d[1])).collect();
    Immersion::new(spec.params.clone(), comps, domain).map_err(|e| spec_err("immersion", e))
}

pub fn immersion_from_json(src: &str) -> Result<Immersion> {
    immersion_from_spec(&json(src, "immersion")?)
}

pub fn field_from_spec(spec: &FieldSpec, params: &[String]) -> Result<VariationField> {
    let comps = exprs(&spec.components, params, "components")?;
    let mut f = VariationField::new(spec.frame, comps);
    f.support = spec.support.as_ref().map(|s| s.iter().map(|d| (d[0], d[1])).collect());
    Ok(f)
}

pub fn field_from_json(src: &str, params: &[String]) -> Result<VariationField> {
    field_from_spec(&json(src, "field")?, params)
}
