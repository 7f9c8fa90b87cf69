//! Built-in manifolds and immersions.
//!
//! Entries are addressed as `name` or `name:key=value,…`, for example
//! `engel-graph:theta=x+0.3*y` or `h1xh1-surface:u=s^2,lambda=2`.

mod contact;
mod engel;
mod plane;

pub use contact::*;
pub use engel::*;
pub use plane::*;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::exprcore::{parse, parse_with, Expr};
use crate::immersion::Immersion;
use crate::manifold::{AdaptedFrame, Manifold, MetricField};

pub const MANIFOLDS: [&str; 4] = ["h1xh1", "rototrans", "engel-structure", "engel-group"];
pub const IMMERSIONS: [&str; 5] = ["h1xh1-surface", "rt-graph", "engel-graph", "engel-hypersurface", "isolated-plane"];

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: String,
    pub manifold: Manifold,
    pub immersion: Option<Immersion>,
    /// Parameter values actually used, defaults included.
    pub params: BTreeMap<String, String>,
}

/// Split `name:k=v,k=v` into the name and its parameters.
pub fn parse_spec(spec: &str) -> Result<(String, BTreeMap<String, String>)> {
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n.trim(), r),
        None => (spec.trim(), ""),
    };
    let mut params = BTreeMap::new();
    for part in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Spec { field: "catalog".into(), msg: format!("expected key=value, got `{}`", part) })?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok((name.to_string(), params))
}

fn strs(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn field_exprs(coords: &[&str], src: &[[&str; 6]]) -> Vec<Vec<Expr>> {
    src.iter().map(|f| f[..coords.len()].iter().map(|s| parse(s, coords).unwrap()).collect()).collect()
}

fn number(params: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => parse(v, &[])
            .map(|e| e.eval(&[]))
            .map_err(|e| Error::Spec { field: key.into(), msg: e.to_string() }),
    }
}

fn diag(values: &[Expr]) -> Vec<Vec<Expr>> {
    (0..values.len())
        .map(|i| (0..values.len()).map(|j| if i == j { values[i].clone() } else { Expr::zero() }).collect())
        .collect()
}

/// Product of two Heisenberg groups with `g(Z,Z) = λ`, `g(Z',Z') = μ`.
pub fn h1xh1(lambda: f64, mu: f64) -> Result<Manifold> {
    if lambda <= 0.0 || mu <= 0.0 {
        return Err(Error::Invalid("lambda and mu must be positive".into()));
    }
    let c = ["x", "y", "z", "xp", "yp", "zp"];
    let f = field_exprs(
        &c,
        &[
            ["1", "0", "-y/2", "0", "0", "0"],
            ["0", "1", "x/2", "0", "0", "0"],
            ["0", "0", "0", "1", "0", "-yp/2"],
            ["0", "0", "0", "0", "1", "xp/2"],
            ["0", "0", "1", "0", "0", "0"],
            ["0", "0", "0", "0", "0", "1"],
        ],
    );
    let frame = AdaptedFrame::new(strs(&c), f, vec![1, 1, 1, 1, 2, 2])?;
    let g = diag(&[1.0, 1.0, 1.0, 1.0, lambda, mu].map(Expr::constant));
    Manifold::new(frame, MetricField::FrameGram(g))
}

/// Roto-translational group with `X = cosθ∂x + sinθ∂y`, `Y = ∂θ`, `T = [X,Y]`.
pub fn rototrans() -> Manifold {
    let c = ["x", "y", "theta"];
    let f = field_exprs(
        &c,
        &[
            ["cos(theta)", "sin(theta)", "0", "", "", ""],
            ["0", "0", "1", "", "", ""],
            ["sin(theta)", "-cos(theta)", "0", "", "", ""],
        ],
    );
    let frame = AdaptedFrame::new(strs(&c), f, vec![1, 1, 2]).unwrap();
    Manifold::new(frame, MetricField::FrameOrthonormal).unwrap()
}

/// Engel structure on `(x, y, θ, k)`.
pub fn engel_structure(euclidean: bool) -> Manifold {
    let c = ["x", "y", "theta", "k"];
    let f = field_exprs(
        &c,
        &[
            ["cos(theta)", "sin(theta)", "k", "0", "", ""],
            ["0", "0", "0", "1", "", ""],
            ["0", "0", "-1", "0", "", ""],
            ["-sin(theta)", "cos(theta)", "0", "0", "", ""],
        ],
    );
    let frame = AdaptedFrame::new(strs(&c), f, vec![1, 1, 2, 3]).unwrap();
    let metric = if euclidean { MetricField::Coordinate(diag(&[Expr::one(), Expr::one(), Expr::one(), Expr::one()])) } else { MetricField::FrameOrthonormal };
    Manifold::new(frame, metric).unwrap()
}

/// Engel group on `ℝ^4` with `X_2 = ∂_2 + x_1∂_3 + x_3∂_4`.
pub fn engel_group() -> Manifold {
    let c = ["x1", "x2", "x3", "x4"];
    let f = field_exprs(
        &c,
        &[
            ["1", "0", "0", "0", "", ""],
            ["0", "1", "x1", "x3", "", ""],
            ["0", "0", "1", "0", "", ""],
            ["0", "0", "0", "1", "", ""],
        ],
    );
    let frame = AdaptedFrame::new(strs(&c), f, vec![1, 1, 2, 3]).unwrap();
    Manifold::new(frame, MetricField::FrameOrthonormal).unwrap()
}

/// `κ = X_1(θ) = cosθ θ_x + sinθ θ_y` for a function `θ(x, y)`.
pub fn engel_kappa(theta: &Expr) -> Expr {
    engel_kappa_along(theta, theta)
}

/// `X̄_1(f) = cosθ f_x + sinθ f_y` along the graph of `θ`.
pub fn engel_kappa_along(theta: &Expr, f: &Expr) -> Expr {
    theta.cos().mul_expr(&f.diff(0)).add_expr(&theta.sin().mul_expr(&f.diff(1)))
}

/// `(x, y) ↦ (x, y, θ, X_1(θ))` over `[0,1]²`.
pub fn engel_graph(theta: &Expr) -> Result<Immersion> {
    let x = Expr::var(0, "x");
    let y = Expr::var(1, "y");
    Immersion::new(strs(&["x", "y"]), vec![x, y, theta.clone(), engel_kappa(theta)], vec![(0.0, 1.0); 2])
}

fn euclidean_flag(params: &BTreeMap<String, String>) -> Result<bool> {
    match params.get("metric").map(|s| s.as_str()) {
        None | Some("frame-orthonormal") | Some("frame") => Ok(false),
        Some("euclidean") => Ok(true),
        Some(other) => Err(Error::Spec { field: "metric".into(), msg: format!("unknown metric `{}`", other) }),
    }
}

fn expr_param(params: &BTreeMap<String, String>, key: &str, default: &str, vars: &[&str]) -> Result<Expr> {
    let src = params.get(key).map(|s| s.as_str()).unwrap_or(default);
    let names: Vec<String> = strs(vars);
    parse_with(src, &names).map_err(|e| Error::Spec { field: key.into(), msg: e.to_string() })
}

fn check_keys(params: &BTreeMap<String, String>, allowed: &[&str]) -> Result<()> {
    for k in params.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Spec { field: k.clone(), msg: format!("unknown parameter; expected one of {:?}", allowed) });
        }
    }
    Ok(())
}

/// Look up a catalog entry by its spec string.
pub fn builtin(spec: &str) -> Result<CatalogEntry> {
    let (name, params) = parse_spec(spec)?;
    let mut used = params.clone();
    let mut default = |k: &str, v: &str| {
        used.entry(k.to_string()).or_insert_with(|| v.to_string());
    };
    let (manifold, immersion) = match name.as_str() {
        "h1xh1" => {
            check_keys(&params, &["lambda", "mu"])?;
            default("lambda", "1");
            default("mu", "1");
            (h1xh1(number(&params, "lambda", 1.0)?, number(&params, "mu", 1.0)?)?, None)
        }
        "rototrans" => {
            check_keys(&params, &[])?;
            (rototrans(), None)
        }
        "engel-structure" => {
            check_keys(&params, &["metric"])?;
            default("metric", "frame-orthonormal");
            (engel_structure(euclidean_flag(&params)?), None)
        }
        "engel-group" => {
            check_keys(&params, &[])?;
            (engel_group(), None)
        }
        "h1xh1-surface" => {
            check_keys(&params, &["u", "lambda", "mu"])?;
            default("u", "s^2");
            default("lambda", "1");
            default("mu", "1");
            let u = expr_param(&params, "u", "s^2", &["s", "t"])?;
            let s = Expr::var(0, "s");
            let t = Expr::var(1, "t");
            let imm = Immersion::new(
                strs(&["s", "t"]),
                vec![s, Expr::zero(), u.clone(), Expr::zero(), t, u],
                vec![(-1.0, 1.0); 2],
            )?;
            (h1xh1(number(&params, "lambda", 1.0)?, number(&params, "mu", 1.0)?)?, Some(imm))
        }
        "rt-graph" => {
            check_keys(&params, &["u"])?;
            default("u", "x");
            let u = expr_param(&params, "u", "x", &["x", "y"])?;
            let imm = Immersion::new(
                strs(&["x", "y"]),
                vec![Expr::var(0, "x"), Expr::var(1, "y"), u],
                vec![(0.0, 1.0); 2],
            )?;
            (rototrans(), Some(imm))
        }
        "engel-graph" => {
            check_keys(&params, &["theta", "metric"])?;
            default("theta", "x");
            default("metric", "frame-orthonormal");
            let theta = expr_param(&params, "theta", "x", &["x", "y"])?;
            (engel_structure(euclidean_flag(&params)?), Some(engel_graph(&theta)?))
        }
        "engel-hypersurface" => {
            check_keys(&params, &["w", "metric"])?;
            default("w", "0.3*x*y + 0.2*theta^2 + 0.1*y");
            default("metric", "frame-orthonormal");
            let w = expr_param(&params, "w", "0.3*x*y + 0.2*theta^2 + 0.1*y", &["x", "y", "theta"])?;
            let v = Expr::vars(&["x", "y", "theta"]);
            let imm = Immersion::new(
                strs(&["x", "y", "theta"]),
                vec![v[0].clone(), v[1].clone(), v[2].clone(), w],
                vec![(0.0, 1.0); 3],
            )?;
            (engel_structure(euclidean_flag(&params)?), Some(imm))
        }
        "isolated-plane" => {
            check_keys(&params, &[])?;
            let imm = Immersion::parse(&["v", "w"], &["v", "0", "w", "0"], vec![(-1.0, 1.0); 2])?;
            (engel_group(), Some(imm))
        }
        other => return Err(Error::UnknownCatalog(other.to_string())),
    };
    Ok(CatalogEntry { name, manifold, immersion, params: used })
}
