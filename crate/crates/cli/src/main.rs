use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fixdeg::admissibility::{
    assemble_adapted, is_strongly_regular, point_data, residual, system_shape, FieldFrame, VariationField,
};
use fixdeg::area::{area_degree, scaling_limit_probe, DEFAULT_QUADRATURE_ORDER};
use fixdeg::catalog::{self, builtin};
use fixdeg::exprcore::Expr;
use fixdeg::geom::TangentBasis;
use fixdeg::immersion::{degree_scan, Immersion, UniformGrid};
use fixdeg::io;
use fixdeg::manifold::{Manifold, MetricField};
use fixdeg::quadrature::QuadratureGrid;
use fixdeg::variation::{first_variation, mean_curvature};

mod verify;

#[derive(Parser)]
#[command(name = "fixdeg", version, about = "Fixed-degree submanifold geometry in graded manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Clone, Debug)]
struct Opts {
    /// Catalog entry, `NAME[:key=expr,…]`.
    #[arg(long, global = true)]
    catalog: Option<String>,
    /// Manifold JSON file.
    #[arg(long, global = true)]
    manifold: Option<PathBuf>,
    /// Immersion JSON file.
    #[arg(long, global = true)]
    immersion: Option<PathBuf>,
    /// `frame-orthonormal`, `euclidean` or a metric JSON file.
    #[arg(long, global = true)]
    metric: Option<String>,
    /// Degree `d`, or `auto` for the degree of the immersion.
    #[arg(long, global = true, default_value = "auto")]
    degree: String,
    /// Points (or Gauss nodes) per axis, e.g. `32x32`.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Decreasing dilation parameters, e.g. `1e-1,1e-2,1e-3`.
    #[arg(long, global = true, value_delimiter = ',')]
    r_seq: Option<Vec<f64>>,
    /// Variation field JSON file.
    #[arg(long, global = true)]
    field: Option<PathBuf>,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Tolerance override `NAME=VALUE` (fd, fd-step, isolation).
    #[arg(long = "tol", global = true)]
    tol: Vec<String>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Pointwise degree on a uniform grid.
    DegreeScan,
    /// Degree-d area by Gauss quadrature.
    Area,
    /// `r^{(d−m)/2}` times the Riemannian area of the dilated metrics.
    GrLimit,
    /// Residuals of the admissibility system for a variation field.
    Admissibility,
    /// Strong-regularity test of the admissibility system.
    Regularity,
    /// Mean curvature components on a uniform grid.
    MeanCurvature,
    /// First variation of the degree-d area along a field.
    FirstVariation {
        /// Compare against a central difference of the area.
        #[arg(long)]
        fd_check: bool,
    },
    /// Euler–Lagrange residual of an Engel graph.
    ElResidual,
    /// Run the regression suite.
    Verify,
}

#[derive(Clone, Debug)]
struct Tolerances {
    fd: f64,
    fd_step: f64,
    isolation: f64,
}

impl Tolerances {
    fn parse(items: &[String]) -> Result<Tolerances> {
        let mut t = Tolerances { fd: 1e-4, fd_step: 1e-4, isolation: 1e-3 };
        for it in items {
            let (k, v) = it.split_once('=').ok_or_else(|| anyhow!("--tol: expected NAME=VALUE, got `{}`", it))?;
            let v: f64 = v.trim().parse().with_context(|| format!("--tol {}: not a number", k))?;
            match k.trim() {
                "fd" => t.fd = v,
                "fd-step" => t.fd_step = v,
                "isolation" => t.isolation = v,
                other => bail!("--tol: unknown tolerance `{}` (expected fd, fd-step, isolation)", other),
            }
        }
        Ok(t)
    }
}

/// Resolved inputs of a run.
struct Run {
    opts: Opts,
    label: String,
    params: BTreeMap<String, String>,
    manifold: Manifold,
    immersion: Option<Immersion>,
    tol: Tolerances,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

impl Run {
    fn load(opts: &Opts) -> Result<Run> {
        let tol = Tolerances::parse(&opts.tol)?;
        let (label, params, mut manifold, mut immersion) = match (&opts.catalog, &opts.manifold) {
            (Some(_), Some(_)) => bail!("--catalog and --manifold are mutually exclusive"),
            (Some(c), None) => {
                let e = builtin(c)?;
                (e.name, e.params, e.manifold, e.immersion)
            }
            (None, Some(m)) => {
                let man = io::manifold_from_json(&read(m)?).with_context(|| format!("in {}", m.display()))?;
                (m.display().to_string(), BTreeMap::new(), man, None)
            }
            (None, None) => bail!("one of --catalog or --manifold is required"),
        };
        if let Some(path) = &opts.immersion {
            immersion = Some(io::immersion_from_json(&read(path)?).with_context(|| format!("in {}", path.display()))?);
        }
        if let Some(imm) = &immersion {
            if imm.n() != manifold.n() {
                bail!("immersion has {} components but the manifold has dimension {}", imm.n(), manifold.n());
            }
        }
        if let Some(m) = &opts.metric {
            let metric = match m.as_str() {
                "frame-orthonormal" => MetricField::FrameOrthonormal,
                "euclidean" => io::metric_from_json("\"euclidean\"", &manifold.frame.coords)?,
                path => io::metric_from_json(&read(Path::new(path))?, &manifold.frame.coords)
                    .with_context(|| format!("in {}", path))?,
            };
            manifold = manifold.with_metric(metric)?;
        }
        Ok(Run { opts: opts.clone(), label, params, manifold, immersion, tol })
    }

    fn immersion(&self) -> Result<&Immersion> {
        self.immersion.as_ref().ok_or_else(|| anyhow!("this command needs an immersion (--immersion or a catalog surface)"))
    }

    fn counts(&self, default: usize) -> Result<Vec<usize>> {
        let m = self.immersion()?.m();
        let Some(g) = &self.opts.grid else { return Ok(vec![default; m]) };
        let v = g
            .split(['x', 'X'])
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| anyhow!("--grid: expected N or NxM…, got `{}`", g))?;
        match v.len() {
            1 => Ok(vec![v[0]; m]),
            k if k == m => Ok(v),
            k => bail!("--grid: {} axes given, the immersion has {} parameters", k, m),
        }
    }

    fn quadrature(&self) -> Result<QuadratureGrid> {
        Ok(QuadratureGrid::new(&self.immersion()?.domain, &self.counts(DEFAULT_QUADRATURE_ORDER)?)?)
    }

    fn samples(&self, default: usize) -> Result<UniformGrid> {
        let c = self.counts(default)?;
        if c.iter().any(|&k| k < 1) {
            bail!("--grid: counts must be positive");
        }
        Ok(UniformGrid::new(&self.immersion()?.domain, &c)?)
    }

    fn degree(&self) -> Result<u32> {
        if self.opts.degree == "auto" {
            let imm = self.immersion()?;
            let g = UniformGrid::new(&imm.domain, &vec![9; imm.m()])?;
            return Ok(degree_scan(&self.manifold, imm, &g)?.degree);
        }
        self.opts.degree.parse().map_err(|_| anyhow!("--degree: expected an integer or `auto`, got `{}`", self.opts.degree))
    }

    fn field(&self) -> Result<VariationField> {
        let path = self.opts.field.as_ref().ok_or_else(|| anyhow!("--field FILE is required"))?;
        let imm = self.immersion()?;
        Ok(io::field_from_json(&read(path)?, &imm.params).with_context(|| format!("in {}", path.display()))?)
    }

    fn header(&self) -> Value {
        json!({"source": self.label, "params": self.params, "metric": self.manifold.metric.label()})
    }
}

fn grid_label(g: &[usize]) -> String {
    g.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("x")
}

fn num(x: f64) -> String {
    format!("{}", x)
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn emit(opts: &Opts, text: String) -> Result<()> {
    match &opts.output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{}", text);
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn point_cols(p: &[f64]) -> Vec<String> {
    p.iter().map(|x| num(*x)).collect()
}

fn degree_scan_cmd(run: &Run) -> Result<String> {
    let imm = run.immersion()?;
    let grid = run.samples(16)?;
    let s = degree_scan(&run.manifold, imm, &grid)?;
    if run.opts.format == Some(Format::Csv) {
        let mut header: Vec<&str> = imm.params.iter().map(|s| s.as_str()).collect();
        header.extend(["degree", "singular"]);
        let rows = (0..s.points.len())
            .map(|i| {
                let mut r = point_cols(&s.points[i]);
                r.push(s.degrees[i].to_string());
                r.push(s.singular[i].to_string());
                r
            })
            .collect::<Vec<_>>();
        return Ok(csv_table(&header, &rows));
    }
    let points: Vec<Value> = (0..s.points.len())
        .map(|i| json!({"point": s.points[i], "degree": s.degrees[i], "singular": s.singular[i]}))
        .collect();
    Ok(pretty(&json!({
        "input": run.header(),
        "grid": grid_label(&grid.counts),
        "degree": s.degree,
        "singular_count": s.singular_count(),
        "semicontinuity_ok": s.semicontinuity_ok,
        "points": points,
    })))
}

fn area_cmd(run: &Run) -> Result<String> {
    let imm = run.immersion()?;
    let d = run.degree()?;
    let q = run.quadrature()?;
    let a = area_degree(&run.manifold, imm, d, &q)?;
    let grid = grid_label(&q.orders);
    if run.opts.format == Some(Format::Csv) {
        return Ok(csv_table(
            &["d", "value", "grid", "metric", "divergent_by_theory"],
            &[vec![d.to_string(), num(a.value), grid, run.manifold.metric.label(), a.divergent_by_theory.to_string()]],
        ));
    }
    Ok(pretty(&json!({
        "d": d,
        "value": a.value,
        "grid": grid,
        "metric": run.manifold.metric.label(),
        "immersion_degree": a.immersion_degree,
        "divergent_by_theory": a.divergent_by_theory,
        "input": run.header(),
    })))
}

fn gr_limit_cmd(run: &Run) -> Result<String> {
    let imm = run.immersion()?;
    let d = run.degree()?;
    let q = run.quadrature()?;
    let rs = run.opts.r_seq.clone().unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5]);
    let p = scaling_limit_probe(&run.manifold, imm, d, &q, &rs)?;
    if run.opts.format == Some(Format::Json) {
        return Ok(pretty(&json!({
            "d": d,
            "grid": grid_label(&q.orders),
            "r": p.r,
            "values": p.values,
            "limit": if p.limit.is_finite() { json!(p.limit) } else { json!("inf") },
            "beta": p.beta,
            "divergent": p.divergent,
            "monotone_tail": p.monotone_tail,
            "input": run.header(),
        })));
    }
    let rows: Vec<Vec<String>> = p.r.iter().zip(&p.values).map(|(r, v)| vec![num(*r), num(*v)]).collect();
    Ok(csv_table(&["r", "v"], &rows))
}

fn admissibility_cmd(run: &Run) -> Result<String> {
    let imm = run.immersion()?;
    let d = run.degree()?;
    let field = run.field()?;
    let grid = run.samples(5)?;
    let pts = grid.points();
    let shape = system_shape(&run.manifold, imm, &pts, d)?;
    let mut out = Vec::new();
    for p in &pts {
        let pd = point_data(&run.manifold, imm, p, &TangentBasis::Orthonormal)?;
        let sys = assemble_adapted(&pd, &shape);
        let r = residual(&pd, &sys, &field)?;
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.push((p.clone(), r, norm));
    }
    let max = out.iter().map(|o| o.2).fold(0.0, f64::max);
    if run.opts.format == Some(Format::Csv) {
        let mut header: Vec<&str> = imm.params.iter().map(|s| s.as_str()).collect();
        header.push("residual_norm");
        let rows = out
            .iter()
            .map(|(p, _, n)| {
                let mut r = point_cols(p);
                r.push(num(*n));
                r
            })
            .collect::<Vec<_>>();
        return Ok(csv_table(&header, &rows));
    }
    let points: Vec<Value> = out.iter().map(|(p, r, n)| json!({"point": p, "residual": r, "norm": n})).collect();
    Ok(pretty(&json!({
        "d": d,
        "ell": shape.ell,
        "rho": shape.rho,
        "k": shape.k,
        "iota0": shape.iota0,
        "max_norm": max,
        "points": points,
        "input": run.header(),
    })))
}

fn regularity_cmd(run: &Run) -> Result<String> {
    let imm = run.immersion()?;
    let d = run.degree()?;
    let grid = run.samples(5)?;
    let pts = grid.points();
    let shape = system_shape(&run.manifold, imm, &pts, d)?;
    let mut rows = Vec::new();
    for p in &pts {
        let pd = point_data(&run.manifold, imm, p, &TangentBasis::Orthonormal)?;
        let r = is_strongly_regular(&assemble_adapted(&pd, &shape));
        let smin = if r.ell == 0 { None } else { r.singular_values.last().copied() };
        rows.push((r, smin));
    }
    if run.opts.format == Some(Format::Csv) {
        let mut header: Vec<&str> = imm.params.iter().map(|s| s.as_str()).collect();
        header.extend(["rank", "ell", "flag", "sigma_min"]);
        let t = rows
            .iter()
            .map(|(r, s)| {
                let mut c = point_cols(&r.point);
                c.extend([r.rank.to_string(), r.ell.to_string(), r.flag.to_string(), s.map(num).unwrap_or_default()]);
                c
            })
            .collect::<Vec<_>>();
        return Ok(csv_table(&header, &t));
    }
    let points: Vec<Value> = rows
        .iter()
        .map(|(r, s)| json!({"point": r.point, "rank": r.rank, "ell": r.ell, "flag": r.flag, "sigma_min": s}))
        .collect();
    Ok(pretty(&json!({
        "d": d,
        "ell": shape.ell,
        "k": shape.k,
        "all_regular": rows.iter().all(|(r, _)| r.flag),
        "points": points,
        "input": run.header(),
    })))
}

fn mean_curvature_cmd(run: &Run) -> Result<String> {
    let imm = run.immersion()?;
    let d = run.degree()?;
    let grid = run.samples(5)?;
    let hs = grid.points().iter().map(|p| mean_curvature(&run.manifold, imm, p, d)).collect::<fixdeg::Result<Vec<_>>>()?;
    if run.opts.format == Some(Format::Csv) {
        let q = hs.first().map(|h| h.h.len()).unwrap_or(0);
        let names: Vec<String> = (0..q).map(|j| format!("H{}", imm.m() + 1 + j)).collect();
        let mut header: Vec<&str> = imm.params.iter().map(|s| s.as_str()).collect();
        header.extend(names.iter().map(|s| s.as_str()));
        let rows = hs
            .iter()
            .map(|h| {
                let mut r = point_cols(&h.point);
                r.extend(h.h.iter().map(|x| num(*x)));
                r
            })
            .collect::<Vec<_>>();
        return Ok(csv_table(&header, &rows));
    }
    Ok(pretty(&json!({"d": d, "points": hs, "input": run.header()})))
}

/// Coordinate components of `Φ + tV` for a coordinate-frame field.
fn shifted(imm: &Immersion, field: &VariationField, t: f64) -> Result<Immersion> {
    if field.frame != FieldFrame::Coordinates {
        bail!("--fd-check needs a field in the `coordinates` frame");
    }
    let comps: Vec<Expr> =
        imm.components.iter().zip(&field.components).map(|(c, v)| c.add_expr(&v.mul_expr(&Expr::constant(t)))).collect();
    Ok(Immersion::new(imm.params.clone(), comps, imm.domain.clone())?)
}

fn first_variation_cmd(run: &Run, fd_check: bool) -> Result<String> {
    let imm = run.immersion()?;
    let d = run.degree()?;
    let field = run.field()?;
    let q = run.quadrature()?;
    let fv = first_variation(&run.manifold, imm, &field, &q, d)?;
    let mut out = json!({"d": d, "grid": grid_label(&q.orders), "first_variation": fv, "input": run.header()});
    if fd_check {
        let t = run.tol.fd_step;
        let ap = area_degree(&run.manifold, &shifted(imm, &field, t)?, d, &q)?.value;
        let am = area_degree(&run.manifold, &shifted(imm, &field, -t)?, d, &q)?.value;
        let fd = (ap - am) / (2.0 * t);
        let rel = (fd - fv).abs() / (1.0 + fv.abs());
        out["fd_check"] = json!({"t": t, "derivative": fd, "relative_error": rel, "tol": run.tol.fd, "pass": rel <= run.tol.fd});
    }
    if run.opts.format == Some(Format::Csv) {
        let mut h = vec!["d", "first_variation"];
        let mut r = vec![d.to_string(), num(fv)];
        if let Some(f) = out.get("fd_check") {
            h.extend(["fd_derivative", "relative_error"]);
            r.extend([f["derivative"].to_string(), f["relative_error"].to_string()]);
        }
        return Ok(csv_table(&h, &[r]));
    }
    Ok(pretty(&out))
}

fn el_residual_cmd(run: &Run) -> Result<String> {
    if run.label != "engel-graph" {
        bail!("el-residual needs --catalog engel-graph[:theta=…]");
    }
    let theta = fixdeg::exprcore::parse(&run.params["theta"], &["x", "y"])?;
    let c = catalog::engel_coefficients(&theta);
    let grid = run.samples(5)?;
    let rs = grid.points().iter().map(|p| catalog::engel_el_residual_with(&c, p)).collect::<fixdeg::Result<Vec<_>>>()?;
    if run.opts.format == Some(Format::Csv) {
        let rows = rs
            .iter()
            .map(|r| {
                let mut c = point_cols(&r.point);
                c.extend([num(r.h3), num(r.h4), num(r.a_perp), num(r.residual)]);
                c
            })
            .collect::<Vec<_>>();
        return Ok(csv_table(&["x", "y", "h3", "h4", "a_perp", "residual"], &rows));
    }
    let max = rs.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    Ok(pretty(&json!({"max_abs_residual": max, "points": rs, "input": run.header()})))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Verify => verify::run(&cli.opts),
        cmd => Run::load(&cli.opts).and_then(|run| {
            let text = match cmd {
                Command::DegreeScan => degree_scan_cmd(&run),
                Command::Area => area_cmd(&run),
                Command::GrLimit => gr_limit_cmd(&run),
                Command::Admissibility => admissibility_cmd(&run),
                Command::Regularity => regularity_cmd(&run),
                Command::MeanCurvature => mean_curvature_cmd(&run),
                Command::FirstVariation { fd_check } => first_variation_cmd(&run, *fd_check),
                Command::ElResidual => el_residual_cmd(&run),
                Command::Verify => unreachable!(),
            }?;
            emit(&run.opts, text)?;
            Ok(true)
        }),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(2)
        }
    }
}
